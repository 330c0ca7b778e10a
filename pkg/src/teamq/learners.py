"""Tabular stochastic-approximation learners over observation-keyed tables.

Implements the two-estimate team learner (biased/optimistic tables gated by a
teammates-acted-greedily condition, unbiased tables for bootstrapping), its
single-table deterministic variant, and the independent / distributed /
hysteretic Q-learning baselines, together with the replay buffer, exploration
schedules, the training loop and greedy evaluation.

Tables are plain Python lists keyed through a dict of observation keys; the
per-transition update paths deliberately avoid numpy so that multi-hundred-
thousand-epoch tabular runs stay cheap.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .mdp import STREAMS, empirical_return, rng_stream

__all__ = [
    "ALGORITHMS",
    "ObsTable",
    "Exploration",
    "LearnerConfig",
    "ReplayBuffer",
    "TabularLearner",
    "select_actions",
    "play_episode",
    "evaluate_greedy",
    "RunRecord",
    "train",
]

ALGORITHMS = ("ltql", "ltql_det", "iql", "distq", "hystq")


class ObsTable:
    """Action values for one agent, keyed by observation."""

    __slots__ = ("index", "rows", "num_actions")

    def __init__(self, obs_keys, num_actions: int):
        self.index = {key: i for i, key in enumerate(obs_keys)}
        self.num_actions = num_actions
        self.rows = [[0.0] * num_actions for _ in range(len(self.index))]

    def copy(self) -> "ObsTable":
        dup = ObsTable.__new__(ObsTable)
        dup.index = self.index
        dup.num_actions = self.num_actions
        dup.rows = [row[:] for row in self.rows]
        return dup

    def row(self, obs):
        return self.rows[self.index[obs]]

    def lookup(self, obs, action: int) -> float:
        return self.rows[self.index[obs]][action]

    def greedy(self, obs) -> int:
        row = self.rows[self.index[obs]]
        return row.index(max(row))

    def as_dict(self):
        return {key: self.rows[i][:] for key, i in self.index.items()}


@dataclass
class Exploration:
    """Per-epoch behavior-policy schedule.

    kind "uniform" ignores the tables; "epsilon" mixes uniform actions with
    probability max(floor, start * (1 - epoch / decay_epochs)); "boltzmann"
    softmax-samples with a temperature following the same decayed form.
    """

    kind: str = "epsilon"
    start: float = 1.0
    floor: float = 0.05
    decay_epochs: float = 2e5

    def value(self, epoch: int) -> float:
        return max(self.floor, self.start * (1.0 - epoch / self.decay_epochs))


@dataclass
class LearnerConfig:
    algorithm: str = "ltql"
    mu: float = 0.1
    alpha: float = 1.0
    small_step_ratio: float = 0.4
    buffer_capacity: int = 0  # 0 = online, consume each epoch's transitions in order
    batch_size: int = 1
    updates_per_epoch: int = 1
    games_per_epoch: int = 1
    target_period: int = 0  # epochs between target snapshots; 0 = no targets
    exploration: Exploration = field(default_factory=Exploration)
    gamma: float = 0.9

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        if self.mu < 0 or self.alpha < 0 or not 0.0 <= self.small_step_ratio <= 1.0:
            raise ValueError("step sizes must be nonnegative and small_step_ratio in [0, 1]")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")


class ReplayBuffer:
    """Ring buffer of transitions with uniform sampling (with replacement)."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._items = []
        self._cursor = 0

    def __len__(self):
        return len(self._items)

    def append(self, item):
        if len(self._items) < self.capacity:
            self._items.append(item)
        else:
            self._items[self._cursor] = item
            self._cursor = (self._cursor + 1) % self.capacity

    def contents(self):
        # Oldest-first view of the ring.
        return self._items[self._cursor:] + self._items[:self._cursor]

    def sample(self, rng: np.random.Generator, size: int):
        if not self._items:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(0, len(self._items), size=size)
        return [self._items[i] for i in idx]


# ---------------------------------------------------------------------------
# Learner state and update rules.
#
# Transitions are tuples (obs, actions, reward, next_obs, terminal) where obs
# and next_obs hold one observation key per agent and terminal marks a true
# process end (bootstrap targets drop their continuation term on terminals
# but keep it when the step limit merely truncated the episode).  Batch
# updates accumulate increments computed against the tables as they stood at
# the start of the batch and apply them in one sweep.
# ---------------------------------------------------------------------------

def _is_greedy(row, action: int) -> bool:
    return row[action] == max(row)


class TabularLearner:
    """Mutable per-run learner state for one algorithm."""

    def __init__(self, cfg: LearnerConfig, observation_spaces, action_counts):
        if observation_spaces is None:
            raise ValueError("tabular learners need enumerable observation spaces")
        self.cfg = cfg
        self.action_counts = tuple(action_counts)
        self.num_agents = len(action_counts)
        fresh = lambda: [ObsTable(keys, n) for keys, n in zip(observation_spaces, action_counts)]
        if cfg.algorithm == "ltql":
            self.q_b = fresh()
            self.q_u = fresh()
        else:
            self.q = fresh()
        self.refresh_targets()

    def refresh_targets(self):
        if self.cfg.target_period <= 0:
            # No snapshots: conditions and bootstraps read the live tables.
            if self.cfg.algorithm == "ltql":
                self.q_b_target = self.q_b
                self.q_u_target = self.q_u
            else:
                self.q_target = self.q
            return
        if self.cfg.algorithm == "ltql":
            self.q_b_target = [t.copy() for t in self.q_b]
            self.q_u_target = [t.copy() for t in self.q_u]
        else:
            self.q_target = [t.copy() for t in self.q]

    @property
    def acting_tables(self):
        """Tables driving the behavior policy (optimistic side for ltql)."""
        return self.q_b if self.cfg.algorithm == "ltql" else self.q

    @property
    def value_tables(self):
        """Tables holding the value estimates used for greedy evaluation."""
        return self.q_u if self.cfg.algorithm == "ltql" else self.q

    def final_tables(self):
        if self.cfg.algorithm == "ltql":
            return {"q_b": [t.as_dict() for t in self.q_b], "q_u": [t.as_dict() for t in self.q_u]}
        return {"q": [t.as_dict() for t in self.q]}

    # -- updates ----------------------------------------------------------

    def update_batch(self, transitions):
        if self.cfg.algorithm == "ltql":
            self._update_ltql(transitions)
        elif self.cfg.algorithm == "ltql_det":
            self._update_ltql_det(transitions)
        else:
            self._update_single(transitions)

    def _update_ltql(self, transitions):
        cfg = self.cfg
        gamma, mu, alpha = cfg.gamma, cfg.mu, cfg.alpha
        q_b, q_u, q_bt, q_ut = self.q_b, self.q_u, self.q_b_target, self.q_u_target
        pending = []
        for obs, acts, reward, nobs, terminal in transitions:
            greedy = [_is_greedy(q_bt[n].row(obs[n]), acts[n]) for n in range(self.num_agents)]
            for k in range(self.num_agents):
                row_b = q_b[k].row(obs[k])
                v_b = row_b[acts[k]]
                y = reward if terminal else reward + gamma * max(q_ut[k].row(nobs[k]))
                if all(greedy[n] for n in range(self.num_agents) if n != k):
                    pending.append((row_b, acts[k], mu * (y - v_b)))
                    row_u = q_u[k].row(obs[k])
                    pending.append((row_u, acts[k], mu * (y - row_u[acts[k]])))
                if y > v_b:
                    pending.append((row_b, acts[k], mu * alpha * (y - v_b)))
        for row, a, delta in pending:
            row[a] += delta

    def _update_ltql_det(self, transitions):
        cfg = self.cfg
        gamma, mu, alpha = cfg.gamma, cfg.mu, cfg.alpha
        q, q_t = self.q, self.q_target
        pending = []
        for obs, acts, reward, nobs, terminal in transitions:
            greedy = [_is_greedy(q_t[n].row(obs[n]), acts[n]) for n in range(self.num_agents)]
            for k in range(self.num_agents):
                row = q[k].row(obs[k])
                v = row[acts[k]]
                y = reward if terminal else reward + gamma * max(q[k].row(nobs[k]))
                if all(greedy[n] for n in range(self.num_agents) if n != k):
                    pending.append((row, acts[k], mu * (y - v)))
                elif y > v:
                    pending.append((row, acts[k], mu * alpha * (y - v)))
        for row, a, delta in pending:
            row[a] += delta

    def _update_single(self, transitions):
        cfg = self.cfg
        gamma, mu = cfg.gamma, cfg.mu
        algo = cfg.algorithm
        small = mu * cfg.small_step_ratio
        q = self.q
        pending = []
        for obs, acts, reward, nobs, terminal in transitions:
            for k in range(self.num_agents):
                row = q[k].row(obs[k])
                v = row[acts[k]]
                y = reward if terminal else reward + gamma * max(q[k].row(nobs[k]))
                err = y - v
                if algo == "iql":
                    pending.append((row, acts[k], mu * err))
                elif algo == "distq":
                    if err > 0.0:
                        pending.append((row, acts[k], mu * err))
                else:  # hystq
                    pending.append((row, acts[k], (mu if err > 0.0 else small) * err))
        for row, a, delta in pending:
            row[a] += delta


# ---------------------------------------------------------------------------
# Action selection, rollouts, evaluation.
# ---------------------------------------------------------------------------

def select_actions(tables, observations, exploration: Exploration, epoch: int,
                   rng: np.random.Generator, action_counts):
    """Per-agent independent behavior actions; greedy ties go lowest-index."""
    kind = exploration.kind
    actions = []
    if kind == "uniform":
        for n in action_counts:
            actions.append(int(rng.integers(n)))
        return tuple(actions)
    if kind == "epsilon":
        eps = exploration.value(epoch)
        for k, n in enumerate(action_counts):
            if rng.random() < eps:
                actions.append(int(rng.integers(n)))
            else:
                actions.append(tables[k].greedy(observations[k]))
        return tuple(actions)
    if kind == "boltzmann":
        temp = max(exploration.value(epoch), 1e-8)
        for k in range(len(action_counts)):
            row = np.array(tables[k].row(observations[k]))
            logits = (row - row.max()) / temp
            probs = np.exp(logits)
            probs /= probs.sum()
            actions.append(int(rng.choice(len(row), p=probs)))
        return tuple(actions)
    raise ValueError(f"unknown exploration kind {kind!r}")


def play_episode(env, tables, exploration, epoch, rng, action_counts):
    """Roll one episode with the behavior policy; returns its transitions."""
    obs = env.reset(rng)
    transitions = []
    done = False
    while not done:
        acts = select_actions(tables, obs, exploration, epoch, rng, action_counts)
        nobs, reward, done, terminal = env.step(acts, rng)
        transitions.append((obs, acts, reward, nobs, terminal))
        obs = nobs
    return transitions


def evaluate_greedy(env, tables, num_games: int, gamma: float, rng: np.random.Generator):
    """Mean discounted return and win fraction of greedy play, noise-free.

    Reward noise is suppressed by evaluating on a noise-free clone, so the
    returns reflect mean rewards only.
    """
    if num_games < 1:
        raise ValueError("num_games must be at least 1")
    eval_env = env.clone(noise=False)
    total = 0.0
    wins = 0
    for _ in range(num_games):
        obs = eval_env.reset(rng)
        rewards = []
        done = False
        while not done:
            acts = tuple(tables[k].greedy(obs[k]) for k in range(len(tables)))
            obs, reward, done, _ = eval_env.step(acts, rng)
            rewards.append(reward)
        total += empirical_return(rewards, gamma)
        wins += 1 if eval_env.is_win() else 0
    return total / num_games, wins / num_games


# ---------------------------------------------------------------------------
# The training loop.
# ---------------------------------------------------------------------------

@dataclass
class RunRecord:
    """Seeded training trace: evaluation rows plus final tables."""

    algorithm: str
    seed: int
    rows: list  # (epoch, avg_test_return, win_rate)
    final_tables: dict
    wall_clock: float
    streams: dict


def train(env, cfg: LearnerConfig, seed: int, epochs: int,
          eval_every: int = 0, eval_games: int = 50) -> RunRecord:
    """Run one seeded training job; fully deterministic given (cfg, seed).

    Each epoch collects games_per_epoch episodes, then either consumes the
    fresh transitions in order (online mode, buffer_capacity 0) or pushes
    them to the replay buffer and applies updates_per_epoch sampled batches.
    Evaluation rows are recorded every eval_every epochs (0 = final only).
    """
    started = time.perf_counter()
    env_rng = rng_stream(seed, "env")
    expl_rng = rng_stream(seed, "exploration")
    buffer_rng = rng_stream(seed, "buffer")
    eval_rng = rng_stream(seed, "eval")

    learner = TabularLearner(cfg, env.observation_spaces, env.action_counts)
    buffer = ReplayBuffer(cfg.buffer_capacity) if cfg.buffer_capacity > 0 else None

    def roll(epoch):
        obs = env.reset(env_rng)
        out = []
        done = False
        while not done:
            acts = select_actions(learner.acting_tables, obs, cfg.exploration, epoch,
                                  expl_rng, env.action_counts)
            nobs, reward, done, terminal = env.step(acts, env_rng)
            out.append((obs, acts, reward, nobs, terminal))
            obs = nobs
        return out

    rows = []
    for epoch in range(epochs):
        fresh = []
        for _ in range(cfg.games_per_epoch):
            fresh.extend(roll(epoch))
        if buffer is None:
            for tr in fresh:
                learner.update_batch((tr,))
        else:
            for tr in fresh:
                buffer.append(tr)
            for _ in range(cfg.updates_per_epoch):
                learner.update_batch(buffer.sample(buffer_rng, cfg.batch_size))
        if cfg.target_period > 0 and (epoch + 1) % cfg.target_period == 0:
            learner.refresh_targets()
        if eval_every > 0 and (epoch % eval_every == 0 or epoch == epochs - 1):
            ret, win = evaluate_greedy(env, learner.value_tables, eval_games, cfg.gamma, eval_rng)
            rows.append((epoch, ret, win))
    if not rows:
        ret, win = evaluate_greedy(env, learner.value_tables, eval_games, cfg.gamma, eval_rng)
        rows.append((epochs - 1, ret, win))

    return RunRecord(
        algorithm=cfg.algorithm,
        seed=seed,
        rows=rows,
        final_tables=learner.final_tables(),
        wall_clock=time.perf_counter() - started,
        streams={"master_seed": seed, "streams": dict(STREAMS)},
    )
