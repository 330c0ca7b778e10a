"""Exact finite team decision processes and their sampling primitives.

A team MDP couples K agents to one environment: a shared global state, one
individual action per agent, a joint transition kernel and a single scalar
team reward.  Everything downstream (the dynamic-programming operators, the
tabular learners, the finite environments) is expressed against this
representation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "STREAMS",
    "rng_stream",
    "encode_joint",
    "decode_joint",
    "num_joint_actions",
    "joint_strides",
    "TeamMdp",
    "expected_reward",
    "sample_step",
    "empirical_return",
    "save_mdp_json",
    "load_mdp_json",
    "random_team_mdp",
]

# Named randomness streams.  Every run derives its generators from
# (master_seed, stream id[, subkeys...]) so results are replayable and
# independent of scheduling.
STREAMS = {
    "env": 0,
    "exploration": 1,
    "buffer": 2,
    "operator-coin": 3,
    "eval": 4,
}


def rng_stream(master_seed: int, name: str, *subkeys: int) -> np.random.Generator:
    """Return the named generator derived from a master seed.

    Optional integer subkeys derive further independent streams (one per
    trial, per run, ...) without consuming state from the parent.
    """
    try:
        stream_id = STREAMS[name]
    except KeyError:
        raise ValueError(f"unknown stream {name!r}; expected one of {sorted(STREAMS)}") from None
    return np.random.default_rng(np.random.SeedSequence((int(master_seed), stream_id) + tuple(int(k) for k in subkeys)))


# ---------------------------------------------------------------------------
# Joint-action codec: mixed radix with agent 1 most significant.
# ---------------------------------------------------------------------------

def num_joint_actions(action_counts) -> int:
    return int(np.prod(action_counts, dtype=np.int64))


def joint_strides(action_counts) -> list[int]:
    """Stride of each agent's component in the flat joint index."""
    strides = [1] * len(action_counts)
    for k in range(len(action_counts) - 2, -1, -1):
        strides[k] = strides[k + 1] * int(action_counts[k + 1])
    return strides


def encode_joint(components, action_counts) -> int:
    """Flatten per-agent action indices into one joint index."""
    if len(components) != len(action_counts):
        raise ValueError(f"expected {len(action_counts)} components, got {len(components)}")
    flat = 0
    for a, n in zip(components, action_counts):
        if not 0 <= a < n:
            raise ValueError(f"action component {a} out of range [0, {n})")
        flat = flat * n + int(a)
    return flat


def decode_joint(flat: int, action_counts) -> tuple[int, ...]:
    """Inverse of :func:`encode_joint`."""
    total = num_joint_actions(action_counts)
    if not 0 <= flat < total:
        raise ValueError(f"flat index {flat} out of range [0, {total})")
    out = [0] * len(action_counts)
    for k in range(len(action_counts) - 1, -1, -1):
        n = int(action_counts[k])
        out[k] = flat % n
        flat //= n
    return tuple(out)


# ---------------------------------------------------------------------------
# The team MDP.
# ---------------------------------------------------------------------------

_PROB_TOL = 1e-12


@dataclass
class TeamMdp:
    """Tabular team decision process.

    transition[s, a, s'] is the kernel over next states for joint action a
    (flat index), reward_mean[s, a, s'] the mean team reward and
    reward_std[s, a, s'] the Gaussian noise scale (0 means deterministic).
    Terminal states must be absorbing with zero reward and zero noise.
    Instances are treated as immutable after construction.
    """

    action_counts: tuple[int, ...]
    transition: np.ndarray
    reward_mean: np.ndarray
    reward_std: np.ndarray
    discount: float
    initial_dist: np.ndarray
    terminal: np.ndarray
    horizon: int | None = None

    _expected_rewards: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.action_counts = tuple(int(n) for n in self.action_counts)
        if len(self.action_counts) < 1 or any(n < 1 for n in self.action_counts):
            raise ValueError("need at least one agent and one action per agent")
        self.transition = np.asarray(self.transition, dtype=float)
        self.reward_mean = np.asarray(self.reward_mean, dtype=float)
        self.reward_std = np.asarray(self.reward_std, dtype=float)
        self.initial_dist = np.asarray(self.initial_dist, dtype=float)
        self.terminal = np.asarray(self.terminal, dtype=bool)

        num_s = self.transition.shape[0]
        num_a = num_joint_actions(self.action_counts)
        shape = (num_s, num_a, num_s)
        if self.transition.shape != shape:
            raise ValueError(f"transition shape {self.transition.shape} != {shape}")
        for name, arr in (("reward_mean", self.reward_mean), ("reward_std", self.reward_std)):
            if arr.shape != shape:
                raise ValueError(f"{name} shape {arr.shape} != {shape}")
        if self.initial_dist.shape != (num_s,) or self.terminal.shape != (num_s,):
            raise ValueError("initial_dist and terminal must have one entry per state")
        if not (np.isfinite(self.transition).all() and np.isfinite(self.reward_mean).all()):
            raise ValueError("transition and reward tensors must be finite")
        if (self.transition < 0).any() or (self.reward_std < 0).any():
            raise ValueError("probabilities and noise scales must be nonnegative")
        if not 0.0 <= self.discount < 1.0:
            raise ValueError(f"discount must lie in [0, 1), got {self.discount}")

        row_sums = self.transition.sum(axis=2)
        if np.abs(row_sums - 1.0).max() > _PROB_TOL:
            bad = np.unravel_index(np.abs(row_sums - 1.0).argmax(), row_sums.shape)
            raise ValueError(f"kernel row {bad} sums to {row_sums[bad]!r}, not 1")
        if abs(self.initial_dist.sum() - 1.0) > _PROB_TOL or (self.initial_dist < 0).any():
            raise ValueError("initial distribution must be a probability vector")

        for s in np.flatnonzero(self.terminal):
            if not np.allclose(self.transition[s, :, s], 1.0, atol=_PROB_TOL):
                raise ValueError(f"terminal state {s} is not absorbing")
            if self.reward_mean[s].any() or self.reward_std[s].any():
                raise ValueError(f"terminal state {s} must have zero reward and noise")
        if self.horizon is not None and self.horizon < 1:
            raise ValueError("horizon must be positive when given")

    @property
    def num_agents(self) -> int:
        return len(self.action_counts)

    @property
    def num_states(self) -> int:
        return self.transition.shape[0]

    @property
    def num_actions(self) -> int:
        return self.transition.shape[1]

    def expected_rewards(self) -> np.ndarray:
        """Mean one-step reward for every (state, joint action), cached."""
        if self._expected_rewards is None:
            self._expected_rewards = np.einsum("xay,xay->xa", self.transition, self.reward_mean)
        return self._expected_rewards

    def encode(self, components) -> int:
        return encode_joint(components, self.action_counts)

    def decode(self, flat: int) -> tuple[int, ...]:
        return decode_joint(flat, self.action_counts)


def expected_reward(mdp: TeamMdp, state: int, action) -> float:
    """Mean reward for one (state, joint action); noise never contributes."""
    flat = action if np.isscalar(action) else mdp.encode(action)
    return float(mdp.expected_rewards()[state, flat])


def sample_step(mdp: TeamMdp, state: int, action, rng: np.random.Generator,
                step_count: int | None = None):
    """Draw one transition; returns (next_state, reward, done).

    done is true when the next state is terminal or, if step_count is given,
    when the step just taken reaches the horizon.
    """
    if mdp.terminal[state]:
        raise ValueError(f"cannot step from terminal state {state}")
    flat = action if np.isscalar(action) else mdp.encode(action)
    probs = mdp.transition[state, flat]
    nxt = int(rng.choice(mdp.num_states, p=probs))
    reward = float(mdp.reward_mean[state, flat, nxt])
    std = float(mdp.reward_std[state, flat, nxt])
    if std > 0.0:
        reward += std * float(rng.standard_normal())
    done = bool(mdp.terminal[nxt])
    if not done and mdp.horizon is not None and step_count is not None:
        done = step_count + 1 >= mdp.horizon
    return nxt, reward, done


def empirical_return(rewards, gamma: float) -> float:
    """Discounted sum of a reward sequence."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    total = 0.0
    scale = 1.0
    for r in rewards:
        total += scale * r
        scale *= gamma
    return total


# ---------------------------------------------------------------------------
# JSON round trip.  Python floats serialize via repr, which round-trips all
# finite doubles exactly.
# ---------------------------------------------------------------------------

def save_mdp_json(mdp: TeamMdp, path) -> None:
    doc = {
        "action_counts": list(mdp.action_counts),
        "num_states": mdp.num_states,
        "transition": mdp.transition.tolist(),
        "reward_mean": mdp.reward_mean.tolist(),
        "reward_std": mdp.reward_std.tolist(),
        "discount": mdp.discount,
        "initial_dist": mdp.initial_dist.tolist(),
        "terminal": mdp.terminal.astype(int).tolist(),
        "horizon": mdp.horizon,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_mdp_json(path) -> TeamMdp:
    with open(path) as fh:
        doc = json.load(fh)
    return TeamMdp(
        action_counts=tuple(doc["action_counts"]),
        transition=np.array(doc["transition"], dtype=float),
        reward_mean=np.array(doc["reward_mean"], dtype=float),
        reward_std=np.array(doc["reward_std"], dtype=float),
        discount=float(doc["discount"]),
        initial_dist=np.array(doc["initial_dist"], dtype=float),
        terminal=np.array(doc["terminal"], dtype=bool),
        horizon=doc.get("horizon"),
    )


def random_team_mdp(rng: np.random.Generator, num_states: int = 4,
                    action_counts=(3, 3), gamma: float = 0.5) -> TeamMdp:
    """Dense random team MDP with deterministic rewards in [0, 1).

    Kernels are normalized uniform draws, there are no terminal states and
    the initial distribution is uniform.  Handy for randomized sweeps of the
    dynamic-programming machinery.
    """
    num_a = num_joint_actions(action_counts)
    kernel = rng.uniform(0.1, 1.0, size=(num_states, num_a, num_states))
    kernel /= kernel.sum(axis=2, keepdims=True)
    rewards = rng.uniform(0.0, 1.0, size=(num_states, num_a, num_states))
    return TeamMdp(
        action_counts=tuple(action_counts),
        transition=kernel,
        reward_mean=rewards,
        reward_std=np.zeros_like(rewards),
        discount=gamma,
        initial_dist=np.full(num_states, 1.0 / num_states),
        terminal=np.zeros(num_states, dtype=bool),
    )
