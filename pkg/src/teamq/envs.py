"""The toolkit's environments behind one episodic interface.

Every environment exposes: num_agents, action_counts, observation_spaces
(per-agent lists of observation keys, or None when the state is continuous),
reset(rng) -> per-agent observations, step(actions, rng) -> (observations,
reward, done, terminal), is_win(), and clone(noise=...) for noise-suppressed
greedy evaluation.  `done` ends the episode; `terminal` is true only when the
process genuinely ends (a win event, a capture, an absorbing state), not when
the step limit truncates the episode -- learners bootstrap through
truncations but not through terminals.  The two finite environments also
convert to exact TeamMdp instances so the dynamic-programming engine can
certify learner results.
"""

from __future__ import annotations

import math

import numpy as np

from .mdp import TeamMdp, num_joint_actions

__all__ = [
    "COORDINATION_PAYOFF",
    "NASH_TRAP_PAYOFF",
    "MatrixGameEnv",
    "matrix_env",
    "nash_trap_env",
    "matrix_game_mdp",
    "ButtonGridEnv",
    "PUSH",
    "NO_PUSH",
    "STAY",
    "LEFT",
    "RIGHT",
    "button_grid_mdp",
    "bull_policy",
    "CowboyBullEnv",
    "TabularMdpEnv",
    "builtin_env",
    "builtin_mdp",
    "BUILTIN_ENVS",
    "BUILTIN_MDPS",
]


# ---------------------------------------------------------------------------
# One-shot matrix games.
# ---------------------------------------------------------------------------

# Two-player coordination payoff with two optimal joint actions; greedy
# miscoordination between them earns 0 or 1 instead of 2.
COORDINATION_PAYOFF = np.array([[0.0, 2.0, 0.0], [0.0, 1.0, 2.0]])

# Two-action game whose (first, first) joint action is a self-consistent but
# suboptimal equilibrium: unilateral deviations from it only ever hurt.
NASH_TRAP_PAYOFF = np.array([[0.0, -1.0], [-1.0, 1.0]])


class MatrixGameEnv:
    """One-step episode: both agents observe a single state, reward = payoff."""

    def __init__(self, payoff=COORDINATION_PAYOFF):
        self.payoff = np.asarray(payoff, dtype=float)
        self.num_agents = 2
        self.action_counts = tuple(self.payoff.shape)
        self.observation_spaces = [[0], [0]]
        self._done = True
        self._won = False

    def clone(self, noise: bool = True) -> "MatrixGameEnv":
        return MatrixGameEnv(self.payoff)

    def reset(self, rng=None):
        self._done = False
        self._won = False
        return (0, 0)

    def step(self, actions, rng=None):
        if self._done:
            raise RuntimeError("step() called on a finished episode")
        a1, a2 = actions
        reward = float(self.payoff[a1, a2])
        self._done = True
        self._won = reward == float(self.payoff.max())
        return (0, 0), reward, True, True

    def is_win(self) -> bool:
        return self._won

    def to_tabular(self, gamma: float = 0.9) -> TeamMdp:
        return matrix_game_mdp(self.payoff, gamma)


def matrix_env() -> MatrixGameEnv:
    return MatrixGameEnv(COORDINATION_PAYOFF)


def nash_trap_env() -> MatrixGameEnv:
    return MatrixGameEnv(NASH_TRAP_PAYOFF)


def matrix_game_mdp(payoff, gamma: float = 0.9) -> TeamMdp:
    """One-shot game as a two-state MDP: start state plus an absorbing end.

    The joint optimum then equals the payoff table regardless of discount.
    """
    payoff = np.asarray(payoff, dtype=float)
    counts = tuple(payoff.shape)
    num_a = num_joint_actions(counts)
    transition = np.zeros((2, num_a, 2))
    transition[:, :, 1] = 1.0
    reward_mean = np.zeros((2, num_a, 2))
    reward_mean[0, :, 1] = payoff.reshape(-1)
    return TeamMdp(
        action_counts=counts,
        transition=transition,
        reward_mean=reward_mean,
        reward_std=np.zeros((2, num_a, 2)),
        discount=gamma,
        initial_dist=np.array([1.0, 0.0]),
        terminal=np.array([False, True]),
        horizon=1,
    )


# ---------------------------------------------------------------------------
# Stochastic button grid.
# ---------------------------------------------------------------------------

PUSH, NO_PUSH = 0, 1
STAY, LEFT, RIGHT = 0, 1, 2


def _button_dynamics(pos: int, a1: int, a2: int):
    """Pure event rules; returns (mean reward, noise std, next position, won).

    Agent 2 walks a 4-slot line (0 = leftmost).  Stay at slot 0 pays +10 if
    agent 1 pushes and -30 if it does not; pushing during an actual left move
    pays -30; walking into either edge blocks the move and pays pure noise
    with std 3.  All event rewards carry unit-std noise.  Steps matching no
    rule pay exactly 0.
    """
    moved_left = a2 == LEFT and pos > 0
    bumped = (a2 == LEFT and pos == 0) or (a2 == RIGHT and pos == 3)
    if pos == 0 and a2 == STAY and a1 == PUSH:
        return 10.0, 1.0, pos, True
    if a1 == PUSH and moved_left:
        return -30.0, 1.0, pos - 1, False
    if pos == 0 and a2 == STAY and a1 == NO_PUSH:
        return -30.0, 1.0, pos, False
    if bumped:
        return 0.0, 3.0, pos, False
    if moved_left:
        return 0.0, 0.0, pos - 1, False
    if a2 == RIGHT:
        return 0.0, 0.0, pos + 1, False
    return 0.0, 0.0, pos, False


class ButtonGridEnv:
    """Two agents, four slots, five steps, heavy-tailed edge noise.

    Agent 1 (push / no-push) is blind to the grid except for a leftmost flag;
    agent 2 (stay / left / right) starts at the far right.  Observations also
    carry whether enough steps remain for agent 2 to reach the leftmost slot
    and still trigger the reward.
    """

    HORIZON = 5

    def __init__(self, noise: bool = True):
        self.noise = noise
        self.num_agents = 2
        self.action_counts = (2, 3)
        self.observation_spaces = [
            [(leftmost, enough) for leftmost in (0, 1) for enough in (0, 1)],
            [(pos, enough) for pos in range(4) for enough in (0, 1)],
        ]
        self._pos = 3
        self._t = 0
        self._done = True
        self._won = False

    def clone(self, noise: bool = True) -> "ButtonGridEnv":
        return ButtonGridEnv(noise=noise)

    def _observe(self):
        remaining = self.HORIZON - self._t
        enough = int(remaining > self._pos)
        return ((int(self._pos == 0), enough), (self._pos, enough))

    def reset(self, rng=None):
        self._pos = 3
        self._t = 0
        self._done = False
        self._won = False
        return self._observe()

    def step(self, actions, rng):
        if self._done:
            raise RuntimeError("step() called on a finished episode")
        a1, a2 = actions
        mean, std, nxt, won = _button_dynamics(self._pos, a1, a2)
        reward = mean
        if self.noise and std > 0.0:
            reward += std * float(rng.standard_normal())
        self._pos = nxt
        self._t += 1
        self._won = self._won or won
        self._done = won or self._t >= self.HORIZON
        return self._observe(), reward, self._done, won

    def is_win(self) -> bool:
        return self._won

    def to_tabular(self, gamma: float = 0.9) -> TeamMdp:
        return button_grid_mdp(gamma)


def button_grid_mdp(gamma: float = 0.9) -> TeamMdp:
    """Exact MDP of the button grid: states (position, step) plus terminal.

    4 positions x 5 steps + 1 absorbing state = 21 states.  Positions evolve
    deterministically; reward noise is carried in the noise tensor.
    """
    horizon = ButtonGridEnv.HORIZON
    num_s = 4 * horizon + 1
    term = num_s - 1

    def idx(pos, t):
        return term if t >= horizon else pos + 4 * t

    counts = (2, 3)
    num_a = num_joint_actions(counts)
    transition = np.zeros((num_s, num_a, num_s))
    reward_mean = np.zeros((num_s, num_a, num_s))
    reward_std = np.zeros((num_s, num_a, num_s))
    for t in range(horizon):
        for pos in range(4):
            s = idx(pos, t)
            for a1 in range(2):
                for a2 in range(3):
                    a = a1 * 3 + a2
                    mean, std, nxt, won = _button_dynamics(pos, a1, a2)
                    s2 = term if won else idx(nxt, t + 1)
                    transition[s, a, s2] = 1.0
                    reward_mean[s, a, s2] = mean
                    reward_std[s, a, s2] = std
    transition[term, :, term] = 1.0
    initial = np.zeros(num_s)
    initial[idx(3, 0)] = 1.0
    terminal = np.zeros(num_s, dtype=bool)
    terminal[term] = True
    return TeamMdp(
        action_counts=counts,
        transition=transition,
        reward_mean=reward_mean,
        reward_std=reward_std,
        discount=gamma,
        initial_dist=initial,
        terminal=terminal,
        horizon=horizon,
    )


# ---------------------------------------------------------------------------
# Cowboy-and-bull pursuit on the open plane.
# ---------------------------------------------------------------------------

def _random_unit(rng):
    ang = rng.uniform(0.0, 2.0 * math.pi)
    return np.array([math.cos(ang), math.sin(ang)])


def bull_policy(bull_pos, cowboy_positions, rng, bull_speed: float = 1.2,
                detect_radius: float = 10.0, escape_angle_deg: float = 108.0,
                distance_gap: float = 5.0, forage_still_prob: float = 0.9,
                scared_still_prob: float = 0.7, small_move_scale: float = 0.5):
    """Handcrafted evasion policy; returns the bull's displacement vector.

    Far from every pursuer the bull forages (mostly still, occasional small
    wander).  Once detected it escapes through the widest angular gap between
    pursuers when one is wide enough, otherwise runs from the closest pursuer
    when that one is much nearer than the farthest, and otherwise freezes or
    bolts at random.  Pursuers sitting exactly on the bull get a random
    bearing, keeping every branch well defined.
    """
    bull_pos = np.asarray(bull_pos, dtype=float)
    cowboys = np.asarray(cowboy_positions, dtype=float)
    offsets = cowboys - bull_pos
    dists = np.linalg.norm(offsets, axis=1)

    if (dists > detect_radius).all():
        if rng.random() < forage_still_prob:
            return np.zeros(2)
        return small_move_scale * bull_speed * _random_unit(rng)

    bearings = np.empty(len(offsets))
    for i, (off, d) in enumerate(zip(offsets, dists)):
        bearings[i] = rng.uniform(0.0, 2.0 * math.pi) if d < 1e-12 else math.atan2(off[1], off[0])
    order = np.argsort(bearings)
    sorted_b = bearings[order]
    gaps = np.diff(np.append(sorted_b, sorted_b[0] + 2.0 * math.pi))
    widest = int(np.argmax(gaps))
    if gaps[widest] > math.radians(escape_angle_deg):
        ang = sorted_b[widest] + gaps[widest] / 2.0
        return bull_speed * np.array([math.cos(ang), math.sin(ang)])

    if dists.max() - dists.min() > distance_gap:
        away = -offsets[int(np.argmin(dists))]
        norm = np.linalg.norm(away)
        unit = _random_unit(rng) if norm < 1e-12 else away / norm
        return bull_speed * unit

    if rng.random() < scared_still_prob:
        return np.zeros(2)
    return bull_speed * _random_unit(rng)


class CowboyBullEnv:
    """Four cowboys herd a faster bull on the unbounded plane.

    Cowboys pick one of five moves (four cardinal steps or stay); the bull
    answers with its fixed evasion policy at 1.2x cowboy speed.  Capture
    (all cowboys within the capture radius) pays +1 and ends the episode;
    every moving cowboy costs 1/300 per step.  Episodes last at most 75
    steps.  State is continuous, so there is no tabular conversion; learners
    observe the raw global state.
    """

    HORIZON = 75
    MOVES = np.array([[0.0, 1.0], [0.0, -1.0], [-1.0, 0.0], [1.0, 0.0], [0.0, 0.0]])
    UP, DOWN, MOVE_LEFT, MOVE_RIGHT, HOLD = range(5)

    def __init__(self, cowboy_speed: float = 1.0, speed_ratio: float = 1.2,
                 capture_radius: float = 2.0, spawn_side: float = 30.0,
                 spawn_center_dist: float = 20.0, noise: bool = True):
        self.cowboy_speed = cowboy_speed
        self.speed_ratio = speed_ratio
        self.bull_speed = speed_ratio * cowboy_speed
        self.capture_radius = capture_radius
        self.spawn_side = spawn_side
        self.spawn_center_dist = spawn_center_dist
        self.move_penalty = 1.0 / 300.0
        self.num_agents = 4
        self.action_counts = (5, 5, 5, 5)
        self.observation_spaces = None  # continuous state
        self.cowboys = np.zeros((4, 2))
        self.bull = np.zeros(2)
        self._t = 0
        self._done = True
        self._won = False

    def clone(self, noise: bool = True) -> "CowboyBullEnv":
        return CowboyBullEnv(self.cowboy_speed, self.speed_ratio, self.capture_radius,
                             self.spawn_side, self.spawn_center_dist, noise=noise)

    def reset(self, rng=None):
        self.bull = np.zeros(2)
        center = np.array([self.spawn_center_dist, 0.0])
        half = self.spawn_side / 2.0
        self.cowboys = center + half * np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]])
        self._t = 0
        self._done = False
        self._won = False
        return self._observe()

    def _observe(self):
        state = (tuple(map(tuple, self.cowboys.tolist())), tuple(self.bull.tolist()))
        return tuple(state for _ in range(self.num_agents))

    def step(self, actions, rng):
        if self._done:
            raise RuntimeError("step() called on a finished episode")
        actions = tuple(int(a) for a in actions)
        movers = sum(1 for a in actions if a != self.HOLD)
        self.cowboys = self.cowboys + self.cowboy_speed * self.MOVES[list(actions)]
        self.bull = self.bull + bull_policy(self.bull, self.cowboys, rng, bull_speed=self.bull_speed)
        captured = bool((np.linalg.norm(self.cowboys - self.bull, axis=1) <= self.capture_radius).all())
        reward = -movers * self.move_penalty + (1.0 if captured else 0.0)
        self._t += 1
        self._won = self._won or captured
        self._done = captured or self._t >= self.HORIZON
        return self._observe(), reward, self._done, captured

    def is_win(self) -> bool:
        return self._won

    def trajectory_record(self):
        """Current positions as plain lists, for JSON export."""
        return {"t": self._t, "cowboys": self.cowboys.tolist(), "bull": self.bull.tolist()}


# ---------------------------------------------------------------------------
# Generic wrapper and registries.
# ---------------------------------------------------------------------------

class TabularMdpEnv:
    """Episodic wrapper over a TeamMdp with fully observable state."""

    def __init__(self, mdp: TeamMdp, noise: bool = True, win_reward: float | None = None):
        self.mdp = mdp
        self.noise = noise
        self.win_reward = win_reward
        self.num_agents = mdp.num_agents
        self.action_counts = mdp.action_counts
        self.observation_spaces = [list(range(mdp.num_states)) for _ in range(mdp.num_agents)]
        self._state = 0
        self._t = 0
        self._done = True
        self._won = False

    def clone(self, noise: bool = True) -> "TabularMdpEnv":
        return TabularMdpEnv(self.mdp, noise=noise, win_reward=self.win_reward)

    def reset(self, rng):
        self._state = int(rng.choice(self.mdp.num_states, p=self.mdp.initial_dist))
        self._t = 0
        self._done = False
        self._won = False
        return tuple(self._state for _ in range(self.num_agents))

    def step(self, actions, rng):
        if self._done:
            raise RuntimeError("step() called on a finished episode")
        flat = self.mdp.encode(actions)
        probs = self.mdp.transition[self._state, flat]
        nxt = int(rng.choice(self.mdp.num_states, p=probs))
        reward = float(self.mdp.reward_mean[self._state, flat, nxt])
        std = float(self.mdp.reward_std[self._state, flat, nxt])
        if self.noise and std > 0.0:
            reward += std * float(rng.standard_normal())
        if self.win_reward is not None and self.mdp.reward_mean[self._state, flat, nxt] >= self.win_reward:
            self._won = True
        terminal = bool(self.mdp.terminal[nxt])
        self._state = nxt
        self._t += 1
        self._done = terminal
        if self.mdp.horizon is not None:
            self._done = self._done or self._t >= self.mdp.horizon
        return tuple(self._state for _ in range(self.num_agents)), reward, self._done, terminal

    def is_win(self) -> bool:
        return self._won


BUILTIN_ENVS = {
    "matrix": matrix_env,
    "nashtrap": nash_trap_env,
    "buttongrid": ButtonGridEnv,
    "cowboy": CowboyBullEnv,
}

BUILTIN_MDPS = {
    "matrix": lambda gamma=0.9: matrix_game_mdp(COORDINATION_PAYOFF, gamma),
    "nashtrap": lambda gamma=0.9: matrix_game_mdp(NASH_TRAP_PAYOFF, gamma),
    "buttongrid": button_grid_mdp,
}


def builtin_env(name: str):
    try:
        return BUILTIN_ENVS[name]()
    except KeyError:
        raise ValueError(f"unknown environment {name!r}; expected one of {sorted(BUILTIN_ENVS)}") from None


def builtin_mdp(name: str, gamma: float = 0.9) -> TeamMdp:
    try:
        return BUILTIN_MDPS[name](gamma)
    except KeyError:
        raise ValueError(
            f"no tabular form for {name!r}; expected one of {sorted(BUILTIN_MDPS)}") from None
