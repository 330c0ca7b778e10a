"""Exact dynamic programming for factored team value functions.

Provides joint value iteration, extraction of per-agent factored tables from
an optimal joint table, the two backup operators on factored tables (the
greedy-teammate backup and the monotone optimistic backup), their random
mixture, and the consistency checks that certify whether a factored solution
is team optimal or merely a self-consistent (Nash) fixed point.

A factored table set ("fq") is a list of K arrays, one per agent, of shape
(num_states, num_actions_of_agent).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .mdp import TeamMdp, joint_strides

__all__ = [
    "ConvergenceError",
    "zeros_factored",
    "constant_factored",
    "copy_factored",
    "factored_sup_distance",
    "solve_joint_optimal",
    "teammate_max_envelope",
    "count_optimal_policies",
    "enumerate_optimal_policies",
    "extract_factored_qstar",
    "greedy_policy",
    "greedy_team_backup",
    "optimistic_backup",
    "mixed_backup",
    "randomized_iteration",
    "OperatorTrace",
    "FactorizationReport",
    "check_factorization",
    "GapReport",
    "optimality_gap",
]

TIE_TOL = 1e-9  # absolute tolerance for detecting tied maximizers


class ConvergenceError(RuntimeError):
    """Value iteration failed to converge within the iteration cap."""

    def __init__(self, iterations: int, residual: float):
        super().__init__(f"no convergence after {iterations} iterations (residual {residual:.3e})")
        self.iterations = iterations
        self.residual = residual


# ---------------------------------------------------------------------------
# Factored-table helpers.
# ---------------------------------------------------------------------------

def zeros_factored(mdp: TeamMdp) -> list[np.ndarray]:
    return [np.zeros((mdp.num_states, n)) for n in mdp.action_counts]


def constant_factored(mdp: TeamMdp, value: float) -> list[np.ndarray]:
    return [np.full((mdp.num_states, n), float(value)) for n in mdp.action_counts]


def copy_factored(fq) -> list[np.ndarray]:
    return [t.copy() for t in fq]


def factored_sup_distance(fq_a, fq_b) -> float:
    return max(float(np.abs(a - b).max()) for a, b in zip(fq_a, fq_b))


def _argmax_set(row: np.ndarray, tol: float = TIE_TOL) -> np.ndarray:
    return np.flatnonzero(row >= row.max() - tol)


# ---------------------------------------------------------------------------
# Joint value iteration.
# ---------------------------------------------------------------------------

def solve_joint_optimal(mdp: TeamMdp, tol: float = 1e-12, max_iters: int = 10**6) -> np.ndarray:
    """Optimal joint state-action values by value iteration.

    Iterates the joint Bellman optimality backup until the sup-norm update
    drops below tol * (1 - discount); the result then satisfies the joint
    fixed-point equation within tol.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    gamma = mdp.discount
    rbar = mdp.expected_rewards()
    kernel = mdp.transition
    q = np.zeros_like(rbar)
    threshold = tol * (1.0 - gamma)
    residual = np.inf
    for _ in range(max_iters):
        q_new = rbar + gamma * (kernel @ q.max(axis=1))
        residual = float(np.abs(q_new - q).max())
        q = q_new
        if residual < threshold:
            return q
    raise ConvergenceError(max_iters, residual)


def teammate_max_envelope(mdp: TeamMdp, qjoint: np.ndarray) -> list[np.ndarray]:
    """Per-agent upper envelope: best joint value when teammates cooperate.

    Entry k gives max over all teammate actions of qjoint(s, a^k, a^-k),
    the ceiling any factored table can reach without overestimating.
    """
    grid_shape = (mdp.num_states, *mdp.action_counts)
    grid = qjoint.reshape(grid_shape)
    out = []
    for k in range(mdp.num_agents):
        axes = tuple(ax for ax in range(1, mdp.num_agents + 1) if ax != k + 1)
        out.append(grid.max(axis=axes))
    return out


# ---------------------------------------------------------------------------
# Optimal deterministic policies and factored extraction.
# ---------------------------------------------------------------------------

def count_optimal_policies(mdp: TeamMdp, qjoint: np.ndarray, tol: float = TIE_TOL) -> int:
    """Number of deterministic joint policies greedy with respect to qjoint."""
    total = 1
    for s in range(mdp.num_states):
        if not mdp.terminal[s]:
            total *= len(_argmax_set(qjoint[s], tol))
    return total


def enumerate_optimal_policies(mdp: TeamMdp, qjoint: np.ndarray, tol: float = TIE_TOL,
                               limit: int = 10000, truncate: bool = False) -> list[np.ndarray]:
    """Deterministic joint policies greedy with respect to qjoint.

    A policy is an array of flat joint actions, one per state.  Terminal
    states carry no decision and are pinned to action 0.  The Cartesian
    product over per-state maximizer sets can explode when many actions tie;
    beyond `limit` policies enumeration either stops with an error or, with
    truncate, returns the lexicographically first `limit` of them.
    """
    per_state = []
    for s in range(mdp.num_states):
        if mdp.terminal[s]:
            per_state.append((0,))
        else:
            per_state.append(tuple(int(a) for a in _argmax_set(qjoint[s], tol)))
    if not truncate and count_optimal_policies(mdp, qjoint, tol) > limit:
        raise ValueError(f"more than {limit} optimal deterministic policies; raise `limit` to enumerate")
    chosen = itertools.islice(itertools.product(*per_state), limit)
    return [np.array(choice, dtype=int) for choice in chosen]


def extract_factored_qstar(mdp: TeamMdp, qjoint: np.ndarray, policy: np.ndarray,
                           tol: float = TIE_TOL, check: bool = True) -> list[np.ndarray]:
    """Factored tables induced by one optimal deterministic joint policy.

    Agent k's table holds qjoint(s, a^k, a^-k) with teammates pinned to the
    policy's joint action.  The policy must be greedy-consistent with qjoint
    at every nonterminal state.  The result is verified to satisfy the
    factored optimality conditions (within tol) unless check is disabled;
    note that when tied optima exist, only policies whose tie-breaks agree
    with the backup operator's deterministic tie rule certify as operator
    fixed points (others remain valid value factorizations of their policy).
    """
    policy = np.asarray(policy, dtype=int)
    if policy.shape != (mdp.num_states,):
        raise ValueError("policy must assign one flat joint action per state")
    best = qjoint.max(axis=1)
    for s in range(mdp.num_states):
        if mdp.terminal[s]:
            continue
        if qjoint[s, policy[s]] < best[s] - tol:
            raise ValueError(
                f"policy is not greedy-consistent at state {s}: "
                f"value {qjoint[s, policy[s]]!r} < optimum {best[s]!r}")

    strides = joint_strides(mdp.action_counts)
    states = np.arange(mdp.num_states)
    fq = []
    for k, (count, stride) in enumerate(zip(mdp.action_counts, strides)):
        own = (policy // stride) % count
        base = policy - own * stride
        cols = base[:, None] + stride * np.arange(count)[None, :]
        fq.append(qjoint[states[:, None], cols])

    if check:
        report = check_factorization(mdp, qjoint, fq, tol=max(tol, 1e-9))
        if not report.is_team_optimal:
            raise ValueError(f"extracted tables fail the factored optimality conditions: {report}")
    return fq


def greedy_policy(fq) -> list[np.ndarray]:
    """Per-agent deterministic policy: lowest-index maximizer of each row."""
    return [np.argmax(table, axis=1) for table in fq]


# ---------------------------------------------------------------------------
# Backup operators on factored tables.
# ---------------------------------------------------------------------------

def _per_agent_targets(mdp: TeamMdp, fq) -> list[np.ndarray]:
    """Joint-action backup targets, one (S, A) matrix per agent.

    targets[k][s, a] = mean reward + discount * E[max of agent k's next row].
    """
    rbar = mdp.expected_rewards()
    kernel = mdp.transition
    gamma = mdp.discount
    return [rbar + gamma * (kernel @ table.max(axis=1)) for table in fq]


def greedy_team_backup(mdp: TeamMdp, fq, tie_tol: float = TIE_TOL) -> list[np.ndarray]:
    """Backup each agent's table with teammates pinned to their greedy actions.

    When maximizers tie, the candidate joint actions (the product of every
    agent's maximizer set) are scored by their own backup value and the best
    tuple wins, lowest tuple first on ties; teammates are then fixed from the
    winning tuple for every one of the agent's actions.  With unique
    maximizers this is the ordinary greedy-teammate backup, and for a single
    agent it reduces to the standard Bellman optimality backup.
    """
    counts = mdp.action_counts
    num_agents = mdp.num_agents
    num_states = mdp.num_states
    strides = joint_strides(counts)
    targets = _per_agent_targets(mdp, fq)

    maxima = [table.max(axis=1, keepdims=True) for table in fq]
    tie_counts = [ (table >= m - tie_tol).sum(axis=1) for table, m in zip(fq, maxima) ]
    has_tie = np.zeros(num_states, dtype=bool)
    for c in tie_counts:
        has_tie |= c > 1
    # Absorbing zero-reward states back up to the same value under every
    # teammate tuple, so tie resolution cannot change them.
    has_tie &= ~mdp.terminal

    # Unique-maximizer fast path, vectorized over states.
    greedy = [np.argmax(table, axis=1) for table in fq]
    base_flat = np.zeros(num_states, dtype=int)
    for n in range(num_agents):
        base_flat += strides[n] * greedy[n]
    states = np.arange(num_states)
    out = []
    for k in range(num_agents):
        rest = base_flat - strides[k] * greedy[k]
        cols = rest[:, None] + strides[k] * np.arange(counts[k])[None, :]
        out.append(targets[k][states[:, None], cols])

    for s in np.flatnonzero(has_tie):
        sets = [_argmax_set(fq[n][s], tie_tol) for n in range(num_agents)]
        candidates = list(itertools.product(*(map(int, m) for m in sets)))
        flats = [sum(st * a for st, a in zip(strides, tup)) for tup in candidates]
        for k in range(num_agents):
            vals = targets[k][s, flats]
            winner = candidates[int(np.argmax(vals))]
            rest = sum(strides[n] * winner[n] for n in range(num_agents) if n != k)
            out[k][s] = targets[k][s, rest + strides[k] * np.arange(counts[k])]
    return out


def optimistic_backup(mdp: TeamMdp, fq) -> list[np.ndarray]:
    """Monotone backup: best target over all teammate actions, floored at fq.

    Never decreases any entry; repeated application climbs toward the
    teammate-max envelope from below.
    """
    targets = _per_agent_targets(mdp, fq)
    grid_shape = (mdp.num_states, *mdp.action_counts)
    out = []
    for k in range(mdp.num_agents):
        axes = tuple(ax for ax in range(1, mdp.num_agents + 1) if ax != k + 1)
        best = targets[k].reshape(grid_shape).max(axis=axes)
        out.append(np.maximum(fq[k], best))
    return out


def mixed_backup(mdp: TeamMdp, fq, p: float, rng: np.random.Generator):
    """Apply the greedy-teammate backup with probability p, else the optimistic one.

    One coin per whole-operator application, drawn from the given stream.
    Returns (new tables, coin) with coin true when the greedy backup ran.
    """
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    coin = bool(rng.random() < p)
    new = greedy_team_backup(mdp, fq) if coin else optimistic_backup(mdp, fq)
    return new, coin


@dataclass
class OperatorTrace:
    """Coin record of one randomized iteration run."""

    coin_outcomes: list[bool]
    final: list[np.ndarray]
    iterates: list[list[np.ndarray]] | None = None


def randomized_iteration(mdp: TeamMdp, fq0, num_steps: int, p: float,
                         rng: np.random.Generator, keep_iterates: bool = False):
    """num_steps randomized backups followed by one unconditional greedy backup.

    The trailing greedy backup pins suboptimal-action entries that would
    otherwise keep oscillating between the factored optimum and the
    teammate-max envelope.  Returns (tables, OperatorTrace).
    """
    if num_steps < 1:
        raise ValueError("num_steps must be at least 1")
    fq = copy_factored(fq0)
    coins: list[bool] = []
    iterates: list[list[np.ndarray]] | None = [] if keep_iterates else None
    for _ in range(num_steps):
        fq, coin = mixed_backup(mdp, fq, p, rng)
        coins.append(coin)
        if iterates is not None:
            iterates.append(copy_factored(fq))
    fq = greedy_team_backup(mdp, fq)
    return fq, OperatorTrace(coin_outcomes=coins, final=copy_factored(fq), iterates=iterates)


# ---------------------------------------------------------------------------
# Consistency checks.
# ---------------------------------------------------------------------------

@dataclass
class FactorizationReport:
    """How far a factored table set is from certifying team optimality.

    max_match_violation: worst gap between each agent's row maximum and the
        joint optimum (the per-agent maxima must all equal it).
    greedy_violation: per state, worst shortfall of the joint value under any
        selection of per-agent greedy actions (every tie-break must reach the
        optimum for decentralized greedy play to be safe).
    residual: sup distance between the tables and their greedy-teammate
        backup (zero at self-consistent fixed points).
    """

    max_match_violation: float
    greedy_violation: np.ndarray
    residual: float
    is_team_optimal: bool
    is_nash_fixed_point: bool

    def __repr__(self):
        return (f"FactorizationReport(max_match={self.max_match_violation:.3e}, "
                f"greedy={float(self.greedy_violation.max()):.3e}, residual={self.residual:.3e}, "
                f"team_optimal={self.is_team_optimal}, nash={self.is_nash_fixed_point})")


def check_factorization(mdp: TeamMdp, qjoint: np.ndarray, fq, tol: float = 1e-9,
                        tie_tol: float = TIE_TOL) -> FactorizationReport:
    """Test the three factored-optimality conditions against a joint optimum."""
    best = qjoint.max(axis=1)

    max_match = max(float(np.abs(table.max(axis=1) - best).max()) for table in fq)

    strides = joint_strides(mdp.action_counts)
    greedy_violation = np.zeros(mdp.num_states)
    for s in range(mdp.num_states):
        sets = [_argmax_set(table[s], tie_tol) for table in fq]
        worst = np.inf
        for tup in itertools.product(*(map(int, m) for m in sets)):
            flat = sum(st * a for st, a in zip(strides, tup))
            worst = min(worst, qjoint[s, flat])
        greedy_violation[s] = best[s] - worst

    residual = factored_sup_distance(greedy_team_backup(mdp, fq, tie_tol), fq)

    is_nash = residual < tol
    is_optimal = is_nash and max_match < tol and float(greedy_violation.max()) < tol
    return FactorizationReport(
        max_match_violation=max_match,
        greedy_violation=greedy_violation,
        residual=residual,
        is_team_optimal=is_optimal,
        is_nash_fixed_point=is_nash,
    )


@dataclass
class GapReport:
    """Half the smallest margin between a state's best and runner-up joint values.

    When some state has two distinct joint actions tied at the optimum the
    margin is unusable: value is 0 and the offending states are listed.
    """

    value: float
    tied_states: list[int] = field(default_factory=list)


def optimality_gap(mdp: TeamMdp, qjoint: np.ndarray, tie_tol: float = TIE_TOL) -> GapReport:
    """Compute the decision margin of a joint optimum over nonterminal states.

    Terminal states carry no decision (all joint values coincide at zero) and
    are excluded.
    """
    if mdp.num_actions < 2:
        raise ValueError("every state needs at least two joint actions")
    gaps = []
    tied = []
    for s in range(mdp.num_states):
        if mdp.terminal[s]:
            continue
        ordered = np.sort(qjoint[s])[::-1]
        if ordered[0] - ordered[1] <= tie_tol:
            tied.append(s)
        else:
            gaps.append(ordered[0] - ordered[1])
    if tied:
        return GapReport(value=0.0, tied_states=tied)
    return GapReport(value=0.5 * min(gaps))
