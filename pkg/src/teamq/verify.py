"""Monte-Carlo verification of the randomized-iteration guarantees.

Runs seeded ensembles of the randomized backup iteration and measures how
often the final tables land in the sets the closed-form bounds speak about:
no entry above the teammate-max envelope plus a tolerance ("upper"), the
two-sided band around the factored optimum ("band"), or within sup-distance
delta of some extracted factored optimum after the trailing greedy backup
("converge").  The empirical frequencies are reported next to every
applicable closed-form lower bound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import bounds
from .dp import (
    constant_factored,
    enumerate_optimal_policies,
    extract_factored_qstar,
    factored_sup_distance,
    greedy_team_backup,
    mixed_backup,
    optimality_gap,
    solve_joint_optimal,
    teammate_max_envelope,
    zeros_factored,
)
from .mdp import TeamMdp, rng_stream

__all__ = [
    "MODES",
    "BoundInputs",
    "bound_inputs",
    "montecarlo_operator_check",
    "convergence_lower_bound",
    "VerifyReport",
    "verify_operator_bounds",
    "run_probability_crosscheck",
]

MODES = ("upper", "band", "converge")


@dataclass
class BoundInputs:
    """Scalar quantities the closed-form bounds are evaluated at."""

    q_upper: float
    min_max_q: float
    max_gap: float
    r_max: float


def bound_inputs(mdp: TeamMdp, qjoint: np.ndarray, fq0) -> BoundInputs:
    """Derive the bound inputs from a joint optimum and the starting tables."""
    r_max = float(mdp.expected_rewards().max())
    top = max(float(t.max()) for t in fq0)
    q_upper = max(r_max / (1.0 - mdp.discount), top)
    best = qjoint.max(axis=1)
    max_gap = max(float(np.abs(t.max(axis=1) - best).max()) for t in fq0)
    return BoundInputs(
        q_upper=q_upper,
        min_max_q=float(best.min()),
        max_gap=max_gap,
        r_max=r_max,
    )


def _default_start(mdp: TeamMdp, mode: str):
    if mode == "upper":
        # Worst admissible start: every entry at the ceiling.
        r_max = float(mdp.expected_rewards().max())
        return constant_factored(mdp, max(r_max / (1.0 - mdp.discount), 0.0))
    return zeros_factored(mdp)


def montecarlo_operator_check(mdp: TeamMdp, num_steps: int, p: float, delta: float,
                              trials: int, mode: str, seed: int, fq0=None,
                              policy_limit: int = 10000):
    """Fraction of seeded trials whose final tables land in the target set.

    Trials use independent derived coin streams, so the result does not
    depend on execution order.  Returns (frequency, details dict).
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    qjoint = solve_joint_optimal(mdp)
    envelope = teammate_max_envelope(mdp, qjoint)
    if fq0 is None:
        fq0 = _default_start(mdp, mode)

    if mode == "band":
        for table, ceiling in zip(fq0, envelope):
            if (table > ceiling + 1e-12).any():
                raise ValueError("band mode requires starting tables at or below the teammate-max envelope")

    stars = None
    if mode in ("band", "converge"):
        policies = enumerate_optimal_policies(mdp, qjoint, limit=policy_limit)
        stars = [extract_factored_qstar(mdp, qjoint, pol, check=False) for pol in policies]

    hits = 0
    for trial in range(trials):
        rng = rng_stream(seed, "operator-coin", trial)
        fq = [t.copy() for t in fq0]
        for _ in range(num_steps):
            fq, _ = mixed_backup(mdp, fq, p, rng)
        if mode == "upper":
            ok = all((t <= u + delta).all() for t, u in zip(fq, envelope))
        elif mode == "band":
            ok = any(
                all(((s - delta <= t) & (t <= u + delta)).all()
                    for t, s, u in zip(fq, star, envelope))
                for star in stars)
        else:
            final = greedy_team_backup(mdp, fq)
            ok = min(factored_sup_distance(final, star) for star in stars) < delta
        hits += 1 if ok else 0

    details = {"mode": mode, "num_steps": num_steps, "p": p, "delta": delta,
               "trials": trials, "seed": seed,
               "num_optima": len(stars) if stars is not None else None}
    return hits / trials, details


def convergence_lower_bound(num_steps: int, p: float, gamma: float, delta: float,
                            inputs: BoundInputs, xi1: float | None = None):
    """Best split product bound for the converge-mode success probability.

    Splits the budget into a phase that kills overestimation (binomial tail
    over greedy draws) and a phase that must contain a long optimistic run,
    taking the best product over the split.  Returns a dict with the exact
    and the closed-form (Hoeffding x run-bound) variants, or None values when
    no split is admissible.
    """
    if inputs.max_gap <= 0:
        return {"exact": None, "closed_form": None, "n_o": 0, "run_len": 0}
    span = inputs.q_upper - inputs.min_max_q
    # When the starting tables cannot overshoot by more than delta, the first
    # phase succeeds with certainty; otherwise it needs more than n_o greedy
    # draws (zero draws never suffice, even when n_o floors to 0).
    overshoot_free = span <= 0 or delta >= span
    n_o = 0 if overshoot_free else bounds.overshoot_decay_steps(delta, gamma, inputs.q_upper,
                                                                inputs.min_max_q)
    run_len = max(bounds.gap_close_steps(delta, gamma, inputs.max_gap), 1)
    head = 1.0 - p
    best_exact = None
    best_closed = None
    for n1 in range(0, num_steps - run_len + 1):
        n2 = num_steps - n1
        if overshoot_free:
            tail = 1.0
        elif n1 > n_o:
            tail = bounds.binomial_tail(n1, p, n_o)
        else:
            tail = 0.0
        run = bounds.long_run_probability(n2, run_len, head)
        exact = tail * run
        if best_exact is None or exact > best_exact:
            best_exact = exact
        hoeff = 1.0 if overshoot_free else bounds.hoeffding_lower_bound(n1, p, n_o)
        if hoeff is not None and p > 0.5:
            xi = xi1 if xi1 is not None else bounds.default_xi1(run_len, head)
            closed = hoeff * bounds.long_run_lower_bound(n2, run_len, head, xi)
            if best_closed is None or closed > best_closed:
                best_closed = closed
    return {"exact": best_exact, "closed_form": best_closed, "n_o": n_o, "run_len": run_len}


@dataclass
class VerifyReport:
    frequency: float
    comparisons: list  # (label, bound value, passed)
    details: dict

    @property
    def passed(self) -> bool:
        return all(ok for _, _, ok in self.comparisons)

    def lines(self):
        out = [f"mode={self.details['mode']} steps={self.details['num_steps']} "
               f"p={self.details['p']} delta={self.details['delta']} trials={self.details['trials']}",
               f"empirical frequency: {self.frequency:.6f}"]
        for label, value, ok in self.comparisons:
            verdict = "PASS" if ok else "FAIL"
            out.append(f"  {label}: {value:.6f}  [{verdict}]")
        if not self.comparisons:
            out.append("  (no closed-form bound applicable to this configuration)")
        return out


def verify_operator_bounds(mdp: TeamMdp, num_steps: int, p: float, delta: float,
                           trials: int, mode: str, seed: int,
                           xi1: float | None = None) -> VerifyReport:
    """Run the Monte-Carlo check and compare against the applicable bounds."""
    qjoint = solve_joint_optimal(mdp)
    fq0 = _default_start(mdp, mode)
    inputs = bound_inputs(mdp, qjoint, fq0)
    frequency, details = montecarlo_operator_check(
        mdp, num_steps, p, delta, trials, mode, seed, fq0=fq0)

    comparisons = []
    if mode == "upper":
        n_o = bounds.overshoot_decay_steps(delta, mdp.discount, inputs.q_upper, inputs.min_max_q)
        exact = bounds.binomial_tail(num_steps, p, n_o) if n_o <= num_steps else 0.0
        comparisons.append(("exact binomial tail", exact, frequency >= exact))
        hoeff = bounds.hoeffding_lower_bound(num_steps, p, n_o)
        if hoeff is not None:
            comparisons.append(("Hoeffding lower bound", hoeff, frequency >= hoeff))
        details["n_o"] = n_o
    elif mode == "band":
        if inputs.max_gap > 0:
            run_len = max(1, bounds.gap_close_steps(delta, mdp.discount, inputs.max_gap))
            if run_len <= num_steps:
                exact = bounds.long_run_probability(num_steps, run_len, 1.0 - p)
                comparisons.append(("exact long-run probability", exact, frequency >= exact))
                if p > 0.5:
                    xi = xi1 if xi1 is not None else bounds.default_xi1(run_len, 1.0 - p)
                    lower = bounds.long_run_lower_bound(num_steps, run_len, 1.0 - p, xi)
                    comparisons.append(("run-length lower bound", lower, frequency >= lower))
            details["run_len"] = run_len
    else:
        gap = optimality_gap(mdp, qjoint)
        details["gap"] = gap.value
        details["gap_tied_states"] = gap.tied_states
        if not gap.tied_states and delta < gap.value:
            prod = convergence_lower_bound(num_steps, p, mdp.discount, delta, inputs, xi1)
            details.update({"n_o": prod["n_o"], "run_len": prod["run_len"]})
            if prod["exact"] is not None:
                comparisons.append(("split product (exact factors)", prod["exact"],
                                    frequency >= prod["exact"]))
            if prod["closed_form"] is not None:
                comparisons.append(("split product (closed form)", prod["closed_form"],
                                    frequency >= prod["closed_form"]))
    return VerifyReport(frequency=frequency, comparisons=comparisons, details=details)


def run_probability_crosscheck(max_tosses: int = 12, head_probs=(0.3, 0.5, 0.7)) -> float:
    """Max |formula - enumeration| for the long-run probability, all small cases."""
    worst = 0.0
    for n in range(1, max_tosses + 1):
        census = bounds.run_length_census(n)
        for run_len in range(1, n + 1):
            for head in head_probs:
                exact = bounds.long_run_probability(n, run_len, head)
                brute = bounds.long_run_probability_bruteforce(n, run_len, head, census=census)
                worst = max(worst, abs(exact - brute))
    return worst
