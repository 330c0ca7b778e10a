"""Closed-form probability bounds for the randomized backup iteration.

The randomized iteration flips one biased coin per backup (greedy with
probability p, optimistic otherwise).  Its convergence guarantees reduce to
two questions about coin sequences: how many greedy draws shrink an initial
overestimate below a tolerance, and how likely a long enough uninterrupted
run of optimistic draws is.  This module holds the exact formulas and their
classical lower bounds, plus a brute-force enumeration oracle for the run
statistics.
"""

from __future__ import annotations

import math

__all__ = [
    "overshoot_decay_steps",
    "gap_close_steps",
    "binomial_tail",
    "hoeffding_lower_bound",
    "long_run_probability",
    "default_xi1",
    "long_run_lower_bound",
    "long_run_probability_bruteforce",
    "run_length_census",
]


def overshoot_decay_steps(delta1: float, gamma: float, q_upper: float, min_max_q: float) -> int:
    """Contraction steps after which an initial overestimate decays below delta1.

    q_upper is the ceiling of the initial tables (at least max reward over
    1 - gamma) and min_max_q the smallest per-state joint optimum.  Returns
    floor(log_gamma(delta1 / (q_upper - min_max_q))), clamped at 0 when the
    tolerance already exceeds the initial overshoot.
    """
    if delta1 <= 0:
        raise ValueError("delta1 must be positive")
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    span = q_upper - min_max_q
    if span <= 0:
        raise ValueError("q_upper must exceed min_max_q")
    if delta1 >= span:
        return 0
    return max(0, math.floor(math.log(delta1 / span) / math.log(gamma)))


def gap_close_steps(delta2: float, gamma: float, max_gap: float) -> int:
    """Consecutive optimistic steps needed to close an undershoot below delta2.

    max_gap is the largest distance between a table's row maxima and the
    joint optimum.  Returns ceil(log_gamma(delta2 / max_gap)), clamped at 0.
    """
    if delta2 <= 0:
        raise ValueError("delta2 must be positive")
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    if max_gap <= 0:
        raise ValueError("max_gap must be positive")
    if delta2 >= max_gap:
        return 0
    return max(0, math.ceil(math.log(delta2 / max_gap) / math.log(gamma)))


def binomial_tail(n: int, p: float, k: int) -> float:
    """Exact probability of strictly more than k successes in n draws."""
    if not 0 <= k <= n:
        raise ValueError("need 0 <= k <= n")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    # Sum whichever side of the distribution is shorter.
    if k + 1 > n - k:
        total = 0.0
        for i in range(k + 1, n + 1):
            total += math.comb(n, i) * p**i * (1.0 - p) ** (n - i)
        return min(1.0, total)
    head = 0.0
    for i in range(k + 1):
        head += math.comb(n, i) * p**i * (1.0 - p) ** (n - i)
    return max(0.0, 1.0 - head)


def hoeffding_lower_bound(n: int, p: float, k: int) -> float | None:
    """Hoeffding lower bound on the same tail; None when n <= k / p."""
    if p <= 0 or n * p <= k:
        return None
    return 1.0 - math.exp(-2.0 * n * (p - k / n) ** 2)


def _run_free_poly(n: int, run_len: int, head_prob: float) -> float:
    """Probability that n tosses contain no run of run_len heads ending before
    a decisive position; the alternating-sum polynomial of the run statistic."""
    if n < 0:
        return 1.0
    tail = 1.0 - head_prob
    x = tail * head_prob**run_len
    total = 0.0
    for j in range(n // (run_len + 1) + 1):
        total += (-1) ** j * math.comb(n - j * run_len, j) * x**j
    return total


def long_run_probability(n: int, run_len: int, head_prob: float) -> float:
    """Exact probability of at least run_len consecutive heads in n tosses."""
    if not 1 <= run_len <= n:
        raise ValueError("need 1 <= run_len <= n")
    if not 0.0 <= head_prob <= 1.0:
        raise ValueError("head_prob must lie in [0, 1]")
    beta_n = _run_free_poly(n, run_len, head_prob)
    beta_rest = _run_free_poly(n - run_len, run_len, head_prob)
    return 1.0 - beta_n + head_prob**run_len * beta_rest


def default_xi1(run_len: int, head_prob: float) -> float:
    """Safe geometric rate for the long-run lower bound.

    The bound is valid for xi1 at or below the smallest root of
    1 - x + (1-h) h^L x^(L+1); the first-order value 1 + (1-h) h^L always
    sits strictly below that root while staying inside (1, 1 + 1/L).
    """
    if not 0.0 < head_prob < 1.0:
        raise ValueError("head_prob must lie in (0, 1)")
    return 1.0 + (1.0 - head_prob) * head_prob**run_len


def long_run_lower_bound(n: int, run_len: int, head_prob: float, xi1: float) -> float:
    """Closed-form lower bound on the long-run probability.

    Valid when heads are the rarer side (head_prob < 0.5) and xi1 lies
    strictly between 1 and 1 + 1/run_len; as a true lower bound it further
    requires xi1 not to exceed the characteristic root (see default_xi1).
    """
    if not 1 <= run_len <= n:
        raise ValueError("need 1 <= run_len <= n")
    if not 0.0 < head_prob < 0.5:
        raise ValueError("bound requires head_prob in (0, 0.5)")
    if not 1.0 < xi1 < 1.0 + 1.0 / run_len:
        raise ValueError(f"xi1 must lie in (1, 1 + 1/{run_len})")
    tail = 1.0 - head_prob
    lead = (1.0 - head_prob * xi1) / (tail * xi1 * (1.0 + run_len - run_len * xi1))
    return 1.0 - lead * xi1 ** (-n) - (run_len / tail) * head_prob ** (n + 2)


def run_length_census(n: int):
    """count[longest, heads] over all 2**n toss sequences (enumeration oracle)."""
    import numpy as np

    census = np.zeros((n + 1, n + 1), dtype=np.int64)
    for bits in range(1 << n):
        longest = run = heads = 0
        b = bits
        for _ in range(n):
            if b & 1:
                run += 1
                heads += 1
                if run > longest:
                    longest = run
            else:
                run = 0
            b >>= 1
        census[longest, heads] += 1
    return census


def long_run_probability_bruteforce(n: int, run_len: int, head_prob: float,
                                    census=None) -> float:
    """Weighted enumeration of all 2**n sequences; independent of the formula."""
    if census is None:
        census = run_length_census(n)
    total = 0.0
    for longest in range(run_len, n + 1):
        for heads in range(n + 1):
            c = int(census[longest, heads])
            if c:
                total += c * head_prob**heads * (1.0 - head_prob) ** (n - heads)
    return total
