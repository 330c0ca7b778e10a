"""Closed-form bound formulas against exact oracles and classical inequalities."""

import math

import pytest

from teamq.bounds import (
    binomial_tail,
    default_xi1,
    gap_close_steps,
    hoeffding_lower_bound,
    long_run_lower_bound,
    long_run_probability,
    long_run_probability_bruteforce,
    overshoot_decay_steps,
    run_length_census,
)
from teamq.mdp import rng_stream


# ---------------------------------------------------------------------------
# Step-count formulas.
# ---------------------------------------------------------------------------

def test_overshoot_steps_log_of_one():
    assert overshoot_decay_steps(1.0, 0.5, 1.0, 0.0) == 0


def test_overshoot_steps_known_values():
    # floor(log_0.5 0.1) = 3 and floor(log_0.9 0.01) = 43, evaluated directly.
    assert overshoot_decay_steps(0.1, 0.5, 1.0, 0.0) == 3
    assert overshoot_decay_steps(0.01, 0.9, 1.0, 0.0) == 43
    assert math.floor(math.log(0.1) / math.log(0.5)) == 3
    assert math.floor(math.log(0.01) / math.log(0.9)) == 43


def test_overshoot_steps_clamps_to_zero():
    assert overshoot_decay_steps(5.0, 0.5, 1.0, 0.0) == 0


def test_overshoot_steps_domain_errors():
    with pytest.raises(ValueError):
        overshoot_decay_steps(-0.1, 0.5, 1.0, 0.0)
    with pytest.raises(ValueError):
        overshoot_decay_steps(0.1, 0.5, 0.0, 0.0)
    with pytest.raises(ValueError):
        overshoot_decay_steps(0.1, 1.0, 1.0, 0.0)


def test_gap_close_steps_values():
    assert gap_close_steps(1.0, 0.5, 1.0) == 0
    assert gap_close_steps(0.1, 0.5, 1.0) == 4  # ceil(log_0.5 0.1)


def test_gap_close_steps_monotone_in_delta():
    steps = [gap_close_steps(d, 0.7, 2.0) for d in (0.01, 0.05, 0.1, 0.5, 1.0, 3.0)]
    assert steps == sorted(steps, reverse=True)


def test_overshoot_steps_monotone_in_delta():
    steps = [overshoot_decay_steps(d, 0.7, 2.0, 0.0) for d in (0.01, 0.05, 0.1, 0.5, 1.0, 3.0)]
    assert steps == sorted(steps, reverse=True)


# ---------------------------------------------------------------------------
# Binomial tail and Hoeffding.
# ---------------------------------------------------------------------------

def test_binomial_tail_single_toss():
    assert binomial_tail(1, 0.3, 0) == pytest.approx(0.3, abs=1e-15)


def test_binomial_tail_exact_value():
    # 1 - (C(10,0) + C(10,1) + C(10,2)) / 2^10 = 1 - 56/1024
    assert binomial_tail(10, 0.5, 2) == pytest.approx(1.0 - 56 / 1024, abs=1e-15)


def test_binomial_tail_matches_montecarlo():
    # Coin-trace frequency over 1e5 trials within 3 sigma of the formula.
    n, p, k = 40, 0.6, 20
    exact = binomial_tail(n, p, k)
    rng = rng_stream(4, "operator-coin")
    draws = rng.binomial(n, p, size=100_000)
    freq = float((draws > k).mean())
    sigma = math.sqrt(exact * (1 - exact) / 100_000)
    assert abs(freq - exact) < 3 * sigma


def test_hoeffding_below_exact_tail_on_grid():
    for n in range(1, 60):
        for p in (0.3, 0.5, 0.7, 0.9):
            for k in range(0, n):
                bound = hoeffding_lower_bound(n, p, k)
                if bound is None:
                    assert n * p <= k
                    continue
                assert bound <= binomial_tail(n, p, k) + 1e-12


# ---------------------------------------------------------------------------
# Long-run probability.
# ---------------------------------------------------------------------------

def test_long_run_two_tosses():
    # P(at least one head in two fair tosses) = 3/4, by enumeration.
    assert long_run_probability(2, 1, 0.5) == pytest.approx(0.75, abs=1e-15)


def test_long_run_all_tosses_must_be_heads():
    for n in (1, 3, 7):
        for h in (0.2, 0.5, 0.8):
            assert long_run_probability(n, n, h) == pytest.approx(h**n, abs=1e-12)


def test_long_run_matches_bruteforce_small_cases():
    worst = 0.0
    for n in range(1, 13):
        census = run_length_census(n)
        for run_len in range(1, n + 1):
            for head in (0.3, 0.5, 0.7):
                exact = long_run_probability(n, run_len, head)
                brute = long_run_probability_bruteforce(n, run_len, head, census=census)
                worst = max(worst, abs(exact - brute))
    assert worst < 1e-12


def test_long_run_domain_errors():
    with pytest.raises(ValueError):
        long_run_probability(3, 0, 0.5)
    with pytest.raises(ValueError):
        long_run_probability(3, 4, 0.5)


# ---------------------------------------------------------------------------
# Run-length lower bound.
# ---------------------------------------------------------------------------

def test_lower_bound_below_exact_on_grid():
    for n in range(2, 80, 3):
        for run_len in range(1, min(n, 9) + 1):
            for head in (0.1, 0.25, 0.4):
                xi = default_xi1(run_len, head)
                bound = long_run_lower_bound(n, run_len, head, xi)
                assert bound <= long_run_probability(n, run_len, head) + 1e-12


def test_lower_bound_tends_to_one():
    head, run_len = 0.3, 4
    xi = default_xi1(run_len, head)
    values = [long_run_lower_bound(n, run_len, head, xi) for n in (50, 500, 5000)]
    assert values == sorted(values)
    assert values[-1] > 1.0 - 1e-6
    assert values[-1] < 1.0


def test_lower_bound_known_configuration():
    # p = 0.6 mixture (head prob 0.4), run 3, xi 1.1, 200 draws: in [0, 1).
    value = long_run_lower_bound(200, 3, 0.4, 1.1)
    assert 0.0 <= value < 1.0
    assert value == pytest.approx(1.0
                                  - (1.0 - 0.4 * 1.1) / (0.6 * 1.1 * (1 + 3 - 3 * 1.1)) * 1.1**-200
                                  - (3 / 0.6) * 0.4**202, abs=1e-15)


def test_lower_bound_domain_errors():
    with pytest.raises(ValueError, match="head_prob"):
        long_run_lower_bound(10, 2, 0.6, 1.1)  # heads must be the rare side
    with pytest.raises(ValueError, match="xi1"):
        long_run_lower_bound(10, 2, 0.4, 1.6)
    with pytest.raises(ValueError, match="xi1"):
        long_run_lower_bound(10, 2, 0.4, 1.0)


def test_default_xi1_in_valid_interval():
    for run_len in (1, 2, 5, 11):
        for head in (0.05, 0.2, 0.45):
            xi = default_xi1(run_len, head)
            assert 1.0 < xi < 1.0 + 1.0 / run_len
