"""The coin-sequence mathematics behind the randomized-iteration guarantee.

Convergence needs two coin events: enough greedy draws to shrink any initial
overestimation (a binomial tail), and one long enough uninterrupted run of
optimistic draws to climb out of undershoots (a longest-run probability).
This script prints the exact formulas next to their classical lower bounds
and cross-checks the run formula against brute-force enumeration.
"""

from teamq.bounds import (
    binomial_tail,
    default_xi1,
    gap_close_steps,
    hoeffding_lower_bound,
    long_run_lower_bound,
    long_run_probability,
    long_run_probability_bruteforce,
    overshoot_decay_steps,
)

gamma, p = 0.5, 0.6
delta = 0.05
q_upper, min_max, max_gap = 2.0, 0.0, 1.0

n_o = overshoot_decay_steps(delta, gamma, q_upper, min_max)
run_len = gap_close_steps(delta, gamma, max_gap)
print(f"tolerance {delta}, discount {gamma}:")
print(f"  greedy draws needed to kill overestimation: n_o = {n_o}")
print(f"  optimistic run needed to close undershoot:  L   = {run_len}")

print(f"\nwith N draws at greedy probability p = {p}:")
print(f"{'N':>5} {'P(tail > n_o)':>14} {'Hoeffding':>10} {'P(run >= L)':>12} {'run bound':>10}")
for n in (20, 50, 100, 200, 400):
    tail = binomial_tail(n, p, n_o)
    hoeff = hoeffding_lower_bound(n, p, n_o)
    run = long_run_probability(n, run_len, 1.0 - p)
    xi = default_xi1(run_len, 1.0 - p)
    lower = long_run_lower_bound(n, run_len, 1.0 - p, xi)
    print(f"{n:>5} {tail:>14.6f} {hoeff:>10.6f} {run:>12.6f} {lower:>10.6f}")

print("\ncross-check against exhaustive enumeration (all sequences, n <= 10):")
worst = 0.0
for n in range(1, 11):
    for run_len in range(1, n + 1):
        for head in (0.3, 0.5, 0.7):
            exact = long_run_probability(n, run_len, head)
            brute = long_run_probability_bruteforce(n, run_len, head)
            worst = max(worst, abs(exact - brute))
print(f"  max |formula - enumeration| = {worst:.2e}")
