"""Solve the coordination matrix game exactly and extract its factored optima.

The game has two optimal joint actions worth 2.  A single joint table cannot
be executed by independent agents, but each optimal joint policy induces one
set of per-agent tables whose independent greedy actions recover an optimal
joint action.  This script solves the game, enumerates both optimal policies,
extracts both factored table sets and certifies them.
"""

from teamq import (
    check_factorization,
    enumerate_optimal_policies,
    extract_factored_qstar,
    matrix_game_mdp,
    solve_joint_optimal,
    teammate_max_envelope,
)
from teamq.envs import COORDINATION_PAYOFF

mdp = matrix_game_mdp(COORDINATION_PAYOFF, gamma=0.9)
qjoint = solve_joint_optimal(mdp)
print("payoff table:")
print(COORDINATION_PAYOFF)
print("\njoint optimum at the start state (row-major over joint actions):")
print(qjoint[0].reshape(2, 3))

policies = enumerate_optimal_policies(mdp, qjoint)
print(f"\n{len(policies)} optimal deterministic policies")
for i, policy in enumerate(policies):
    fq = extract_factored_qstar(mdp, qjoint, policy)
    report = check_factorization(mdp, qjoint, fq)
    print(f"\nfactored optimum {i}: agent1 {fq[0][0]}, agent2 {fq[1][0]}")
    print(f"  certificate: {report}")

# The per-agent ceilings (best value any teammate choice allows).  Greedy
# play on these tables is NOT coordination-safe: mixing tied maximizers can
# earn 0 instead of 2, which is exactly what an increase-only learner ends
# up with.
envelope = teammate_max_envelope(mdp, qjoint)
print(f"\nteammate-max envelope: agent1 {envelope[0][0]}, agent2 {envelope[1][0]}")
rep = check_factorization(mdp, qjoint, envelope)
print(f"  greedy shortfall per state: {rep.greedy_violation}")
