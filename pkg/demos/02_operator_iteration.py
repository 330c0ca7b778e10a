"""Escape a suboptimal self-consistent fixed point with the randomized backup.

The 2x2 trap game has a joint action worth 0 from which every unilateral
deviation loses: tables sitting there satisfy the greedy-teammate backup
exactly, so that operator alone never leaves.  Mixing in the optimistic
backup (probability 1-p per application) lifts entries toward the
teammate-max ceiling and breaks the lock; a final greedy backup then pins
every entry at the factored optimum.
"""

import numpy as np

from teamq import (
    extract_factored_qstar,
    enumerate_optimal_policies,
    factored_sup_distance,
    greedy_team_backup,
    matrix_game_mdp,
    randomized_iteration,
    rng_stream,
    solve_joint_optimal,
    zeros_factored,
)
from teamq.envs import NASH_TRAP_PAYOFF

mdp = matrix_game_mdp(NASH_TRAP_PAYOFF, gamma=0.9)
qjoint = solve_joint_optimal(mdp)
(policy,) = enumerate_optimal_policies(mdp, qjoint)
star = extract_factored_qstar(mdp, qjoint, policy)
print("factored optimum:", star[0][0], star[1][0])

trapped = zeros_factored(mdp)
trapped[0][0] = [0.0, -1.0]
trapped[1][0] = [0.0, -1.0]
print("\ntrapped tables:", trapped[0][0], trapped[1][0])
print("greedy-teammate backup leaves them unchanged:",
      factored_sup_distance(greedy_team_backup(mdp, trapped), trapped) == 0.0)

rng = rng_stream(0, "operator-coin")
fq, trace = randomized_iteration(mdp, trapped, num_steps=30, p=0.6, rng=rng,
                                 keep_iterates=True)
print(f"\nrandomized iteration, 30 steps (greedy on {sum(trace.coin_outcomes)} of them):")
for i, snapshot in enumerate(trace.iterates[:6]):
    kind = "greedy " if trace.coin_outcomes[i] else "optimistic"
    print(f"  step {i} ({kind}): agent1 {np.round(snapshot[0][0], 4)}")
print("  ...")
print("final distance to the optimum:", factored_sup_distance(fq, star))
