"""Train all tabular learners on the coordination matrix game.

The team learner keeps two estimates per agent: an optimistic one that gates
and explores, and an unbiased one updated only when teammates acted greedily.
The unbiased tables converge to one of the two factored optima (which one
depends on the seed); the increase-only baseline converges to the
coordination-unsafe ceiling, and independent Q-learning never settles.
"""

from teamq import Exploration, LearnerConfig, matrix_env, train

env = matrix_env()

for algorithm in ("ltql", "distq", "iql"):
    cfg = LearnerConfig(algorithm=algorithm, mu=0.1, alpha=1.0, gamma=0.9,
                        exploration=Exploration(kind="uniform"))
    print(f"\n{algorithm}, seeds 0 and 1, 5000 games each:")
    for seed in (0, 1):
        record = train(env, cfg, seed=seed, epochs=5000)
        tables = record.final_tables["q_u" if algorithm == "ltql" else "q"]
        agent1 = [round(v, 3) for v in tables[0][0]]
        agent2 = [round(v, 3) for v in tables[1][0]]
        ret = record.rows[-1][1]
        print(f"  seed {seed}: agent1 {agent1}  agent2 {agent2}  greedy return {ret:.2f}")
