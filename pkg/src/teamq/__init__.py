"""Tabular cooperative team Q-learning toolkit.

Exact team MDPs, factored Bellman operators with convergence bounds, tabular
multi-agent learners and baselines, the reference environments, and a seeded
experiment harness.
"""

from .mdp import (
    TeamMdp,
    empirical_return,
    encode_joint,
    decode_joint,
    expected_reward,
    load_mdp_json,
    random_team_mdp,
    rng_stream,
    sample_step,
    save_mdp_json,
)
from .dp import (
    FactorizationReport,
    GapReport,
    OperatorTrace,
    check_factorization,
    count_optimal_policies,
    enumerate_optimal_policies,
    extract_factored_qstar,
    factored_sup_distance,
    greedy_policy,
    greedy_team_backup,
    mixed_backup,
    optimality_gap,
    optimistic_backup,
    randomized_iteration,
    solve_joint_optimal,
    teammate_max_envelope,
    zeros_factored,
)
from .learners import (
    Exploration,
    LearnerConfig,
    ObsTable,
    ReplayBuffer,
    RunRecord,
    TabularLearner,
    evaluate_greedy,
    select_actions,
    train,
)
from .envs import (
    ButtonGridEnv,
    CowboyBullEnv,
    MatrixGameEnv,
    TabularMdpEnv,
    builtin_env,
    builtin_mdp,
    bull_policy,
    button_grid_mdp,
    matrix_env,
    matrix_game_mdp,
    nash_trap_env,
)

__version__ = "0.1.0"
