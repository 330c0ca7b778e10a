"""Experiment configs, CSV emission, CLI subcommands, determinism."""

import json
from pathlib import Path

import pytest

from teamq.cli import main
from teamq.experiments import (
    ExperimentConfig,
    load_config,
    load_tables_json,
    preset,
    run_experiment,
)
from teamq.learners import LearnerConfig

MINI_TOML = """
name = "mini"
env = "matrix"
seeds = [0, 1]
epochs = 400
eval_every = 100
eval_games = 20

[[algorithms]]
algorithm = "ltql"
mu = 0.1
gamma = 0.9

[algorithms.exploration]
kind = "uniform"

[[algorithms]]
algorithm = "distq"
mu = 0.1
gamma = 0.9

[algorithms.exploration]
kind = "uniform"
"""


@pytest.fixture()
def mini_config(tmp_path):
    path = tmp_path / "mini.toml"
    path.write_text(MINI_TOML)
    cfg = load_config(path)
    cfg.out_dir = str(tmp_path / "out")
    return cfg


def test_load_config_fields(mini_config):
    assert mini_config.name == "mini"
    assert [c.algorithm for c in mini_config.algorithms] == ["ltql", "distq"]
    assert mini_config.algorithms[0].exploration.kind == "uniform"
    assert mini_config.seeds == [0, 1]


def test_load_config_missing_env_names_field(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text('name = "x"\n[[algorithms]]\nalgorithm = "iql"\n')
    with pytest.raises(ValueError, match="'env'"):
        load_config(path)


def test_load_config_unknown_algorithm_key(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text('name = "x"\nenv = "matrix"\n[[algorithms]]\nalgorithm = "iql"\ntypo = 1\n')
    with pytest.raises(ValueError, match="typo"):
        load_config(path)


def test_config_requires_seeds():
    with pytest.raises(ValueError, match="seed"):
        ExperimentConfig(name="x", env="matrix", algorithms=[LearnerConfig()], seeds=[])


def test_presets_shape():
    exp1 = preset("exp1")
    assert exp1.env == "matrix" and len(exp1.seeds) == 20 and exp1.epochs == 5000
    assert {c.algorithm for c in exp1.algorithms} == {"ltql", "distq", "iql"}
    assert all(c.exploration.kind == "uniform" and c.mu == 0.1 for c in exp1.algorithms)
    exp2 = preset("exp2")
    assert exp2.env == "buttongrid" and exp2.epochs == 200_000
    assert {c.algorithm for c in exp2.algorithms} == {"ltql", "iql", "distq", "hystq"}
    assert all(c.mu == 0.025 and c.buffer_capacity == 0 for c in exp2.algorithms)
    hyst = next(c for c in exp2.algorithms if c.algorithm == "hystq")
    assert hyst.mu * hyst.small_step_ratio == pytest.approx(1e-2)
    assert exp2.algorithms[0].exploration.floor == 0.05
    assert exp2.algorithms[0].exploration.decay_epochs == 2e5


def test_run_experiment_outputs(mini_config):
    grouped = run_experiment(mini_config)
    assert set(grouped) == {"ltql", "distq"}
    out = Path(mini_config.out_dir)
    run_files = sorted(p.name for p in out.glob("*.csv"))
    assert run_files == [
        "mini_distq_aggregate.csv",
        "mini_distq_seed0.csv",
        "mini_distq_seed1.csv",
        "mini_ltql_aggregate.csv",
        "mini_ltql_seed0.csv",
        "mini_ltql_seed1.csv",
    ]
    body = (out / "mini_ltql_seed0.csv").read_text().splitlines()
    assert body[0] == "epoch,avg_test_return,win_rate"
    assert len(body) == 1 + 5  # epochs 0,100,200,300 + final 399
    agg = (out / "mini_ltql_aggregate.csv").read_text().splitlines()
    assert agg[0] == ("epoch,avg_test_return_mean,avg_test_return_min,avg_test_return_max,"
                      "win_rate_mean,win_rate_min,win_rate_max")
    tables = load_tables_json(out / "mini_ltql_seed0_tables.json")
    assert set(tables["tables"]) == {"q_b", "q_u"}
    assert tables["seed"] == 0


def test_rerun_byte_identical(mini_config, tmp_path):
    run_experiment(mini_config)
    first = {p.name: p.read_bytes() for p in Path(mini_config.out_dir).iterdir()}
    mini_config.out_dir = str(tmp_path / "out2")
    run_experiment(mini_config)
    second = {p.name: p.read_bytes() for p in Path(mini_config.out_dir).iterdir()}
    assert first == second


def test_workers_do_not_change_results(mini_config, tmp_path):
    run_experiment(mini_config)
    first = {p.name: p.read_bytes() for p in Path(mini_config.out_dir).iterdir()}
    mini_config.out_dir = str(tmp_path / "out_par")
    run_experiment(mini_config, workers=2)
    second = {p.name: p.read_bytes() for p in Path(mini_config.out_dir).iterdir()}
    assert first == second


# ---------------------------------------------------------------------------
# CLI.
# ---------------------------------------------------------------------------

def test_cli_train_and_eval(tmp_path, capsys):
    cfg_path = tmp_path / "mini.toml"
    cfg_path.write_text(MINI_TOML)
    out = tmp_path / "cli_out"
    assert main(["train", "--config", str(cfg_path), "--out", str(out), "--seed", "0"]) == 0
    text = capsys.readouterr().out
    assert "ltql" in text and "distq" in text
    assert main(["eval", "--tables", str(out / "mini_ltql_seed0_tables.json"),
                 "--env", "matrix", "--games", "10"]) == 0
    assert "avg return" in capsys.readouterr().out


def test_cli_dp_solve_builtin_and_json(tmp_path, capsys):
    out = tmp_path / "dp"
    assert main(["dp-solve", "nashtrap", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "optimal deterministic policies: 1" in text
    assert "[-1.0, 1.0]  [-1.0, 1.0]" in text
    qjoint = json.loads((out / "qjoint.json").read_text())
    assert qjoint[0] == [0.0, -1.0, -1.0, 1.0]
    report = json.loads((out / "factorization_report.json").read_text())
    assert report[0]["is_team_optimal"] is True

    # Round-trip the same game through the JSON MDP interface.
    from teamq.envs import NASH_TRAP_PAYOFF, matrix_game_mdp
    from teamq.mdp import save_mdp_json

    path = tmp_path / "trap.json"
    save_mdp_json(matrix_game_mdp(NASH_TRAP_PAYOFF, 0.9), path)
    assert main(["dp-solve", str(path), "--out", str(tmp_path / "dp2")]) == 0
    assert "[-1.0, 1.0]" in capsys.readouterr().out


def test_cli_dp_solve_rejects_cowboy(capsys):
    with pytest.raises(SystemExit, match="continuous"):
        main(["dp-solve", "cowboy"])


def test_cli_dp_verify_modes(capsys):
    assert main(["dp-verify", "matrix", "--mode", "converge", "--steps", "60",
                 "-p", "1.0", "--trials", "5", "--delta", "0.001"]) == 0
    assert "frequency: 1.000000" in capsys.readouterr().out
    assert main(["dp-verify", "--mode", "runs-bruteforce", "--max-tosses", "9"]) == 0
    assert "PASS" in capsys.readouterr().out
    assert main(["dp-verify", "nashtrap", "--mode", "band", "--steps", "40",
                 "-p", "0.6", "--delta", "0.2", "--trials", "50", "--gamma", "0.5"]) == 0
    out = capsys.readouterr().out
    assert "exact long-run probability" in out and "PASS" in out


def test_cli_dp_verify_repeat_identical(tmp_path, capsys):
    args = ["dp-verify", "nashtrap", "--mode", "converge", "--steps", "80",
            "-p", "0.6", "--trials", "40", "--seed", "11"]
    main(args)
    first = capsys.readouterr().out
    main(args)
    assert capsys.readouterr().out == first


def test_cli_bounds_table(capsys):
    assert main(["bounds", "--delta1", "0.1", "--delta2", "0.1", "-p", "0.6",
                 "--gamma", "0.5", "--q-upper", "1.0", "--min-max", "0.0",
                 "--max-gap", "1.0", "-N", "100"]) == 0
    out = capsys.readouterr().out
    assert "(n_o): 3" in out and "(L): 4" in out
    assert "exact binomial tail" in out and "run-length lower bound" in out


def test_cli_bounds_domain_error():
    with pytest.raises(SystemExit, match="delta1"):
        main(["bounds", "--delta1", "-1", "--delta2", "0.1", "-p", "0.6",
              "--gamma", "0.5", "--q-upper", "1.0", "--min-max", "0.0",
              "--max-gap", "1.0", "-N", "10"])


def test_cli_dp_solve_buttongrid_truncates(tmp_path, capsys):
    out = tmp_path / "grid"
    assert main(["dp-solve", "buttongrid", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "optimal start value: 7.29" in text
    assert "optimal deterministic policies: 15625 (writing the first 16)" in text
    assert len(list(out.glob("qstar_*.json"))) == 16
