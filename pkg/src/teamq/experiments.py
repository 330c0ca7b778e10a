"""Seeded multi-run experiment orchestration with CSV/JSON emission.

An experiment is a TOML document (or a builtin preset) naming an environment,
a list of algorithm configurations, the seeds to sweep and the evaluation
cadence.  Every (algorithm, seed) pair trains independently and writes one
CSV of evaluation rows plus a JSON file with its final tables; per-algorithm
aggregate CSVs carry the mean/min/max across seeds per evaluation epoch.
Runs are deterministic functions of (config, seed), so repeated invocations
produce byte-identical files.
"""

from __future__ import annotations

import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import envs
from .learners import Exploration, LearnerConfig, RunRecord, train

__all__ = [
    "ExperimentConfig",
    "load_config",
    "preset",
    "PRESETS",
    "run_experiment",
    "write_run_csv",
    "write_aggregate_csv",
    "write_tables_json",
    "load_tables_json",
]

RUN_HEADER = "epoch,avg_test_return,win_rate"


@dataclass
class ExperimentConfig:
    name: str
    env: str
    env_params: dict = field(default_factory=dict)
    algorithms: list = field(default_factory=list)  # list[LearnerConfig]
    seeds: list = field(default_factory=lambda: [0])
    epochs: int = 1000
    eval_every: int = 0
    eval_games: int = 50
    out_dir: str = "results"

    def __post_init__(self):
        if not self.seeds:
            raise ValueError("config field 'seeds': need at least one seed")
        if self.eval_games < 1:
            raise ValueError("config field 'eval_games': must be at least 1")
        if not self.algorithms:
            raise ValueError("config field 'algorithms': need at least one algorithm")


def _exploration_from(doc: dict) -> Exploration:
    return Exploration(
        kind=doc.get("kind", "epsilon"),
        start=float(doc.get("start", 1.0)),
        floor=float(doc.get("floor", 0.05)),
        decay_epochs=float(doc.get("decay_epochs", 2e5)),
    )


def _learner_from(doc: dict) -> LearnerConfig:
    known = {"algorithm", "mu", "alpha", "small_step_ratio", "buffer_capacity",
             "batch_size", "updates_per_epoch", "games_per_epoch", "target_period",
             "gamma", "exploration"}
    unknown = set(doc) - known
    if unknown:
        raise ValueError(f"config field 'algorithms': unknown keys {sorted(unknown)}")
    if "algorithm" not in doc:
        raise ValueError("config field 'algorithms[].algorithm': missing")
    kwargs = {k: v for k, v in doc.items() if k not in ("exploration",)}
    kwargs["exploration"] = _exploration_from(doc.get("exploration", {}))
    return LearnerConfig(**kwargs)


def load_config(path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    for fieldname in ("name", "env", "algorithms"):
        if fieldname not in doc:
            raise ValueError(f"config field '{fieldname}': missing")
    if doc["env"] not in envs.BUILTIN_ENVS:
        raise ValueError(f"config field 'env': unknown environment {doc['env']!r}")
    return ExperimentConfig(
        name=doc["name"],
        env=doc["env"],
        env_params=doc.get("env_params", {}),
        algorithms=[_learner_from(a) for a in doc["algorithms"]],
        seeds=[int(s) for s in doc.get("seeds", [0])],
        epochs=int(doc.get("epochs", 1000)),
        eval_every=int(doc.get("eval_every", 0)),
        eval_games=int(doc.get("eval_games", 50)),
        out_dir=doc.get("out_dir", "results"),
    )


def _preset_exp1(seeds=None) -> ExperimentConfig:
    """Matrix game, uniform exploration, online updates."""
    uniform = Exploration(kind="uniform")
    mk = lambda algo: LearnerConfig(algorithm=algo, mu=0.1, alpha=1.0,
                                    exploration=uniform, gamma=0.9)
    return ExperimentConfig(
        name="exp1",
        env="matrix",
        algorithms=[mk("ltql"), mk("distq"), mk("iql")],
        seeds=list(seeds) if seeds is not None else list(range(20)),
        epochs=5000,
        eval_every=100,
        eval_games=50,
    )


def _preset_exp2(seeds=None) -> ExperimentConfig:
    """Button grid, decaying epsilon exploration, online updates."""
    eps = Exploration(kind="epsilon", start=1.0, floor=0.05, decay_epochs=2e5)
    mk = lambda algo: LearnerConfig(algorithm=algo, mu=0.025, alpha=1.0,
                                    small_step_ratio=0.4, exploration=eps, gamma=0.9)
    return ExperimentConfig(
        name="exp2",
        env="buttongrid",
        algorithms=[mk("ltql"), mk("iql"), mk("distq"), mk("hystq")],
        seeds=list(seeds) if seeds is not None else list(range(20)),
        epochs=200_000,
        eval_every=4000,
        eval_games=50,
    )


PRESETS = {"exp1": _preset_exp1, "exp2": _preset_exp2}


def preset(name: str, seeds=None) -> ExperimentConfig:
    try:
        return PRESETS[name](seeds)
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}") from None


# ---------------------------------------------------------------------------
# Execution.  The worker takes plain picklable payloads so runs can fan out
# across processes; per-run determinism comes from the derived seed streams,
# so results are independent of scheduling.
# ---------------------------------------------------------------------------

def _run_task(payload) -> RunRecord:
    env_name, env_params, learner_doc, seed, epochs, eval_every, eval_games = payload
    env = envs.BUILTIN_ENVS[env_name](**env_params)
    cfg_doc = dict(learner_doc)
    expl = cfg_doc.pop("exploration")
    cfg = LearnerConfig(exploration=Exploration(**expl), **cfg_doc)
    return train(env, cfg, seed, epochs, eval_every=eval_every, eval_games=eval_games)


def _payloads(config: ExperimentConfig):
    out = []
    for cfg in config.algorithms:
        doc = asdict(cfg)
        for seed in config.seeds:
            out.append((config.env, config.env_params, doc, seed,
                        config.epochs, config.eval_every, config.eval_games))
    return out


def run_experiment(config: ExperimentConfig, workers: int = 1, write: bool = True):
    """Train every (algorithm, seed) pair; returns records grouped by algorithm.

    With workers > 1 runs execute in separate processes; files are written
    only after all runs finish, in a fixed order.
    """
    payloads = _payloads(config)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_task, payloads))
    else:
        records = [_run_task(p) for p in payloads]

    grouped: dict[str, list[RunRecord]] = {}
    for rec in records:
        grouped.setdefault(rec.algorithm, []).append(rec)

    if write:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for algo, recs in grouped.items():
            for rec in recs:
                stem = f"{config.name}_{algo}_seed{rec.seed}"
                write_run_csv(rec, out / f"{stem}.csv")
                write_tables_json(rec, out / f"{stem}_tables.json")
            write_aggregate_csv(recs, out / f"{config.name}_{algo}_aggregate.csv")
    return grouped


def write_run_csv(record: RunRecord, path) -> None:
    lines = [RUN_HEADER]
    for epoch, ret, win in record.rows:
        lines.append(f"{epoch},{ret!r},{win!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_aggregate_csv(records, path) -> None:
    """Per-epoch mean/min/max across seeds (the quantities behind shaded bands)."""
    header = ("epoch,avg_test_return_mean,avg_test_return_min,avg_test_return_max,"
              "win_rate_mean,win_rate_min,win_rate_max")
    by_epoch: dict[int, list] = {}
    for rec in records:
        for epoch, ret, win in rec.rows:
            by_epoch.setdefault(epoch, []).append((ret, win))
    lines = [header]
    for epoch in sorted(by_epoch):
        rets = [r for r, _ in by_epoch[epoch]]
        wins = [w for _, w in by_epoch[epoch]]
        mean_r = sum(rets) / len(rets)
        mean_w = sum(wins) / len(wins)
        lines.append(f"{epoch},{mean_r!r},{min(rets)!r},{max(rets)!r},"
                     f"{mean_w!r},{min(wins)!r},{max(wins)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def _tables_payload(tables: dict):
    # Observation keys may be ints or tuples; store as [key, row] pairs.
    return {name: [[[list(k) if isinstance(k, tuple) else k, v] for k, v in agent.items()]
                   for agent in agents]
            for name, agents in tables.items()}


def write_tables_json(record: RunRecord, path) -> None:
    # wall_clock stays off the disk payload: repeated runs must be byte-identical.
    doc = {
        "algorithm": record.algorithm,
        "seed": record.seed,
        "streams": record.streams,
        "tables": _tables_payload(record.final_tables),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_tables_json(path) -> dict:
    """Load a run's final tables; observation keys come back as ints/tuples."""
    with open(path) as fh:
        doc = json.load(fh)
    out = {}
    for name, agents in doc["tables"].items():
        out[name] = [{(tuple(k) if isinstance(k, list) else k): v for k, v in agent}
                     for agent in agents]
    doc["tables"] = out
    return doc
