"""Command-line front end.

Subcommands: train (run an experiment config or preset), dp-solve (joint
value iteration plus factored extraction on a finite environment or a JSON
MDP), dp-verify (Monte-Carlo operator ensembles against the closed-form
bounds, or the run-probability brute-force cross-check), bounds (print the
closed-form quantities for given parameters), and eval (greedy evaluation of
saved tables).  dp-verify exits nonzero when any comparison fails.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bounds as bnd
from . import envs, experiments, verify
from .dp import (
    check_factorization,
    count_optimal_policies,
    enumerate_optimal_policies,
    extract_factored_qstar,
    optimality_gap,
    solve_joint_optimal,
)
from .learners import ObsTable, evaluate_greedy
from .mdp import load_mdp_json, rng_stream


def _resolve_mdp(name_or_path: str, gamma: float):
    if Path(name_or_path).suffix == ".json" or Path(name_or_path).exists():
        return load_mdp_json(name_or_path)
    if name_or_path == "cowboy":
        raise SystemExit("the cowboy environment has continuous state and no tabular form")
    return envs.builtin_mdp(name_or_path, gamma)


def _cmd_dp_solve(args) -> int:
    mdp = _resolve_mdp(args.mdp, args.gamma)
    qjoint = solve_joint_optimal(mdp, tol=args.tol)
    total = count_optimal_policies(mdp, qjoint)
    policies = enumerate_optimal_policies(mdp, qjoint, limit=args.max_policies, truncate=True)
    gap = optimality_gap(mdp, qjoint)
    start_value = float(mdp.initial_dist @ qjoint.max(axis=1))
    print(f"states={mdp.num_states} joint_actions={mdp.num_actions} discount={mdp.discount}")
    print(f"optimal start value: {start_value!r}")
    print(f"optimal deterministic policies: {total}"
          + (f" (writing the first {len(policies)})" if total > len(policies) else ""))
    print(f"decision margin: {gap.value!r}" + (f" (tied states: {gap.tied_states})" if gap.tied_states else ""))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "qjoint.json", "w") as fh:
        json.dump(qjoint.tolist(), fh)
    reports = []
    certified = 0
    start = int(np.flatnonzero(mdp.initial_dist)[0])
    for i, pol in enumerate(policies):
        star = extract_factored_qstar(mdp, qjoint, pol, check=False)
        with open(out / f"qstar_{i}.json", "w") as fh:
            json.dump({"policy": pol.tolist(), "tables": [t.tolist() for t in star]}, fh)
        rep = check_factorization(mdp, qjoint, star)
        certified += rep.is_team_optimal
        reports.append({
            "policy": pol.tolist(),
            "max_match_violation": rep.max_match_violation,
            "greedy_violation_max": float(rep.greedy_violation.max()),
            "residual": rep.residual,
            "is_team_optimal": rep.is_team_optimal,
            "is_nash_fixed_point": rep.is_nash_fixed_point,
        })
        flag = "" if rep.is_team_optimal else "  [tie-break not operator-consistent]"
        print(f"qstar_{i}: " + "  ".join(str([round(float(v), 6) for v in t[start]]) for t in star) + flag)
    with open(out / "factorization_report.json", "w") as fh:
        json.dump(reports, fh, indent=1)
    print(f"certified team-optimal: {certified}/{len(policies)} written")
    print(f"wrote qjoint.json, {len(policies)} qstar files and factorization_report.json to {out}/")
    return 0


def _cmd_dp_verify(args) -> int:
    if args.mode == "runs-bruteforce":
        worst = verify.run_probability_crosscheck(args.max_tosses)
        ok = worst < 1e-12
        print(f"run-probability formula vs enumeration, tosses <= {args.max_tosses}: "
              f"max abs diff {worst:.3e}  [{'PASS' if ok else 'FAIL'}]")
        return 0 if ok else 1
    mdp = _resolve_mdp(args.mdp, args.gamma)
    report = verify.verify_operator_bounds(
        mdp, num_steps=args.steps, p=args.p, delta=args.delta,
        trials=args.trials, mode=args.mode, seed=args.seed, xi1=args.xi1)
    for line in report.lines():
        print(line)
    print("PASS" if report.passed else "FAIL")
    return 0 if report.passed else 1


def _cmd_bounds(args) -> int:
    try:
        n_o = bnd.overshoot_decay_steps(args.delta1, args.gamma, args.q_upper, args.min_max)
    except ValueError as err:
        raise SystemExit(f"delta1/q-upper/min-max: {err}")
    try:
        run_len = bnd.gap_close_steps(args.delta2, args.gamma, args.max_gap)
    except ValueError as err:
        raise SystemExit(f"delta2/max-gap: {err}")
    print(f"greedy draws needed (n_o): {n_o}")
    print(f"optimistic run needed (L): {run_len}")
    if n_o <= args.steps:
        exact = bnd.binomial_tail(args.steps, args.p, n_o)
        print(f"exact binomial tail P(more than {n_o} greedy draws in {args.steps}): {exact!r}")
        hoeff = bnd.hoeffding_lower_bound(args.steps, args.p, n_o)
        print(f"Hoeffding lower bound: {hoeff!r}" if hoeff is not None
              else f"Hoeffding lower bound: n/a (needs steps > n_o/p = {n_o / args.p:.1f})")
    else:
        print(f"binomial tail: n/a (n_o = {n_o} exceeds steps)")
    head = 1.0 - args.p
    if 1 <= max(run_len, 1) <= args.steps:
        eff = max(run_len, 1)
        exact_run = bnd.long_run_probability(args.steps, eff, head)
        print(f"exact run probability P(>= {eff} consecutive optimistic draws): {exact_run!r}")
        if args.p > 0.5:
            xi = args.xi1 if args.xi1 is not None else bnd.default_xi1(eff, head)
            try:
                lower = bnd.long_run_lower_bound(args.steps, eff, head, xi)
                print(f"run-length lower bound (xi1={xi!r}): {lower!r}")
            except ValueError as err:
                raise SystemExit(f"xi1: {err}")
        else:
            print("run-length lower bound: n/a (needs p > 0.5)")
    else:
        print("run probability: n/a (run length exceeds steps)")
    return 0


def _cmd_train(args) -> int:
    if args.preset:
        config = experiments.preset(args.preset)
    elif args.config:
        config = experiments.load_config(args.config)
    else:
        raise SystemExit("train needs --config PATH or --preset NAME")
    if args.seed is not None:
        config.seeds = [args.seed]
    if args.out:
        config.out_dir = args.out
    grouped = experiments.run_experiment(config, workers=args.workers)
    for algo, recs in grouped.items():
        finals = [rec.rows[-1][1] for rec in recs]
        print(f"{algo}: {len(recs)} runs, final return mean {sum(finals) / len(finals):.4f} "
              f"min {min(finals):.4f} max {max(finals):.4f}")
    print(f"wrote results to {config.out_dir}/")
    return 0


def _cmd_eval(args) -> int:
    doc = experiments.load_tables_json(args.tables)
    table_name = args.table if args.table else ("q_u" if "q_u" in doc["tables"] else "q")
    if table_name not in doc["tables"]:
        raise SystemExit(f"table {table_name!r} not in file (have {sorted(doc['tables'])})")
    env = envs.builtin_env(args.env)
    tables = []
    for agent_dict, n in zip(doc["tables"][table_name], env.action_counts):
        tab = ObsTable(agent_dict.keys(), n)
        for key, row in agent_dict.items():
            tab.rows[tab.index[key]] = list(row)
        tables.append(tab)
    rng = rng_stream(args.seed, "eval")
    ret, win = evaluate_greedy(env, tables, args.games, args.gamma, rng)
    print(f"greedy evaluation over {args.games} games: avg return {ret!r}, win rate {win!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="teamq",
                                     description="Tabular cooperative team Q-learning toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run an experiment config or preset")
    p.add_argument("--config", help="TOML experiment file")
    p.add_argument("--preset", choices=sorted(experiments.PRESETS), help="builtin experiment")
    p.add_argument("--seed", type=int, default=None, help="replace the config's seed list")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("dp-solve", help="joint value iteration + factored extraction")
    p.add_argument("mdp", help="builtin name (matrix, nashtrap, buttongrid) or JSON path")
    p.add_argument("--gamma", type=float, default=0.9, help="discount for builtin environments")
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--out", default="dp_out")
    p.add_argument("--max-policies", type=int, default=16)
    p.set_defaults(func=_cmd_dp_solve)

    p = sub.add_parser("dp-verify", help="Monte-Carlo operator checks vs closed-form bounds")
    p.add_argument("mdp", nargs="?", default="matrix", help="builtin name or JSON path")
    p.add_argument("--mode", choices=list(verify.MODES) + ["runs-bruteforce"], default="converge")
    p.add_argument("--steps", "-N", type=int, default=200)
    p.add_argument("-p", type=float, default=0.6)
    p.add_argument("--delta", type=float, default=1e-3)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gamma", type=float, default=0.9)
    p.add_argument("--xi1", type=float, default=None)
    p.add_argument("--max-tosses", type=int, default=12, help="for runs-bruteforce mode")
    p.set_defaults(func=_cmd_dp_verify)

    p = sub.add_parser("bounds", help="print the closed-form bound quantities")
    p.add_argument("--delta1", type=float, required=True)
    p.add_argument("--delta2", type=float, required=True)
    p.add_argument("-p", type=float, required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--q-upper", type=float, required=True)
    p.add_argument("--min-max", type=float, required=True)
    p.add_argument("--max-gap", type=float, required=True)
    p.add_argument("--xi1", type=float, default=None)
    p.add_argument("--steps", "-N", type=int, required=True)
    p.set_defaults(func=_cmd_bounds)

    p = sub.add_parser("eval", help="greedy evaluation of saved tables")
    p.add_argument("--tables", required=True, help="tables JSON written by train")
    p.add_argument("--env", required=True)
    p.add_argument("--table", default=None, help="table name (default: q_u if present, else q)")
    p.add_argument("--games", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gamma", type=float, default=0.9)
    p.set_defaults(func=_cmd_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
