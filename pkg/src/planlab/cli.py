"""Command-line entry points.

Subcommands: gen-data, gen-workload, train, eval, plan, compare.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .agent import (
    AgentConfig,
    best_plan,
    exhaustive_optimum,
    render_plan,
    run_training,
    write_episode_log,
)
from .baseline import baseline_greedy_plan
from .catalog import Catalog, build_db_vector
from .data import gen_database, parse_database_config
from .errors import PlanLabError
from .executor import CardinalityOracle, plan_cost
from .models import load_model, stage_predictions
from .workload import (
    ExperimentConfig,
    MetricsReport,
    WorkloadSpec,
    gen_workload,
    load_database,
    load_workload,
    relative_errors,
    run_experiment,
    save_database,
    save_workload,
    write_report,
)
from .query import load_query


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=7, help="master seed")
    p.add_argument("--out", type=Path, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="planlab",
        description="Learned cardinality estimation and Q-learning join ordering, desk scale.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a synthetic database to CSV")
    p.add_argument("--config", type=Path, required=True, help="database YAML config")
    _add_common(p)

    p = sub.add_parser("gen-workload", help="generate a labeled query workload")
    p.add_argument("--db", type=Path, required=True, help="database directory")
    p.add_argument("--kind", choices=("selection", "selection-join"), default="selection")
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--m", type=int, default=1, help="attributes per conjunctive selection")
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--relation", help="target relation for selections")
    p.add_argument("--attributes", nargs="*", help="fixed selection attributes")
    p.add_argument("--buckets", type=int, default=16)
    _add_common(p)

    p = sub.add_parser("train", help="run a canned experiment")
    p.add_argument("--experiment", required=True,
                   choices=("selection", "combined", "planner"))
    p.add_argument("--db", type=Path, help="database directory (default: built-in synthetic)")
    p.add_argument("--db-config", type=Path, help="database YAML config to synthesize")
    p.add_argument("--count", type=int, default=0, help="workload size (0 = default)")
    p.add_argument("--m", type=int, default=0)
    p.add_argument("--train-fraction", type=float, default=0.8)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--hidden", type=int, default=50, help="bootstrap-net hidden width")
    p.add_argument("--state-dim", type=int, default=64)
    p.add_argument("--buckets", type=int, default=16)
    p.add_argument("--loss-floor", type=float, default=1.0)
    p.add_argument("--episodes", type=int, default=5000)
    p.add_argument("--reward-mode", default="true-cardinality",
                   choices=("learned-cardinality", "true-cardinality", "baseline-cost"))
    _add_common(p)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a saved workload")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--db", type=Path, required=True)
    p.add_argument("--workload", type=Path, required=True)
    p.add_argument("--buckets", type=int, default=16)
    _add_common(p)

    p = sub.add_parser("plan", help="plan one query with the Q-learning agent")
    p.add_argument("query", type=Path, help="query JSON file")
    p.add_argument("--db", type=Path, required=True)
    p.add_argument("--checkpoint", type=Path, help="model for learned rewards")
    p.add_argument("--reward-mode", default="true-cardinality",
                   choices=("learned-cardinality", "true-cardinality", "baseline-cost"))
    p.add_argument("--episodes", type=int, default=2000)
    p.add_argument("--buckets", type=int, default=16)
    p.add_argument("--episode-log", type=Path, help="write the training log as JSONL")
    _add_common(p)

    p = sub.add_parser("compare", help="agent vs classical greedy vs exhaustive optimum")
    p.add_argument("--db", type=Path, help="database directory (default: built-in synthetic)")
    p.add_argument("--count", type=int, default=20, help="number of random queries")
    p.add_argument("--episodes", type=int, default=5000)
    p.add_argument("--reward-mode", default="true-cardinality",
                   choices=("learned-cardinality", "true-cardinality", "baseline-cost"))
    _add_common(p)

    return parser


def _cmd_gen_data(args) -> int:
    specs, join_keys = parse_database_config(args.config)
    db = gen_database(specs, args.seed)
    out = args.out or Path("db")
    save_database(out, db, join_keys)
    for name, rel in db.items():
        print(f"{name}: {rel.row_count} rows x {len(rel.attributes)} columns")
    print(f"database written to {out}")
    return 0


def _cmd_gen_workload(args) -> int:
    db, join_keys = load_database(args.db)
    catalog = Catalog(db, join_keys, buckets=args.buckets)
    spec = WorkloadSpec(
        kind=args.kind,
        count=args.count,
        train_fraction=args.train_fraction,
        m=args.m,
        relation=args.relation,
        attributes=tuple(args.attributes) if args.attributes else None,
        seed=args.seed,
    )
    wl = gen_workload(spec, db, catalog)
    out = args.out or Path("workload")
    out.mkdir(parents=True, exist_ok=True)
    save_workload(out / "train.jsonl", wl.train_queries, wl.train_examples)
    save_workload(out / "test.jsonl", wl.test_queries, wl.test_examples)
    print(f"{len(wl.train_examples)} train / {len(wl.test_examples)} test -> {out}")
    return 0


def _cmd_train(args) -> int:
    config = ExperimentConfig(
        experiment=args.experiment,
        seed=args.seed,
        out_dir=str(args.out) if args.out else None,
        db_dir=str(args.db) if args.db else None,
        db_config=str(args.db_config) if args.db_config else None,
        buckets=args.buckets,
        count=args.count,
        m=args.m,
        train_fraction=args.train_fraction,
        epochs=args.epochs,
        lr=args.lr,
        init_hidden=args.hidden,
        state_dim=args.state_dim,
        loss_floor=args.loss_floor,
        episodes=args.episodes,
        reward_mode=args.reward_mode,
    )
    report = run_experiment(config)
    print(json.dumps(report.summary, sort_keys=True, indent=2))
    if args.out:
        print(f"reports written to {args.out}")
    return 0


def _cmd_eval(args) -> int:
    db, join_keys = load_database(args.db)
    catalog = Catalog(db, join_keys, buckets=args.buckets)
    model = load_model(args.checkpoint)
    queries, examples = load_workload(args.workload)
    db_vec = build_db_vector(catalog)
    pairs = [p for stages in stage_predictions(model, catalog, db_vec, examples) for p in stages]
    errs = relative_errors(pairs)
    summary = {
        "examples": len(examples),
        "mean_rel_err": float(errs.mean()),
        "median_rel_err": float(np.median(errs)),
        "std_rel_err": float(errs.std()),
    }
    print(json.dumps(summary, sort_keys=True, indent=2))
    if args.out:
        report = MetricsReport(manifest={"checkpoint": str(args.checkpoint)})
        report.scatter["eval"] = pairs
        report.summary = summary
        write_report(report, args.out)
    return 0


def _cmd_plan(args) -> int:
    db, join_keys = load_database(args.db)
    catalog = Catalog(db, join_keys, buckets=args.buckets)
    q = load_query(args.query)
    model = load_model(args.checkpoint) if args.checkpoint else None
    db_vec = build_db_vector(catalog)
    cfg = AgentConfig(
        episodes=args.episodes,
        reward_mode=args.reward_mode,
        seed=args.seed,
    )
    qf, log = run_training(
        db, [q], catalog, cfg, model=model, db_vec=db_vec,
        collect_log=args.episode_log is not None,
    )
    if args.episode_log:
        write_episode_log(args.episode_log, log)
    episode = best_plan(qf, db, q, catalog, cfg, model=model, db_vec=db_vec)
    oracle = CardinalityOracle(db)
    agent_cost = plan_cost(db, q, episode.actions, oracle)
    _, opt_cost = exhaustive_optimum(db, q, "true", catalog, oracle)
    print(render_plan(q, episode.actions))
    print(f"agent plan cost:   {agent_cost:.6f}")
    print(f"exhaustive optimum: {opt_cost:.6f}")
    return 0


def _cmd_compare(args) -> int:
    config = ExperimentConfig(
        experiment="planner",
        seed=args.seed,
        out_dir=str(args.out) if args.out else None,
        db_dir=str(args.db) if args.db else None,
        count=args.count,
        episodes=args.episodes,
        reward_mode=args.reward_mode,
    )
    report = run_experiment(config)
    print("query_id  agent      baseline   optimum")
    for qid, agent_cost, base_cost, opt_cost in report.planner_rows:
        print(f"{qid:>8}  {agent_cost:<9.4f}  {base_cost:<9.4f}  {opt_cost:<9.4f}")
    print(json.dumps(report.summary, sort_keys=True, indent=2))
    return 0


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "gen-workload": _cmd_gen_workload,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "plan": _cmd_plan,
    "compare": _cmd_compare,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except PlanLabError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
