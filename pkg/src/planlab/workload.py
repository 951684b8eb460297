"""Workload generation, experiment orchestration, and plot-ready reports.

Three canned experiments cover the interesting comparisons:

  selection  -- train the bootstrap network on conjunctive-selection queries
                and track its relative error per epoch against the classical
                independence estimator (which provably misestimates the
                correlated default dataset).
  combined   -- train the full recursive model on selection+join sequences
                and dump (true, predicted) scatters per stage.
  planner    -- train a Q-learning agent per query and compare its greedy
                plan cost against the classical greedy plan and the
                exhaustive optimum.

Everything is driven by one master seed; reruns are byte-identical.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import yaml

from .agent import AgentConfig, best_plan, exhaustive_optimum, run_training
from .baseline import baseline_greedy_plan
from .catalog import Catalog, build_db_vector
from .data import (
    Relation,
    SyntheticSpec,
    gen_database,
    load_csv,
    parse_synthetic_spec,
    write_csv,
)
from .errors import ConfigError
from .executor import CardinalityOracle, plan_cost, stage_cardinalities, stage_input_sizes
from .models import (
    CardinalityModel,
    SequenceExample,
    build_model,
    save_model,
    stage_predictions,
    train_combined,
)
from .query import (
    Action,
    JoinAction,
    QuerySpec,
    Selection,
    SelectionAction,
    action_from_dict,
    action_to_dict,
    query_from_dict,
    query_to_dict,
)

EXPERIMENTS = ("selection", "combined", "planner")
WORKLOAD_KINDS = ("selection", "selection-join")
METRIC_FLOOR = 1.0


@dataclass(frozen=True)
class WorkloadSpec:
    kind: str
    count: int
    train_fraction: float
    m: int = 1
    relation: str | None = None
    attributes: tuple[str, ...] | None = None
    join: tuple[str, str] | None = None  # ("rel.attr", "rel.attr")
    seed: int = 0

    def __post_init__(self):
        if self.kind not in WORKLOAD_KINDS:
            raise ConfigError(f"workload kind must be one of {WORKLOAD_KINDS}")
        if self.count <= 0:
            raise ConfigError("workload count must be positive")
        if not 0 < self.train_fraction < 1:
            raise ConfigError("train_fraction must be in (0, 1)")
        if self.m < 1:
            raise ConfigError("m must be >= 1")
        if self.attributes is not None and len(self.attributes) != self.m:
            raise ConfigError("attributes, when fixed, must list exactly m names")


@dataclass
class Workload:
    train_queries: list[QuerySpec]
    test_queries: list[QuerySpec]
    train_examples: list[SequenceExample]
    test_examples: list[SequenceExample]


def gen_workload(
    spec: WorkloadSpec, db: Mapping[str, Relation], catalog: Catalog
) -> Workload:
    """Random queries with oracle labels, split train/test by position.

    Selection bounds are drawn uniformly from each attribute's observed value
    set. Selection-join queries filter one relation, then join it to the
    other endpoint of the configured (or first declared) join predicate.
    """
    rng = np.random.default_rng(spec.seed)
    join_pred = None
    if spec.kind == "selection-join":
        if spec.join is not None:
            join_pred = catalog._resolve_join_key(*spec.join)
            if join_pred not in catalog.join_predicates:
                raise ConfigError(f"join {spec.join} is not a declared join key")
        elif catalog.join_predicates:
            join_pred = catalog.join_predicates[0]
        else:
            raise ConfigError("selection-join workload needs a declared join key")
    rel_name = spec.relation
    if rel_name is None:
        rel_name = join_pred.left_rel if join_pred else next(iter(db))
    if rel_name not in db:
        raise ConfigError(f"workload relation {rel_name!r} not in database")
    rel = db[rel_name]
    if join_pred is not None and rel_name not in join_pred.relations:
        raise ConfigError(f"relation {rel_name!r} is not an endpoint of {join_pred}")
    candidates = list(spec.attributes or rel.attributes)
    if join_pred is not None and spec.attributes is None:
        join_attr = join_pred.endpoint(rel_name)
        candidates = [a for a in candidates if a != join_attr] or candidates
    for a in candidates:
        if not rel.has_attribute(a):
            raise ConfigError(f"attribute {a!r} not in relation {rel_name!r}")
    if spec.m > len(candidates):
        raise ConfigError(
            f"m={spec.m} exceeds the {len(candidates)} candidate attributes of {rel_name!r}"
        )
    values = {a: np.unique(rel.column(a)) for a in candidates}

    oracle = CardinalityOracle(db)
    queries: list[QuerySpec] = []
    examples: list[SequenceExample] = []
    for _ in range(spec.count):
        if spec.attributes is not None:
            attrs = list(spec.attributes)
        else:
            idx = rng.choice(len(candidates), size=spec.m, replace=False)
            attrs = sorted(candidates[int(i)] for i in idx)
        preds = tuple(
            (a, float(values[a][int(rng.integers(values[a].size))])) for a in attrs
        )
        actions: list[Action] = [SelectionAction(rel_name, preds)]
        rels = {rel_name}
        joins: list = []
        if join_pred is not None:
            actions.append(JoinAction(join_pred))
            rels.update(join_pred.relations)
            joins.append(join_pred)
        q = QuerySpec(
            frozenset(rels),
            tuple(Selection(rel_name, a, v) for a, v in preds),
            tuple(joins),
        )
        labels = stage_cardinalities(db, q, actions, oracle)
        sizes = stage_input_sizes(db, q, actions, oracle)
        queries.append(q)
        examples.append(
            SequenceExample(
                actions=tuple(actions),
                labels=tuple(float(l) for l in labels),
                input_sizes=tuple(max(s, 1.0) for s in sizes),
            )
        )
    n_train = int(spec.count * spec.train_fraction)
    return Workload(
        train_queries=queries[:n_train],
        test_queries=queries[n_train:],
        train_examples=examples[:n_train],
        test_examples=examples[n_train:],
    )


def gen_planner_queries(
    catalog: Catalog,
    count: int,
    seed: int,
    n_relations: int = 3,
) -> list[QuerySpec]:
    """Random join-tree queries grown by walking the declared join graph,
    with one ranged filter per relation on a random non-key attribute."""
    if not catalog.join_predicates:
        raise ConfigError("planner queries need declared join keys")
    rng = np.random.default_rng(seed)
    incident: dict[str, list] = {}
    for p in catalog.join_predicates:
        incident.setdefault(p.left_rel, []).append(p)
        incident.setdefault(p.right_rel, []).append(p)
    join_attrs = {
        (r, p.endpoint(r)) for p in catalog.join_predicates for r in p.relations
    }
    rel_names = sorted(incident)
    queries: list[QuerySpec] = []
    attempts = 0
    while len(queries) < count:
        attempts += 1
        if attempts > 50 * count:
            raise ConfigError(
                f"could not grow {count} join trees of {n_relations} relations "
                "from the declared join keys"
            )
        start = rel_names[int(rng.integers(len(rel_names)))]
        rels = {start}
        joins: list = []
        while len(rels) < n_relations:
            frontier = [
                p
                for r in rels
                for p in incident[r]
                if len(p.relations - rels) == 1 and p not in joins
            ]
            if not frontier:
                break
            joins.append(frontier[int(rng.integers(len(frontier)))])
            rels |= joins[-1].relations
        if len(rels) < n_relations:
            continue
        sels = []
        for r in sorted(rels):
            options = [
                a for a in catalog.relations[r].attributes if (r, a) not in join_attrs
            ]
            if not options:
                continue
            attr = options[int(rng.integers(len(options)))]
            vals = np.unique(catalog.relations[r].column(attr))
            sels.append(Selection(r, attr, float(vals[int(rng.integers(vals.size))])))
        q = QuerySpec(frozenset(rels), tuple(sels), tuple(joins))
        q.validate(catalog.relations)
        queries.append(q)
    return queries


# ---------------------------------------------------------------------------
# Built-in databases

def default_database_config(experiment: str) -> tuple[list[SyntheticSpec], list[tuple[str, str]]]:
    """The synthetic database each experiment uses when none is supplied."""
    if experiment == "selection":
        specs = [
            parse_synthetic_spec(
                {
                    "name": "facts",
                    "rows": 10000,
                    "columns": [
                        {"name": "a", "rule": "uniform", "low": 0, "high": 999},
                        {"name": "b", "rule": "fdep", "source": "a", "noise": 0},
                        {"name": "c", "rule": "uniform", "low": 0, "high": 999},
                    ],
                }
            )
        ]
        return specs, []
    if experiment == "combined":
        specs = [
            parse_synthetic_spec(
                {
                    "name": "orders",
                    "rows": 8000,
                    "columns": [
                        {"name": "amount", "rule": "uniform", "low": 0, "high": 999},
                        {"name": "qty", "rule": "uniform", "low": 0, "high": 99},
                        {"name": "cust", "rule": "zipf", "s": 1.1, "values": 200},
                    ],
                }
            ),
            parse_synthetic_spec(
                {
                    "name": "customers",
                    "rows": 500,
                    "columns": [
                        {"name": "cust_id", "rule": "uniform", "low": 0, "high": 199},
                        {"name": "region", "rule": "uniform", "low": 0, "high": 9},
                    ],
                }
            ),
        ]
        return specs, [("orders.cust", "customers.cust_id")]
    if experiment == "planner":
        specs = [
            parse_synthetic_spec(
                {
                    "name": "r0",
                    "rows": 400,
                    "columns": [
                        {"name": "v0", "rule": "uniform", "low": 0, "high": 99},
                        {"name": "k0", "rule": "zipf", "s": 1.1, "values": 50},
                    ],
                }
            ),
            parse_synthetic_spec(
                {
                    "name": "r1",
                    "rows": 300,
                    "columns": [
                        {"name": "v1", "rule": "uniform", "low": 0, "high": 99},
                        {"name": "k0", "rule": "uniform", "low": 0, "high": 49},
                        {"name": "k1", "rule": "zipf", "s": 1.2, "values": 40},
                    ],
                }
            ),
            parse_synthetic_spec(
                {
                    "name": "r2",
                    "rows": 500,
                    "columns": [
                        {"name": "v2", "rule": "uniform", "low": 0, "high": 99},
                        {"name": "k1", "rule": "uniform", "low": 0, "high": 39},
                    ],
                }
            ),
        ]
        return specs, [("r0.k0", "r1.k0"), ("r1.k1", "r2.k1")]
    raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {experiment!r}")


# ---------------------------------------------------------------------------
# Database persistence (CSV directory + schema document)

def save_database(
    out_dir: str | Path, db: Mapping[str, Relation], join_keys: Sequence[tuple[str, str]]
) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    schema = {"relations": [], "join_keys": [list(j) for j in join_keys]}
    for name, rel in db.items():
        write_csv(rel, out / f"{name}.csv")
        schema["relations"].append(
            {"name": name, "file": f"{name}.csv", "attributes": list(rel.attributes)}
        )
    with open(out / "schema.yaml", "w", encoding="utf-8") as f:
        yaml.safe_dump(schema, f, sort_keys=False)


def load_database(dir_path: str | Path) -> tuple[dict[str, Relation], list[tuple[str, str]]]:
    root = Path(dir_path)
    schema_path = root / "schema.yaml"
    if not schema_path.exists():
        raise ConfigError(f"no schema.yaml in {root}")
    with open(schema_path, encoding="utf-8") as f:
        schema = yaml.safe_load(f)
    db: dict[str, Relation] = {}
    for entry in schema.get("relations", []):
        db[entry["name"]] = load_csv(
            root / entry["file"], entry["name"], entry["attributes"]
        )
    join_keys = [tuple(j) for j in schema.get("join_keys", [])]
    return db, join_keys


# ---------------------------------------------------------------------------
# Workload persistence (JSONL)

def save_workload(path: str | Path, queries: Sequence[QuerySpec],
                  examples: Sequence[SequenceExample]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for q, ex in zip(queries, examples):
            rec = {
                "query": query_to_dict(q),
                "actions": [action_to_dict(a) for a in ex.actions],
                "labels": list(ex.labels),
                "input_sizes": list(ex.input_sizes),
            }
            f.write(json.dumps(rec, sort_keys=True) + "\n")


def load_workload(path: str | Path) -> tuple[list[QuerySpec], list[SequenceExample]]:
    queries, examples = [], []
    with open(path, encoding="utf-8") as f:
        for line in f:
            rec = json.loads(line)
            queries.append(query_from_dict(rec["query"]))
            examples.append(
                SequenceExample(
                    actions=tuple(action_from_dict(a) for a in rec["actions"]),
                    labels=tuple(float(x) for x in rec["labels"]),
                    input_sizes=tuple(float(x) for x in rec["input_sizes"]),
                )
            )
    return queries, examples


# ---------------------------------------------------------------------------
# Metrics

def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Spearman rank correlation with average ranks for ties."""
    if len(xs) != len(ys) or len(xs) < 2:
        raise ConfigError("spearman needs two equally long sequences (n >= 2)")
    rx = _average_ranks(np.asarray(xs, dtype=np.float64))
    ry = _average_ranks(np.asarray(ys, dtype=np.float64))
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    denom = np.sqrt((rx * rx).sum() * (ry * ry).sum())
    if denom == 0:
        return 0.0
    return float((rx * ry).sum() / denom)


def _average_ranks(v: np.ndarray) -> np.ndarray:
    order = np.argsort(v, kind="stable")
    ranks = np.empty(v.size, dtype=np.float64)
    i = 0
    while i < v.size:
        j = i
        while j + 1 < v.size and v[order[j + 1]] == v[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def relative_errors(pairs: Sequence[tuple[float, float]]) -> np.ndarray:
    return np.asarray(
        [abs(pred - truth) / max(truth, METRIC_FLOOR) for truth, pred in pairs]
    )


@dataclass
class MetricsReport:
    manifest: dict
    epoch_rows: list[tuple] = field(default_factory=list)
    # (epoch, split, estimator, mean_rel_err, median_rel_err, std_rel_err)
    scatter: dict[str, list[tuple[float, float]]] = field(default_factory=dict)
    planner_rows: list[tuple] = field(default_factory=list)
    # (query_id, agent_cost, baseline_cost, optimum_cost)
    summary: dict = field(default_factory=dict)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_report(report: MetricsReport, out_dir: str | Path) -> None:
    """Emit manifest, per-epoch metrics, scatters, planner rows, summary."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "manifest.json", "w", encoding="utf-8") as f:
        json.dump(report.manifest, f, sort_keys=True, indent=2)
        f.write("\n")
    if report.epoch_rows:
        _write_csv(
            out / "metrics.csv",
            ["epoch", "split", "estimator", "mean_rel_err", "median_rel_err", "std_rel_err"],
            report.epoch_rows,
        )
    for stage, pairs in report.scatter.items():
        _write_csv(out / f"scatter_{stage}.csv", ["true", "predicted"], pairs)
    if report.planner_rows:
        _write_csv(
            out / "planner.csv",
            ["query_id", "agent_cost", "baseline_cost", "optimum_cost"],
            report.planner_rows,
        )
    with open(out / "summary.json", "w", encoding="utf-8") as f:
        json.dump(report.summary, f, sort_keys=True, indent=2)
        f.write("\n")


# ---------------------------------------------------------------------------
# Experiment configuration and runners

@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seed: int = 7
    out_dir: str | None = None
    db_dir: str | None = None  # load a CSV database instead of synthesizing
    db_config: str | None = None  # YAML generation config
    buckets: int = 16
    # workload
    count: int = 0  # 0 -> experiment default
    m: int = 0
    train_fraction: float = 0.8
    relation: str | None = None
    attributes: tuple[str, ...] | None = None
    # model
    epochs: int = 20
    lr: float = 0.01
    init_hidden: int = 50
    state_dim: int = 64
    transition_hidden: int = 64
    readout_hidden: int = 32
    mode: str = "selectivity"
    loss_floor: float = 1.0
    # planner
    episodes: int = 5000
    reward_mode: str = "true-cardinality"
    n_relations: int = 3
    alpha: float = 0.5
    gamma: float = 1.0
    epsilon_end: float = 0.05

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(
                f"experiment: must be one of {EXPERIMENTS}, got {self.experiment!r}"
            )
        if self.epochs < 0:
            raise ConfigError("epochs: must be non-negative")
        if self.lr <= 0:
            raise ConfigError("lr: must be positive")
        if self.count < 0:
            raise ConfigError("count: must be non-negative")
        if self.train_fraction <= 0 or self.train_fraction >= 1:
            raise ConfigError("train_fraction: must be in (0, 1)")


_DEFAULT_COUNTS = {"selection": 5000, "combined": 2500, "planner": 20}
_DEFAULT_M = {"selection": 2, "combined": 1, "planner": 1}


def _resolve_database(config: ExperimentConfig):
    if config.db_dir:
        return load_database(config.db_dir)
    if config.db_config:
        from .data import parse_database_config

        specs, join_keys = parse_database_config(config.db_config)
    else:
        specs, join_keys = default_database_config(config.experiment)
    return gen_database(specs, config.seed), join_keys


def run_experiment(config: ExperimentConfig) -> MetricsReport:
    db, join_keys = _resolve_database(config)
    catalog = Catalog(db, join_keys, buckets=config.buckets)
    cfg_dict = {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(config).items()}
    cfg_dict.pop("out_dir", None)  # environment detail, not experiment identity
    manifest = {
        "config": cfg_dict,
        "seeds": {
            "data": config.seed,
            "workload": config.seed + 1,
            "model": config.seed + 2,
            "training": config.seed + 3,
            "agent": config.seed + 4,
            "queries": config.seed + 5,
        },
        "relations": {name: rel.row_count for name, rel in db.items()},
    }
    report = MetricsReport(manifest=manifest)
    if config.experiment == "selection":
        _run_selection(config, db, catalog, report)
    elif config.experiment == "combined":
        _run_combined(config, db, catalog, report)
    else:
        _run_planner(config, db, catalog, report)
    if config.out_dir:
        write_report(report, config.out_dir)
    return report


def _default_attributes(config: ExperimentConfig, db) -> tuple[str, ...] | None:
    """The selection experiment defaults to the correlated pair of the
    built-in dataset; anything user-supplied keeps its own choice."""
    if config.attributes is not None:
        return config.attributes
    if config.experiment == "selection" and not (config.db_dir or config.db_config):
        return ("a", "b")
    return None


def _make_model(config: ExperimentConfig, catalog: Catalog) -> CardinalityModel:
    return build_model(
        vector_dim=catalog.vector_dim,
        action_dim=catalog.action_dim,
        state_dim=config.state_dim,
        init_hidden=config.init_hidden,
        transition_hidden=config.transition_hidden,
        readout_hidden=config.readout_hidden,
        mode=config.mode,
        loss_floor=config.loss_floor,
        seed=config.seed + 2,
    )


def _baseline_pairs(catalog: Catalog, examples: Sequence[SequenceExample]):
    """Per stage pooled (true, baseline estimate) pairs."""
    from .baseline import estimate_stage_cardinalities

    pairs = []
    for ex in examples:
        ests = estimate_stage_cardinalities(catalog, ex.actions)
        pairs.extend(zip(ex.labels, ests))
    return pairs


def _error_row(epoch: int, split: str, estimator: str, errs: np.ndarray) -> tuple:
    return (
        epoch,
        split,
        estimator,
        float(errs.mean()),
        float(np.median(errs)),
        float(errs.std()),
    )


def _run_selection(config, db, catalog, report):
    spec = WorkloadSpec(
        kind="selection",
        count=config.count or _DEFAULT_COUNTS["selection"],
        train_fraction=config.train_fraction,
        m=config.m or _DEFAULT_M["selection"],
        relation=config.relation,
        attributes=_default_attributes(config, db),
        seed=config.seed + 1,
    )
    wl = gen_workload(spec, db, catalog)
    db_vec = build_db_vector(catalog)
    model = _make_model(config, catalog)
    baseline_errs = relative_errors(_baseline_pairs(catalog, wl.test_examples))
    model, metrics = train_combined(
        model,
        catalog,
        db_vec,
        wl.train_examples,
        epochs=config.epochs,
        lr=config.lr,
        seed=config.seed + 3,
        eval_set=wl.test_examples,
    )
    for row in metrics.rows:
        report.epoch_rows.append(
            (row.epoch, row.split, "learned", row.mean_rel_err,
             row.median_rel_err, row.std_rel_err)
        )
        if row.split == "test":
            report.epoch_rows.append(_error_row(row.epoch, "test", "baseline", baseline_errs))
    test_pairs = [
        p for stages in stage_predictions(model, catalog, db_vec, wl.test_examples)
        for p in stages
    ]
    learned_errs = relative_errors(test_pairs)
    report.summary = {
        "experiment": "selection",
        "skipped_examples": metrics.skipped_examples,
        "learned_median_rel_err": float(np.median(learned_errs)),
        "baseline_median_rel_err": float(np.median(baseline_errs)),
        "train_size": len(wl.train_examples),
        "test_size": len(wl.test_examples),
    }
    if config.out_dir:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        save_model(out / "model.npz", model)
    report.scatter["stage1"] = [(t, p) for t, p in test_pairs]


def _run_combined(config, db, catalog, report):
    spec = WorkloadSpec(
        kind="selection-join",
        count=config.count or _DEFAULT_COUNTS["combined"],
        train_fraction=config.train_fraction,
        m=config.m or _DEFAULT_M["combined"],
        relation=config.relation,
        attributes=config.attributes,
        seed=config.seed + 1,
    )
    wl = gen_workload(spec, db, catalog)
    db_vec = build_db_vector(catalog)
    model = _make_model(config, catalog)
    model, metrics = train_combined(
        model,
        catalog,
        db_vec,
        wl.train_examples,
        epochs=config.epochs,
        lr=config.lr,
        seed=config.seed + 3,
        eval_set=wl.test_examples,
    )
    for row in metrics.rows:
        report.epoch_rows.append(
            (row.epoch, row.split, "learned", row.mean_rel_err,
             row.median_rel_err, row.std_rel_err)
        )
    per_example = stage_predictions(model, catalog, db_vec, wl.test_examples)
    n_stages = max(len(stages) for stages in per_example)
    summary_corr = {}
    for s in range(n_stages):
        pairs = [stages[s] for stages in per_example if len(stages) > s]
        report.scatter[f"stage{s + 1}"] = pairs
        truths = [t for t, _ in pairs]
        preds = [p for _, p in pairs]
        summary_corr[f"stage{s + 1}_spearman"] = spearman(truths, preds)
    report.summary = {
        "experiment": "combined",
        "skipped_examples": metrics.skipped_examples,
        "train_size": len(wl.train_examples),
        "test_size": len(wl.test_examples),
        **summary_corr,
    }
    if config.out_dir:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        save_model(out / "model.npz", model)


def _run_planner(config, db, catalog, report):
    count = config.count or _DEFAULT_COUNTS["planner"]
    queries = gen_planner_queries(
        catalog, count, seed=config.seed + 5, n_relations=config.n_relations
    )
    model = None
    db_vec = build_db_vector(catalog)
    if config.reward_mode == "learned-cardinality":
        model = _train_planner_model(config, db, catalog, db_vec, queries)
    oracle = CardinalityOracle(db)
    matched = 0
    for qid, q in enumerate(queries):
        cfg = AgentConfig(
            alpha=config.alpha,
            gamma=config.gamma,
            epsilon_end=config.epsilon_end,
            episodes=config.episodes,
            reward_mode=config.reward_mode,
            q_mode="tabular",
            seed=config.seed + 4 + qid,
        )
        qf, _ = run_training(db, [q], catalog, cfg, model=model, db_vec=db_vec)
        episode = best_plan(qf, db, q, catalog, cfg, model=model, db_vec=db_vec)
        agent_cost = plan_cost(db, q, episode.actions, oracle)
        base_cost = plan_cost(db, q, baseline_greedy_plan(catalog, q), oracle)
        _, opt_cost = exhaustive_optimum(db, q, "true", catalog, oracle)
        report.planner_rows.append((qid, agent_cost, base_cost, opt_cost))
        if agent_cost <= opt_cost * 1.10 + 1e-12:
            matched += 1
    report.summary = {
        "experiment": "planner",
        "queries": len(queries),
        "within_10pct_of_optimum": matched,
        "episodes_per_query": config.episodes,
        "reward_mode": config.reward_mode,
    }


def _train_planner_model(config, db, catalog, db_vec, queries):
    """Fit the representation model on random legal orderings of the planner
    workload so learned rewards have something to read."""
    rng = np.random.default_rng(config.seed + 3)
    oracle = CardinalityOracle(db)
    examples = []
    from .query import advance, initial_prefix_state, legal_actions as legal

    for q in queries:
        for _ in range(8):
            state = initial_prefix_state(q)
            actions: list[Action] = []
            while True:
                options = legal(state)
                if not options:
                    break
                action = options[int(rng.integers(len(options)))]
                actions.append(action)
                state = advance(state, action)
            examples.append(
                SequenceExample(
                    actions=tuple(actions),
                    labels=tuple(
                        float(l) for l in stage_cardinalities(db, q, actions, oracle)
                    ),
                    input_sizes=tuple(
                        max(s, 1.0) for s in stage_input_sizes(db, q, actions, oracle)
                    ),
                )
            )
    model = _make_model(config, catalog)
    model, _ = train_combined(
        model,
        catalog,
        db_vec,
        examples,
        epochs=config.epochs,
        lr=config.lr,
        seed=config.seed + 3,
    )
    return model
