"""Classical cardinality estimation: 1-D histograms plus uniformity and
independence assumptions, with the max-distinct rule for equi-joins.

This is the comparison baseline. Its errors on correlated data are the
motivating failure mode, so tests assert the *mis*estimates too.
"""

from __future__ import annotations

import math
from typing import Sequence

from .catalog import Catalog
from .errors import ContractViolation, SchemaError
from .query import Action, JoinAction, QuerySpec, SelectionAction


def selectivity_below(catalog: Catalog, rel: str, attr: str, bound: float) -> float:
    """Histogram mass with value <= bound, interpolating linearly inside the
    straddled bucket (uniformity within a bucket)."""
    if (rel, attr) not in catalog.stats:
        raise SchemaError(f"unknown attribute {rel}.{attr}")
    st = catalog.stats[(rel, attr)]
    if catalog.row_counts[rel] == 0:
        return 0.0
    if bound >= st.max:
        return 1.0
    if bound < st.min:
        return 0.0
    if st.max == st.min:  # single-point domain, bound < max already handled
        return 0.0
    buckets = st.histogram.size
    width = (st.max - st.min) / buckets
    i = min(int((bound - st.min) / width), buckets - 1)
    frac = (bound - (st.min + i * width)) / width
    return float(st.histogram[:i].sum() + st.histogram[i] * frac)


def estimate_selection(
    catalog: Catalog, rel: str, predicates: Sequence[tuple[str, float]]
) -> float:
    """|rel| times the product of per-attribute selectivities (independence)."""
    card = float(catalog.row_counts[rel])
    for attr, bound in predicates:
        card *= selectivity_below(catalog, rel, attr, bound)
    return card


def estimate_join(
    card_left: float,
    card_right: float,
    distinct_left: int,
    distinct_right: int,
) -> float:
    """Textbook equi-join estimate: |L| * |R| / max(d_L, d_R)."""
    if card_left == 0 or card_right == 0:
        return 0.0
    if distinct_left <= 0 or distinct_right <= 0:
        raise ContractViolation(
            "join estimate needs positive distinct counts for non-empty inputs"
        )
    return card_left * card_right / max(distinct_left, distinct_right)


def estimate_stage_cardinalities(
    catalog: Catalog, actions: Sequence[Action]
) -> list[float]:
    """Baseline estimate of each stage's intermediate size along a plan.

    Mirrors the executor's stage semantics: a selection stage estimates the
    filtered base table, a join stage combines the running estimates of the
    two components it connects.
    """
    size: dict[str, float] = {}  # relation -> estimated size of its component
    members: dict[str, set[str]] = {}
    out: list[float] = []
    for action in actions:
        if isinstance(action, SelectionAction):
            est = estimate_selection(catalog, action.relation, action.predicates)
            size[action.relation] = est
            members[action.relation] = {action.relation}
        else:
            pred = action.predicate
            sides = []
            for rel in sorted(pred.relations):
                if rel not in size:
                    size[rel] = float(catalog.row_counts[rel])
                    members[rel] = {rel}
                sides.append(rel)
            a, b = sides
            st_a = catalog.stats[(a, pred.endpoint(a))]
            st_b = catalog.stats[(b, pred.endpoint(b))]
            est = estimate_join(size[a], size[b], st_a.distinct_count, st_b.distinct_count)
            merged = members[a] | members[b]
            for rel in merged:
                size[rel] = est
                members[rel] = merged
        out.append(est)
    return out


def estimate_plan_cost(catalog: Catalog, actions: Sequence[Action]) -> float:
    return sum(math.log10(1 + max(c, 0.0)) for c in estimate_stage_cardinalities(catalog, actions))


def baseline_greedy_plan(catalog: Catalog, q: QuerySpec) -> list[Action]:
    """Classical-optimizer stand-in: at each step take the legal action whose
    baseline-estimated intermediate is smallest (ties by action order)."""
    from .query import advance, initial_prefix_state, legal_actions

    state = initial_prefix_state(q)
    plan: list[Action] = []
    while True:
        options = legal_actions(state)
        if not options:
            break
        scored = []
        for act in options:
            est = estimate_stage_cardinalities(catalog, plan + [act])[-1]
            scored.append((est, act.sort_key(), act))
        scored.sort(key=lambda x: (x[0], x[1]))
        chosen = scored[0][2]
        plan.append(chosen)
        state = advance(state, chosen)
    return plan
