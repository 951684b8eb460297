"""Exact query execution over in-memory relations.

`true_cardinality` is the ground-truth oracle: selections applied first, then
equi-joins folded with a sort/searchsorted hash-style join per component.
`nested_loop_cardinality` recomputes the same count with plain nested loops
and no join index; the two share nothing beyond the QuerySpec, so tests can
play them against each other.
"""

from __future__ import annotations

import math
from typing import Mapping, Sequence

import numpy as np

from .data import Relation
from .errors import InvalidQueryError
from .query import (
    Action,
    QuerySpec,
    SelectionAction,
    join_components,
    restrict_to,
    subquery_of,
    touched_component,
)


def _selected_indices(rel: Relation, selections) -> np.ndarray:
    mask = np.ones(rel.row_count, dtype=bool)
    for s in selections:
        mask &= rel.column(s.attribute) <= s.bound
    return np.nonzero(mask)[0]


def true_cardinality(db: Mapping[str, Relation], q: QuerySpec) -> int:
    """Exact result size of q: all selections, then all equi-joins.

    Accepts disconnected join graphs (mid-plan subqueries); components
    multiply, which is the cross-product semantics of a predicate-free pair.
    """
    if not q.relations:
        raise InvalidQueryError("cardinality of a query with no relations is undefined")
    q.validate(db, require_connected=False)
    total = 1
    for comp in join_components(q):
        total *= _component_cardinality(db, restrict_to(q, comp))
        if total == 0:
            return 0
    return total


def _component_cardinality(db: Mapping[str, Relation], q: QuerySpec) -> int:
    sels: dict[str, list] = {r: [] for r in q.relations}
    for s in q.selections:
        sels[s.relation].append(s)
    rows = {r: _selected_indices(db[r], sels[r]) for r in q.relations}
    order, preds = _fold_order(q)
    first = order[0]
    chain_rels = [first]
    chain_idx = [rows[first]]  # parallel row-index arrays, one per chain relation
    for rel, pred in zip(order[1:], preds):
        anchor = pred.other(rel)
        pos = chain_rels.index(anchor)
        left_keys = db[anchor].column(pred.endpoint(anchor))[chain_idx[pos]]
        right_idx = rows[rel]
        right_keys = db[rel].column(pred.endpoint(rel))[right_idx]
        keep_left, keep_right = _equi_match(left_keys, right_keys)
        chain_idx = [idx[keep_left] for idx in chain_idx]
        chain_idx.append(right_idx[keep_right])
        chain_rels.append(rel)
        if chain_idx[0].size == 0:
            return 0
    return int(chain_idx[0].size)


def _fold_order(q: QuerySpec):
    """BFS order over the join tree plus the predicate introducing each step."""
    if len(q.relations) == 1:
        return [next(iter(q.relations))], []
    adj: dict[str, list] = {r: [] for r in q.relations}
    for j in q.joins:
        adj[j.left_rel].append(j)
        adj[j.right_rel].append(j)
    start = sorted(q.relations)[0]
    order, preds, seen = [start], [], {start}
    frontier = [start]
    while frontier:
        nxt = []
        for rel in frontier:
            for j in sorted(adj[rel]):
                other = j.other(rel)
                if other not in seen:
                    seen.add(other)
                    order.append(other)
                    preds.append(j)
                    nxt.append(other)
        frontier = nxt
    return order, preds


def _equi_match(left_keys: np.ndarray, right_keys: np.ndarray):
    """All (i, j) index pairs with left_keys[i] == right_keys[j], expanded."""
    if left_keys.size == 0 or right_keys.size == 0:
        empty = np.zeros(0, dtype=np.intp)
        return empty, empty
    order = np.argsort(right_keys, kind="stable")
    sorted_keys = right_keys[order]
    lo = np.searchsorted(sorted_keys, left_keys, side="left")
    hi = np.searchsorted(sorted_keys, left_keys, side="right")
    counts = hi - lo
    total = int(counts.sum())
    if total == 0:
        empty = np.zeros(0, dtype=np.intp)
        return empty, empty
    keep_left = np.repeat(np.arange(left_keys.size), counts)
    starts = np.repeat(lo, counts)
    offsets = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    keep_right = order[starts + offsets]
    return keep_left, keep_right


def nested_loop_cardinality(db: Mapping[str, Relation], q: QuerySpec) -> int:
    """Reference count via nested loops over plain Python lists.

    Filters rows per relation by direct comparison, then descends relation by
    relation checking every join predicate as soon as both sides are bound.
    No hashing, no sorting: independent of the true_cardinality code path.
    """
    if not q.relations:
        raise InvalidQueryError("cardinality of a query with no relations is undefined")
    q.validate(db, require_connected=False)
    rels = sorted(q.relations)
    sel_by_rel: dict[str, list] = {r: [] for r in rels}
    for s in q.selections:
        sel_by_rel[s.relation].append(s)
    surviving: list[list[dict[str, float]]] = []
    for r in rels:
        rel = db[r]
        keep = []
        for i in range(rel.row_count):
            row = {a: float(rel.columns[k][i]) for k, a in enumerate(rel.attributes)}
            if all(row[s.attribute] <= s.bound for s in sel_by_rel[r]):
                keep.append(row)
        surviving.append(keep)
    # Predicates checkable once the i-th relation is bound.
    checks_at: list[list] = [[] for _ in rels]
    for j in q.joins:
        depth = max(rels.index(j.left_rel), rels.index(j.right_rel))
        checks_at[depth].append(j)

    def descend(depth: int, bound: list) -> int:
        if depth == len(rels):
            return 1
        count = 0
        for row in surviving[depth]:
            ok = True
            for j in checks_at[depth]:
                lrow = row if rels.index(j.left_rel) == depth else bound[rels.index(j.left_rel)]
                rrow = row if rels.index(j.right_rel) == depth else bound[rels.index(j.right_rel)]
                if lrow[j.left_attr] != rrow[j.right_attr]:
                    ok = False
                    break
            if ok:
                bound.append(row)
                count += descend(depth + 1, bound)
                bound.pop()
        return count

    return descend(0, [])


class CardinalityOracle:
    """Memoizing wrapper over true_cardinality, keyed by canonical subquery."""

    def __init__(self, db: Mapping[str, Relation]):
        self.db = db
        self._cache: dict = {}

    def cardinality(self, q: QuerySpec) -> int:
        key = (q.relations, tuple(sorted(q.selections)), tuple(sorted(q.joins)))
        hit = self._cache.get(key)
        if hit is None:
            hit = self._cache[key] = true_cardinality(self.db, q)
        return hit


def stage_cardinalities(
    db: Mapping[str, Relation],
    q: QuerySpec,
    actions: Sequence[Action],
    oracle: CardinalityOracle | None = None,
) -> list[int]:
    """Per-stage intermediate-result sizes along an action sequence.

    Stage t is the cardinality of the join component produced by action t:
    the filtered base relation for a selection, the left-deep chain so far
    for a join.
    """
    oracle = oracle or CardinalityOracle(db)
    return [
        oracle.cardinality(touched_component(q, actions[: t + 1]))
        for t in range(len(actions))
    ]


def stage_input_sizes(
    db: Mapping[str, Relation],
    q: QuerySpec,
    actions: Sequence[Action],
    oracle: CardinalityOracle | None = None,
) -> list[float]:
    """Input size of each stage: the base-table size for a selection, the
    product of the two joined components' true sizes for a join."""
    oracle = oracle or CardinalityOracle(db)
    sizes: list[float] = []
    for t, action in enumerate(actions):
        if isinstance(action, SelectionAction):
            sizes.append(float(db[action.relation].row_count))
        else:
            before = subquery_of(q, actions[:t])
            size = 1.0
            for rel in action.predicate.relations:
                size *= _side_size(db, before, rel, oracle)
            sizes.append(size)
    return sizes


def _side_size(db, before: QuerySpec, rel: str, oracle: CardinalityOracle) -> float:
    if rel not in before.relations:
        return float(db[rel].row_count)
    for comp in join_components(before):
        if rel in comp:
            return float(oracle.cardinality(restrict_to(before, comp)))
    raise AssertionError("unreachable")


def plan_cost(
    db: Mapping[str, Relation],
    q: QuerySpec,
    actions: Sequence[Action],
    oracle: CardinalityOracle | None = None,
) -> float:
    """Sum of log10(1 + size) over every intermediate the plan materializes."""
    return sum(math.log10(1 + c) for c in stage_cardinalities(db, q, actions, oracle))
