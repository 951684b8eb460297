"""Query shapes and the action algebra over them.

A QuerySpec is a set of relations, ranged selections (attr <= bound, at most
one per attribute) and equi-join predicates whose graph must form a spanning
tree over the relations. Plans consume the query one action at a time: a
conjunctive selection over all of one relation's pending filters, or a single
join predicate. Selections are pushed down (a relation's filters must be
consumed before it enters the join chain) and joins grow one left-deep chain.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import ContractViolation, InvalidQueryError, SchemaError


@dataclass(frozen=True, order=True)
class Selection:
    relation: str
    attribute: str
    bound: float


@dataclass(frozen=True, order=True)
class JoinPredicate:
    """Equi-join rel_a.attr_a = rel_b.attr_b, endpoints in canonical order."""

    left_rel: str
    left_attr: str
    right_rel: str
    right_attr: str

    @staticmethod
    def make(rel_a: str, attr_a: str, rel_b: str, attr_b: str) -> "JoinPredicate":
        if (rel_a, attr_a) <= (rel_b, attr_b):
            return JoinPredicate(rel_a, attr_a, rel_b, attr_b)
        return JoinPredicate(rel_b, attr_b, rel_a, attr_a)

    @property
    def relations(self) -> frozenset[str]:
        return frozenset((self.left_rel, self.right_rel))

    def endpoint(self, rel: str) -> str:
        if rel == self.left_rel:
            return self.left_attr
        if rel == self.right_rel:
            return self.right_attr
        raise SchemaError(f"join predicate {self} does not touch relation {rel!r}")

    def other(self, rel: str) -> str:
        if rel == self.left_rel:
            return self.right_rel
        if rel == self.right_rel:
            return self.left_rel
        raise SchemaError(f"join predicate {self} does not touch relation {rel!r}")

    def __str__(self):
        return f"{self.left_rel}.{self.left_attr} = {self.right_rel}.{self.right_attr}"


@dataclass(frozen=True)
class SelectionAction:
    """Apply every pending ranged filter of one relation, as a conjunction."""

    relation: str
    predicates: tuple[tuple[str, float], ...]  # (attribute, bound), attr-sorted

    def sort_key(self):
        return (0, self.relation, self.predicates)

    def __str__(self):
        preds = ", ".join(f"{a} <= {_fmt(v)}" for a, v in self.predicates)
        return f"select {self.relation} [{preds}]"


@dataclass(frozen=True)
class JoinAction:
    predicate: JoinPredicate

    def sort_key(self):
        p = self.predicate
        return (1, p.left_rel, p.left_attr, p.right_rel, p.right_attr)

    def __str__(self):
        return f"join {self.predicate}"


Action = SelectionAction | JoinAction


def _fmt(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


@dataclass(frozen=True)
class QuerySpec:
    relations: frozenset[str]
    selections: tuple[Selection, ...]
    joins: tuple[JoinPredicate, ...]

    @staticmethod
    def make(
        relations: Iterable[str],
        selections: Iterable[tuple[str, str, float]] = (),
        joins: Iterable[tuple[tuple[str, str], tuple[str, str]]] = (),
    ) -> "QuerySpec":
        sels = tuple(Selection(r, a, float(v)) for r, a, v in selections)
        preds = tuple(JoinPredicate.make(a[0], a[1], b[0], b[1]) for a, b in joins)
        return QuerySpec(frozenset(relations), sels, preds)

    def validate(self, db: Mapping | None = None, require_connected: bool = True) -> None:
        """Check structural invariants; against `db` also checks name resolution.

        Connected queries must additionally be join trees (|joins| == n-1):
        left-deep planning cannot consume a cycle-closing predicate, so cyclic
        join graphs are rejected up front. Subqueries produced mid-plan may be
        forests, so callers evaluating those pass require_connected=False.
        """
        seen: set[tuple[str, str]] = set()
        for s in self.selections:
            if s.relation not in self.relations:
                raise InvalidQueryError(
                    f"selection on {s.relation}.{s.attribute}: relation not in query"
                )
            key = (s.relation, s.attribute)
            if key in seen:
                raise InvalidQueryError(
                    f"more than one ranged filter on {s.relation}.{s.attribute}"
                )
            seen.add(key)
        for j in self.joins:
            if j.left_rel == j.right_rel:
                raise InvalidQueryError(f"self-join predicate not supported: {j}")
            if j.left_rel not in self.relations or j.right_rel not in self.relations:
                raise InvalidQueryError(f"join predicate {j} references relation outside query")
        if require_connected and self.relations:
            comps = join_components(self)
            if len(comps) > 1:
                raise InvalidQueryError(
                    f"join graph is disconnected: components {sorted(map(sorted, comps))}"
                )
            if len(self.joins) != len(self.relations) - 1:
                raise InvalidQueryError(
                    f"join graph must be a tree: {len(self.relations)} relations "
                    f"need exactly {len(self.relations) - 1} join predicates, "
                    f"got {len(self.joins)}"
                )
        if db is not None:
            for r in self.relations:
                if r not in db:
                    raise SchemaError(f"unknown relation {r!r}")
            for s in self.selections:
                if not db[s.relation].has_attribute(s.attribute):
                    raise SchemaError(f"unknown attribute {s.relation}.{s.attribute}")
            for j in self.joins:
                for rel, attr in ((j.left_rel, j.left_attr), (j.right_rel, j.right_attr)):
                    if not db[rel].has_attribute(attr):
                        raise SchemaError(f"unknown attribute {rel}.{attr}")


def join_components(q: QuerySpec) -> list[frozenset[str]]:
    """Connected components of the join graph over q's relations."""
    parent = {r: r for r in q.relations}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for j in q.joins:
        a, b = find(j.left_rel), find(j.right_rel)
        if a != b:
            parent[a] = b
    groups: dict[str, set[str]] = {}
    for r in q.relations:
        groups.setdefault(find(r), set()).add(r)
    return [frozenset(g) for g in groups.values()]


def restrict_to(q: QuerySpec, rels: frozenset[str]) -> QuerySpec:
    """The sub-spec touching only `rels` (selections and joins inside it)."""
    return QuerySpec(
        relations=rels,
        selections=tuple(s for s in q.selections if s.relation in rels),
        joins=tuple(j for j in q.joins if j.relations <= rels),
    )


def actions_of(q: QuerySpec) -> list[Action]:
    """All actions the query offers: one conjunctive selection per filtered
    relation plus one action per join predicate, in deterministic order."""
    by_rel: dict[str, list[tuple[str, float]]] = {}
    for s in q.selections:
        by_rel.setdefault(s.relation, []).append((s.attribute, s.bound))
    acts: list[Action] = [
        SelectionAction(rel, tuple(sorted(preds))) for rel, preds in by_rel.items()
    ]
    acts.extend(JoinAction(j) for j in q.joins)
    acts.sort(key=lambda a: a.sort_key())
    return acts


@dataclass(frozen=True)
class PrefixState:
    """Bookkeeping while folding an action prefix over a query."""

    pending_selections: frozenset[SelectionAction]
    pending_joins: frozenset[JoinPredicate]
    joined: frozenset[str]

    @property
    def exhausted(self) -> bool:
        return not self.pending_selections and not self.pending_joins


def initial_prefix_state(q: QuerySpec) -> PrefixState:
    sels = frozenset(a for a in actions_of(q) if isinstance(a, SelectionAction))
    return PrefixState(sels, frozenset(q.joins), frozenset())


def legal_actions(state: PrefixState) -> list[Action]:
    """Actions allowed next: pending selections on relations outside the
    chain, and pending joins whose endpoints are filter-free and that either
    anchor the chain (first join) or extend it by exactly one relation."""
    filtered = {a.relation for a in state.pending_selections}
    acts: list[Action] = [a for a in state.pending_selections if a.relation not in state.joined]
    for j in state.pending_joins:
        if j.left_rel in filtered or j.right_rel in filtered:
            continue
        if not state.joined:
            acts.append(JoinAction(j))
        else:
            inside = len(j.relations & state.joined)
            if inside == 1:
                acts.append(JoinAction(j))
    acts.sort(key=lambda a: a.sort_key())
    return acts


def advance(state: PrefixState, action: Action) -> PrefixState:
    """Apply one action, raising ContractViolation if it is not legal."""
    if isinstance(action, SelectionAction):
        if action not in state.pending_selections:
            raise ContractViolation(f"selection not pending: {action}")
        if action.relation in state.joined:
            raise ContractViolation(
                f"relation {action.relation!r} already joined; filters must come first"
            )
        return PrefixState(
            state.pending_selections - {action}, state.pending_joins, state.joined
        )
    pred = action.predicate
    if pred not in state.pending_joins:
        raise ContractViolation(f"join not pending: {action}")
    filtered = {a.relation for a in state.pending_selections}
    if pred.left_rel in filtered or pred.right_rel in filtered:
        raise ContractViolation(f"join {pred} before consuming endpoint filters")
    if state.joined:
        if len(pred.relations & state.joined) != 1:
            raise ContractViolation(f"join {pred} does not extend the left-deep chain")
        joined = state.joined | pred.relations
    else:
        joined = pred.relations
    return PrefixState(state.pending_selections, state.pending_joins - {pred}, joined)


def fold_prefix(q: QuerySpec, prefix: Sequence[Action]) -> PrefixState:
    state = initial_prefix_state(q)
    for a in prefix:
        state = advance(state, a)
    return state


def subquery_of(q: QuerySpec, applied: Sequence[Action]) -> QuerySpec:
    """The query fragment touched by a legal action prefix.

    May span several join components mid-plan (e.g. two filtered relations
    not yet joined); an empty prefix yields the empty QuerySpec.
    """
    fold_prefix(q, applied)  # legality check
    rels: set[str] = set()
    sels: list[Selection] = []
    joins: list[JoinPredicate] = []
    for a in applied:
        if isinstance(a, SelectionAction):
            rels.add(a.relation)
            sels.extend(Selection(a.relation, attr, v) for attr, v in a.predicates)
        else:
            rels.update(a.predicate.relations)
            joins.append(a.predicate)
    return QuerySpec(frozenset(rels), tuple(sels), tuple(joins))


def touched_component(q: QuerySpec, applied: Sequence[Action]) -> QuerySpec:
    """The join component of subquery_of(q, applied) containing the relations
    touched by the last action: the intermediate result that action produced."""
    if not applied:
        raise ContractViolation("touched_component needs a non-empty prefix")
    sub = subquery_of(q, applied)
    last = applied[-1]
    target = {last.relation} if isinstance(last, SelectionAction) else set(last.predicate.relations)
    for comp in join_components(sub):
        if target <= comp:
            return restrict_to(sub, comp)
    raise ContractViolation("last action's relations not found in subquery")  # unreachable


# ---------------------------------------------------------------------------
# Serialization (query files and workload dumps)

def query_to_dict(q: QuerySpec) -> dict:
    return {
        "relations": sorted(q.relations),
        "selections": [[s.relation, s.attribute, s.bound] for s in q.selections],
        "joins": [
            [[j.left_rel, j.left_attr], [j.right_rel, j.right_attr]] for j in q.joins
        ],
    }


def query_from_dict(d: Mapping) -> QuerySpec:
    try:
        return QuerySpec.make(
            d["relations"],
            [(r, a, float(v)) for r, a, v in d.get("selections", [])],
            [((a[0], a[1]), (b[0], b[1])) for a, b in d.get("joins", [])],
        )
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidQueryError(f"malformed query document: {e}") from e


def load_query(path: str | Path) -> QuerySpec:
    with open(path, encoding="utf-8") as f:
        return query_from_dict(json.load(f))


def action_to_dict(a: Action) -> dict:
    if isinstance(a, SelectionAction):
        return {"kind": "select", "relation": a.relation,
                "predicates": [[attr, v] for attr, v in a.predicates]}
    j = a.predicate
    return {"kind": "join",
            "predicate": [[j.left_rel, j.left_attr], [j.right_rel, j.right_attr]]}


def action_from_dict(d: Mapping) -> Action:
    if d["kind"] == "select":
        return SelectionAction(d["relation"], tuple((a, float(v)) for a, v in d["predicates"]))
    (lr, la), (rr, ra) = d["predicate"]
    return JoinAction(JoinPredicate.make(lr, la, rr, ra))
