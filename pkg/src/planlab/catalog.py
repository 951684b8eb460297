"""Catalog statistics and the numeric encodings built from them.

The catalog computes per-attribute stats (min/max/distinct/equi-width
histogram), flattens them into a fixed database vector, and fixes the
predicate universe: every declared join-key pair plus one ranged-selection
slot per attribute. Action encodings and context vectors are laid out against
that universe, so their dimensions depend only on the schema.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .data import Relation
from .errors import ConfigError, ContractViolation, EncodingError, SchemaError
from .query import Action, JoinAction, JoinPredicate, QuerySpec, SelectionAction

# Pending selections whose bound sits exactly at the attribute minimum would
# normalize to 0 and look consumed; the context floor keeps them visible.
CONTEXT_FLOOR = 1e-6


@dataclass(frozen=True)
class AttributeStats:
    min: float
    max: float
    distinct_count: int
    histogram: np.ndarray  # equi-width bucket frequencies, sums to 1 (or all 0)


def compute_stats(rel: Relation, buckets: int) -> dict[str, AttributeStats]:
    """Exact min/max/distinct plus an equi-width histogram per attribute.

    The histogram spans [min, max]; the max value lands in the last bucket.
    An empty relation yields zeroed stats rather than an error.
    """
    if buckets < 1:
        raise ConfigError(f"bucket count must be >= 1, got {buckets}")
    out: dict[str, AttributeStats] = {}
    for attr in rel.attributes:
        col = rel.column(attr)
        if col.size == 0:
            hist = np.zeros(buckets)
            hist.flags.writeable = False
            out[attr] = AttributeStats(0.0, 0.0, 0, hist)
            continue
        lo, hi = float(col.min()), float(col.max())
        if hi > lo:
            width = (hi - lo) / buckets
            idx = np.minimum(((col - lo) / width).astype(np.intp), buckets - 1)
        else:
            idx = np.zeros(col.size, dtype=np.intp)  # single-point domain
        counts = np.bincount(idx, minlength=buckets).astype(np.float64)
        hist = counts / col.size
        hist.flags.writeable = False
        out[attr] = AttributeStats(lo, hi, int(np.unique(col).size), hist)
    return out


class Catalog:
    """Schema-wide statistics and the fixed predicate universe.

    Attribute order is the registration order of relations and, within each,
    the relation's own attribute order. The predicate universe places the
    declared join predicates first, then one selection slot per attribute.
    """

    def __init__(
        self,
        db: Mapping[str, Relation],
        join_keys: Iterable[tuple[str, str]] = (),
        buckets: int = 16,
    ):
        self.buckets = buckets
        self.relations: dict[str, Relation] = dict(db)
        self.row_counts = {name: rel.row_count for name, rel in self.relations.items()}
        self.attributes: list[tuple[str, str]] = [
            (name, attr) for name, rel in self.relations.items() for attr in rel.attributes
        ]
        self._attr_slot = {key: i for i, key in enumerate(self.attributes)}
        self.stats: dict[tuple[str, str], AttributeStats] = {}
        for name, rel in self.relations.items():
            for attr, st in compute_stats(rel, buckets).items():
                self.stats[(name, attr)] = st
        self.join_predicates: tuple[JoinPredicate, ...] = tuple(
            self._resolve_join_key(a, b) for a, b in join_keys
        )
        self._join_slot = {p: i for i, p in enumerate(self.join_predicates)}
        if len(self._join_slot) != len(self.join_predicates):
            raise ConfigError("duplicate join-key pair declared")

    def _resolve_join_key(self, a: str, b: str) -> JoinPredicate:
        (ra, aa), (rb, ab) = a.split("."), b.split(".")
        for rel, attr in ((ra, aa), (rb, ab)):
            if (rel, attr) not in self._attr_slot:
                raise SchemaError(f"join key references unknown attribute {rel}.{attr}")
        if ra == rb:
            raise ConfigError(f"join key within a single relation: {a} = {b}")
        return JoinPredicate.make(ra, aa, rb, ab)

    # -- layout ------------------------------------------------------------

    @property
    def attribute_count(self) -> int:
        return len(self.attributes)

    @property
    def action_dim(self) -> int:
        return 2 * len(self.attributes) + len(self.join_predicates)

    @property
    def context_dim(self) -> int:
        return len(self.join_predicates) + len(self.attributes)

    @property
    def vector_dim(self) -> int:
        return len(self.attributes) * (3 + self.buckets)

    def attr_slot(self, rel: str, attr: str) -> int:
        try:
            return self._attr_slot[(rel, attr)]
        except KeyError:
            raise EncodingError(f"unknown attribute {rel}.{attr}") from None

    def join_slot(self, pred: JoinPredicate) -> int:
        try:
            return self._join_slot[pred]
        except KeyError:
            raise EncodingError(f"join predicate not in catalog universe: {pred}") from None

    def normalize_bound(self, rel: str, attr: str, v: float) -> float:
        st = self.stats[(rel, attr)]
        if st.max > st.min:
            return float(np.clip((v - st.min) / (st.max - st.min), 0.0, 1.0))
        return 1.0 if v >= st.min else 0.0  # single-point domain


def build_db_vector(catalog: Catalog) -> np.ndarray:
    """Flatten the catalog into the fixed database vector.

    Per attribute, in catalog order: [min_norm, max_norm, distinct_norm,
    bucket frequencies]. Min/max are scaled into [0,1] against the global
    value range across all non-empty attributes so they stay comparable
    between attributes; distinct is scaled by the relation's row count.
    """
    nonempty = [
        st for (rel, _), st in catalog.stats.items() if catalog.row_counts[rel] > 0
    ]
    if nonempty:
        glo = min(st.min for st in nonempty)
        ghi = max(st.max for st in nonempty)
    else:
        glo, ghi = 0.0, 0.0
    span = ghi - glo
    out = np.zeros(catalog.vector_dim)
    step = 3 + catalog.buckets
    for i, (rel, attr) in enumerate(catalog.attributes):
        st = catalog.stats[(rel, attr)]
        rows = catalog.row_counts[rel]
        base = i * step
        if rows > 0:
            if span > 0:
                out[base] = (st.min - glo) / span
                out[base + 1] = (st.max - glo) / span
            out[base + 2] = st.distinct_count / rows
        out[base + 3 : base + 3 + catalog.buckets] = st.histogram
    return out


def encode_action(action: Action, catalog: Catalog) -> np.ndarray:
    """Flat numeric encoding: per attribute a (flag, normalized bound) pair
    for selections, then one flag per join predicate in the universe."""
    vec = np.zeros(catalog.action_dim)
    if isinstance(action, SelectionAction):
        for attr, v in action.predicates:
            slot = catalog.attr_slot(action.relation, attr)
            vec[2 * slot] = 1.0
            vec[2 * slot + 1] = catalog.normalize_bound(action.relation, attr, v)
    elif isinstance(action, JoinAction):
        vec[2 * catalog.attribute_count + catalog.join_slot(action.predicate)] = 1.0
    else:
        raise EncodingError(f"unsupported action type: {type(action).__name__}")
    return vec


def init_context(q: QuerySpec, catalog: Catalog) -> np.ndarray:
    """Context vector of pending work: join slots get 1, selection slots get
    the normalized bound (floored away from zero)."""
    u = np.zeros(catalog.context_dim)
    n_joins = len(catalog.join_predicates)
    for j in q.joins:
        u[catalog.join_slot(j)] = 1.0
    for s in q.selections:
        slot = n_joins + catalog.attr_slot(s.relation, s.attribute)
        u[slot] = max(catalog.normalize_bound(s.relation, s.attribute, s.bound), CONTEXT_FLOOR)
    return u


def apply_action(u: np.ndarray, action: Action, catalog: Catalog) -> np.ndarray:
    """Zero out the slot (or slot group) the action consumes; pure."""
    out = u.copy()
    n_joins = len(catalog.join_predicates)
    if isinstance(action, SelectionAction):
        for attr, _ in action.predicates:
            slot = n_joins + catalog.attr_slot(action.relation, attr)
            if out[slot] == 0.0:
                raise ContractViolation(
                    f"selection on {action.relation}.{attr} is not pending"
                )
            out[slot] = 0.0
    elif isinstance(action, JoinAction):
        slot = catalog.join_slot(action.predicate)
        if out[slot] == 0.0:
            raise ContractViolation(f"join {action.predicate} is not pending")
        out[slot] = 0.0
    else:
        raise EncodingError(f"unsupported action type: {type(action).__name__}")
    return out


def context_exhausted(u: np.ndarray) -> bool:
    return not np.any(u)
