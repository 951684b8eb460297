"""In-memory columnar relations: CSV ingestion and synthetic data generation.

Relations are immutable after construction; every column is a read-only
float64 array. Non-numeric CSV columns are dictionary-encoded to integer
codes in first-occurrence order.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import yaml

from .errors import ConfigError, ParseError, SchemaError

SUPPORTED_RULES = ("uniform", "zipf", "fdep")


@dataclass(frozen=True)
class Relation:
    """A named table stored column-wise.

    Columns are float64 arrays of equal length, frozen against writes so a
    Relation can be shared freely across threads.
    """

    name: str
    attributes: tuple[str, ...]
    columns: tuple[np.ndarray, ...]
    row_count: int = field(init=False)

    def __post_init__(self):
        if len(set(self.attributes)) != len(self.attributes):
            raise SchemaError(f"duplicate attribute names in relation {self.name!r}")
        if len(self.attributes) != len(self.columns):
            raise SchemaError(
                f"relation {self.name!r}: {len(self.attributes)} attributes "
                f"but {len(self.columns)} columns"
            )
        frozen = []
        n = self.columns[0].shape[0] if self.columns else 0
        for attr, col in zip(self.attributes, self.columns):
            arr = np.asarray(col, dtype=np.float64)
            if arr.ndim != 1:
                raise SchemaError(f"column {self.name}.{attr} is not one-dimensional")
            if arr.shape[0] != n:
                raise SchemaError(
                    f"column {self.name}.{attr} has length {arr.shape[0]}, expected {n}"
                )
            arr = arr.copy()
            arr.flags.writeable = False
            frozen.append(arr)
        object.__setattr__(self, "columns", tuple(frozen))
        object.__setattr__(self, "row_count", n)

    def column(self, attr: str) -> np.ndarray:
        try:
            return self.columns[self.attributes.index(attr)]
        except ValueError:
            raise SchemaError(f"relation {self.name!r} has no attribute {attr!r}") from None

    def has_attribute(self, attr: str) -> bool:
        return attr in self.attributes


def load_csv(path: str | Path, name: str, schema: Sequence[str]) -> Relation:
    """Load a header-first CSV into a Relation with the given attribute list.

    Every declared attribute must appear in the header. Columns whose values
    all parse as numbers become float64; any other column is dictionary-encoded
    to integer codes in first-occurrence order. Empty cells are rejected.
    """
    path = Path(path)
    if not path.exists():
        raise ParseError(f"CSV file not found: {path}")
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file, expected a header row") from None
        header = [h.strip() for h in header]
        missing = [a for a in schema if a not in header]
        if missing:
            raise SchemaError(f"{path}: declared attributes missing from header: {missing}")
        positions = [header.index(a) for a in schema]
        raw_cols: list[list[str]] = [[] for _ in schema]
        for rownum, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ParseError(
                    f"{path}: row {rownum} has {len(row)} fields, header has {len(header)}"
                )
            for out, pos in zip(raw_cols, positions):
                out.append(row[pos])
    columns = [
        _parse_column(raw, path, attr, positions[i])
        for i, (raw, attr) in enumerate(zip(raw_cols, schema))
    ]
    return Relation(name=name, attributes=tuple(schema), columns=tuple(columns))


def _parse_column(raw: list[str], path: Path, attr: str, pos: int) -> np.ndarray:
    if not raw:
        return np.zeros(0, dtype=np.float64)
    values = np.empty(len(raw), dtype=np.float64)
    numeric = True
    for i, cell in enumerate(raw):
        cell = cell.strip()
        if cell == "":
            raise ParseError(
                f"{path}: empty value at row {i + 2}, column {attr!r} (NULLs unsupported)"
            )
        try:
            values[i] = float(cell)
        except ValueError:
            numeric = False
            break
    if numeric:
        return values
    # Dictionary-encode the whole column, first occurrence -> code 0.
    codes: dict[str, int] = {}
    for i, cell in enumerate(raw):
        cell = cell.strip()
        if cell == "":
            raise ParseError(
                f"{path}: empty value at row {i + 2}, column {attr!r} (NULLs unsupported)"
            )
        values[i] = codes.setdefault(cell, len(codes))
    return values


@dataclass(frozen=True)
class ColumnSpec:
    """One synthetic column: marginal distribution or dependency rule.

    Rules:
      uniform -- integers drawn uniformly from [low, high]
      zipf    -- integers 0..values-1 with P(k) proportional to 1/(k+1)**s
      fdep    -- scale * source_column + offset + uniform noise in [-noise, noise]
    """

    name: str
    rule: str
    low: float = 0.0
    high: float = 999.0
    s: float = 1.2
    values: int = 100
    source: str | None = None
    scale: float = 1.0
    offset: float = 0.0
    noise: float = 0.0

    def __post_init__(self):
        if self.rule not in SUPPORTED_RULES:
            raise ConfigError(
                f"column {self.name!r}: unsupported rule {self.rule!r}, "
                f"expected one of {SUPPORTED_RULES}"
            )
        if self.rule == "fdep" and not self.source:
            raise ConfigError(f"column {self.name!r}: fdep rule requires a source column")
        if self.rule == "zipf" and self.values < 1:
            raise ConfigError(f"column {self.name!r}: zipf needs values >= 1")
        if self.rule == "uniform" and self.high < self.low:
            raise ConfigError(f"column {self.name!r}: uniform needs high >= low")
        if self.noise < 0:
            raise ConfigError(f"column {self.name!r}: noise must be non-negative")


@dataclass(frozen=True)
class SyntheticSpec:
    """Synthetic relation description: row count plus per-column rules."""

    name: str
    rows: int
    columns: tuple[ColumnSpec, ...]

    def __post_init__(self):
        if self.rows < 0:
            raise ConfigError(f"relation {self.name!r}: rows must be non-negative")
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise ConfigError(f"relation {self.name!r}: duplicate column names")


def gen_synthetic(spec: SyntheticSpec, seed: int) -> Relation:
    """Generate a Relation from a SyntheticSpec, deterministic for a fixed seed."""
    rng = np.random.default_rng(seed)
    built: dict[str, np.ndarray] = {}
    for col in spec.columns:
        if col.rule == "uniform":
            data = rng.integers(int(col.low), int(col.high) + 1, size=spec.rows).astype(
                np.float64
            )
        elif col.rule == "zipf":
            ranks = np.arange(1, col.values + 1, dtype=np.float64)
            probs = ranks ** (-col.s)
            probs /= probs.sum()
            data = rng.choice(col.values, size=spec.rows, p=probs).astype(np.float64)
        else:  # fdep
            if col.source not in built:
                raise ConfigError(
                    f"column {col.name!r}: fdep source {col.source!r} must be "
                    "declared earlier in the column list"
                )
            data = col.scale * built[col.source] + col.offset
            if col.noise > 0:
                data = data + rng.uniform(-col.noise, col.noise, size=spec.rows)
        built[col.name] = data
    return Relation(
        name=spec.name,
        attributes=tuple(c.name for c in spec.columns),
        columns=tuple(built[c.name] for c in spec.columns),
    )


def _column_spec_from_dict(d: Mapping) -> ColumnSpec:
    known = {"name", "rule", "low", "high", "s", "values", "source", "scale", "offset", "noise"}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"column spec has unknown fields: {sorted(unknown)}")
    if "name" not in d or "rule" not in d:
        raise ConfigError("column spec requires 'name' and 'rule'")
    return ColumnSpec(**d)


def parse_synthetic_spec(d: Mapping) -> SyntheticSpec:
    """Build a SyntheticSpec from a parsed config mapping."""
    for key in ("name", "rows", "columns"):
        if key not in d:
            raise ConfigError(f"synthetic relation spec missing field {key!r}")
    cols = tuple(_column_spec_from_dict(c) for c in d["columns"])
    return SyntheticSpec(name=str(d["name"]), rows=int(d["rows"]), columns=cols)


def parse_database_config(path: str | Path) -> tuple[list[SyntheticSpec], list[tuple[str, str]]]:
    """Parse a YAML database-generation config.

    Layout::

        seed: 7            # optional, CLI may override
        relations:
          - name: r
            rows: 1000
            columns: [{name: a, rule: uniform, low: 0, high: 99}, ...]
        join_keys:
          - [r.fk, s.pk]
    """
    with open(path, encoding="utf-8") as f:
        doc = yaml.safe_load(f)
    if not isinstance(doc, dict) or "relations" not in doc:
        raise ConfigError(f"{path}: expected a mapping with a 'relations' list")
    specs = [parse_synthetic_spec(r) for r in doc["relations"]]
    join_keys = [_parse_join_key(j) for j in doc.get("join_keys", [])]
    return specs, join_keys


def _parse_join_key(entry) -> tuple[str, str]:
    if not isinstance(entry, (list, tuple)) or len(entry) != 2:
        raise ConfigError(f"join_keys entry must be a pair, got {entry!r}")
    a, b = str(entry[0]), str(entry[1])
    for side in (a, b):
        if side.count(".") != 1:
            raise ConfigError(f"join key {side!r} must look like relation.attribute")
    return a, b


def gen_database(
    specs: Iterable[SyntheticSpec], seed: int
) -> dict[str, Relation]:
    """Generate all relations of a config; per-relation streams are seeded
    deterministically from the master seed."""
    db: dict[str, Relation] = {}
    for i, spec in enumerate(specs):
        if spec.name in db:
            raise ConfigError(f"duplicate relation name {spec.name!r}")
        db[spec.name] = gen_synthetic(spec, seed + i)
    return db


def write_csv(rel: Relation, path: str | Path) -> None:
    """Write a relation out as a header-first CSV (integral floats as ints)."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(rel.attributes)
        for i in range(rel.row_count):
            writer.writerow([_format_value(col[i]) for col in rel.columns])


def _format_value(v: float) -> str:
    if float(v).is_integer():
        return str(int(v))
    return repr(float(v))
