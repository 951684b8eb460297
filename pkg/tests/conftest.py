import numpy as np
import pytest

from planlab.catalog import Catalog
from planlab.data import ColumnSpec, Relation, SyntheticSpec, gen_synthetic
from planlab.query import QuerySpec


def make_relation(name, **cols):
    attrs = tuple(cols)
    return Relation(
        name=name,
        attributes=attrs,
        columns=tuple(np.asarray(cols[a], dtype=np.float64) for a in attrs),
    )


@pytest.fixture(scope="session")
def two_table_db():
    """Two small relations joined on k, with a filterable attribute each."""
    r = gen_synthetic(
        SyntheticSpec(
            "r",
            60,
            (
                ColumnSpec("a", "uniform", low=0, high=9),
                ColumnSpec("k", "uniform", low=0, high=4),
            ),
        ),
        seed=1,
    )
    s = gen_synthetic(
        SyntheticSpec(
            "s",
            45,
            (
                ColumnSpec("k", "uniform", low=0, high=4),
                ColumnSpec("b", "uniform", low=0, high=9),
            ),
        ),
        seed=2,
    )
    return {"r": r, "s": s}


@pytest.fixture(scope="session")
def two_table_catalog(two_table_db):
    return Catalog(two_table_db, [("r.k", "s.k")], buckets=4)


@pytest.fixture(scope="session")
def two_table_query():
    return QuerySpec.make(
        {"r", "s"},
        selections=[("r", "a", 5.0), ("s", "b", 7.0)],
        joins=[(("r", "k"), ("s", "k"))],
    )


@pytest.fixture(scope="session")
def chain_db():
    """Three relations forming a join chain r0 - r1 - r2."""
    r0 = gen_synthetic(
        SyntheticSpec(
            "r0",
            50,
            (
                ColumnSpec("v0", "uniform", low=0, high=9),
                ColumnSpec("k0", "uniform", low=0, high=3),
            ),
        ),
        seed=11,
    )
    r1 = gen_synthetic(
        SyntheticSpec(
            "r1",
            40,
            (
                ColumnSpec("v1", "uniform", low=0, high=9),
                ColumnSpec("k0", "uniform", low=0, high=3),
                ColumnSpec("k1", "uniform", low=0, high=3),
            ),
        ),
        seed=12,
    )
    r2 = gen_synthetic(
        SyntheticSpec(
            "r2",
            30,
            (
                ColumnSpec("v2", "uniform", low=0, high=9),
                ColumnSpec("k1", "uniform", low=0, high=3),
            ),
        ),
        seed=13,
    )
    return {"r0": r0, "r1": r1, "r2": r2}


@pytest.fixture(scope="session")
def chain_catalog(chain_db):
    return Catalog(chain_db, [("r0.k0", "r1.k0"), ("r1.k1", "r2.k1")], buckets=4)


@pytest.fixture(scope="session")
def chain_query():
    return QuerySpec.make(
        {"r0", "r1", "r2"},
        selections=[("r0", "v0", 6.0), ("r1", "v1", 4.0), ("r2", "v2", 8.0)],
        joins=[(("r0", "k0"), ("r1", "k0")), (("r1", "k1"), ("r2", "k1"))],
    )
