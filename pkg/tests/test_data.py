import numpy as np
import pytest

from planlab.data import (
    ColumnSpec,
    Relation,
    SyntheticSpec,
    gen_synthetic,
    load_csv,
    parse_database_config,
    write_csv,
)
from planlab.errors import ConfigError, ParseError, SchemaError


def _write(tmp_path, text, name="t.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


class TestLoadCsv:
    def test_three_rows(self, tmp_path):
        p = _write(tmp_path, "a,b\n1,2\n3,4\n5,6\n")
        rel = load_csv(p, "t", ["a", "b"])
        assert rel.row_count == 3
        assert rel.attributes == ("a", "b")
        np.testing.assert_array_equal(rel.column("a"), [1, 3, 5])

    def test_header_only(self, tmp_path):
        p = _write(tmp_path, "a,b\n")
        rel = load_csv(p, "t", ["a", "b"])
        assert rel.row_count == 0

    def test_dictionary_encoding_first_occurrence(self, tmp_path):
        # Hand re-encoding: US -> 0 (first seen), DE -> 1, US -> 0 again.
        p = _write(tmp_path, "cc\nUS\nDE\nUS\n")
        rel = load_csv(p, "t", ["cc"])
        np.testing.assert_array_equal(rel.column("cc"), [0, 1, 0])

    def test_schema_subset_and_reorder(self, tmp_path):
        p = _write(tmp_path, "x,y,z\n1,2,3\n")
        rel = load_csv(p, "t", ["z", "x"])
        np.testing.assert_array_equal(rel.column("z"), [3])
        np.testing.assert_array_equal(rel.column("x"), [1])

    def test_missing_attribute(self, tmp_path):
        p = _write(tmp_path, "a\n1\n")
        with pytest.raises(SchemaError, match="missing"):
            load_csv(p, "t", ["a", "nope"])

    def test_ragged_row_names_row(self, tmp_path):
        p = _write(tmp_path, "a,b\n1,2\n3\n")
        with pytest.raises(ParseError, match="row 3"):
            load_csv(p, "t", ["a", "b"])

    def test_empty_cell_rejected(self, tmp_path):
        p = _write(tmp_path, "a,b\n1,\n")
        with pytest.raises(ParseError, match="'b'"):
            load_csv(p, "t", ["a", "b"])

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParseError):
            load_csv(tmp_path / "absent.csv", "t", ["a"])

    def test_roundtrip_through_write_csv(self, tmp_path):
        rel = gen_synthetic(
            SyntheticSpec("g", 20, (ColumnSpec("a", "uniform", low=0, high=5),)), seed=3
        )
        write_csv(rel, tmp_path / "g.csv")
        back = load_csv(tmp_path / "g.csv", "g", ["a"])
        np.testing.assert_array_equal(back.column("a"), rel.column("a"))


class TestRelationInvariants:
    def test_unequal_lengths(self):
        with pytest.raises(SchemaError):
            Relation("t", ("a", "b"), (np.zeros(2), np.zeros(3)))

    def test_duplicate_attributes(self):
        with pytest.raises(SchemaError):
            Relation("t", ("a", "a"), (np.zeros(2), np.zeros(2)))

    def test_columns_read_only(self):
        rel = Relation("t", ("a",), (np.arange(3.0),))
        with pytest.raises(ValueError):
            rel.column("a")[0] = 9

    def test_unknown_attribute(self):
        rel = Relation("t", ("a",), (np.arange(3.0),))
        with pytest.raises(SchemaError):
            rel.column("zzz")


class TestGenSynthetic:
    def test_functional_dependency_exact_when_noise_zero(self):
        spec = SyntheticSpec(
            "t",
            1000,
            (
                ColumnSpec("c0", "uniform", low=0, high=99),
                ColumnSpec("c1", "fdep", source="c0"),
            ),
        )
        rel = gen_synthetic(spec, seed=7)
        np.testing.assert_array_equal(rel.column("c0"), rel.column("c1"))

    def test_deterministic_for_seed(self):
        spec = SyntheticSpec(
            "t",
            500,
            (
                ColumnSpec("a", "uniform", low=0, high=9),
                ColumnSpec("z", "zipf", s=1.5, values=20),
            ),
        )
        r1, r2 = gen_synthetic(spec, seed=7), gen_synthetic(spec, seed=7)
        for a in r1.attributes:
            np.testing.assert_array_equal(r1.column(a), r2.column(a))

    def test_zipf_skew_beats_uniform_expectation(self):
        # 10000 rows over 100 values: uniform expectation is 100 per value.
        spec = SyntheticSpec("t", 10000, (ColumnSpec("z", "zipf", s=1.2, values=100),))
        rel = gen_synthetic(spec, seed=5)
        _, counts = np.unique(rel.column("z"), return_counts=True)
        assert counts.max() > 100

    def test_fdep_affine_with_noise_bound(self):
        spec = SyntheticSpec(
            "t",
            200,
            (
                ColumnSpec("x", "uniform", low=0, high=9),
                ColumnSpec("y", "fdep", source="x", scale=2.0, offset=5.0, noise=0.5),
            ),
        )
        rel = gen_synthetic(spec, seed=9)
        resid = rel.column("y") - (2.0 * rel.column("x") + 5.0)
        assert np.all(np.abs(resid) <= 0.5)

    def test_unsupported_rule(self):
        with pytest.raises(ConfigError, match="unsupported rule"):
            ColumnSpec("a", "gaussian")

    def test_fdep_requires_earlier_source(self):
        spec = SyntheticSpec(
            "t",
            10,
            (
                ColumnSpec("y", "fdep", source="x"),
                ColumnSpec("x", "uniform", low=0, high=9),
            ),
        )
        with pytest.raises(ConfigError, match="earlier"):
            gen_synthetic(spec, seed=1)


class TestDatabaseConfig:
    def test_parse_and_validate(self, tmp_path):
        cfg = tmp_path / "db.yaml"
        cfg.write_text(
            "relations:\n"
            "  - name: r\n"
            "    rows: 10\n"
            "    columns:\n"
            "      - {name: a, rule: uniform, low: 0, high: 5}\n"
            "join_keys:\n"
            "  - [r.a, r.a]\n",
            encoding="utf-8",
        )
        specs, join_keys = parse_database_config(cfg)
        assert specs[0].name == "r" and specs[0].rows == 10
        assert join_keys == [("r.a", "r.a")]

    def test_malformed_join_key(self, tmp_path):
        cfg = tmp_path / "db.yaml"
        cfg.write_text(
            "relations:\n"
            "  - {name: r, rows: 1, columns: [{name: a, rule: uniform}]}\n"
            "join_keys: [[r-a, r.a]]\n",
            encoding="utf-8",
        )
        with pytest.raises(ConfigError, match="relation.attribute"):
            parse_database_config(cfg)
