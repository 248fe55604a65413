"""Tests for config parsing, table emission and manifests."""

import json
import os
from pathlib import Path

import numpy as np
import pytest

from hjflow.errors import ConfigParseError, ConfigValidationError
from hjflow.runio import (
    Column,
    Option,
    TableSchema,
    apply_overrides,
    atomic_write_text,
    emit_config_text,
    emit_table,
    parse_config_text,
    read_table_csv,
    sha256_file,
    validate_config,
)


class TestConfig:
    def test_round_trip(self):
        cfg = {
            "scenario": "hopf-lax",
            "physics.mass": 1.5,
            "grid.nodes": 2048,
            "numerics.refine": True,
            "sweep.factors": [1.0, 0.1, 0.01],
            "label": "run-a",
        }
        assert parse_config_text(emit_config_text(cfg)) == cfg

    def test_comments_and_blank_lines(self):
        cfg = parse_config_text("# comment\n\na.b = 1\n  # more\nc = \"x\"\n")
        assert cfg == {"a.b": 1, "c": "x"}

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigParseError):
            parse_config_text("a = 1\na = 2\n")

    def test_bad_syntax(self):
        with pytest.raises(ConfigParseError):
            parse_config_text("just some words\n")
        with pytest.raises(ConfigParseError):
            parse_config_text("a = not-json\n")

    def test_overrides(self):
        cfg = apply_overrides({"a": 1}, ["a=2", "b.c=[1,2]"])
        assert cfg == {"a": 2, "b.c": [1, 2]}
        with pytest.raises(ConfigParseError):
            apply_overrides({}, ["missing-equals"])

    def test_strict_validation(self):
        schema = {"a": Option(float, 1.0), "b": Option(int, None)}
        with pytest.raises(ConfigValidationError, match="unknown"):
            validate_config({"zz": 1, "b": 2}, schema)
        with pytest.raises(ConfigValidationError, match="missing"):
            validate_config({}, schema)
        out = validate_config({"a": 2, "b": 3}, schema)
        assert out == {"a": 2.0, "b": 3}
        with pytest.raises(ConfigValidationError):
            validate_config({"a": "x", "b": 3}, schema)


class TestTables:
    def test_csv_17_digits(self, tmp_path):
        schema = TableSchema("t", (Column("x", "length"), Column("y")))
        path = emit_table([(1.0 / 3.0, 1)], schema, tmp_path / "t.csv")
        text = path.read_text()
        assert "0.33333333333333331" in text
        assert text.splitlines()[0].startswith("# units: x=length,y=1")

    def test_csv_read_back(self, tmp_path):
        schema = TableSchema("t", (Column("a"), Column("b")))
        rows = [(0.1, 2.0), (np.pi, -1.0)]
        path = emit_table(rows, schema, tmp_path / "t.csv")
        names, data = read_table_csv(path)
        assert names == ["a", "b"]
        assert data["a"][1] == np.pi  # 17 significant digits round-trip

    def test_ndjson_lines_parse(self, tmp_path):
        schema = TableSchema(
            "traj", (Column("particle_id"), Column("t"), Column("x"), Column("valid")),
            kind="ndjson",
        )
        recs = [
            {"particle_id": 0, "t": 0.0, "x": 1.0 / 7.0, "valid": True},
            {"particle_id": 1, "t": 0.5, "x": -2.0, "valid": False},
        ]
        path = emit_table(recs, schema, tmp_path / "t.ndjson")
        lines = path.read_text().splitlines()
        assert len(lines) == 2
        obj = json.loads(lines[0])
        assert obj["particle_id"] == 0
        assert obj["x"] == 1.0 / 7.0
        assert json.loads(lines[1])["valid"] is False

    def test_schema_mismatch(self, tmp_path):
        schema = TableSchema("t", (Column("a"), Column("b")))
        with pytest.raises(ValueError):
            emit_table([(1.0,)], schema, tmp_path / "t.csv")

    def test_atomic_no_partial_file_on_crash(self, tmp_path):
        target = tmp_path / "out.csv"
        target.write_text("original")
        schema = TableSchema("t", (Column("a"),))

        def exploding_records():
            yield (1.0,)
            raise RuntimeError("crash mid-stream")

        with pytest.raises(RuntimeError):
            emit_table(exploding_records(), schema, target)
        assert target.read_text() == "original"  # untouched
        assert list(tmp_path.glob("*.tmp")) == []  # no temp litter

    def test_atomic_write_cleans_temp(self, tmp_path):
        atomic_write_text(tmp_path / "a.txt", "hello")
        assert (tmp_path / "a.txt").read_text() == "hello"
        assert len(list(tmp_path.iterdir())) == 1

    def test_deterministic_bytes(self, tmp_path):
        schema = TableSchema("t", (Column("a"), Column("b")))
        rows = [(0.1 * i, float(i)) for i in range(50)]
        p1 = emit_table(rows, schema, tmp_path / "one.csv")
        p2 = emit_table(rows, schema, tmp_path / "two.csv")
        assert sha256_file(p1) == sha256_file(p2)
