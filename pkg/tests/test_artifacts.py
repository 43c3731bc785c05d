import csv
import json

import pytest

from hetbeliefs.artifacts import (RunManifest, canonical_hash, emit_csv,
                                  emit_rows_csv, format_value, rows_to_text)
from hetbeliefs.errors import ValidationError


class TestEmitCsv:
    def test_empty_records_header_only(self, tmp_path):
        path = tmp_path / "empty.csv"
        emit_csv([], ["a", "b"], path)
        assert path.read_bytes() == b"a,b\r\n"

    def test_single_record(self, tmp_path):
        path = tmp_path / "one.csv"
        emit_csv([{"path_id": 0, "t": 0.125, "r": 0.015}],
                 ["path_id", "t", "r"], path)
        lines = path.read_text().splitlines()
        assert lines[0] == "path_id,t,r"
        # 17 significant digits; 0.125 is dyadic, 0.015 is not
        assert lines[1] == "0,0.125," + format(0.015, ".17g")
        assert float(lines[1].split(",")[2]) == 0.015
        assert len(lines) == 2

    def test_roundtrip_floats_exact(self, tmp_path):
        import numpy as np
        rng = np.random.default_rng(7)
        records = [{"x": float(v), "k": int(i)} for i, v in
                   enumerate(rng.normal(size=50) * 10.0 ** rng.integers(-8, 8, size=50))]
        path = tmp_path / "rt.csv"
        emit_csv(records, ["x", "k"], path)
        with open(path, newline="") as fh:
            back = [{"x": float(row["x"]), "k": int(row["k"])}
                    for row in csv.DictReader(fh)]
        assert back == records

    def test_schema_mismatch(self, tmp_path):
        with pytest.raises(ValidationError, match="schema"):
            emit_csv([{"a": 1.0}], ["a", "b"], tmp_path / "bad.csv")

    def test_17_significant_digits(self):
        assert format_value(1.0 / 3.0) == "0.33333333333333331"

    def test_rows_text_matches_file(self, tmp_path):
        columns, rows = ["a", "b"], [[1, 2.5], [3, 0.1]]
        path = tmp_path / "t.csv"
        emit_rows_csv(columns, rows, path)
        assert path.read_text().replace("\r\n", "\n") == rows_to_text(columns, rows)


class TestManifest:
    def test_hash_stable_under_key_order(self):
        a = {"n": 2, "rho": 0.1, "agents": [{"gamma": 1, "B": [[1, 0], [0, 1]]}]}
        b = {"agents": [{"B": [[1, 0], [0, 1]], "gamma": 1}], "rho": 0.1, "n": 2}
        assert canonical_hash(a) == canonical_hash(b)
        assert canonical_hash(a) != canonical_hash({**a, "rho": 0.2})

    def test_write(self, tmp_path):
        m = RunManifest(subcommand="price", config_hash="ff" * 32, seed=7,
                        artifacts=["quote.json"], wall_clock_utc="2024-01-01T00:00:00Z",
                        duration_s=0.5, version="0.1.0")
        path = tmp_path / "m.json"
        m.write(path)
        doc = json.loads(path.read_text())
        assert doc["subcommand"] == "price"
        assert doc["artifacts"] == ["quote.json"]
        assert doc["seed"] == 7
