import math

import pytest

from simsat.harness.records import (HEADER, RecordParseError, RunRecord, config_hash, read_manifest,
                                    read_records, records_equal, write_records)


def test_empty_roundtrip(tmp_path):
    path = tmp_path / "r.csv"
    write_records([], path, {"a": 1})
    assert path.read_text().strip() == ",".join(HEADER)
    assert read_records(path) == []


def test_roundtrip_is_lossless(tmp_path):
    recs = [
        RunRecord("exp,1", 16.0, 0.1 + 0.2, -1.0, -0.9982112794445674, True, "abc",
                  {"family_norms": [1 / 3, 2 / 7], "N": {"0": 4}, "nan": float("nan")}),
        RunRecord("exp,1", 32.0, 1e-300, -1.0, -0.9982112794445674, False, "abc", {}),
    ]
    path = tmp_path / "r.csv"
    write_records(recs, path, {"seed": 0})
    back = read_records(path)
    assert len(back) == 2
    assert all(records_equal(a, b) for a, b in zip(recs, back))
    assert read_manifest(path)["config_hash"] == config_hash({"seed": 0})


def test_config_hash_is_canonical():
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})


@pytest.mark.parametrize("body,line", [
    ("experiment_id,lambda\n", 1),
    (",".join(HEADER) + "\nx,16,0.1,-1,-1,true\nx,abc,0.1,-1,-1,true\n", 3),
    (",".join(HEADER) + "\nx,16,0.1,-1,-1,maybe\n", 2),
    (",".join(HEADER) + "\nx,16,0.1\n", 2),
    ("", 1),
])
def test_parse_errors_carry_line(tmp_path, body, line):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(RecordParseError) as info:
        read_records(path)
    assert info.value.line == line
