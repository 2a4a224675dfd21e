"""CSV + JSON manifest persistence for sweep results."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

HEADER = ["experiment_id", "lambda", "norm", "exponent_target", "slope", "pass"]


class RecordParseError(ValueError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


@dataclass
class RunRecord:
    experiment_id: str
    lam: float
    norm: float
    exponent_target: float
    slope: float
    passed: bool
    config_hash: str = ""
    extras: dict = field(default_factory=dict)


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def manifest_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".manifest.json")


def _fmt(x: float) -> str:
    return repr(float(x))


def write_records(records: list[RunRecord], path: str | Path, config: dict | None = None) -> Path:
    """Write the CSV and, next to it, ``<stem>.manifest.json``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HEADER)
        for r in records:
            w.writerow([r.experiment_id, _fmt(r.lam), _fmt(r.norm), _fmt(r.exponent_target),
                        _fmt(r.slope), "true" if r.passed else "false"])
    manifest = {
        "config": config,
        "config_hash": config_hash(config) if config is not None else "",
        "records": [{"config_hash": r.config_hash, "extras": r.extras} for r in records],
    }
    mpath = manifest_path(path)
    mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True, allow_nan=True))
    return mpath


def _parse_float(text: str, path, line: int, name: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise RecordParseError(path, line, f"{name} is not a number: {text!r}") from None


def read_records(path: str | Path) -> list[RunRecord]:
    """Inverse of :func:`write_records`; extras come from the manifest when present."""
    path = Path(path)
    records = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise RecordParseError(path, 1, "missing header") from None
        if header != HEADER:
            raise RecordParseError(path, 1, f"unexpected header {header}")
        for row in reader:
            line = reader.line_num
            if len(row) != len(HEADER):
                raise RecordParseError(path, line, f"expected {len(HEADER)} fields, got {len(row)}")
            if row[5] not in ("true", "false"):
                raise RecordParseError(path, line, f"pass must be true or false, got {row[5]!r}")
            records.append(RunRecord(
                experiment_id=row[0],
                lam=_parse_float(row[1], path, line, "lambda"),
                norm=_parse_float(row[2], path, line, "norm"),
                exponent_target=_parse_float(row[3], path, line, "exponent_target"),
                slope=_parse_float(row[4], path, line, "slope"),
                passed=row[5] == "true",
            ))
    mpath = manifest_path(path)
    if mpath.exists():
        try:
            manifest = json.loads(mpath.read_text())
        except json.JSONDecodeError as exc:
            raise RecordParseError(mpath, exc.lineno, exc.msg) from None
        entries = manifest.get("records", [])
        if len(entries) != len(records):
            raise RecordParseError(mpath, 1, f"{len(entries)} manifest entries for {len(records)} records")
        for r, e in zip(records, entries):
            r.config_hash = e.get("config_hash", "")
            r.extras = e.get("extras", {})
    return records


def read_manifest(path: str | Path) -> dict:
    return json.loads(manifest_path(path).read_text())


def records_equal(a: RunRecord, b: RunRecord) -> bool:
    """Field-by-field equality treating NaN as equal to NaN."""

    def same(x, y):
        if isinstance(x, float) and isinstance(y, float):
            return (math.isnan(x) and math.isnan(y)) or x == y
        if isinstance(x, dict) and isinstance(y, dict):
            return x.keys() == y.keys() and all(same(x[k], y[k]) for k in x)
        if isinstance(x, list) and isinstance(y, list):
            return len(x) == len(y) and all(same(u, v) for u, v in zip(x, y))
        return x == y

    return all(same(getattr(a, f), getattr(b, f)) for f in a.__dataclass_fields__)
