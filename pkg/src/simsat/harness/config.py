"""Sweep configuration: JSON schema, defaults and desk-scale guards."""

from __future__ import annotations

import copy
import json
import os
from pathlib import Path

import jsonschema

OUTPUT_ENV = "SIMSAT_OUTPUT_DIR"

D3_MAX_LAMBDA = 32
D3_MAX_GRID = 64

SURFACE_SCHEMA = {
    "type": "object",
    "required": ["type"],
    "properties": {
        "name": {"type": "string"},
        "type": {"enum": ["hyperplane", "paraboloid", "perturbed_paraboloid", "cylinder"]},
        "axis": {"type": "integer", "minimum": 0},
        "width": {"type": "number", "exclusiveMinimum": 0},
        "center": {"type": "array", "items": {"type": "number"}},
        "amplitude": {"type": "number"},
        "eps_tilde": {"type": "number", "minimum": 0, "exclusiveMaximum": 0.5},
    },
    "additionalProperties": False,
}

EXPONENT = {"anyOf": [{"type": "number", "exclusiveMinimum": 0}, {"const": "inf"}]}

SCHEMA = {
    "type": "object",
    "required": ["experiment_id", "d", "k", "surfaces", "lambdas", "norm", "target"],
    "properties": {
        "experiment_id": {"type": "string", "minLength": 1},
        "description": {"type": "string"},
        "d": {"enum": [2, 3]},
        "k": {"type": "integer", "minimum": 1},
        "surfaces": {"type": "array", "items": SURFACE_SCHEMA, "minItems": 1},
        "lambdas": {"type": "array", "items": {"type": "number", "minimum": 1}, "minItems": 3},
        "norm": {
            "type": "object",
            "required": ["outer", "p"],
            "properties": {
                "outer": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                "inner": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                "p": EXPONENT,
                "q": EXPONENT,
            },
            "additionalProperties": False,
        },
        "target": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["multilinear", "transversal", "curved_l2", "curved_mixed", "value"]},
                "p": {"type": "number", "exclusiveMinimum": 0},
                "value": {"type": "number"},
            },
            "additionalProperties": False,
        },
        "slack": {"type": "number", "minimum": 0},
        "expect": {"enum": ["within", "exceed"]},
        "eps": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "grid": {
            "type": "object",
            "properties": {
                "n": {"type": "array", "items": {"type": "integer", "minimum": 2}},
                "oversampling": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "quadrature": {
            "type": "object",
            "properties": {"oversampling": {"type": "number", "exclusiveMinimum": 0}},
            "additionalProperties": False,
        },
        "family": {
            "type": "object",
            "properties": {
                "random_draws": {"type": "integer", "minimum": 0},
                "degree": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "levelsets": {"type": "boolean"},
        "stability_factor": {"type": "number", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "output": {
            "type": "object",
            "properties": {"dir": {"type": "string"}, "name": {"type": "string"}},
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}

DEFAULTS = {
    "expect": "within",
    "eps": 0.1,
    "grid": {"oversampling": 8.0},
    "quadrature": {"oversampling": 8.0},
    "family": {"random_draws": 20, "degree": 3},
    "levelsets": False,
    "stability_factor": 4.0,
    "seed": 0,
    "output": {"dir": "runs"},
}


class ConfigError(ValueError):
    pass


def _merge(defaults: dict, given: dict) -> dict:
    out = copy.deepcopy(defaults)
    for key, val in given.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def validate_config(raw: dict) -> dict:
    """Schema check, defaults and cross-field guards; returns the completed config."""
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None
    cfg = _merge(DEFAULTS, raw)
    cfg.setdefault("slack", 0.15 if cfg["d"] == 2 else 0.3)
    d, k = cfg["d"], cfg["k"]
    if k > d:
        raise ConfigError(f"k={k} exceeds d={d}")
    if len(cfg["surfaces"]) != k:
        raise ConfigError(f"expected {k} surfaces, got {len(cfg['surfaces'])}")
    for s in cfg["surfaces"]:
        if s.get("axis", 0) >= d:
            raise ConfigError(f"surface axis {s['axis']} outside 0..{d - 1}")
    axes = cfg["norm"]["outer"] + cfg["norm"].get("inner", [])
    if sorted(axes) != list(range(d)):
        raise ConfigError(f"norm blocks {axes} must partition the axes 0..{d - 1}")
    lams = cfg["lambdas"]
    if sorted(lams) != lams or len(set(lams)) != len(lams):
        raise ConfigError("lambdas must be strictly increasing")
    if "n" in cfg["grid"] and len(cfg["grid"]["n"]) != len(lams):
        raise ConfigError("grid.n needs one entry per lambda")
    if d == 3:
        if max(lams) > D3_MAX_LAMBDA:
            raise ConfigError(f"d=3 sweeps are limited to lambda <= {D3_MAX_LAMBDA}")
        if max(cfg["grid"].get("n", [0])) > D3_MAX_GRID:
            raise ConfigError(f"d=3 sweeps are limited to {D3_MAX_GRID} grid points per axis")
    return cfg


def load_config(path: str | Path) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from None
    return validate_config(raw)


def output_dir(cfg: dict) -> Path:
    """Output directory; ``SIMSAT_OUTPUT_DIR`` takes precedence over the config."""
    return Path(os.environ.get(OUTPUT_ENV) or cfg["output"]["dir"])
