import json
import math
from pathlib import Path

import numpy as np
import pytest

from simsat.extension import extension_eval, paraboloid, quadrature_for, transversal_family
from simsat.harness.config import validate_config
from simsat.harness.norms import BallGrid, GridGuardError
from simsat.harness.sweep import (fit_slope, product_field, random_phase_family, restriction_sweep,
                                  target_exponent)

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def test_targets():
    assert target_exponent("multilinear", 2, 2, 4) == -1
    assert target_exponent("multilinear", 3, 3) == -3
    assert target_exponent("transversal", 3, 2) == -2
    assert target_exponent("curved_l2", 3, 1) == -0.5
    assert target_exponent("curved_mixed", 2, 1) == -0.25
    with pytest.raises(ValueError):
        target_exponent("nope", 2, 1)


def test_fit_recovers_power_law():
    lams = np.array([8.0, 16.0, 32.0, 64.0])
    for alpha in (0.25, 1.0, 2.7):
        assert abs(fit_slope(lams, 3.0 * lams**-alpha) + alpha) < 1e-6


def test_product_field_single_and_zero():
    H = paraboloid(2)
    pts = BallGrid.build(2, 16).points
    single = product_field([H], 4.0, [None], pts)
    grid = quadrature_for(H, 4.0, 1.0)
    direct = extension_eval(H, 4.0, np.ones(grid.nodes.shape[0]) / math.sqrt(grid.weights.sum()), pts, grid=grid)
    assert np.allclose(single, direct)
    fam = transversal_family(2, 2)
    zero = product_field(fam, 8.0, [None, lambda nodes: np.zeros(nodes.shape[0])], pts)
    assert np.all(zero == 0)


def test_product_bounded_by_factor_sups():
    fam = transversal_family(2, 2)
    pts = BallGrid.build(2, 48).points
    prod = product_field(fam, 32.0, [None, None], pts)
    sups = [np.max(np.abs(product_field([H], 32.0, [None], pts))) for H in fam]
    assert np.max(np.abs(prod)) <= np.prod(sups) * (1 + 1e-12)


def test_random_family_normalized():
    H = paraboloid(2)
    fn = random_phase_family(H, 5, 3, np.random.default_rng(0))
    grid = quadrature_for(H, 16.0)
    F = fn(grid)
    assert F.shape == (6, grid.nodes.shape[0])
    assert np.allclose(np.sum(np.abs(F) ** 2 * grid.weights, axis=1), 1.0)
    assert np.allclose(F[0], F[0][0])


def small_config(**over):
    cfg = json.loads((CONFIGS / "curved_endpoint_d2.json").read_text())
    cfg.update({"lambdas": [8, 16, 32], "family": {"random_draws": 3, "degree": 2}})
    cfg.update(over)
    return validate_config(cfg)


def test_sweep_is_deterministic():
    a = restriction_sweep(small_config())
    b = restriction_sweep(small_config())
    assert [r.norm for r in a.records] == [r.norm for r in b.records]
    assert a.slope == b.slope
    assert [r.extras for r in a.records] == [r.extras for r in b.records]
    c = restriction_sweep(small_config(), seed=5)
    assert [r.extras["family_norms"][1:] for r in c.records] != [r.extras["family_norms"][1:] for r in a.records]


def test_sweep_grid_guard():
    with pytest.raises(GridGuardError):
        restriction_sweep(small_config(grid={"n": [8, 8, 8]}))


def test_sweep_levelsets_recorded():
    cfg = json.loads((CONFIGS / "bilinear_d2.json").read_text())
    cfg["family"] = {"random_draws": 1, "degree": 2}
    res = restriction_sweep(validate_config(cfg))
    ls = res.records[0].extras["levelsets"]
    assert ls["N"]["0"] >= 1 and ls["C"]["0"] > 0
    assert res.stability["stable"]
