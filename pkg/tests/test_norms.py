import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from simsat.harness.norms import BallGrid, GridGuardError, MixedNormSpec, check_grid, grid_size_for, mixed_norm


def unit_box(n, d):
    return (np.arange(n) + 0.5) / n, 1.0 / n


@pytest.mark.parametrize("p,q", [(1, 1), (2, 4), (4, math.inf), (0.5, 3)])
def test_constant_on_unit_box(p, q):
    g = np.ones((40, 30))
    assert math.isclose(mixed_norm(g, MixedNormSpec((0,), (1,), p, q), [1 / 40, 1 / 30]), 1.0, rel_tol=1e-12)


def test_equal_exponents_is_plain_norm():
    rng = np.random.default_rng(0)
    g = rng.standard_normal((12, 9, 7))
    h = 0.1
    for p in (1, 2, 3.5):
        plain = (np.sum(np.abs(g) ** p) * h**3) ** (1 / p)
        assert math.isclose(mixed_norm(g, MixedNormSpec((0, 2), (1,), p, p), h), plain, rel_tol=1e-12)
        assert math.isclose(mixed_norm(g, MixedNormSpec.plain(3, p), h), plain, rel_tol=1e-12)


def test_separable_field():
    y, hy = unit_box(50, 1)
    z, hz = unit_box(70, 1)
    a, c = np.sin(3 * y) + 2, np.exp(-z)
    g = np.outer(a, c)
    p, q = 4.0, 3.0
    na = (np.sum(a**p) * hy) ** (1 / p)
    nc = (np.sum(c**q) * hz) ** (1 / q)
    assert math.isclose(mixed_norm(g, MixedNormSpec((0,), (1,), p, q), [hy, hz]), na * nc, rel_tol=1e-10)
    # inner sup
    assert math.isclose(mixed_norm(g, MixedNormSpec((0,), (1,), p, math.inf), [hy, hz]), na * c.max(), rel_tol=1e-10)


def test_zero_field_and_validation():
    assert mixed_norm(np.zeros((4, 4)), MixedNormSpec((1,), (0,), 2, 2), 0.5) == 0
    with pytest.raises(ValueError):
        MixedNormSpec((0,), (0,), 2, 2)
    with pytest.raises(ValueError):
        MixedNormSpec((0,), (1,), 0, 2)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 1000), st.floats(0.5, 6), st.one_of(st.floats(0.5, 6), st.just(math.inf)),
       st.floats(0.01, 100))
def test_homogeneity_and_monotonicity(seed, p, q, c):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((8, 6)) + 1j * rng.standard_normal((8, 6))
    spec = MixedNormSpec((1,), (0,), p, q)
    base = mixed_norm(g, spec, 0.1)
    assert math.isclose(mixed_norm(c * g, spec, 0.1), c * base, rel_tol=1e-12)
    bigger = np.abs(g) + rng.uniform(0, 1, size=g.shape)
    assert mixed_norm(bigger, spec, 0.1) >= base


def test_ball_grid():
    grid = BallGrid.build(2, 64)
    area = grid.mask.sum() * grid.spacing**2
    assert abs(area - math.pi) < 0.05
    full = grid.scatter(np.ones(grid.points.shape[0]))
    assert full.sum() == grid.mask.sum()


def test_grid_guard():
    n = grid_size_for(64, 1.2, 8)
    check_grid(n, 64, 1.2, 8)
    with pytest.raises(GridGuardError):
        check_grid(n // 2, 64, 1.2, 8)
