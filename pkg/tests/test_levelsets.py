import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from simsat.harness.levelsets import (constant_stability, dyadic_index, floor_index, greedy_net,
                                      level_set_partition, omega_bound_check, unit_ball_volume)


def test_constant_field_top_shell():
    part = level_set_partition(np.ones(50), 16.0, 2)
    assert part.shell(0).size == 50
    assert part.below_floor().size == 0


def test_two_value_field():
    part = level_set_partition(np.array([0.6, 0.3]), 16.0, 2, scale=1.0)
    assert part.index.tolist() == [0, 1]


def test_dyadic_boundaries():
    assert dyadic_index(np.array([1.0, 0.5, 0.25, 0.500001, 0.2499999])).tolist() == [0, 1, 2, 0, 2]


def test_floor_index():
    assert floor_index(16.0, 2) == 4
    assert floor_index(64.0, 3) == 18
    assert floor_index(10.0, 1) == 0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([2, 3]), st.sampled_from([8.0, 16.0, 64.0]))
def test_partition_exhaustive(seed, k, lam):
    rng = np.random.default_rng(seed)
    mags = rng.exponential(size=500) ** 4
    part = level_set_partition(mags, lam, k)
    g = mags / mags.max()
    seen = np.concatenate([part.shell(i) for i in range(part.I + 1)] + [part.below_floor()])
    assert sorted(seen.tolist()) == list(range(mags.size))
    for i in range(part.I + 1):
        vals = g[part.shell(i)]
        assert np.all(vals > 2.0 ** (-i - 1)) and np.all(vals <= 2.0**-i)
    assert np.all(g[part.below_floor()] <= 2.0 ** (-part.I - 1))


def test_empty_field_rejected():
    with pytest.raises(ValueError):
        level_set_partition(np.array([]), 16.0, 2)
    with pytest.raises(ValueError):
        level_set_partition(np.zeros(4), 16.0, 2)


def test_net_examples():
    assert greedy_net(np.array([[0.3, 0.4]]), 0.1).size == 1
    assert greedy_net(np.array([[0.0, 0.0], [0.2, 0.0]]), 0.1).size == 2
    r = 0.05
    ax = np.arange(0, 1, r / 2)
    pts = np.stack(np.meshgrid(ax, ax, indexing="ij"), -1).reshape(-1, 2)
    n = greedy_net(pts, r).size
    assert (1 / r) ** 2 / 4 <= n <= 4 * (1 / r) ** 2


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.03, 0.3), st.sampled_from([1, 2, 3]))
def test_net_separated_and_maximal(seed, radius, d):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-1, 1, size=(300, d))
    net = greedy_net(pts, radius)
    D = np.linalg.norm(net.points[:, None] - net.points[None], axis=-1)
    assert np.all(D[np.triu_indices(net.size, 1)] >= radius)
    dist_to_net = np.linalg.norm(pts[:, None] - net.points[None], axis=-1).min(axis=1)
    assert np.all(dist_to_net < radius + 1e-15)
    again = greedy_net(pts, radius)
    assert np.array_equal(again.indices, net.indices)


def test_omega_single_point_shell():
    part = level_set_partition(np.array([1.0, 0.01]), 16.0, 2)
    nets = {0: greedy_net(np.array([[0.0, 0.0]]), 0.1)}
    rep = omega_bound_check(part, nets, 16.0, 0.1, B=2.0, d=2, cell_volume=0.01)
    shell = rep.shells[0]
    assert shell.N == 1
    assert math.isclose(shell.C, (shell.L / 2.0) ** 4)
    assert shell.C <= 1
    assert math.isclose(shell.omega_estimate, math.pi * 16.0 ** (-1.8))


def test_ball_volume_and_stability():
    assert math.isclose(unit_ball_volume(2), math.pi)
    assert math.isclose(unit_ball_volume(3), 4 * math.pi / 3)
    assert constant_stability([1.0, 2.0, 3.9]) == (3.9, True)
    assert not constant_stability([1.0, 5.0])[1]
