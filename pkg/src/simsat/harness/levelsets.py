"""Dyadic level sets of a product field, greedy separated nets and the shell-wise N-bound."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..saturation import theorem_bound


@dataclass
class LevelSetPartition:
    """Shell ``i`` holds grid points with ``2^{-i-1} < g <= 2^{-i}``; ``-1`` marks the floor."""

    lam: float
    k: int
    I: int
    index: np.ndarray
    scale: float

    def shell(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.index == i)

    @property
    def shells(self) -> dict[int, np.ndarray]:
        return {i: self.shell(i) for i in range(self.I + 1)}

    def below_floor(self) -> np.ndarray:
        return np.flatnonzero(self.index < 0)


def dyadic_index(g: np.ndarray) -> np.ndarray:
    """Exact ``i`` with ``2^{-i-1} < g <= 2^{-i}`` for ``0 < g <= 1``."""
    mant, expo = np.frexp(np.asarray(g, dtype=float))
    return np.where(mant == 0.5, 1 - expo, -expo).astype(np.int64)


def floor_index(lam: float, k: int) -> int:
    """``I`` with ``2^{-I}`` at (or just below) ``lam^{-k(k-1)/2}``."""
    return int(math.ceil(k * (k - 1) / 2 * math.log2(lam) - 1e-12))


def level_set_partition(magnitudes, lam: float, k: int, I: int | None = None,
                        scale: float | None = None) -> LevelSetPartition:
    """Split points into dyadic shells of ``g = |F| / scale``.

    ``scale`` defaults to the measured maximum, so the top shell is
    non-empty. Points with ``g <= 2^{-I-1}`` fall below the floor.
    """
    mags = np.abs(np.asarray(magnitudes, dtype=float)).ravel()
    if mags.size == 0:
        raise ValueError("empty field")
    scale = float(mags.max()) if scale is None else float(scale)
    if scale <= 0:
        raise ValueError("field vanishes identically")
    if mags.max() > scale * (1 + 1e-12):
        raise ValueError("field exceeds the normalizing scale")
    I = floor_index(lam, k) if I is None else int(I)
    g = np.minimum(mags / scale, 1.0)
    idx = np.full(g.shape, -1, dtype=np.int64)
    pos = g > 0
    idx[pos] = dyadic_index(g[pos])
    idx[idx > I] = -1
    return LevelSetPartition(lam, k, I, idx, scale)


@dataclass
class SeparatedNet:
    points: np.ndarray
    indices: np.ndarray
    radius: float
    level: int | None = None

    @property
    def size(self) -> int:
        return int(self.indices.size)


def greedy_net(points, radius: float, level: int | None = None) -> SeparatedNet:
    """Maximal ``radius``-separated subset, scanning points in lexicographic order.

    A point joins the net when it is at distance at least ``radius`` from
    every point already chosen. Candidates are looked up in a hash of cells
    of side ``radius``.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    P = np.atleast_2d(np.asarray(points, dtype=float))
    if P.size == 0:
        return SeparatedNet(np.empty((0, P.shape[-1] if P.ndim == 2 else 0)), np.empty(0, dtype=np.int64), radius, level)
    order = np.lexsort(P.T[::-1])
    cells = np.floor(P / radius).astype(np.int64)
    d = P.shape[1]
    offsets = np.stack(np.meshgrid(*([np.arange(-1, 2)] * d), indexing="ij"), -1).reshape(-1, d)
    buckets: dict[tuple, list[int]] = {}
    chosen: list[int] = []
    r2 = radius * radius
    for i in order:
        c = cells[i]
        ok = True
        for off in offsets:
            for j in buckets.get(tuple(c + off), ()):
                if np.sum((P[i] - P[j]) ** 2) < r2:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            chosen.append(int(i))
            buckets.setdefault(tuple(c), []).append(int(i))
    idx = np.array(chosen, dtype=np.int64)
    return SeparatedNet(P[idx], idx, radius, level)


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


@dataclass
class ShellReport:
    level: int
    N: int
    L: float
    omega_estimate: float
    omega_measured: float
    omega_bound: float
    C: float


@dataclass
class OmegaReport:
    lam: float
    eps: float
    B: float
    shells: list[ShellReport] = field(default_factory=list)

    def C_of(self, level: int) -> float | None:
        for s in self.shells:
            if s.level == level:
                return s.C
        return None


def omega_bound_check(partition: LevelSetPartition, nets: dict[int, SeparatedNet], lam: float,
                      eps: float, B: float, d: int, cell_volume: float) -> OmegaReport:
    """Shell-wise sizes against the N-bound with constant 1.

    With ``k`` operators and the shell-``i`` lower bound
    ``L_i = (2^{-i-1} scale)^{1/k}`` on each factor, the net size ``N_i``
    gives the fitted constant ``C_i = N_i^{1-eps} (L_i/B)^{2k/(k-1)}`` (or
    ``(L_i/B)^2`` for ``k = 1``). The size estimate is
    ``N_i * vol(B_1) * r^d`` with ``r = lam^{-1+eps}``, and the bound uses the
    largest ``N`` allowed by the theorem at ``C = 1``.
    """
    k = partition.k
    r = lam ** (-1 + eps)
    ball = unit_ball_volume(d) * r**d
    report = OmegaReport(lam, eps, B)
    for i, net in sorted(nets.items()):
        if net.size == 0:
            continue
        L = (2.0 ** (-i - 1) * partition.scale) ** (1 / k)
        L = min(L, B)
        rhs = theorem_bound(net.size, k, B, L, eps)
        n_max = rhs ** (1 / (1 - eps))
        C = net.size ** (1 - eps) / rhs
        report.shells.append(ShellReport(
            level=i, N=net.size, L=L,
            omega_estimate=net.size * ball,
            omega_measured=partition.shell(i).size * cell_volume,
            omega_bound=n_max * ball, C=C,
        ))
    return report


def constant_stability(values: Sequence[float], factor: float = 4.0) -> tuple[float, bool]:
    """Spread ``max/min`` of fitted constants and whether it stays within ``factor``."""
    v = np.asarray([x for x in values if x is not None and x > 0], dtype=float)
    if v.size == 0:
        return math.inf, False
    spread = float(v.max() / v.min())
    return spread, spread <= factor
