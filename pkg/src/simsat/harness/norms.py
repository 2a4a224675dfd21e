"""Evaluation grids and iterated (mixed) Lebesgue norms."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class GridGuardError(ValueError):
    """The evaluation grid is too coarse for the requested frequency."""


@dataclass(frozen=True)
class MixedNormSpec:
    """``L^p_y L^q_z``: inner block ``z`` at exponent ``q``, then outer block ``y`` at ``p``."""

    outer: tuple[int, ...]
    inner: tuple[int, ...]
    p: float
    q: float

    def __post_init__(self):
        object.__setattr__(self, "outer", tuple(int(a) for a in self.outer))
        object.__setattr__(self, "inner", tuple(int(a) for a in self.inner))
        axes = self.outer + self.inner
        if sorted(axes) != list(range(len(axes))):
            raise ValueError(f"blocks {self.outer} and {self.inner} must partition the axes")
        for e in (self.p, self.q):
            if not e > 0:
                raise ValueError("exponents must be positive or inf")

    @classmethod
    def plain(cls, d: int, p: float) -> "MixedNormSpec":
        return cls(tuple(range(d)), (), p, p)


def _block_norm(values: np.ndarray, exponent: float, cell: float) -> np.ndarray:
    """Norm along the last axis of ``values`` (already non-negative)."""
    if values.shape[-1] == 0:
        return np.zeros(values.shape[:-1])
    if math.isinf(exponent):
        return values.max(axis=-1)
    return (np.sum(values**exponent, axis=-1) * cell) ** (1 / exponent)


def mixed_norm(field: np.ndarray, spec: MixedNormSpec, spacing: float | Sequence[float]) -> float:
    """Riemann-sum ``||g||_{L^p_y L^q_z}`` of a field sampled on a tensor grid.

    ``spacing`` is the cell width, one value for all axes or one per axis.
    """
    g = np.abs(np.asarray(field))
    if g.ndim != len(spec.outer) + len(spec.inner):
        raise ValueError(f"field has {g.ndim} axes, spec covers {len(spec.outer) + len(spec.inner)}")
    h = np.broadcast_to(np.asarray(spacing, dtype=float), (g.ndim,))
    g = np.transpose(g, spec.outer + spec.inner)
    n_outer = int(np.prod([g.shape[i] for i in range(len(spec.outer))]))
    g = g.reshape(n_outer, -1)
    if spec.inner:
        inner = _block_norm(g, spec.q, float(np.prod(h[list(spec.inner)])))
    else:
        inner = g[:, 0]
    outer_cell = float(np.prod(h[list(spec.outer)])) if spec.outer else 1.0
    return float(_block_norm(inner[None, :], spec.p, outer_cell)[0])


@dataclass
class BallGrid:
    """Cell-centered grid on ``[-1, 1]^d`` masked to the closed unit ball."""

    d: int
    n: int
    mask: np.ndarray
    points: np.ndarray

    @property
    def spacing(self) -> float:
        return 2.0 / self.n

    @classmethod
    def build(cls, d: int, n: int) -> "BallGrid":
        axis = -1 + (np.arange(n) + 0.5) * (2.0 / n)
        mesh = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1)
        mask = np.sum(mesh**2, axis=-1) <= 1.0
        return cls(d, n, mask, mesh[mask])

    def scatter(self, values: np.ndarray) -> np.ndarray:
        """Place masked-point values into the full ``n^d`` array, zero outside the ball."""
        out = np.zeros(self.mask.shape, dtype=np.asarray(values).dtype)
        out[self.mask] = values
        return out


def max_spacing(lam: float, xi_max: float, oversampling: float) -> float:
    """Largest spacing that keeps ``oversampling`` points per wavelength ``2 pi / (lam xi_max)``."""
    return 2 * math.pi / (oversampling * lam * xi_max)


def grid_size_for(lam: float, xi_max: float, oversampling: float) -> int:
    return int(math.ceil(2.0 / max_spacing(lam, xi_max, oversampling)))


def check_grid(n: int, lam: float, xi_max: float, oversampling: float) -> None:
    h = 2.0 / n
    h_max = max_spacing(lam, xi_max, oversampling)
    if h > h_max * (1 + 1e-12):
        raise GridGuardError(
            f"grid spacing {h:.4g} exceeds {h_max:.4g} needed at lam={lam} "
            f"({oversampling:g} points per wavelength); use at least {grid_size_for(lam, xi_max, oversampling)} points per axis"
        )
