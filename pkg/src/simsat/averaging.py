"""Averaging and cycle matrices on ``(S_N)^M``.

The even and odd averaging matrices are scaled indicators of the
equivalence relations ``~ev`` and ``~odd``; the cycle matrix is the
permutation matrix of the left rotation of tuples. Structural identities are
checked on integer counts (before scaling), so they are exact; spectral
checks use a relative floating tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .perm import TupleSpace

SPECTRAL_TOL = 1e-9
SYMMETRY_TOL = 1e-12


class StructuralMismatch(AssertionError):
    """A structural identity failed; ``entries`` lists offending positions."""

    def __init__(self, message: str, entries: list[tuple[int, int, float, float]]):
        super().__init__(message + (f"; first offending entries: {entries[:5]}" if entries else ""))
        self.entries = entries


class NonHermitianError(ValueError):
    pass


@dataclass
class ScaledIndicatorMatrix:
    """A ``D x D`` matrix whose nonzero entries all equal ``scale``.

    Only the support ``(rows[k], cols[k])`` is stored.
    """

    dimension: int
    scale: float
    rows: np.ndarray
    cols: np.ndarray

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.int64)
        self.cols = np.asarray(self.cols, dtype=np.int64)
        if self.rows.shape != self.cols.shape:
            raise ValueError("rows and cols must have equal length")
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    @property
    def nnz(self) -> int:
        return int(self.rows.size)

    def counts(self) -> sp.csr_matrix:
        """Integer 0/1 indicator as a sparse matrix."""
        data = np.ones(self.nnz, dtype=np.int64)
        return sp.csr_matrix((data, (self.rows, self.cols)), shape=(self.dimension,) * 2)

    def to_dense(self) -> np.ndarray:
        return self.counts().toarray().astype(float) * self.scale

    def row_sums(self) -> np.ndarray:
        return np.bincount(self.rows, minlength=self.dimension) * self.scale

    def support(self) -> set[tuple[int, int]]:
        return set(zip(self.rows.tolist(), self.cols.tolist()))

    def dump_triplets(self, path: str | Path) -> None:
        """Write ``row col value`` lines, one per support entry."""
        order = np.lexsort((self.cols, self.rows))
        with open(path, "w") as fh:
            for r, c in zip(self.rows[order], self.cols[order]):
                fh.write(f"{r} {c} {self.scale!r}\n")


def _class_indicator(space: TupleSpace, parity: str) -> ScaledIndicatorMatrix:
    labels = space.class_labels(parity)
    order = np.argsort(labels, kind="stable")
    sorted_labels = labels[order]
    bounds = np.flatnonzero(np.diff(sorted_labels)) + 1
    rows, cols = [], []
    for members in np.split(order, bounds):
        rr, cc = np.meshgrid(members, members, indexing="ij")
        rows.append(rr.ravel())
        cols.append(cc.ravel())
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    return ScaledIndicatorMatrix(space.D, 1.0 / math.isqrt(space.D), rows, cols)


def _space(n: int, m: int) -> TupleSpace:
    if m % 2:
        raise ValueError(f"averaging matrices need even M (got M={m}); embed odd systems first")
    return TupleSpace(n, m)


def build_even_projector(n: int, m: int) -> ScaledIndicatorMatrix:
    return _class_indicator(_space(n, m), "even")


def build_odd_projector(n: int, m: int) -> ScaledIndicatorMatrix:
    return _class_indicator(_space(n, m), "odd")


def build_cycle_matrix(n: int, m: int) -> ScaledIndicatorMatrix:
    """Entry ``(s, t)`` is 1 iff ``t`` is the left rotation of ``s``."""
    space = TupleSpace(n, m)
    rows = np.arange(space.D)
    return ScaledIndicatorMatrix(space.D, 1.0, rows, space.shift)


def _count_products(n: int, m: int):
    E = build_even_projector(n, m).counts()
    O = build_odd_projector(n, m).counts()
    return E, O


def build_symmetrized_average(n: int, m: int) -> np.ndarray:
    """Dense ``A_ev A_odd + A_odd A_ev``."""
    E, O = _count_products(n, m)
    D = E.shape[0]
    counts = (E @ O + O @ E).toarray()
    return counts.astype(float) / D


def build_uniform_average(n: int, m: int = 1) -> np.ndarray:
    """All-entries matrix ``J / D``; the averaging used when ``M = 1``."""
    D = math.factorial(n) ** m
    return np.full((D, D), 1.0 / D)


def _mismatches(lhs: sp.spmatrix, rhs: sp.spmatrix, scale: float = 1.0) -> list:
    diff = sp.coo_matrix(lhs - rhs)
    diff.eliminate_zeros()
    L, R = lhs.tocsr(), rhs.tocsr()
    return [
        (int(r), int(c), float(L[r, c]) * scale, float(R[r, c]) * scale)
        for r, c in zip(diff.row, diff.col)
    ]


@dataclass
class StructuralReport:
    name: str
    N: int
    M: int
    passed: bool
    details: dict = field(default_factory=dict)


def check_similarity(n: int, m: int) -> StructuralReport:
    """``A_odd = C A_ev C^-1`` and ``C^2`` commutes with both projectors.

    Raises :class:`StructuralMismatch` on any inexact entry.
    """
    E, O = _count_products(n, m)
    C = build_cycle_matrix(n, m).counts()
    Ct = C.T.tocsr()  # C is a permutation matrix, so C^-1 = C^T
    bad = _mismatches(O, C @ E @ Ct)
    if bad:
        raise StructuralMismatch("A_odd != C A_ev C^-1", bad)
    C2 = C @ C
    for name, P in (("A_ev", E), ("A_odd", O)):
        bad = _mismatches(C2 @ P, P @ C2)
        if bad:
            raise StructuralMismatch(f"C^2 does not commute with {name}", bad)
    CM = sp.identity(E.shape[0], dtype=np.int64, format="csr")
    for _ in range(m):
        CM = CM @ C
    bad = _mismatches(CM, sp.identity(E.shape[0], dtype=np.int64))
    if bad:
        raise StructuralMismatch("C^M != Id", bad)
    return StructuralReport("similarity", n, m, True, {"D": E.shape[0]})


def check_weaving_product(n: int, m: int) -> StructuralReport:
    """Compare the projector products with the weaving indicator.

    On counts, ``(O E)[s, t]`` is the number of tuples ``mu`` with
    ``mu ~odd s`` and ``mu ~ev t``; it must equal ``N!`` exactly where ``s``
    weaves ``t`` and 0 elsewhere. After scaling by ``1/D`` this is the
    ``D^{-(1-1/M)}`` weighted indicator.
    """
    space = _space(n, m)
    E, O = _count_products(n, m)
    W = sp.csr_matrix(space.weave_matrix().astype(np.int64))
    witnesses = math.factorial(n)
    inv_D = 1.0 / space.D
    bad = _mismatches(O @ E, witnesses * W, inv_D)
    if bad:
        raise StructuralMismatch("A_odd A_ev != D^-(1-1/M) [s weaves t]", bad)
    bad = _mismatches(E @ O, witnesses * W.T, inv_D)
    if bad:
        raise StructuralMismatch("A_ev A_odd != D^-(1-1/M) [t weaves s]", bad)
    return StructuralReport(
        "weaving_product",
        n,
        m,
        True,
        {"D": space.D, "nonzero_per_product": int(W.nnz), "entry": witnesses * inv_D},
    )


def check_class_sizes(n: int, m: int) -> StructuralReport:
    space = _space(n, m)
    root = math.isqrt(space.D)
    sizes = {}
    for parity in ("even", "odd"):
        counts = np.bincount(space.class_labels(parity))
        if not np.all(counts == root):
            raise StructuralMismatch(f"~{parity} class sizes {sorted(set(counts))} != {root}", [])
        sizes[parity] = int(counts.size)
    return StructuralReport("class_sizes", n, m, True, {"classes": sizes, "size": root})


def check_projector_identity(n: int, m: int) -> StructuralReport:
    """``(A_ev + A_odd)^2 = A_ev + A_odd + A`` and idempotence, on counts."""
    E, O = _count_products(n, m)
    root = math.isqrt(E.shape[0])
    S = E + O
    bad = _mismatches(S @ S - root * S, E @ O + O @ E)
    if bad:
        raise StructuralMismatch("(A_ev+A_odd)^2 - A_ev - A_odd != A", bad)
    for name, P in (("A_ev", E), ("A_odd", O)):
        bad = _mismatches(P @ P, root * P)
        if bad:
            raise StructuralMismatch(f"{name} is not idempotent", bad)
        bad = _mismatches(P, P.T)
        if bad:
            raise StructuralMismatch(f"{name} is not symmetric", bad)
    return StructuralReport("projector_identity", n, m, True, {"D": E.shape[0]})


@dataclass
class PSDResult:
    lambda_min: float
    norm: float
    is_psd: bool

    def __float__(self) -> float:
        return self.lambda_min


def check_hermitian(H: np.ndarray, tol: float = SYMMETRY_TOL) -> None:
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise NonHermitianError(f"expected a square matrix, got shape {H.shape}")
    scale = np.max(np.abs(H)) if H.size else 0.0
    dev = np.max(np.abs(H - H.conj().T)) if H.size else 0.0
    if dev > tol * scale:
        raise NonHermitianError(f"max |H - H^*| = {dev:.3e} exceeds {tol:g} * max|H| = {tol * scale:.3e}")


def check_psd(H: np.ndarray, tol: float = SPECTRAL_TOL) -> PSDResult:
    """Smallest eigenvalue of a Hermitian matrix and a PSD verdict.

    The verdict is ``lambda_min >= -tol * ||H||_2``.
    """
    check_hermitian(H)
    H = np.asarray(H)
    if H.size == 0:
        return PSDResult(0.0, 0.0, True)
    ev = np.linalg.eigvalsh((H + H.conj().T) / 2)
    norm = float(np.max(np.abs(ev)))
    lam = float(ev[0])
    return PSDResult(lam, norm, lam >= -tol * norm)


def projector_sum_spectrum(n: int, m: int) -> np.ndarray:
    E = build_even_projector(n, m).to_dense()
    O = build_odd_projector(n, m).to_dense()
    return np.linalg.eigvalsh(E + O)


def check_spectral_gap(n: int, m: int, tol: float = SPECTRAL_TOL) -> StructuralReport:
    """Nonzero eigenvalues of ``A_ev + A_odd`` are at least 1."""
    ev = projector_sum_spectrum(n, m)
    nonzero = ev[np.abs(ev) > tol * max(1.0, np.max(np.abs(ev)))]
    smallest = float(nonzero.min()) if nonzero.size else float("nan")
    passed = bool(nonzero.size == 0 or smallest >= 1 - tol)
    return StructuralReport("spectral_gap", n, m, passed, {"smallest_nonzero": smallest})


def check_cycle_spectrum(n: int, m: int, tol: float = SPECTRAL_TOL) -> StructuralReport:
    """Eigenvalues of ``C`` lie on the unit circle and are ``M``-th roots of unity."""
    C = build_cycle_matrix(n, m).to_dense()
    ev = np.linalg.eigvals(C)
    unit = np.max(np.abs(np.abs(ev) - 1))
    root = np.max(np.abs(ev**m - 1))
    passed = bool(unit <= tol and root <= tol)
    return StructuralReport("cycle_spectrum", n, m, passed, {"max_modulus_dev": float(unit), "max_root_dev": float(root)})
