"""Simultaneous systems, energy matrices and the trace/N-bound machinery.

A simultaneous system is a family ``T_1, ..., T_M`` of point-indexed
operators. All the engine needs from it are the pairwise kernels
``kernel(m, p, q) = T_m(p) T_m(q)^*`` and the relations on which kernels are
allowed to be large. ``FiniteSystem`` realizes this with explicit vectors:
``T_m(p) f = v_m(p) . f`` so that ``kernel(m, p, q) = <v_m(p), v_m(q)>``.
"""

from __future__ import annotations

import json
import math
from abc import ABC, abstractmethod
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .averaging import SPECTRAL_TOL, build_symmetrized_average, build_uniform_average, check_psd
from .perm import PermTuple, TupleSpace, dense_dimension, tuple_rank


class PreconditionError(ValueError):
    pass


class SimultaneousSystem(ABC):
    """Abstract operator family with pairwise kernels.

    Operator indices ``m`` are 1-based.
    """

    lam: float = 1.0

    @property
    @abstractmethod
    def M(self) -> int: ...

    @abstractmethod
    def kernel(self, m: int, p: Any, q: Any) -> complex: ...

    @abstractmethod
    def relation(self, m: int, p: Any, q: Any) -> bool: ...

    @property
    @abstractmethod
    def bound_B(self) -> float: ...

    def decay_rate(self, lam: float) -> float:
        """Bound on off-relation kernels at scale ``lam``. Exact zero by default."""
        return 0.0

    def gram(self, m: int, points: Sequence[Any]) -> np.ndarray:
        """Kernel matrix ``G[i, j] = kernel(m, points[i], points[j])``, made exactly Hermitian."""
        n = len(points)
        G = np.empty((n, n), dtype=complex)
        for i in range(n):
            for j in range(i, n):
                G[i, j] = self.kernel(m, points[i], points[j])
                G[j, i] = np.conj(G[i, j])
            G[i, i] = G[i, i].real
        return G


@dataclass(frozen=True)
class PointSet:
    """``N`` distinct points, optionally with coordinates for separation checks."""

    points: tuple
    coords: np.ndarray | None = None

    def __post_init__(self):
        pts = tuple(self.points)
        if len(set(map(_hashable, pts))) != len(pts):
            raise ValueError("points must be pairwise distinct")
        object.__setattr__(self, "points", pts)
        if self.coords is not None:
            c = np.asarray(self.coords, dtype=float)
            if c.shape[0] != len(pts):
                raise ValueError("coords must have one row per point")
            object.__setattr__(self, "coords", c)

    @classmethod
    def from_coords(cls, coords) -> "PointSet":
        c = np.atleast_2d(np.asarray(coords, dtype=float))
        return cls(tuple(tuple(row) for row in c), c)

    @property
    def N(self) -> int:
        return len(self.points)

    def min_separation(self) -> float:
        if self.coords is None or self.N < 2:
            return math.inf
        diff = self.coords[:, None, :] - self.coords[None, :, :]
        dist = np.sqrt((diff**2).sum(-1))
        return float(dist[np.triu_indices(self.N, 1)].min())

    def is_separated(self, lam: float, eps: float) -> bool:
        return self.min_separation() >= lam ** (-1 + eps)


def _hashable(p):
    return tuple(np.ravel(p).tolist()) if isinstance(p, np.ndarray) else p


class FiniteSystem(SimultaneousSystem):
    """Operators given by explicit vectors ``v_m(p)``, one table per ``m``.

    Points are integer indices into the tables. ``relations[m-1]`` is a
    boolean ``P x P`` array; by default two points are related iff their
    kernel is nonzero.
    """

    def __init__(self, vectors: Sequence[np.ndarray], relations: Sequence[np.ndarray] | None = None,
                 bound_B: float | None = None, lam: float = 1.0):
        self.vectors = [np.asarray(v, dtype=complex) for v in vectors]
        if not self.vectors:
            raise ValueError("need at least one operator")
        P = self.vectors[0].shape[0]
        if any(v.ndim != 2 or v.shape[0] != P for v in self.vectors):
            raise ValueError("every vector table must have shape (P, h_m) with a common P")
        self.P = P
        self._grams = []
        for v in self.vectors:
            G = v @ v.conj().T
            G = (G + G.conj().T) / 2
            self._grams.append(G)
        if relations is None:
            relations = [np.abs(G) > 0 for G in self._grams]
        self.relations = [np.asarray(r, dtype=bool) for r in relations]
        for m, (r, G) in enumerate(zip(self.relations, self._grams), start=1):
            if r.shape != (P, P):
                raise ValueError(f"relation {m} must be {P}x{P}")
            if not (np.all(r == r.T) and np.all(np.diag(r))):
                raise ValueError(f"relation {m} must be symmetric and reflexive")
            if np.any(G[~r] != 0):
                raise ValueError(f"operator {m} has nonzero kernel off its relation")
        norms = max(float(np.sqrt(np.max(np.real(np.diag(G))))) for G in self._grams)
        self._B = norms if bound_B is None else float(bound_B)
        if self._B < norms * (1 - 1e-12):
            raise ValueError(f"bound_B={self._B} is below the largest vector norm {norms}")
        self.lam = lam

    @property
    def M(self) -> int:
        return len(self.vectors)

    @property
    def bound_B(self) -> float:
        return self._B

    def kernel(self, m: int, p: int, q: int) -> complex:
        return complex(self._grams[m - 1][p, q])

    def relation(self, m: int, p: int, q: int) -> bool:
        return bool(self.relations[m - 1][p, q])

    def gram(self, m: int, points: Sequence[int]) -> np.ndarray:
        idx = np.asarray(points, dtype=np.int64)
        return self._grams[m - 1][np.ix_(idx, idx)]

    def apply(self, m: int, p: int, f: np.ndarray) -> complex:
        """``T_m(p) f``."""
        return complex(self.vectors[m - 1][p] @ np.asarray(f))

    # -- constructors -----------------------------------------------------

    @classmethod
    def random(cls, M: int, P: int, h: int, rng: np.random.Generator, *,
               n_groups: Sequence[int] | None = None, replicated: bool = False) -> "FiniteSystem":
        """Random complex vectors, with exact zeros off a random block relation.

        For operator ``m`` the points are split into ``n_groups[m-1]`` groups
        (an equivalence relation). Each group owns a disjoint block of the
        ``h`` coordinates, so vectors in different groups are exactly
        orthogonal. Vectors are scaled to norm at most 1. With ``replicated``
        one family is drawn (using ``n_groups[0]``) and shared by every ``m``.
        """
        if n_groups is None:
            n_groups = [1] * M
        if replicated:
            single = cls.random(1, P, h, rng, n_groups=[n_groups[0]])
            return cls(single.vectors * M, single.relations * M, bound_B=1.0)
        vectors, relations = [], []
        for g in n_groups:
            g = max(1, min(int(g), P, h))
            labels = rng.integers(0, g, size=P)
            blocks = np.array_split(np.arange(h), g)
            v = np.zeros((P, h), dtype=complex)
            for p in range(P):
                cols = blocks[labels[p]]
                v[p, cols] = rng.standard_normal(cols.size) + 1j * rng.standard_normal(cols.size)
            norms = np.linalg.norm(v, axis=1, keepdims=True)
            v = v / norms * rng.uniform(0.5, 1.0, size=(P, 1))
            vectors.append(v)
            relations.append(labels[:, None] == labels[None, :])
        return cls(vectors, relations, bound_B=1.0)

    @classmethod
    def diagonal(cls, M: int, P: int, B: float = 1.0) -> "FiniteSystem":
        """``kernel(m, p, q) = B^2 delta_pq`` for every ``m``."""
        v = B * np.eye(P, dtype=complex)
        return cls([v] * M, [np.eye(P, dtype=bool)] * M, bound_B=B)

    @classmethod
    def rank_one(cls, M: int, P: int, vector: np.ndarray) -> "FiniteSystem":
        """Every point carries the same vector."""
        v = np.tile(np.asarray(vector, dtype=complex), (P, 1))
        return cls([v] * M, [np.ones((P, P), dtype=bool)] * M)


def tensor_kernel(sys: SimultaneousSystem, s: PermTuple, t: PermTuple, base: PointSet) -> complex:
    """``prod_{m, j} kernel(m, p_{s_m(j)}, p_{t_m(j)})`` computed site by site."""
    if (s.N, s.M) != (t.N, t.M) or s.N != base.N or s.M != sys.M:
        raise ValueError("tuples, base points and system must share (N, M)")
    pts = base.points
    val = 1.0 + 0j
    for m in range(1, s.M + 1):
        for j in range(s.N):
            val *= sys.kernel(m, pts[s[m](j)], pts[t[m](j)])
    return val


@dataclass
class EnergyMatrix:
    W: np.ndarray
    N: int
    M: int
    lam: float = 1.0

    @property
    def D(self) -> int:
        return self.W.shape[0]


def permutation_kernel(G: np.ndarray) -> np.ndarray:
    """``K[a, b] = prod_j G[a(j), b(j)]`` over ``S_N`` in Lehmer order."""
    n = G.shape[0]
    space = TupleSpace(n, 1, guard=False)
    el = space.group.elements
    return G[el[:, None, :], el[None, :, :]].prod(axis=2)


def build_energy_matrix(sys: SimultaneousSystem, base: PointSet) -> EnergyMatrix:
    """``W(s, t) = U(P_s, P_t) / D`` as a Kronecker product over operators."""
    N, M = base.N, sys.M
    D = dense_dimension(N, M)
    W = np.ones((1, 1), dtype=complex)
    for m in range(1, M + 1):
        G = sys.gram(m, base.points)
        G = (G + G.conj().T) / 2
        W = np.kron(W, permutation_kernel(G))
    W /= D
    W = (W + W.conj().T) / 2
    return EnergyMatrix(W, N, M, getattr(sys, "lam", 1.0))


@dataclass
class OnesEigen:
    Lambda: float
    residual: float
    passed: bool


def ones_eigen_check(W: EnergyMatrix | np.ndarray, *, raise_on_fail: bool = True) -> OnesEigen:
    """The all-ones vector is an eigenvector of ``W``; return its eigenvalue.

    The row-sum residual must satisfy ``max_s |Z(s) - Z(e)| <= 1e-9 |Z(e)| + 1e-14``.
    """
    Wm = W.W if isinstance(W, EnergyMatrix) else np.asarray(W)
    Z = Wm.sum(axis=1)
    Lam = Z[0]
    residual = float(np.max(np.abs(Z - Lam)))
    passed = residual <= 1e-9 * abs(Lam) + 1e-14
    if not passed and raise_on_fail:
        raise AssertionError(f"ones vector is not an eigenvector: residual {residual:.3e}, Z(e) = {Lam}")
    return OnesEigen(float(Lam.real), residual, bool(passed))


def saturation_level(sys: SimultaneousSystem, base: PointSet, f: Sequence[np.ndarray] | None = None) -> float:
    """``L = min_{m, j} |T_m(p_j) f_m|`` for unit inputs ``f_m``.

    Only defined for :class:`FiniteSystem`. The default ``f_m`` is the unit
    vector along the conjugate mean of ``v_m(p_j)`` over the base points.
    """
    if not isinstance(sys, FiniteSystem):
        raise TypeError("saturation_level needs explicit operator vectors")
    idx = np.asarray(base.points, dtype=np.int64)
    L = math.inf
    for m in range(1, sys.M + 1):
        V = sys.vectors[m - 1][idx]
        if f is None:
            u = V.mean(axis=0).conj()
            if np.linalg.norm(u) == 0:
                u = V[0].conj()
        else:
            u = np.asarray(f[m - 1], dtype=complex)
        nu = np.linalg.norm(u)
        u = u / nu if nu > 0 else u
        L = min(L, float(np.min(np.abs(V @ u))))
    return L


@dataclass
class TraceReport:
    trace: float
    Lambda: float
    two_Lambda: float
    lambda_min_A: float
    lambda_min_W: float
    passes_Lambda: bool
    passes_two_Lambda: bool


def trace_bound_check(W: EnergyMatrix | np.ndarray, A: np.ndarray, tol: float = SPECTRAL_TOL,
                      require_psd: bool = True) -> TraceReport:
    """Lower bounds for ``Trace(A W)`` through the ones eigenvector.

    ``A W`` fixes the ones direction with eigenvalue ``a * Lambda`` where
    ``a`` is the ones eigenvalue of ``A`` (2 for the symmetrized average,
    1 for the uniform one). Both ``Lambda`` and ``2 Lambda`` are tested.
    Raises :class:`PreconditionError` unless both factors are PSD; with
    ``require_psd=False`` the inequalities are evaluated anyway and the
    smallest eigenvalues are reported for the caller to judge.
    """
    Wm = W.W if isinstance(W, EnergyMatrix) else np.asarray(W)
    A = np.asarray(A)
    if A.shape != Wm.shape:
        raise ValueError(f"shape mismatch: A {A.shape} vs W {Wm.shape}")
    pa, pw = check_psd(A, tol), check_psd(Wm, tol)
    if require_psd and not (pa.is_psd and pw.is_psd):
        raise PreconditionError(
            f"PSD precondition unverified: lambda_min(A) = {pa.lambda_min:.3e}, lambda_min(W) = {pw.lambda_min:.3e}"
        )
    trace = float(np.real(np.sum(A * Wm.T)))
    Lam = ones_eigen_check(Wm).Lambda
    return TraceReport(
        trace=trace,
        Lambda=Lam,
        two_Lambda=2 * Lam,
        lambda_min_A=pa.lambda_min,
        lambda_min_W=pw.lambda_min,
        passes_Lambda=trace >= Lam - tol * abs(Lam),
        passes_two_Lambda=trace >= 2 * Lam - tol * abs(2 * Lam),
    )


def averaging_matrix(n: int, m: int) -> np.ndarray:
    """The averaging matrix paired with ``W``: symmetrized for even ``M``, uniform for ``M = 1``."""
    if m == 1:
        return build_uniform_average(n, 1)
    return build_symmetrized_average(n, m)


def off_diagonal_trace_terms(W: EnergyMatrix | np.ndarray, A: np.ndarray, tol: float = 0.0) -> list[tuple[int, int]]:
    """Pairs ``s != t`` with ``A(s, t) W(t, s)`` nonzero (above ``tol``)."""
    Wm = W.W if isinstance(W, EnergyMatrix) else np.asarray(W)
    terms = np.abs(A * Wm.T)
    np.fill_diagonal(terms, 0)
    r, c = np.nonzero(terms > tol)
    return list(zip(r.tolist(), c.tolist()))


def loop_collapse_holds(sys: FiniteSystem, points: Sequence[int] | None = None) -> bool:
    """Brute-force non-degeneracy test on a finite relation table.

    Every closed chain ``p_1 ~ p_2 ~ ... ~ p_n ~ p_1`` of length ``n <= M``
    using pairwise distinct relations must have all points equal.
    """
    import itertools

    pts = list(range(sys.P)) if points is None else list(points)
    R = [r[np.ix_(pts, pts)] for r in sys.relations]
    P = len(pts)
    for n in range(2, sys.M + 1):
        for rels in itertools.permutations(range(sys.M), n):
            for loop in itertools.product(range(P), repeat=n):
                if len(set(loop)) == 1:
                    continue
                if all(R[rels[i]][loop[i], loop[(i + 1) % n]] for i in range(n)):
                    return False
    return True


@dataclass
class CensusResult:
    count: int
    bound: float
    passed: bool


def diagonal_census(base: PointSet | int, s: PermTuple, eps: float) -> CensusResult:
    """Count tuples ``mu`` that weave with ``s`` within Hamming distance ``eps N``.

    The count is compared with ``2^{MN} N^{eps N}``.
    """
    N = base if isinstance(base, int) else base.N
    if s.N != N:
        raise ValueError("tuple degree does not match the point count")
    space = TupleSpace(N, s.M)
    r = tuple_rank(s)
    partners = space.weaving_partners(r)
    close = space.hamming_to(r) <= eps * N + 1e-12
    count = int(np.count_nonzero(partners & close))
    bound = 2.0 ** (s.M * N) * float(N) ** (eps * N)
    return CensusResult(count, bound, count <= bound)


VARIANTS = ("theorem", "even_proof", "odd_proof", "m1")


def _check_bound_args(M: int, B: float, L: float, eps: float) -> None:
    if M < 1:
        raise ValueError("M must be >= 1")
    if not (L > 0 and B >= L):
        raise ValueError(f"need B >= L > 0 (got B={B}, L={L})")
    if not 0 <= eps < 1:
        raise ValueError(f"need 0 <= eps < 1 (got {eps})")


def n_exponent(M: int, eps: float, variant: str = "theorem") -> float:
    """Power of ``N`` on the left of the bound for each variant."""
    if variant in ("theorem", "m1"):
        if variant == "m1" and M != 1:
            raise ValueError("the m1 variant needs M = 1")
        return 1 - eps
    if variant == "even_proof":
        if M < 2:
            raise ValueError("even_proof needs M >= 2")
        return 1 - eps / (M - 1)
    if variant == "odd_proof":
        if M < 3 or M % 2 == 0:
            raise ValueError("odd_proof needs odd M >= 3")
        return 1 - eps * M / (M - 1) ** 2
    raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")


def theorem_bound(N: int | None, M: int, B: float, L: float, eps: float, variant: str = "theorem") -> float:
    """Right-hand side of the N-bound with constant 1.

    ``(B/L)^2`` when ``M = 1``, otherwise ``(B/L)^{2M/(M-1)}``. ``N`` is
    accepted for call-site symmetry and is not used; compare the result with
    ``N ** n_exponent(M, eps, variant)``.
    """
    _check_bound_args(M, B, L, eps)
    n_exponent(M, eps, variant)  # validates the variant against M
    ratio = B / L
    if M == 1:
        return ratio**2
    return ratio ** (2 * M / (M - 1))


def fitted_constant(N: int, M: int, B: float, L: float, eps: float, variant: str = "theorem") -> float:
    """Smallest ``C`` with ``N^{exponent} <= C * theorem_bound``."""
    return N ** n_exponent(M, eps, variant) / theorem_bound(N, M, B, L, eps, variant)


def embedded_lower_bound(L: float, B: float, N: int, M: int) -> float:
    """Per-operator lower bound after appending the point-evaluation operator."""
    return L ** (M / (M + 1)) * B ** (1 / (M + 1)) * N ** (-1 / (2 * (M + 1)))


def embedded_exponent(M: int, eps: float, eps_denominator: str = "corrected") -> float:
    """``N`` exponent obtained for odd ``M`` by way of the ``M + 1`` system.

    Applying the even bound at ``M + 1`` with the embedded lower bound gives
    ``N^{(M-1)/M - eps/den} <= C (B/L)^2`` and hence, raising to
    ``M/(M-1)``, an ``N`` exponent against ``(B/L)^{2M/(M-1)}``. With
    ``den = M`` (the even bound at multilinearity ``M + 1``) this is
    ``1 - eps/(M-1)``; ``den = M - 1`` ("literal") keeps the denominator of
    the original ``M`` and yields ``1 - eps M/(M-1)^2``.
    """
    if M < 3 or M % 2 == 0:
        raise ValueError("embedding applies to odd M >= 3")
    den = {"corrected": M, "literal": M - 1}[eps_denominator]
    return ((M - 1) / M - eps / den) * M / (M - 1)


class EmbeddedSystem(SimultaneousSystem):
    """An odd-``M`` system with a point-evaluation operator appended."""

    def __init__(self, inner: SimultaneousSystem, base: PointSet):
        if inner.M % 2 == 0:
            raise ValueError("embedding is only for odd M")
        self.inner = inner
        self.base = base
        self._keys = {_hashable(p) for p in base.points}
        self.lam = getattr(inner, "lam", 1.0)

    @property
    def M(self) -> int:
        return self.inner.M + 1

    @property
    def bound_B(self) -> float:
        return self.inner.bound_B

    def decay_rate(self, lam: float) -> float:
        return self.inner.decay_rate(lam)

    def kernel(self, m: int, p, q) -> complex:
        if m <= self.inner.M:
            return self.inner.kernel(m, p, q)
        if _hashable(p) == _hashable(q) and _hashable(p) in self._keys:
            return complex(self.bound_B**2)
        return 0j

    def relation(self, m: int, p, q) -> bool:
        if m <= self.inner.M:
            return self.inner.relation(m, p, q)
        return _hashable(p) == _hashable(q)


def embed_odd_system(sys: SimultaneousSystem, base: PointSet) -> SimultaneousSystem:
    """Append ``T_{M+1}`` with kernel ``B^2 delta_pq`` on the base points.

    A :class:`FiniteSystem` stays finite: ``v_{M+1}(p_j) = B e_j`` and points
    outside the base get the zero vector.
    """
    if sys.M % 2 == 0:
        raise ValueError(f"embedding needs odd M (got M={sys.M})")
    if sys.M < 3:
        raise ValueError("M = 1 is handled directly, not by embedding")
    if isinstance(sys, FiniteSystem):
        v = np.zeros((sys.P, base.N), dtype=complex)
        for j, p in enumerate(base.points):
            v[p, j] = sys.bound_B
        relation = np.eye(sys.P, dtype=bool)
        return FiniteSystem(sys.vectors + [v], sys.relations + [relation], bound_B=sys.bound_B, lam=sys.lam)
    return EmbeddedSystem(sys, base)


@dataclass
class SaturationReport:
    N: int
    M: int
    B: float
    L: float
    eps: float
    Lambda: float
    trace: float
    theorem_bound: float
    n_power: float
    verdicts: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SaturationReport":
        return cls(**json.loads(text))


def analyse_system(sys: FiniteSystem, base: PointSet, eps: float,
                   s: PermTuple | None = None) -> SaturationReport:
    """Run every engine check on one finite system."""
    work = sys
    if sys.M > 1 and sys.M % 2:
        work = embed_odd_system(sys, base)
    N, M = base.N, work.M
    W = build_energy_matrix(work, base)
    ones = ones_eigen_check(W, raise_on_fail=False)
    A = averaging_matrix(N, M)
    tr = trace_bound_check(W, A, require_psd=False)
    L = saturation_level(sys, base)
    B = sys.bound_B
    norm_W = float(np.max(np.abs(np.linalg.eigvalsh(W.W)))) if W.D else 0.0
    norm_A = float(np.max(np.abs(np.linalg.eigvalsh(A))))
    extras_psd = {"lambda_min_A": tr.lambda_min_A, "A_psd": tr.lambda_min_A >= -SPECTRAL_TOL * norm_A}
    verdicts = {
        "ones_eigenvector": ones.residual <= SPECTRAL_TOL * norm_W + 1e-14,
        "W_psd": tr.lambda_min_W >= -SPECTRAL_TOL * norm_W,
        "trace_ge_Lambda": tr.passes_Lambda,
        "trace_ge_2Lambda": tr.passes_two_Lambda if M > 1 else True,
        "Lambda_ge_L": ones.Lambda >= saturation_level(work, base) ** (2 * M * N) * (1 - SPECTRAL_TOL),
    }
    extras: dict = {**extras_psd, "residual": ones.residual, "norm_W": norm_W, "two_Lambda": tr.two_Lambda}
    if M % 2 == 0:
        s = s if s is not None else PermTuple.identity(N, M)
        census = diagonal_census(N, s, eps)
        verdicts["census"] = census.passed
        extras.update(census=census.count, census_bound=census.bound)
    variant = "m1" if sys.M == 1 else "theorem"
    bound = theorem_bound(N, sys.M, B, L, eps, variant) if L > 0 else math.inf
    return SaturationReport(
        N=N, M=sys.M, B=B, L=L, eps=eps, Lambda=ones.Lambda, trace=tr.trace,
        theorem_bound=bound, n_power=N ** n_exponent(sys.M, eps, variant),
        verdicts=verdicts, extras=extras,
    )
