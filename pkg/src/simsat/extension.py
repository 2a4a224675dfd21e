"""Extension operators over graph hypersurfaces, evaluated by quadrature.

A surface is ``{xi : xi[axis] = sigma(eta)}`` where ``eta`` collects the
other ``d - 1`` coordinates and ranges over the box ``[-w/2, w/2]^{d-1}``
(shifted by ``center``). The measure is ``b(eta) d eta`` with a smooth
compactly supported bump ``b``, so

    E f(x) = int exp(i lam <x, xi(eta)>) b(eta) f(eta) d eta.

Quadrature is the cell-centered rule on a tensor grid. Because ``b``
vanishes to infinite order at the box edge, this rule is spectrally
accurate once the phase is resolved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .saturation import SimultaneousSystem

DEFAULT_OVERSAMPLING = 8.0
MIN_NODES = 256
FD_STEP = 1e-4
MIN_FD_STEP = 1e-6
CURVED_TOL = 1e-6
UNIT_TOL = 1e-9
CHUNK = 4_000_000


class UnderResolvedError(ValueError):
    """The quadrature or evaluation grid does not resolve the oscillation."""


def bump(u: np.ndarray) -> np.ndarray:
    """``exp(1 - 1/(1 - u^2))`` on ``|u| < 1``, zero elsewhere; peak value 1 at 0."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1
    out[inside] = np.exp(1 - 1 / (1 - u[inside] ** 2))
    return out


@dataclass
class GraphHypersurface:
    d: int
    axis: int
    sigma: Callable[[np.ndarray], np.ndarray]
    width: float = 2.0
    center: np.ndarray | None = None
    gradient: Callable[[np.ndarray], np.ndarray] | None = None
    kind: str = "custom"
    params: dict = field(default_factory=dict)
    eps_tilde: float | None = None

    def __post_init__(self):
        if self.d < 2:
            raise ValueError("ambient dimension must be at least 2")
        if not 0 <= self.axis < self.d:
            raise ValueError(f"graph axis {self.axis} outside 0..{self.d - 1}")
        if self.width <= 0:
            raise ValueError("box width must be positive")
        self.center = np.zeros(self.d - 1) if self.center is None else np.asarray(self.center, dtype=float)
        if self.center.shape != (self.d - 1,):
            raise ValueError("center must have d - 1 coordinates")
        self.nu = self.normal(self.center[None, :])[0]
        deviation = self.max_normal_deviation()
        if self.eps_tilde is None:
            self.eps_tilde = deviation / 2
        if not 0 <= self.eps_tilde < 0.5:
            raise ValueError(f"eps_tilde = {self.eps_tilde:.3f} must lie in [0, 1/2); narrow the box")
        if deviation > 2 * self.eps_tilde + 1e-12:
            raise ValueError(
                f"normal varies by {deviation:.3f} over the box, more than 2*eps_tilde = {2 * self.eps_tilde:.3f}"
            )

    @property
    def lower(self) -> np.ndarray:
        return self.center - self.width / 2

    @property
    def upper(self) -> np.ndarray:
        return self.center + self.width / 2

    @property
    def others(self) -> list[int]:
        return [i for i in range(self.d) if i != self.axis]

    def amplitude(self, eta: np.ndarray) -> np.ndarray:
        u = 2 * (np.asarray(eta) - self.center) / self.width
        return np.prod(bump(u), axis=-1)

    def embed(self, eta: np.ndarray) -> np.ndarray:
        """Points ``xi(eta)`` on the surface, shape ``(..., d)``."""
        eta = np.asarray(eta, dtype=float)
        xi = np.empty(eta.shape[:-1] + (self.d,))
        xi[..., self.axis] = self.sigma(eta)
        xi[..., self.others] = eta
        return xi

    def grad(self, eta: np.ndarray) -> np.ndarray:
        eta = np.asarray(eta, dtype=float)
        if self.gradient is not None:
            return np.asarray(self.gradient(eta), dtype=float)
        h = FD_STEP
        g = np.empty_like(eta)
        for i in range(eta.shape[-1]):
            e = np.zeros(eta.shape[-1])
            e[i] = h
            g[..., i] = (self.sigma(eta + e) - self.sigma(eta - e)) / (2 * h)
        return g

    def normal(self, eta: np.ndarray) -> np.ndarray:
        eta = np.atleast_2d(eta)
        n = np.zeros(eta.shape[:-1] + (self.d,))
        n[..., self.axis] = 1.0
        n[..., self.others] = -self.grad(eta)
        return n / np.linalg.norm(n, axis=-1, keepdims=True)

    def box_samples(self, n: int = 33) -> np.ndarray:
        axes = [np.linspace(lo, hi, n) for lo, hi in zip(self.lower, self.upper)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.d - 1)

    def max_normal_deviation(self) -> float:
        return float(np.max(np.linalg.norm(self.normal(self.box_samples()) - self.nu, axis=-1)))

    def max_gradient(self) -> float:
        return float(np.max(np.linalg.norm(self.grad(self.box_samples()), axis=-1)))

    def max_abs_xi(self) -> float:
        return float(np.max(np.linalg.norm(self.embed(self.box_samples()), axis=-1)))

    def mass(self, n: int = MIN_NODES) -> float:
        """``int b``, which equals the kernel on the diagonal."""
        grid = QuadratureGrid.build(self, n)
        return float(grid.weights.sum())


# -- built-in surfaces -------------------------------------------------------


def hyperplane(d: int, axis: int = 0, width: float = 2.0, center=None) -> GraphHypersurface:
    return GraphHypersurface(
        d, axis, lambda e: np.zeros(e.shape[:-1]), width, center,
        gradient=lambda e: np.zeros_like(e), kind="hyperplane",
    )


def paraboloid(d: int, axis: int = 0, width: float = 2.0, center=None) -> GraphHypersurface:
    """``sigma(eta) = |eta|^2 / 2``."""
    return GraphHypersurface(
        d, axis, lambda e: 0.5 * np.sum(e**2, axis=-1), width, center,
        gradient=lambda e: np.array(e, dtype=float), kind="paraboloid",
    )


def perturbed_paraboloid(d: int, axis: int = 0, width: float = 2.0, amplitude: float = 0.05,
                         center=None) -> GraphHypersurface:
    """``|eta|^2/2 + a * sum(sin(eta_i)^3)``: curved but not a quadric."""
    a = float(amplitude)
    return GraphHypersurface(
        d, axis,
        lambda e: 0.5 * np.sum(e**2, axis=-1) + a * np.sum(np.sin(e) ** 3, axis=-1),
        width, center,
        gradient=lambda e: e + 3 * a * np.sin(e) ** 2 * np.cos(e),
        kind="perturbed_paraboloid", params={"amplitude": a},
    )


def cylinder(d: int, axis: int = 0, width: float = 2.0, center=None) -> GraphHypersurface:
    """``sigma(eta) = eta_1^2 / 2``: flat along the remaining parameters."""

    def grad(e):
        g = np.zeros_like(e, dtype=float)
        g[..., 0] = e[..., 0]
        return g

    return GraphHypersurface(
        d, axis, lambda e: 0.5 * e[..., 0] ** 2, width, center,
        gradient=grad, kind="cylinder",
    )


BUILTINS = {
    "hyperplane": hyperplane,
    "paraboloid": paraboloid,
    "perturbed_paraboloid": perturbed_paraboloid,
    "cylinder": cylinder,
}


def transversal_family(d: int, k: int, kind: str = "paraboloid", width: float = 1.0) -> list[GraphHypersurface]:
    """``k`` surfaces, the ``m``-th graphed over axis ``m`` so its normal tracks ``e_m``."""
    if not 1 <= k <= d:
        raise ValueError("need 1 <= k <= d")
    return [BUILTINS[kind](d, axis=m, width=width) for m in range(k)]


def surface_from_config(cfg: dict) -> GraphHypersurface:
    """Build a surface from ``{"type", "d", "axis", "width", "center", ...}``."""
    cfg = dict(cfg)
    kind = cfg.pop("type")
    cfg.pop("name", None)
    if kind not in BUILTINS:
        raise ValueError(f"unknown surface type {kind!r}; expected one of {sorted(BUILTINS)}")
    eps_tilde = cfg.pop("eps_tilde", None)
    H = BUILTINS[kind](**cfg)
    if eps_tilde is not None:
        H = GraphHypersurface(H.d, H.axis, H.sigma, H.width, H.center, H.gradient, H.kind, H.params, eps_tilde)
    return H


# -- quadrature -----------------------------------------------------------------


@dataclass
class QuadratureGrid:
    """Cell-centered tensor grid; ``weights`` already include ``b`` and the cell volume."""

    n: int
    nodes: np.ndarray
    weights: np.ndarray
    xi: np.ndarray

    @classmethod
    def build(cls, H: GraphHypersurface, n: int) -> "QuadratureGrid":
        h = H.width / n
        axes = [lo + (np.arange(n) + 0.5) * h for lo in H.lower]
        nodes = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, H.d - 1)
        w = H.amplitude(nodes) * h ** (H.d - 1)
        keep = w > 0
        return cls(n, nodes[keep], w[keep], H.embed(nodes[keep]))


def required_nodes(H: GraphHypersurface, lam: float, x_max: float,
                   oversampling: float = DEFAULT_OVERSAMPLING) -> int:
    """Nodes per axis so every phase wavelength spans ``oversampling`` cells."""
    r = max(1.0, x_max * math.sqrt(1 + H.max_gradient() ** 2))
    return int(math.ceil(oversampling * lam * r * H.width / (2 * math.pi)))


def quadrature_for(H: GraphHypersurface, lam: float, x_max: float = 1.0, n: int | None = None,
                   oversampling: float = DEFAULT_OVERSAMPLING, min_nodes: int | None = None) -> QuadratureGrid:
    need = required_nodes(H, lam, x_max, oversampling)
    if n is None:
        floor = (MIN_NODES if H.d == 2 else 32) if min_nodes is None else min_nodes
        n = max(floor, need)
    elif n < need:
        raise UnderResolvedError(
            f"{n} nodes per axis cannot resolve lam={lam} on |x| <= {x_max:.3g}; need at least {need}"
        )
    return QuadratureGrid.build(H, n)


def _as_f_matrix(f, grid: QuadratureGrid) -> tuple[np.ndarray, bool]:
    if f is None:
        return np.ones((1, grid.nodes.shape[0]), dtype=complex), True
    if callable(f):
        vals = np.asarray(f(grid.nodes), dtype=complex)
    else:
        vals = np.asarray(f, dtype=complex)
    single = vals.ndim == 1
    return np.atleast_2d(vals), single


def extension_eval(H: GraphHypersurface, lam: float, f, x, *, grid: QuadratureGrid | None = None,
                   oversampling: float = DEFAULT_OVERSAMPLING) -> np.ndarray:
    """Quadrature value of ``E f`` at the points ``x`` (shape ``(n, d)`` or ``(d,)``).

    ``f`` is ``None`` (constant 1), a callable of the parameter nodes, or
    values on ``grid.nodes``; a 2-D array evaluates several inputs at once,
    giving output shape ``(n, n_f)``.
    """
    x = np.asarray(x, dtype=float)
    single_x = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != H.d:
        raise ValueError(f"points must have {H.d} coordinates")
    x_max = float(np.max(np.linalg.norm(X, axis=1))) if X.size else 0.0
    if grid is None:
        grid = quadrature_for(H, lam, x_max, oversampling=oversampling)
    else:
        need = required_nodes(H, lam, x_max, oversampling)
        if grid.n < need:
            raise UnderResolvedError(f"grid has {grid.n} nodes per axis; lam={lam} needs {need}")
    F, single_f = _as_f_matrix(f, grid)
    if F.shape[1] != grid.nodes.shape[0]:
        raise ValueError("f values do not match the quadrature nodes")
    coeff = (F * grid.weights).T  # (nodes, n_f)
    out = np.empty((X.shape[0], F.shape[0]), dtype=complex)
    step = max(1, CHUNK // max(1, grid.nodes.shape[0]))
    for start in range(0, X.shape[0], step):
        phase = lam * (X[start:start + step] @ grid.xi.T)
        out[start:start + step] = np.exp(1j * phase) @ coeff
    if single_f:
        out = out[:, 0]
    return out[0] if single_x else out


def extension_kernel(H: GraphHypersurface, lam: float, p, q, *, grid: QuadratureGrid | None = None,
                     oversampling: float = DEFAULT_OVERSAMPLING) -> complex:
    """``int exp(i lam <p - q, xi(eta)>) b(eta) d eta``."""
    diff = np.asarray(p, dtype=float) - np.asarray(q, dtype=float)
    return complex(extension_eval(H, lam, None, diff, grid=grid, oversampling=oversampling))


def stationary_phase_magnitude(H: GraphHypersurface, lam: float, t: float) -> float:
    """Leading-order ``|K(p, p + t e_axis)|`` for a surface curved at the box center.

    ``(2 pi / (lam |t|))^{(d-1)/2} / sqrt|det Hess sigma(center)|``, using
    that the bump equals 1 at the box center.
    """
    hess = _hessian(H.sigma, H.center, FD_STEP)
    det = abs(float(np.linalg.det(hess)))
    if det == 0:
        raise ValueError("no stationary-phase asymptotics for a flat surface")
    return (2 * math.pi / (lam * abs(t))) ** ((H.d - 1) / 2) / math.sqrt(det)


# -- relations and geometry ----------------------------------------------------------


@dataclass(frozen=True)
class ConeRelationParams:
    lam: float
    eps: float
    eps_tilde: float

    def __post_init__(self):
        if self.lam < 1:
            raise ValueError("lam must be >= 1")
        if not 0 < self.eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        if not 0 < self.eps_tilde < 0.5:
            raise ValueError("eps_tilde must lie in (0, 1/2)")

    @property
    def radius(self) -> float:
        return self.lam ** (-1 + self.eps)


def cone_relation(params: ConeRelationParams, p, q, nu) -> bool:
    """Near-coincident points, or a difference direction within ``2 eps_tilde`` of ``+-nu``."""
    diff = np.asarray(p, dtype=float) - np.asarray(q, dtype=float)
    dist = float(np.linalg.norm(diff))
    if dist <= params.radius:
        return True
    u = diff / dist
    nu = np.asarray(nu, dtype=float)
    return min(np.linalg.norm(u - nu), np.linalg.norm(u + nu)) <= 2 * params.eps_tilde


def _check_unit(vectors: np.ndarray) -> None:
    norms = np.linalg.norm(vectors, axis=1)
    if np.any(np.abs(norms - 1) > UNIT_TOL):
        raise ValueError(f"expected unit vectors, got norms {norms}")


def wedge_volume(vectors) -> float:
    """``k``-volume of the parallelepiped spanned by the rows of ``vectors``.

    Computed as the product of singular values, which is the square root of
    the Gram determinant without squaring round-off.
    """
    V = np.atleast_2d(np.asarray(vectors, dtype=float))
    if V.shape[0] > V.shape[1]:
        return 0.0
    return float(np.prod(np.linalg.svd(V, compute_uv=False)))


def wedge_transversality(normals) -> float:
    V = np.atleast_2d(np.asarray(normals, dtype=float))
    if V.shape[0] > V.shape[1]:
        raise ValueError(f"need k <= d (got k={V.shape[0]}, d={V.shape[1]})")
    _check_unit(V)
    return wedge_volume(V)


@dataclass
class LoopVerdict:
    legal: bool
    distinct: bool
    all_in_cones: bool
    wedge: float


def loop_collapse_check(points, cones: Sequence[tuple[np.ndarray, float]]) -> LoopVerdict:
    """Judge a closed loop ``p_1 -> ... -> p_n -> p_1``.

    The step ``p_{i+1} - p_i`` must point within ``2 eps_tilde_i`` of
    ``+-nu_i``. A loop of pairwise-consecutive distinct points meeting every
    cone condition is illegal. ``wedge`` is the volume spanned by the unit
    step directions; it vanishes for any closed loop of ``n = d`` steps.
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    n = P.shape[0]
    if len(cones) != n:
        raise ValueError("need one cone per loop step")
    steps = np.roll(P, -1, axis=0) - P
    lengths = np.linalg.norm(steps, axis=1)
    distinct = bool(np.all(lengths > 0))
    if not distinct:
        return LoopVerdict(True, False, False, 0.0)
    units = steps / lengths[:, None]
    inside = []
    for u, (nu, et) in zip(units, cones):
        nu = np.asarray(nu, dtype=float)
        inside.append(min(np.linalg.norm(u - nu), np.linalg.norm(u + nu)) <= 2 * et)
    all_in = bool(all(inside))
    return LoopVerdict(not all_in, True, all_in, wedge_volume(units))


def random_orthonormal(d: int, k: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    q = q * np.sign(np.diag(r))
    return q[:, :k].T


def _perturb_in_cone(nu: np.ndarray, eps_tilde: float, rng: np.random.Generator) -> np.ndarray:
    """Random unit vector within ``2 eps_tilde`` of ``+-nu``."""
    sign = rng.choice([-1.0, 1.0])
    while True:
        g = rng.standard_normal(nu.size)
        g -= (g @ nu) * nu
        g /= np.linalg.norm(g)
        angle = rng.uniform(0, 2 * math.asin(min(1.0, eps_tilde)))  # chord 2 sin(angle/2) <= 2 eps_tilde
        u = sign * (math.cos(angle) * nu + math.sin(angle) * g)
        if min(np.linalg.norm(u - nu), np.linalg.norm(u + nu)) <= 2 * eps_tilde:
            return u


@dataclass
class FalsificationResult:
    d: int
    attempts: int
    hits: int
    min_singular: float


def loop_falsification(d: int, eps_tilde: float, attempts: int, rng: np.random.Generator,
                       close_tol: float = 1e-9) -> FalsificationResult:
    """Search for distinct-point closed loops through cones around orthonormal axes.

    Each attempt draws ``n`` in ``2..d`` orthonormal axes, a direction in each
    cone, and the step lengths that best close the loop (smallest right
    singular vector). A hit is a loop that closes to ``close_tol``, has
    distinct consecutive points and passes every cone test.
    """
    hits = 0
    min_sv = math.inf
    for _ in range(attempts):
        n = int(rng.integers(2, d + 1))
        axes = random_orthonormal(d, n, rng)
        U = np.stack([_perturb_in_cone(nu, eps_tilde, rng) for nu in axes], axis=1)  # d x n
        _, s, vt = np.linalg.svd(U)
        lengths = vt[-1]
        min_sv = min(min_sv, float(s[-1]))
        steps = (U * lengths).T
        if np.linalg.norm(steps.sum(axis=0)) > close_tol * max(1.0, np.abs(lengths).max()):
            continue
        points = np.vstack([np.zeros(d), np.cumsum(steps, axis=0)[:-1]])
        verdict = loop_collapse_check(points, [(nu, eps_tilde) for nu in axes])
        if not verdict.legal:
            hits += 1
    return FalsificationResult(d, attempts, hits, min_sv)


def closed_loop_gram_determinant(d: int, rng: np.random.Generator) -> float:
    """Gram determinant of the unit steps of a random closed loop of ``d`` points."""
    P = rng.standard_normal((d, d))
    steps = np.roll(P, -1, axis=0) - P
    units = steps / np.linalg.norm(steps, axis=1, keepdims=True)
    return wedge_volume(units) ** 2


# -- curvature and decay -------------------------------------------------------------


def _hessian(sigma: Callable, at: np.ndarray, h: float) -> np.ndarray:
    if h < MIN_FD_STEP:
        raise ValueError(f"finite-difference step {h:g} is below {MIN_FD_STEP:g}")
    at = np.asarray(at, dtype=float)
    n = at.size
    H = np.empty((n, n))
    f0 = float(sigma(at[None, :])[0])
    for i in range(n):
        for j in range(i, n):
            ei = np.zeros(n)
            ej = np.zeros(n)
            ei[i] = h
            ej[j] = h
            if i == j:
                val = (sigma((at + ei)[None])[0] - 2 * f0 + sigma((at - ei)[None])[0]) / h**2
            else:
                val = (
                    sigma((at + ei + ej)[None])[0] - sigma((at + ei - ej)[None])[0]
                    - sigma((at - ei + ej)[None])[0] + sigma((at - ei - ej)[None])[0]
                ) / (4 * h**2)
            H[i, j] = H[j, i] = val
    return H


@dataclass
class CurvatureVerdict:
    det: float
    curved: bool
    hessian: np.ndarray


def curvature_section_check(H: GraphHypersurface, k: int, block: Sequence[int] | None = None,
                            step: float = FD_STEP) -> CurvatureVerdict:
    """Hessian determinant of ``sigma`` restricted to a parameter block at the center.

    By default the block is the last ``d - k`` parameters, the others being
    held at their center values.
    """
    if not 1 <= k < H.d:
        raise ValueError("need 1 <= k < d")
    idx = list(range(k - 1, H.d - 1)) if block is None else list(block)

    def restricted(eta_block):
        full = np.tile(H.center, (eta_block.shape[0], 1))
        full[:, idx] = eta_block
        return H.sigma(full)

    hess = _hessian(restricted, H.center[idx], step)
    det = float(np.linalg.det(hess))
    return CurvatureVerdict(det, abs(det) >= CURVED_TOL, hess)


@dataclass
class DecayFit:
    R_hat: float
    lambdas: np.ndarray
    magnitudes: np.ndarray
    diagonal: np.ndarray
    clamped: bool


def decay_fit(H: GraphHypersurface, u, lambdas: Sequence[float], offset: float = 0.5,
              p=None, oversampling: float = DEFAULT_OVERSAMPLING) -> DecayFit:
    """Fit ``|K(p, p + offset u)| ~ lam^{-R}`` by least squares in log-log.

    Magnitudes below ``1e-15 K(p, p)`` are clamped there and flagged.
    """
    u = np.asarray(u, dtype=float)
    if abs(np.linalg.norm(u) - 1) > UNIT_TOL:
        raise ValueError("direction must be a unit vector")
    lams = np.asarray(lambdas, dtype=float)
    if lams.size < 3:
        raise ValueError("need at least three lambda values")
    p = np.zeros(H.d) if p is None else np.asarray(p, dtype=float)
    q = p + offset * u
    mags, diag = [], []
    clamped = False
    for lam in lams:
        grid = quadrature_for(H, lam, max(np.linalg.norm(p - q), 1.0), oversampling=oversampling)
        k_pp = extension_kernel(H, lam, p, p, grid=grid).real
        k_pq = abs(extension_kernel(H, lam, p, q, grid=grid))
        floor = 1e-15 * k_pp
        if k_pq < floor:
            k_pq, clamped = floor, True
        mags.append(k_pq)
        diag.append(k_pp)
    slope = np.polyfit(np.log(lams), np.log(mags), 1)[0]
    return DecayFit(float(-slope), lams, np.array(mags), np.array(diag), clamped)


class ExtensionSystem(SimultaneousSystem):
    """Point-evaluation operators ``T_m(p) f = E_m f(p)`` at fixed ``lam``.

    ``kernel(m, p, q)`` is the quadrature kernel of surface ``m`` and the
    relations are cone relations around the nominal normals.
    """

    def __init__(self, surfaces: Sequence[GraphHypersurface], params: ConeRelationParams,
                 oversampling: float = DEFAULT_OVERSAMPLING, x_max: float = 2.0):
        self.surfaces = list(surfaces)
        self.params = params
        self.lam = params.lam
        self.grids = [quadrature_for(H, params.lam, x_max, oversampling=oversampling) for H in self.surfaces]

    @property
    def M(self) -> int:
        return len(self.surfaces)

    @property
    def bound_B(self) -> float:
        return math.sqrt(max(g.weights.sum() for g in self.grids))

    def kernel(self, m: int, p, q) -> complex:
        return extension_kernel(self.surfaces[m - 1], self.lam, p, q, grid=self.grids[m - 1])

    def relation(self, m: int, p, q) -> bool:
        return cone_relation(self.params, p, q, self.surfaces[m - 1].nu)
