"""
Soliton backgrounds: exact integration in dimension one and a collocation
Newton iteration on the symplectic potential in general dimension.

The unknown of :func:`solve_newton` is a smooth correction ``psi`` to the
Guillemin potential, ``phi = phi_G + psi``, expanded in tensor Legendre
polynomials of total degree ``2..degree`` on the bounding box.  Because
``psi`` is smooth up to the boundary, ``H = (Hess phi)^{-1}`` inherits the
Guillemin boundary behaviour for every coefficient vector.  Affine functions
are excluded from the basis: the Hessian annihilates them.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import legendre

from .curvature import SolitonVector, _coerce, _modified
from .field import (BoundaryReport, MetricField, PotentialField, check_boundary_conditions,
                    field_from_potential, guillemin_field, metric_from_hessian)
from .polytope import DelzantPolytope, interior_grid, is_delzant, is_reflexive, quadrature

__all__ = ["SolveConfig", "SolveResult", "solve_1d", "solve_newton", "LegendreBasis", "polytope_bump"]

log = logging.getLogger(__name__)


@dataclass
class SolveConfig:
    resolution: int = 16
    margin: float | None = None  # default 2 / resolution
    degree: int = 10
    damping: float = 1.0
    max_iter: int = 25
    tol: float = 1e-10
    gauge: bool = True
    fd_step: float = 1e-7
    regularization: float = 1e-12
    seed: int = 0

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")
        if self.resolution < 8:
            raise ValueError("resolution must be at least 8")
        if self.degree < 2:
            raise ValueError("degree must be at least 2")

    @property
    def collocation_margin(self) -> float:
        return self.margin if self.margin is not None else 2.0 / self.resolution


@dataclass
class SolveResult:
    potential: PotentialField | None
    field: MetricField
    a: SolitonVector
    history: list
    boundary: BoundaryReport | None
    converged: bool
    coefficients: np.ndarray | None = None
    affine_gauge: np.ndarray | None = None
    defects: dict = field(default_factory=dict)

    @property
    def reduction(self) -> float:
        return self.history[0] / self.history[-1] if self.history[-1] > 0 else np.inf

    def to_dict(self) -> dict:
        return {
            "a": list(self.a.a),
            "history": [float(x) for x in self.history],
            "converged": bool(self.converged),
            "reduction": float(self.reduction),
            "boundary": self.boundary.to_dict() if self.boundary is not None else None,
            "defects": self.defects,
            "coefficients": None if self.coefficients is None else self.coefficients.tolist(),
        }


# --- one dimension -------------------------------------------------------------


def solve_1d(P: DelzantPolytope, a=None, tol: float = 1e-12) -> SolveResult:
    """Integrate ``1/2 H' - a_1 H + z = 0`` from ``H(-1) = 0``.

    The solution is in closed form; the result is converged only if the
    remaining conditions ``H(1) = 0`` and ``H'(-1) = 2``, ``H'(1) = -2`` also
    hold, which on ``[-1, 1]`` happens exactly for ``a_1 = 0``.
    """
    if P.dim != 1:
        raise ValueError("solve_1d needs an interval")
    a = _coerce(a, 1)
    lo, hi = P.vertex_points[:, 0].min(), P.vertex_points[:, 0].max()
    s = a.linear[0]

    if abs(s) < 1e-14:
        C = lo * lo
        H = lambda z: C - z**2
        dH = lambda z: -2 * z
    else:
        # H = C e^{2 s z} + z / s + 1 / (2 s^2)
        part = lambda z: z / s + 1 / (2 * s * s)
        C = -part(lo) * np.exp(-2 * s * lo)
        H = lambda z: C * np.exp(2 * s * z) + part(z)
        dH = lambda z: 2 * s * C * np.exp(2 * s * z) + 1 / s

    def evaluate(z):
        x = z[..., 0]
        Hz = H(x)[..., None, None]
        dHz = dH(x)[..., None, None, None]
        d2Hz = (2 * s * (dH(x) - (1 / s if s else 0)) if s else -2 * np.ones_like(x))[..., None, None, None, None]
        return Hz, dHz, d2Hz

    F = MetricField(1, evaluate, kind="analytic", name="solve_1d")
    defects = {
        "H_right": float(abs(H(hi))),
        "dH_left": float(abs(dH(lo) - 2)),
        "dH_right": float(abs(dH(hi) + 2)),
    }
    converged = all(v < tol for v in defects.values())
    return SolveResult(None, F, a, [max(defects.values())], None, converged, defects=defects)


# --- collocation Newton --------------------------------------------------------


class LegendreBasis:
    """Tensor Legendre polynomials of total degree ``lo..degree`` on a box."""

    def __init__(self, lower, upper, degree: int, lo: int = 2):
        self.center = 0.5 * (np.asarray(upper, float) + np.asarray(lower, float))
        self.radius = 0.5 * (np.asarray(upper, float) - np.asarray(lower, float))
        self.n = len(self.center)
        self.degree = degree
        self.indices = [idx for d in range(lo, degree + 1)
                        for idx in itertools.product(range(d + 1), repeat=self.n) if sum(idx) == d]

    def __len__(self):
        return len(self.indices)

    def derivatives(self, z) -> list[np.ndarray]:
        """``[B0, B1, B2, B3, B4]`` with shapes ``(K, m, n^k)``."""
        z = np.atleast_2d(z)
        m, n = z.shape
        x = (z - self.center) / self.radius
        # one-dimensional tables T[axis][deg][order] -> (m,)
        tables = []
        for ax in range(n):
            rows = []
            for d in range(self.degree + 1):
                c = np.zeros(d + 1)
                c[d] = 1.0
                rows.append([legendre.legval(x[:, ax], legendre.legder(c, k)) / self.radius[ax] ** k
                             if k <= d else np.zeros(m) for k in range(5)])
            tables.append(rows)
        out = []
        for order in range(5):
            arr = np.empty((len(self), m) + (n,) * order)
            for b, idx in enumerate(self.indices):
                for deriv in itertools.product(range(n), repeat=order):
                    counts = np.bincount(np.array(deriv, dtype=int), minlength=n) if order else np.zeros(n, int)
                    val = np.ones(m)
                    for ax in range(n):
                        val = val * tables[ax][idx[ax]][counts[ax]]
                    arr[(b, slice(None)) + deriv] = val
            out.append(arr)
        return out


def polytope_bump(P: DelzantPolytope, power: int = 2) -> Callable:
    """``prod_j l_j(z)^power``, scaled to peak one at the vertex centroid."""
    c = P.vertex_points.mean(axis=0)
    peak = np.prod(P.affine_values(c) ** power)
    return lambda z: np.prod(P.affine_values(z) ** power, axis=-1) / peak


def _fit(basis: LegendreBasis, P: DelzantPolytope, g: Callable) -> np.ndarray:
    """Least-squares coefficients of ``g`` modulo affine functions."""
    Z = quadrature(P, 2 * basis.degree + 2).points
    B = basis.derivatives(Z)[0].T
    A = np.hstack([B, np.ones((len(Z), 1)), Z])
    coef = np.linalg.lstsq(A, g(Z), rcond=None)[0]
    return coef[: len(basis)]


def _potential(P: DelzantPolytope, basis: LegendreBasis, c: np.ndarray, affine: np.ndarray) -> PotentialField:
    base = guillemin_field(P)

    def evaluate(z):
        flat = np.atleast_2d(z).reshape(-1, P.dim)
        g = base(flat)
        Bs = basis.derivatives(flat)
        res = [g[k] + np.tensordot(c, Bs[k], axes=1) for k in range(5)]
        res[0] = res[0] - flat @ affine[:-1] - affine[-1]
        res[1] = res[1] - affine[:-1]
        lead = np.shape(z)[:-1]
        return tuple(r.reshape(lead + r.shape[1:]) for r in res)

    return PotentialField(P.dim, evaluate, name=f"soliton[{P.name}]")


def solve_newton(P: DelzantPolytope, a=None, cfg: SolveConfig | None = None, initial=None) -> SolveResult:
    """Collocation Gauss-Newton for ``s^c_xi(H(phi_G + psi)) = 0``.

    Parameters
    ----------
    P : DelzantPolytope
        Reflexive Delzant polytope.
    a : SolitonVector or sequence, optional
        Soliton coefficients (zero by default).
    cfg : SolveConfig, optional
    initial : callable, array or "random", optional
        Starting correction ``psi_0``: a function of ``z`` (projected onto the
        basis), a coefficient vector, or ``"random"`` for a seeded small
        perturbation.  ``None`` starts from the Guillemin potential.

    Returns the best iterate; ``converged`` reports whether ``tol`` was met.
    """
    cfg = cfg or SolveConfig()
    ok, _ = is_delzant(P)
    if not ok or not is_reflexive(P):
        raise ValueError("solve_newton needs a reflexive Delzant polytope")
    n = P.dim
    a = _coerce(a, n)
    V = P.vertex_points
    basis = LegendreBasis(V.min(axis=0), V.max(axis=0), cfg.degree)
    Z = interior_grid(P, cfg.resolution, cfg.collocation_margin)
    gq = guillemin_field(P)(Z)
    Bs = basis.derivatives(Z)

    if initial is None:
        c = np.zeros(len(basis))
    elif isinstance(initial, str) and initial == "random":
        rng = np.random.default_rng(cfg.seed)
        c = 1e-3 * rng.standard_normal(len(basis))
    elif callable(initial):
        c = _fit(basis, P, initial)
    else:
        c = np.asarray(initial, dtype=float)

    def residual(c):
        G = gq[2] + np.tensordot(c, Bs[2], axes=1)
        if np.any(np.linalg.eigvalsh(G.astype(float))[..., 0] <= 0):
            return None
        dG = gq[3] + np.tensordot(c, Bs[3], axes=1)
        d2G = gq[4] + np.tensordot(c, Bs[4], axes=1)
        H, dH, d2H = metric_from_hessian(G, dG, d2G)
        return _modified(H, dH, d2H, a, Z)

    R = residual(c)
    if R is None:
        raise ValueError("initial potential is not convex on the collocation grid")
    history = [float(np.max(np.abs(R)))]
    lam = cfg.regularization
    for it in range(cfg.max_iter):
        if history[-1] < cfg.tol:
            break
        J = np.empty((len(R), len(c)))
        for k in range(len(c)):
            e = np.zeros(len(c))
            e[k] = cfg.fd_step
            Rk = residual(c + e)
            if Rk is None:
                Rk = residual(c - e)
                J[:, k] = (R - Rk) / cfg.fd_step
            else:
                J[:, k] = (Rk - R) / cfg.fd_step
        A = np.vstack([J, np.sqrt(lam) * np.eye(len(c))])
        rhs = np.concatenate([-R, np.zeros(len(c))])
        step = np.linalg.lstsq(A, rhs, rcond=None)[0]
        if not np.all(np.isfinite(step)):
            raise np.linalg.LinAlgError("Newton step is not finite after regularization")
        t = cfg.damping
        accepted = False
        for _ in range(20):
            trial = residual(c + t * step)
            if trial is not None and np.max(np.abs(trial)) < history[-1]:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            log.info("solve_newton: line search stalled at iteration %d", it)
            break
        c = c + t * step
        R = trial
        history.append(float(np.max(np.abs(R))))
        log.debug("solve_newton iter %d: sup|R| = %.3e (t = %.3g)", it, history[-1], t)

    affine = np.zeros(n + 1)
    if cfg.gauge:
        affine = _affine_projection(P, basis, c, a)
    phi = _potential(P, basis, c, affine)
    F = field_from_potential(phi)
    bc = check_boundary_conditions(F, P, tolerance=1e-5)
    return SolveResult(phi, F, a, history, bc, history[-1] < cfg.tol, c, affine)


def _affine_projection(P, basis, c, a: SolitonVector) -> np.ndarray:
    """Affine part of ``psi`` in the ``e^{-2f} dv`` inner product; ``[lin..., const]``."""
    Q = quadrature(P, 2 * basis.degree + 2)
    w = Q.weights * np.exp(-2 * a(Q.points))
    psi = np.tensordot(c, basis.derivatives(Q.points)[0], axes=1)
    A = np.hstack([Q.points, np.ones((len(w), 1))])
    M = A.T @ (w[:, None] * A)
    return np.linalg.solve(M, A.T @ (w * psi))
