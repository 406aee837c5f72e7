"""
Donaldson-Futaki invariant of a polytope and the soliton vector field.

For ``f(z) = <a, z> + a_{n+1}`` and a test function ``zeta``

    F(zeta) = int_{dDelta} zeta e^{-2f} dmu + int_Delta zeta (2f - n) e^{-2f} dv

(the torus factor ``(2 pi)^n`` is dropped).  A soliton can only exist when
``F`` vanishes on affine functions; :func:`solve_soliton_vf` finds the
coefficients ``a`` for which it does.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .curvature import SolitonVector, _coerce
from .polytope import MAX_ORDER, DelzantPolytope, is_delzant, is_reflexive, quadrature

__all__ = [
    "AffineFunction",
    "FutakiReport",
    "SolverError",
    "futaki",
    "futaki_vector",
    "integrated_identity",
    "normalization_residual",
    "solve_soliton_vf",
    "weighted_integral",
]

log = logging.getLogger(__name__)

DEFAULT_ORDER = 12


class SolverError(RuntimeError):
    """Newton iteration failed; the partial report is attached."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class AffineFunction:
    """``zeta(z) = sum c_i z_i + c_{n+1}``."""

    c: tuple[float, ...]

    def __call__(self, z):
        c = np.asarray(self.c, dtype=float)
        return np.asarray(z, dtype=float) @ c[:-1] + c[-1]

    @classmethod
    def basis(cls, n: int) -> list[AffineFunction]:
        """``[1, z_1, ..., z_n]``."""
        out = [cls((0.0,) * n + (1.0,))]
        for k in range(n):
            e = [0.0] * (n + 1)
            e[k] = 1.0
            out.append(cls(tuple(e)))
        return out


def _basis_labels(n):
    return ["1"] + [f"z{k + 1}" for k in range(n)]


def _futaki_at(P, a: SolitonVector, zetas, order):
    Q = quadrature(P, order)
    n = P.dim
    fb = a(Q.all_boundary_points)
    fi = a(Q.points)
    eb = np.exp(-2 * fb) * Q.all_boundary_weights
    ei = (2 * fi - n) * np.exp(-2 * fi) * Q.weights
    vals, scale = [], []
    for zeta in zetas:
        zb, zi = zeta(Q.all_boundary_points), zeta(Q.points)
        vals.append(float(eb @ zb + ei @ zi))
        scale.append(float(np.abs(eb) @ np.abs(zb) + np.abs(ei) @ np.abs(zi)))
    return np.array(vals), np.array(scale)


def _adaptive(P, a, zetas, order, rtol=1e-10):
    """Raise the order in steps of four until consecutive values agree."""
    order = max(order, 10)
    prev, scale = _futaki_at(P, a, zetas, order)
    while order + 4 <= MAX_ORDER:
        cur, scale = _futaki_at(P, a, zetas, order + 4)
        order += 4
        if np.all(np.abs(cur - prev) <= rtol * np.maximum(scale, 1.0)):
            return cur, order
        prev = cur
    log.warning("futaki quadrature did not settle by order %d", order)
    return prev, order


def futaki(P: DelzantPolytope, a, zeta: AffineFunction | Callable, order: int = DEFAULT_ORDER) -> float:
    """Donaldson-Futaki invariant ``F_{Delta,a}(zeta)``."""
    a = _coerce(a, P.dim)
    return float(_adaptive(P, a, [zeta], order)[0][0])


def futaki_vector(P: DelzantPolytope, a, order: int = DEFAULT_ORDER) -> np.ndarray:
    """``F`` on the affine basis ``[1, z_1, ..., z_n]``."""
    a = _coerce(a, P.dim)
    return _adaptive(P, a, AffineFunction.basis(P.dim), order)[0]


def integrated_identity(P: DelzantPolytope, a, order: int = DEFAULT_ORDER) -> float:
    """``F(1)``; vanishes for coefficients compatible with a soliton."""
    return futaki(P, a, AffineFunction.basis(P.dim)[0], order)


def weighted_integral(P: DelzantPolytope, a, g: Callable, order: int = DEFAULT_ORDER) -> float:
    """``int_Delta g e^{-2f} dv``."""
    a = _coerce(a, P.dim)
    Q = quadrature(P, order)
    return float(Q.weights @ (g(Q.points) * np.exp(-2 * a(Q.points))))


def normalization_residual(P: DelzantPolytope, a, order: int = DEFAULT_ORDER) -> float:
    """``int_Delta f e^{-2f} dv``, zero for a normalized Hamiltonian."""
    a = _coerce(a, P.dim)
    return weighted_integral(P, a, a, max(order, 20))


def _jacobian(P, a: SolitonVector, order):
    # dF(zeta)/da_k = int_dD (-2 z_k) zeta e^{-2f} dmu + int_D zeta [2 z_k - 2 z_k (2f - n)] e^{-2f} dv
    Q = quadrature(P, order)
    n = P.dim
    Zb = np.hstack([Q.all_boundary_points, np.ones((len(Q.all_boundary_weights), 1))])
    Zi = np.hstack([Q.points, np.ones((len(Q.weights), 1))])
    fb, fi = a(Q.all_boundary_points), a(Q.points)
    wb = Q.all_boundary_weights * np.exp(-2 * fb)
    wi = Q.weights * np.exp(-2 * fi) * (2 - 2 * (2 * fi - n))
    # rows: zeta in [1, z_1..z_n]; columns: a_1..a_n, a_{n+1}
    zb = np.hstack([np.ones((len(wb), 1)), Q.all_boundary_points])
    zi = np.hstack([np.ones((len(wi), 1)), Q.points])
    return -2 * np.einsum("p,pr,pk->rk", wb, zb, Zb) + np.einsum("p,pr,pk->rk", wi, zi, Zi)


@dataclass
class FutakiReport:
    """Solver output: coefficients, invariants on the affine basis, and trace."""

    a: list
    F: dict
    normalization_residual: float
    iterations: int
    converged: bool
    residual_history: list = field(default_factory=list)
    iterates: list = field(default_factory=list)
    order: int = DEFAULT_ORDER

    def to_dict(self) -> dict:
        return {"a": self.a, "F": self.F, "normalization_residual": self.normalization_residual,
                "iterations": self.iterations, "converged": self.converged,
                "residual_history": self.residual_history, "order": self.order}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def solve_soliton_vf(P: DelzantPolytope, tol: float = 1e-12, max_iter: int = 50,
                     order: int = 16) -> tuple[SolitonVector, FutakiReport]:
    """Zero ``F`` on ``{1, z_1, ..., z_n}`` in all ``n+1`` coefficients.

    Damped Newton with the closed-form Jacobian, started at ``a = 0``.  When a
    full step fails to decrease ``|F|`` the step is halved; after ten halvings
    a gradient step on ``1/2 |F|^2`` is taken instead.

    Raises
    ------
    ValueError
        If ``P`` is not a reflexive Delzant polytope.
    SolverError
        On non-convergence; ``exc.report`` holds the trace.
    """
    ok, _ = is_delzant(P)
    if not ok or not is_reflexive(P):
        raise ValueError("solve_soliton_vf needs a reflexive Delzant polytope")
    n = P.dim
    basis = AffineFunction.basis(n)
    x = np.zeros(n + 1)

    def residual(x):
        return _futaki_at(P, SolitonVector(tuple(x)), basis, order)[0]

    F = residual(x)
    history = [float(np.max(np.abs(F)))]
    iterates = [x.tolist()]
    it = 0
    while history[-1] > tol and it < max_iter:
        it += 1
        J = _jacobian(P, SolitonVector(tuple(x)), order)
        try:
            step = -np.linalg.solve(J, F)
        except np.linalg.LinAlgError:
            step = -np.linalg.lstsq(J, F, rcond=None)[0]
        norm0 = np.linalg.norm(F)
        t = 1.0
        for _ in range(10):
            trial = residual(x + t * step)
            if np.linalg.norm(trial) < norm0:
                break
            t *= 0.5
        else:
            g = J.T @ F
            t = norm0**2 / max(np.linalg.norm(J @ g) ** 2, 1e-300)
            step = -g
            trial = residual(x + t * step)
        x = x + t * step
        F = trial
        history.append(float(np.max(np.abs(F))))
        iterates.append(x.tolist())
        log.debug("soliton-vf iter %d: |F|=%.3e step=%.3g", it, history[-1], t)

    a = SolitonVector(tuple(x))
    Fv, used = _adaptive(P, a, basis, order)
    report = FutakiReport(
        a=list(a.a),
        F=dict(zip(_basis_labels(n), Fv.tolist())),
        normalization_residual=normalization_residual(P, a),
        iterations=it,
        converged=history[-1] <= tol,
        residual_history=history,
        iterates=iterates,
        order=used,
    )
    if not report.converged:
        raise SolverError(f"soliton vector field did not converge in {max_iter} iterations "
                          f"(|F| = {history[-1]:.3e})", report)
    return a, report
