"""
Pointwise Chern curvature of toric almost-Kahler metrics.

Every quantity here is a function of ``(H, dH, d2H)`` at a point, the affine
Hamiltonian ``f(z) = sum_i a_i z_i + a_{n+1}`` and the point itself.  With
``rho = sum rho_kl dz_k ^ dt_l``:

    rho_kl  = -1/2 sum_i H_{li,ik}
    s^c     = -1/2 sum_ij H_{ij,ij}
    Lap f   = -sum_ij a_i H_{ij,j}
    |df|^2  =  sum_ij a_i a_j H_ij
    s^c_xi  =  s^c - n - 2 Lap f + 2 f - 2 |df|^2

The soliton residual ``S_i = 1/2 sum_j H_{ij,j} - sum_j a_j H_ij + z_i``
vanishes identically exactly when ``rho = omega - dd^c f``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .field import MetricField, kahler_defect

__all__ = [
    "SolitonVector",
    "CurvatureSample",
    "chern_ricci",
    "chern_scalar",
    "laplacian_f",
    "grad_norm_f",
    "modified_scalar",
    "modified_scalar_divform",
    "soliton_residual",
    "consistency_constant",
    "curvature_sample",
    "sweep",
    "samples_to_csv",
    "ConsistencyError",
]


class ConsistencyError(ValueError):
    """The soliton residual is too large for the constant-curvature diagnostic."""


@dataclass(frozen=True)
class SolitonVector:
    """Coefficients of ``f(z) = a_1 z_1 + ... + a_n z_n + a_{n+1}``."""

    a: tuple[float, ...]

    def __post_init__(self):
        a = tuple(float(x) for x in self.a)
        if not all(np.isfinite(a)):
            raise ValueError("soliton vector entries must be finite")
        object.__setattr__(self, "a", a)

    @classmethod
    def zero(cls, n: int) -> SolitonVector:
        return cls((0.0,) * (n + 1))

    @property
    def dim(self) -> int:
        return len(self.a) - 1

    @property
    def linear(self) -> np.ndarray:
        return np.array(self.a[:-1])

    @property
    def constant(self) -> float:
        return self.a[-1]

    def __call__(self, z) -> np.ndarray:
        return np.asarray(z, dtype=float) @ self.linear + self.constant

    def flipped(self) -> SolitonVector:
        """The opposite-sign convention ``a -> -a``."""
        return SolitonVector(tuple(-x for x in self.a))

    def transformed(self, A) -> SolitonVector:
        """Coefficients after ``z' = A z``: the linear part maps by ``A^{-T}``."""
        lin = np.linalg.inv(np.asarray(A, dtype=float)).T @ self.linear
        return SolitonVector(tuple(lin) + (self.constant,))


def _coerce(a, n) -> SolitonVector:
    if a is None:
        return SolitonVector.zero(n)
    if not isinstance(a, SolitonVector):
        a = SolitonVector(tuple(a))
    if a.dim != n:
        raise ValueError(f"soliton vector has {len(a.a)} entries, expected {n + 1}")
    return a


# --- kernels on derivative data ------------------------------------------------


def _rho(d2H):
    # gather T[k, l, i] = H_{li,ik} without arithmetic, then sum over i
    T = np.einsum("...liik->...kli", d2H)
    return -0.5 * T.sum(axis=-1)


def _scalar(d2H):
    T = np.einsum("...ijij->...ij", d2H)
    return (-0.5 * T.sum(axis=-1)).sum(axis=-1)


def _div_H(dH):
    # (div H)_i = sum_j H_{ij,j}
    return np.einsum("...ijj->...i", dH)


def _lap_f(dH, lin):
    return -_div_H(dH) @ lin


def _grad_norm(H, lin):
    return np.einsum("...ij,i,j->...", H, lin, lin)


def _modified(H, dH, d2H, a: SolitonVector, z):
    n = a.dim
    lin = a.linear
    return (_scalar(d2H) + 2 * _div_H(dH) @ lin - 2 * _grad_norm(H, lin)
            + 2 * a(z) - n)


def _modified_div(H, dH, d2H, a: SolitonVector, z):
    # e^{2f} [ -1/2 sum_ij (e^{-2f} H_ij)_{,ij} + e^{-2f} (2f - n) ] with
    # (e^{-2f} H_ij)_{,ij} = e^{-2f} (H_ij,ij - 2 a_j H_ij,i - 2 a_i H_ij,j + 4 a_i a_j H_ij)
    n = a.dim
    lin = a.linear
    second = np.einsum("...ijij->...", d2H)
    cross_j = np.einsum("...iji,j->...", dH, lin)
    cross_i = np.einsum("...ijj,i->...", dH, lin)
    zeroth = np.einsum("...ij,i,j->...", H, lin, lin)
    inner = second - 2 * cross_j - 2 * cross_i + 4 * zeroth
    return -0.5 * inner + (2 * a(z) - n)


def _residual(H, dH, a: SolitonVector, z):
    return 0.5 * _div_H(dH) - H @ a.linear + np.asarray(z, dtype=float)


# --- public operations ---------------------------------------------------------


def chern_ricci(H: MetricField, z) -> np.ndarray:
    """Matrix ``rho_kl`` of the first Chern-Ricci form ``sum rho_kl dz_k ^ dt_l``."""
    return _rho(H(z)[2])


def chern_scalar(H: MetricField, z) -> np.ndarray:
    """Chern scalar curvature ``-1/2 sum H_{ij,ij}``; equals ``trace(chern_ricci)``."""
    return _scalar(H(z)[2])


def laplacian_f(H: MetricField, a, z) -> np.ndarray:
    a = _coerce(a, H.dim)
    return _lap_f(H(z)[1], a.linear)


def grad_norm_f(H: MetricField, a, z) -> np.ndarray:
    a = _coerce(a, H.dim)
    return _grad_norm(H(z)[0], a.linear)


def modified_scalar(H: MetricField, a, z) -> np.ndarray:
    """Modified Chern scalar curvature ``s^c_xi``, affine-linear in ``H``."""
    a = _coerce(a, H.dim)
    return _modified(*H(z), a, z)


def modified_scalar_divform(H: MetricField, a, z) -> np.ndarray:
    """``s^c_xi`` through the weighted divergence form (product rule expanded)."""
    a = _coerce(a, H.dim)
    return _modified_div(*H(z), a, z)


def soliton_residual(H: MetricField, a, z) -> np.ndarray:
    """``S_i = 1/2 sum_j H_{ij,j} - sum_j a_j H_ij + z_i``."""
    a = _coerce(a, H.dim)
    Hz, dHz, _ = H(z)
    return _residual(Hz, dHz, a, z)


def consistency_constant(H: MetricField, a, grid, tol: float = 1e-6) -> tuple[float, float]:
    """Mean and max deviation of ``s^c_xi`` over ``grid`` when ``S`` vanishes there.

    With ``S = 0`` the weighted divergence form collapses to ``s^c_xi = 2 a_{n+1}``.

    Raises
    ------
    ConsistencyError
        If ``sup |S|`` over the grid exceeds ``tol``.
    """
    a = _coerce(a, H.dim)
    Hz, dHz, d2Hz = H(grid)
    S = _residual(Hz, dHz, a, grid)
    sup = float(np.max(np.abs(S)))
    if sup > tol:
        raise ConsistencyError(f"soliton residual {sup:.3e} exceeds tolerance {tol:.1e}")
    s = _modified(Hz, dHz, d2Hz, a, grid)
    mean = float(np.mean(s))
    return mean, float(np.max(np.abs(s - mean)))


@dataclass
class CurvatureSample:
    z: list
    s_c: float
    rho: list
    laplacian_f: float
    grad_norm_f: float
    s_c_xi: float
    s_c_xi_div: float
    soliton_residual: list
    kahler_defect_norm: float

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def curvature_sample(H: MetricField, a, z) -> CurvatureSample:
    """All curvature quantities at a single point."""
    return sweep(H, a, np.atleast_2d(np.asarray(z, dtype=float)))[0]


def sweep(H: MetricField, a, grid) -> list[CurvatureSample]:
    a = _coerce(a, H.dim)
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    Hz, dHz, d2Hz = H(grid)
    rho = _rho(d2Hz)
    sc = _scalar(d2Hz)
    lap = _lap_f(dHz, a.linear)
    gn = _grad_norm(Hz, a.linear)
    scx = _modified(Hz, dHz, d2Hz, a, grid)
    scd = _modified_div(Hz, dHz, d2Hz, a, grid)
    S = _residual(Hz, dHz, a, grid)
    K = np.linalg.norm(kahler_defect(H, grid).reshape(len(grid), -1), axis=-1)
    return [CurvatureSample(grid[p].tolist(), float(sc[p]), rho[p].tolist(), float(lap[p]),
                            float(gn[p]), float(scx[p]), float(scd[p]), S[p].tolist(), float(K[p]))
            for p in range(len(grid))]


def samples_to_csv(samples: Sequence[CurvatureSample]) -> str:
    """One row per sample; matrix and vector fields are flattened."""
    if not samples:
        return ""
    n = len(samples[0].z)
    header = ([f"z{k + 1}" for k in range(n)] + ["s_c"]
              + [f"rho{k + 1}{l + 1}" for k in range(n) for l in range(n)]
              + ["laplacian_f", "grad_norm_f", "s_c_xi", "s_c_xi_div"]
              + [f"S{k + 1}" for k in range(n)] + ["kahler_defect_norm"])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for s in samples:
        w.writerow(s.z + [s.s_c] + list(np.ravel(s.rho)) + [s.laplacian_f, s.grad_norm_f, s.s_c_xi,
                   s.s_c_xi_div] + s.soliton_residual + [s.kahler_defect_norm])
    return buf.getvalue()
