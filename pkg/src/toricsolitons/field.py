"""
Torus-invariant almost-Kahler metrics of involutive type as matrix fields.

A metric is carried by the symmetric positive-definite matrix ``H(z)`` on the
interior of the moment polytope together with its first and second
derivatives.  Evaluators are batched: a query of shape ``(..., n)`` returns

    H    (..., n, n)          H[i, j]
    dH   (..., n, n, n)       dH[i, j, k]    = d H_ij / d z_k
    d2H  (..., n, n, n, n)    d2H[i, j, k, l] = d^2 H_ij / d z_k d z_l

Second derivatives are stored exactly symmetric in ``(i, j)`` and ``(k, l)``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.interpolate import NdBSpline, make_interp_spline

from .polytope import DelzantPolytope

__all__ = [
    "MetricField",
    "PotentialField",
    "BoundaryReport",
    "guillemin_field",
    "polynomial_potential",
    "field_from_potential",
    "metric_from_hessian",
    "analytic_field",
    "polynomial_field",
    "grid_field",
    "sum_field",
    "transformed_field",
    "check_boundary_conditions",
    "kahler_defect",
    "write_field_csv",
    "read_field_csv",
    "dump_field",
]


_EXT = np.longdouble  # float64 on platforms without extended precision


def _symmetrize(dH=None, d2H=None):
    out = []
    if dH is not None:
        out.append(0.5 * (dH + np.swapaxes(dH, -3, -2)))
    if d2H is not None:
        d2H = 0.5 * (d2H + np.swapaxes(d2H, -4, -3))
        out.append(0.5 * (d2H + np.swapaxes(d2H, -2, -1)))
    return out


def _as_points(z, n):
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != n:
        raise ValueError(f"query has trailing dimension {z.shape[-1]}, field has n={n}")
    return z


class MetricField:
    """Evaluator ``z -> (H, dH, d2H)`` for a torus-invariant metric.

    Parameters
    ----------
    dim : int
        Torus dimension ``n``.
    evaluate : callable
        Batched evaluator returning ``(H, dH, d2H)``.
    kind : str
        Provenance tag: ``"analytic"``, ``"potential"``, ``"grid"`` or ``"sum"``.
    """

    def __init__(self, dim: int, evaluate: Callable, kind: str = "analytic", name: str | None = None,
                 potential: PotentialField | None = None):
        self.dim = dim
        self._evaluate = evaluate
        self.kind = kind
        self.name = name
        self.potential = potential

    def __call__(self, z):
        z = _as_points(z, self.dim)
        H, dH, d2H = self._evaluate(z)
        n = self.dim
        lead = z.shape[:-1]
        if H.shape != lead + (n, n) or dH.shape != lead + (n,) * 3 or d2H.shape != lead + (n,) * 4:
            raise ValueError(f"evaluator returned shapes {H.shape}, {dH.shape}, {d2H.shape} for n={n}")
        dH, d2H = _symmetrize(dH, d2H)
        return 0.5 * (H + np.swapaxes(H, -2, -1)), dH, d2H

    def H(self, z):
        return self(z)[0]

    def __repr__(self):
        return f"MetricField(dim={self.dim}, kind={self.kind!r}, name={self.name!r})"


class PotentialField:
    """Symplectic potential ``phi`` with derivatives up to order four.

    ``evaluate(z)`` returns ``(phi, dphi, d2phi, d3phi, d4phi)`` with trailing
    shapes ``(), (n,), (n, n), (n, n, n), (n, n, n, n)``.
    """

    def __init__(self, dim: int, evaluate: Callable, name: str | None = None):
        self.dim = dim
        self._evaluate = evaluate
        self.name = name

    def __call__(self, z):
        return self._evaluate(_as_points(z, self.dim))

    def __add__(self, other: PotentialField) -> PotentialField:
        if other.dim != self.dim:
            raise ValueError("potential dimensions differ")

        def evaluate(z):
            return tuple(a + b for a, b in zip(self._evaluate(z), other._evaluate(z)))

        return PotentialField(self.dim, evaluate, name=f"{self.name}+{other.name}")


def guillemin_field(P: DelzantPolytope) -> PotentialField:
    """Canonical potential ``phi = 1/2 sum_j l_j log l_j`` of a Delzant polytope.

    Derivatives of order two to four come back as ``np.longdouble`` arrays.
    """
    U = P.normals
    lam = P.supports

    def evaluate(z):
        ell = z @ U.T + lam
        if np.any(ell <= 0):
            raise ValueError("Guillemin potential queried outside the open polytope")
        log = np.log(ell)
        phi = 0.5 * np.sum(ell * log, axis=-1)
        d1 = 0.5 * (log + 1.0) @ U
        # higher derivatives in extended precision; see metric_from_hessian
        Ul = U.astype(_EXT)
        r = 1.0 / (z.astype(_EXT) @ Ul.T + lam.astype(_EXT))
        d2 = 0.5 * np.einsum("...j,ja,jb->...ab", r, Ul, Ul)
        d3 = -0.5 * np.einsum("...j,ja,jb,jc->...abc", r**2, Ul, Ul, Ul)
        d4 = np.einsum("...j,ja,jb,jc,jd->...abcd", r**3, Ul, Ul, Ul, Ul)
        return phi, d1, d2, d3, d4

    return PotentialField(P.dim, evaluate, name=f"guillemin[{P.name}]")


def polynomial_potential(coeffs: dict[tuple[int, ...], float], dim: int, name: str = "poly") -> PotentialField:
    """Potential ``sum c_alpha z^alpha`` from a monomial-exponent dictionary."""
    terms = [(np.array(k, dtype=int), float(c)) for k, c in coeffs.items()]

    def mono_derivs(z, alpha, order):
        # d^order/dz_{k1}..dz_{korder} of z^alpha as an array with `order` trailing axes
        shape = z.shape[:-1] + (dim,) * order
        out = np.zeros(shape)
        for idx in np.ndindex(*(dim,) * order):
            e = alpha.copy()
            coef = np.ones(z.shape[:-1])
            for k in idx:
                coef = coef * e[k]
                e[k] -= 1
            if np.any(e < 0):
                continue
            out[(...,) + idx] = coef * np.prod(z ** e, axis=-1)
        return out

    def evaluate(z):
        res = [np.zeros(z.shape[:-1] + (dim,) * k) for k in range(5)]
        for alpha, c in terms:
            for k in range(5):
                res[k] += c * mono_derivs(z, alpha, k)
        return tuple(res)

    return PotentialField(dim, evaluate, name=name)


def metric_from_hessian(G, dG, d2G):
    """``(H, dH, d2H)`` for ``H = G^{-1}`` given ``G`` and its first two derivatives.

    The float64 inverse is refined by two Newton-Schulz steps and the chain
    rule is evaluated in ``np.longdouble``.  In sheared lattice bases ``G`` can
    have condition number in the thousands and the plain float64 route then
    loses about three digits in ``d2H``.  Results are returned as float64.
    """
    G, dG, d2G = (np.asarray(x, dtype=_EXT) for x in (G, dG, d2G))
    try:
        H = np.linalg.inv(G.astype(float)).astype(_EXT)
    except np.linalg.LinAlgError:
        raise ValueError("potential Hessian is singular") from None
    eye = np.eye(G.shape[-1], dtype=_EXT)
    for _ in range(2):
        H = H @ (2 * eye - G @ H)
    # H_{,k} = -H G_{,k} H
    dH = -np.einsum("...ia,...abk,...bj->...ijk", H, dG, H)
    # H_{,kl} = -H_{,l} G_{,k} H - H G_{,kl} H - H G_{,k} H_{,l}
    t1 = np.einsum("...ial,...abk,...bj->...ijkl", dH, dG, H)
    t2 = np.einsum("...ia,...abkl,...bj->...ijkl", H, d2G, H)
    t3 = np.einsum("...ia,...abk,...bjl->...ijkl", H, dG, dH)
    return H.astype(float), dH.astype(float), (-(t1 + t2 + t3)).astype(float)


def field_from_potential(phi: PotentialField) -> MetricField:
    """``H = (Hess phi)^{-1}`` with derivatives by the inverse-matrix chain rule."""

    def evaluate(z):
        _, _, G, dG, d2G = phi(z)
        return metric_from_hessian(G, dG, d2G)

    return MetricField(phi.dim, evaluate, kind="potential", name=phi.name, potential=phi)


# ---------------------------------------------------------------------------
# closure-based and polynomial fields


def _central_jacobian(f: Callable, z: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Central differences with one Richardson level; derivative axis appended."""
    n = z.shape[-1]
    cols = []
    for k in range(n):
        hk = np.zeros(z.shape)
        hk[..., k] = h
        coarse = f(z + hk) - f(z - hk)
        fine = f(z + hk / 2) - f(z - hk / 2)
        hb = h.reshape(h.shape + (1,) * (coarse.ndim - h.ndim))
        cols.append((4 * fine / hb - coarse / (2 * hb)) / 3)
    return np.stack(cols, axis=-1)


def analytic_field(n: int, H: Callable, dH: Callable | None = None, d2H: Callable | None = None,
                   polytope: DelzantPolytope | None = None, name: str | None = None) -> MetricField:
    """Field from closures; missing derivatives fall back to finite differences.

    The fallback step is ``eps**(1/3)`` times the local facet distance (or one
    when no polytope is given), central differences plus a Richardson level.
    """
    eps = np.finfo(float).eps

    def step(z, power):
        scale = np.ones(z.shape[:-1])
        if polytope is not None:
            scale = np.clip(np.min(polytope.affine_values(z), axis=-1), 1e-3, 1.0)
        return eps ** power * scale

    def first(z):
        if dH is not None:
            return dH(z)
        return _central_jacobian(H, z, step(z, 1 / 3))

    def evaluate(z):
        Hz = H(z)
        dHz = first(z)
        if d2H is not None:
            d2Hz = d2H(z)
        else:
            d2Hz = _central_jacobian(first, z, step(z, 1 / 4 if dH is None else 1 / 3))
        return Hz, dHz, d2Hz

    return MetricField(n, evaluate, kind="analytic", name=name)


def polynomial_field(coeffs: np.ndarray, center=None, name: str | None = None) -> MetricField:
    """Quadratic symmetric matrix field ``H(z) = C0 + C1[k] x_k + C2[k,l] x_k x_l``.

    ``coeffs`` is a tuple ``(C0, C1, C2)`` with shapes ``(n,n)``, ``(n,n,n)``,
    ``(n,n,n,n)``; each is symmetrized in the matrix indices, ``C2`` also in
    ``(k, l)``.  ``x = z - center``.  Derivatives are exact.
    """
    C0, C1, C2 = (np.asarray(c, dtype=float) for c in coeffs)
    n = C0.shape[0]
    C0 = 0.5 * (C0 + C0.T)
    C1 = 0.5 * (C1 + C1.transpose(1, 0, 2))
    C2 = 0.5 * (C2 + C2.transpose(1, 0, 2, 3))
    C2 = 0.5 * (C2 + C2.transpose(0, 1, 3, 2))
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)

    def evaluate(z):
        x = z - c
        H = C0 + np.einsum("ijk,...k->...ij", C1, x) + np.einsum("ijkl,...k,...l->...ij", C2, x, x)
        dH = C1 + 2 * np.einsum("ijkl,...l->...ijk", C2, x)
        d2H = np.broadcast_to(2 * C2, z.shape[:-1] + C2.shape).copy()
        return H, dH, d2H

    return MetricField(n, evaluate, kind="analytic", name=name)


def sum_field(H: MetricField, D: MetricField, t: float) -> MetricField:
    """Pointwise ``H + t D``."""
    if H.dim != D.dim:
        raise ValueError("fields have inconsistent dimension")

    def evaluate(z):
        a, b = H(z), D(z)
        return tuple(x + t * y for x, y in zip(a, b))

    return MetricField(H.dim, evaluate, kind="sum", name=f"{H.name}+{t}*{D.name}")


def transformed_field(H: MetricField, A) -> MetricField:
    """Push forward under ``z' = A z``: ``H'(z') = A H(A^{-1} z') A^T``."""
    A = np.asarray(A, dtype=float)
    Ainv = np.linalg.inv(A)

    def evaluate(zp):
        z = zp @ Ainv.T
        Hz, dHz, d2Hz = H(z)
        Hp = np.einsum("ia,...ab,jb->...ij", A, Hz, A)
        dHp = np.einsum("ia,...abk,jb,kp->...ijp", A, dHz, A, Ainv)
        d2Hp = np.einsum("ia,...abkl,jb,kp,lq->...ijpq", A, d2Hz, A, Ainv, Ainv)
        return Hp, dHp, d2Hp

    return MetricField(H.dim, evaluate, kind=H.kind, name=H.name)


# ---------------------------------------------------------------------------
# grid fields and CSV


def _upper_indices(n):
    return [(i, j) for i in range(n) for j in range(i, n)]


def grid_field(points, values, polytope: DelzantPolytope | None = None, order: int = 3) -> MetricField:
    """Tensor-product spline interpolant of sampled ``H``.

    Parameters
    ----------
    points : array (m, n)
        Sample locations; must form a complete tensor grid.
    values : array (m, n, n)
        ``H`` at the samples.
    polytope : DelzantPolytope, optional
        When given, queries outside the open polytope are rejected.
    order : int
        Spline degree per axis (3 gives C^2 evaluations).
    """
    points = np.asarray(points, dtype=float)
    values = np.asarray(values, dtype=float)
    m, n = points.shape
    if values.shape != (m, n, n):
        raise ValueError(f"values shape {values.shape} inconsistent with {m} points in dimension {n}")
    axes = [np.unique(points[:, k]) for k in range(n)]
    shape = tuple(len(a) for a in axes)
    if int(np.prod(shape)) != m:
        raise ValueError("grid_field needs samples on a complete tensor grid")
    idx = tuple(np.searchsorted(axes[k], points[:, k]) for k in range(n))
    table = np.empty(shape + (n, n))
    table[idx] = values

    knots, coef = [], table
    for k in range(n):
        spl = make_interp_spline(axes[k], coef, k=order, axis=k)
        knots.append(spl.t)
        coef = np.moveaxis(spl.c, 0, k)  # BSpline stores the interpolation axis first
    spline = NdBSpline(tuple(knots), coef, order)
    lo = np.array([a[0] for a in axes])
    hi = np.array([a[-1] for a in axes])

    def evaluate(z):
        flat = z.reshape(-1, n)
        if np.any(flat < lo - 1e-12) or np.any(flat > hi + 1e-12):
            raise ValueError("grid_field queried outside the sample hull")
        if polytope is not None and not np.all(polytope.contains(flat)):
            raise ValueError("grid_field queried outside the polytope")
        H = spline(flat)
        dH = np.empty(H.shape + (n,))
        d2H = np.empty(H.shape + (n, n))
        for k in range(n):
            nu = np.zeros(n, dtype=int)
            nu[k] = 1
            dH[..., k] = spline(flat, nu=nu)
            for l in range(k, n):
                nu2 = nu.copy()
                nu2[l] += 1
                d2H[..., k, l] = d2H[..., l, k] = spline(flat, nu=nu2)
        lead = z.shape[:-1]
        return H.reshape(lead + (n, n)), dH.reshape(lead + (n, n, n)), d2H.reshape(lead + (n, n, n, n))

    return MetricField(n, evaluate, kind="grid")


def write_field_csv(points, H_values, target=None) -> str:
    """Field dump: header ``z1..zn,H11,H12,...,Hnn`` (upper triangle, row-major)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = points.shape[1]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"z{k + 1}" for k in range(n)] + [f"H{i + 1}{j + 1}" for i, j in _upper_indices(n)])
    for z, H in zip(points, H_values):
        writer.writerow([repr(float(x)) for x in z] + [repr(float(H[i, j])) for i, j in _upper_indices(n)])
    text = buf.getvalue()
    if target is not None:
        Path(target).write_text(text)
    return text


def read_field_csv(source) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`write_field_csv`; accepts a path or CSV text."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
        source = Path(source).read_text()
    rows = list(csv.reader(io.StringIO(source)))
    header, body = rows[0], [r for r in rows[1:] if r]
    n = sum(1 for h in header if h.startswith("z"))
    pairs = _upper_indices(n)
    if len(header) != n + len(pairs):
        raise ValueError("field CSV header does not match dimension")
    data = np.array(body, dtype=float)
    Z = data[:, :n]
    H = np.empty((len(data), n, n))
    for c, (i, j) in enumerate(pairs):
        H[:, i, j] = H[:, j, i] = data[:, n + c]
    return Z, H


def dump_field(field: MetricField, points, target=None) -> str:
    return write_field_csv(points, field.H(np.asarray(points, dtype=float)), target)


# ---------------------------------------------------------------------------
# diagnostics


@dataclass
class BoundaryReport:
    """Per-facet maxima of ``|H u_j|`` and ``|dH(u_j,u_j) - 2 u_j|`` at the facet."""

    kernel_defect: list[float]
    derivative_defect: list[float]
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(x < self.tolerance for x in self.kernel_defect + self.derivative_defect)

    def to_dict(self) -> dict:
        return {"kernel_defect": self.kernel_defect, "derivative_defect": self.derivative_defect,
                "tolerance": self.tolerance, "passed": self.passed}

    def same_as(self, other: BoundaryReport, atol: float = 1e-12) -> bool:
        return (self.passed == other.passed
                and np.allclose(self.kernel_defect, other.kernel_defect, atol=atol, rtol=0)
                and np.allclose(self.derivative_defect, other.derivative_defect, atol=atol, rtol=0))


def _facet_samples(P: DelzantPolytope, j: int, shrink: float = 0.6) -> np.ndarray:
    V = P.facet_vertices(j)
    c = V.mean(axis=0)
    return np.vstack([c, c + shrink * (V - c)])


def check_boundary_conditions(H: MetricField, P: DelzantPolytope, tolerance: float = 1e-6,
                              delta: float = 1e-3) -> BoundaryReport:
    """Test ``H u_j = 0`` and ``dH(u_j, u_j) = 2 u_j`` on each facet.

    Values are sampled at distances ``delta, delta/2, delta/4`` along the inward
    normal from points in the relative interior of each facet and extrapolated
    to the facet by the interpolating quadratic.
    """
    kern, deriv = [], []
    s = np.array([delta, delta / 2, delta / 4])
    # Lagrange weights for evaluation at 0 from nodes s
    w = np.array([np.prod([-s[m] / (s[k] - s[m]) for m in range(3) if m != k]) for k in range(3)])
    for j, f in enumerate(P.facets):
        u = np.array(f.normal, dtype=float)
        base = _facet_samples(P, j)
        Z = base[:, None, :] + (s[:, None] * u / np.linalg.norm(u))[None, :, :]
        Hz, dHz, _ = H(Z)
        Hu = np.einsum("...ab,b->...a", Hz, u)
        dHuu = np.einsum("...abk,a,b->...k", dHz, u, u)
        Hu0 = np.einsum("k,pk...->p...", w, Hu)
        d0 = np.einsum("k,pk...->p...", w, dHuu)
        kern.append(float(np.max(np.linalg.norm(Hu0, axis=-1))))
        deriv.append(float(np.max(np.linalg.norm(d0 - 2 * u, axis=-1))))
    return BoundaryReport(kern, deriv, tolerance)


def kahler_defect(H: MetricField, z) -> np.ndarray:
    """``K_ijk = dG_ij/dz_k - dG_kj/dz_i`` with ``G = H^{-1}``.

    Vanishes exactly when the metric is Kahler; antisymmetric in ``(i, k)``.
    """
    Hz, dHz, _ = H(z)
    try:
        G = np.linalg.inv(Hz)
    except np.linalg.LinAlgError:
        raise ValueError("H is singular") from None
    dG = -np.einsum("...ia,...abk,...bj->...ijk", G, dHz, G)
    return dG - np.einsum("...kji->...ijk", dG)
