"""
Compactly supported deformations of toric soliton metrics.

Given a background ``H`` and soliton coefficients ``a`` we build a symmetric
matrix field ``D`` supported in a box inside the polytope such that

    1/2 sum_i D_{il,i} - sum_i a_i D_{il} = 0        (l = 1..n)

pointwise.  Writing ``D = e^{2f} V`` this is ``sum_i V_{il,i} = 0``, which we
solve with separable entries

    V_il = V_li = u(z_i) v(z_l) w(rest)
    V_ll = -u'(z_i) Vt(z_l) w(rest),       Vt' = v
    V_ii = -Ut(z_i) v'(z_l) w(rest),       Ut' = u

where ``u, v`` have zero mean so that the primitives ``Ut, Vt`` are compactly
supported.  Both ``s^c_xi`` and the soliton residual are affine in ``H`` and
their linear parts annihilate such ``D``, so every ``H + tD`` that stays
positive-definite has the same ``s^c_xi`` as ``H``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial import Polynomial

from .curvature import SolitonVector, _coerce, _modified, _residual
from .field import MetricField, check_boundary_conditions, kahler_defect, sum_field
from .polytope import DelzantPolytope, interior_grid

__all__ = [
    "BumpProfile",
    "DeformationSpec",
    "DeformationFamily",
    "DeformationError",
    "make_bump",
    "default_spec",
    "build_deformation",
    "divergence_residual",
    "verify_family",
]


class DeformationError(ValueError):
    pass


@dataclass(frozen=True)
class BumpProfile:
    """Polynomial bump on ``[alpha, beta]``, zero outside.

    ``smoothness`` counts the derivatives (orders ``0..k-1``) vanishing at both
    ends.  A zero-mean profile is the derivative of a bump and carries that bump
    as its compactly supported antiderivative.
    """

    alpha: float
    beta: float
    smoothness: int = 4
    zero_mean: bool = False
    poly: Polynomial = field(default=None, repr=False, compare=False)
    primitive: Polynomial | None = field(default=None, repr=False, compare=False)
    scale: float = field(default=1.0, repr=False, compare=False)

    def _factored(self, x, power):
        # c ((x-alpha)(beta-x))^power, accurate near the endpoints unlike the expanded form
        return self.scale * ((x - self.alpha) * (self.beta - x)) ** power

    def __call__(self, x, nu: int = 0):
        x = np.asarray(x, dtype=float)
        inside = (x > self.alpha) & (x < self.beta)
        if nu == 0 and not self.zero_mean:
            return np.where(inside, self._factored(x, self.smoothness), 0.0)
        return np.where(inside, self.poly.deriv(nu)(x) if nu else self.poly(x), 0.0)

    def antiderivative(self, x, nu: int = 0):
        if self.primitive is None:
            raise ValueError("only zero-mean profiles have a compactly supported antiderivative")
        x = np.asarray(x, dtype=float)
        inside = (x > self.alpha) & (x < self.beta)
        if nu == 0:
            return np.where(inside, self._factored(x, self.smoothness + 1), 0.0)
        return np.where(inside, self.primitive.deriv(nu)(x), 0.0)

    def to_dict(self) -> dict:
        return {"interval": [self.alpha, self.beta], "smoothness": self.smoothness,
                "zero_mean": self.zero_mean}


def make_bump(interval, smoothness: int = 4, zero_mean: bool = False,
              coordinate_range=None) -> BumpProfile:
    """Plain bump ``c ((x-alpha)(beta-x))^k`` with peak one, or its zero-mean
    variant ``d/dx [c ((x-alpha)(beta-x))^{k+1}]``.

    ``coordinate_range`` is the projection of the polytope on this axis; the
    interval must lie strictly inside it.
    """
    alpha, beta = map(float, interval)
    if not alpha < beta:
        raise DeformationError(f"empty bump interval {interval}")
    if coordinate_range is not None:
        lo, hi = coordinate_range
        if alpha <= lo or beta >= hi:
            raise DeformationError(f"bump interval {interval} touches the polytope projection {coordinate_range}")
    if smoothness < 1:
        raise DeformationError("smoothness must be at least 1")
    base = Polynomial([-alpha * beta, alpha + beta, -1.0])  # (x - alpha)(beta - x)
    mid = 0.5 * (alpha + beta)
    if not zero_mean:
        c = 1.0 / base(mid) ** smoothness
        return BumpProfile(alpha, beta, smoothness, False, c * base ** smoothness, None, c)
    c = 1.0 / base(mid) ** (smoothness + 1)
    q = c * base ** (smoothness + 1)
    return BumpProfile(alpha, beta, smoothness, True, q.deriv(), q, c)


# --- separable terms ---------------------------------------------------------


class _Factor:
    """One-variable factor ``g(z_axis)`` with derivatives up to order two."""

    def __init__(self, fn, scale=1.0):
        self.fn = fn
        self.scale = scale

    def __call__(self, x, nu=0):
        return self.scale * self.fn(x, nu)


def _term_derivs(factors: dict[int, _Factor], z: np.ndarray, n: int):
    """Value, gradient and Hessian of ``prod_axis factors[axis](z_axis)``."""
    vals = {ax: [f(z[..., ax], nu) for nu in range(3)] for ax, f in factors.items()}
    lead = z.shape[:-1]

    def prod(orders):
        out = np.ones(lead)
        for ax in factors:
            out = out * vals[ax][orders.get(ax, 0)]
        return out

    v = prod({})
    g = np.zeros(lead + (n,))
    h = np.zeros(lead + (n, n))
    for k in factors:
        g[..., k] = prod({k: 1})
        for l in factors:
            if l == k:
                h[..., k, k] = prod({k: 2})
            else:
                h[..., k, l] = prod({k: 1, l: 1})
    return v, g, h


@dataclass
class DeformationSpec:
    """Recipe for one summand of ``D``.

    ``pair = (i, l)`` with ``i < l`` (zero-based); ``u_interval`` lives on
    ``z_i``, ``v_interval`` on ``z_l``; ``w_intervals`` maps each remaining
    axis to a plain-bump interval (empty when ``n = 2``).
    """

    pair: tuple[int, int]
    u_interval: tuple[float, float]
    v_interval: tuple[float, float]
    w_intervals: dict = field(default_factory=dict)
    smoothness: int = 6
    amplitude: float = 1.0
    a: tuple = ()

    def box(self, n: int) -> list[tuple[float, float]]:
        i, l = self.pair
        out = []
        for k in range(n):
            if k == i:
                out.append(tuple(self.u_interval))
            elif k == l:
                out.append(tuple(self.v_interval))
            else:
                out.append(tuple(self.w_intervals[k]))
        return out

    def center(self, n: int) -> np.ndarray:
        return np.array([0.5 * (lo + hi) for lo, hi in self.box(n)])

    def to_json(self) -> str:
        d = asdict(self)
        d["w_intervals"] = {str(k): list(v) for k, v in self.w_intervals.items()}
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> DeformationSpec:
        d = json.loads(text)
        d["pair"] = tuple(d["pair"])
        d["u_interval"] = tuple(d["u_interval"])
        d["v_interval"] = tuple(d["v_interval"])
        d["w_intervals"] = {int(k): tuple(v) for k, v in d.get("w_intervals", {}).items()}
        d["a"] = tuple(d.get("a", ()))
        return cls(**d)


def default_spec(P: DelzantPolytope, a=None, pair=(0, 1), half_width: float = 0.3,
                 center=None) -> DeformationSpec:
    """Symmetric box of half-width ``half_width`` around ``center`` (default: vertex centroid)."""
    if P.dim < 2:
        raise DeformationError("deformations need n >= 2")
    c = P.vertex_points.mean(axis=0) if center is None else np.asarray(center, dtype=float)
    a = _coerce(a, P.dim)
    i, l = pair
    w = {k: (c[k] - half_width, c[k] + half_width) for k in range(P.dim) if k not in pair}
    return DeformationSpec(tuple(pair), (c[i] - half_width, c[i] + half_width),
                           (c[l] - half_width, c[l] + half_width), w, a=a.a)


def _perturbation(P: DelzantPolytope, spec: DeformationSpec, a: SolitonVector) -> MetricField:
    n = P.dim
    i, l = spec.pair
    if not (0 <= i < l < n):
        raise DeformationError(f"pair {spec.pair} must satisfy 0 <= i < l < n")
    V = P.vertex_points
    box = spec.box(n)
    for k, (lo, hi) in enumerate(box):
        if not lo < hi:
            raise DeformationError(f"empty support interval on axis {k}")
    corners = np.array(np.meshgrid(*[list(b) for b in box], indexing="ij")).reshape(n, -1).T
    if not np.all(P.contains(corners, margin=1e-9)):
        raise DeformationError("support box is not strictly inside the polytope")

    rng = lambda k: (V[:, k].min(), V[:, k].max())
    k_s = spec.smoothness
    u = make_bump(spec.u_interval, k_s, True, rng(i))
    v = make_bump(spec.v_interval, k_s, True, rng(l))
    w = {k: make_bump(spec.w_intervals[k], k_s, False, rng(k)) for k in range(n) if k not in (i, l)}

    # scale so that max |V_il| over the box equals the requested amplitude
    mids = np.linspace(*spec.u_interval, 201), np.linspace(*spec.v_interval, 201)
    peak = np.max(np.abs(u(mids[0]))) * np.max(np.abs(v(mids[1])))
    amp = spec.amplitude / peak
    w_factors = {k: _Factor(lambda x, nu, b=b: b(x, nu)) for k, b in w.items()}
    # (row, col, factors) for the upper triangle entries of V
    entries = [
        (i, l, {i: _Factor(lambda x, nu: u(x, nu), amp), l: _Factor(lambda x, nu: v(x, nu)), **w_factors}),
        (l, l, {i: _Factor(lambda x, nu: u(x, nu + 1), -amp), l: _Factor(lambda x, nu: v.antiderivative(x, nu)),
                **w_factors}),
        (i, i, {i: _Factor(lambda x, nu: u.antiderivative(x, nu), -amp), l: _Factor(lambda x, nu: v(x, nu + 1)),
                **w_factors}),
    ]
    lin = a.linear

    def evaluate(z):
        lead = z.shape[:-1]
        Vz = np.zeros(lead + (n, n))
        dV = np.zeros(lead + (n, n, n))
        d2V = np.zeros(lead + (n, n, n, n))
        for r, c, factors in entries:
            val, g, h = _term_derivs(factors, z, n)
            for p, q in {(r, c), (c, r)}:
                Vz[..., p, q] = val
                dV[..., p, q, :] = g
                d2V[..., p, q, :, :] = h
        E = np.exp(2 * a(z))
        # D = e^{2f} V
        D = E[..., None, None] * Vz
        dD = E[..., None, None, None] * (2 * Vz[..., None] * lin + dV)
        d2D = E[..., None, None, None, None] * (
            4 * np.einsum("...pq,k,m->...pqkm", Vz, lin, lin)
            + 2 * np.einsum("k,...pqm->...pqkm", lin, dV)
            + 2 * np.einsum("m,...pqk->...pqkm", lin, dV)
            + d2V)
        return D, dD, d2D

    return MetricField(n, evaluate, kind="analytic", name=f"D{spec.pair}")


def divergence_residual(D: MetricField, a, z) -> np.ndarray:
    """``1/2 sum_i D_{il,i} - sum_i a_i D_{il}`` for each ``l``."""
    a = _coerce(a, D.dim)
    Dz, dDz, _ = D(z)
    return 0.5 * np.einsum("...ili->...l", dDz) - np.einsum("...il,i->...l", Dz, a.linear)


@dataclass
class DeformationFamily:
    """``H_t = H + t D`` with ``t`` in the open interval ``(t_minus, t_plus)``."""

    background: MetricField
    perturbation: MetricField
    a: SolitonVector
    t_minus: float
    t_plus: float
    specs: list
    polytope: DelzantPolytope
    grid: np.ndarray = field(repr=False, default=None)

    def at(self, t: float) -> MetricField:
        return sum_field(self.background, self.perturbation, t)

    @property
    def center(self) -> np.ndarray:
        return self.specs[0].center(self.polytope.dim)


def _support_grid(P, specs, resolution):
    n = P.dim
    pts = []
    for s in specs:
        axes = [np.linspace(lo, hi, resolution) for lo, hi in s.box(n)]
        pts.append(np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=-1))
    return np.concatenate(pts)


def _admissible_interval(H: MetricField, D: MetricField, grid, safety=0.9):
    Hz, Dz = H.H(grid), D.H(grid)
    L = np.linalg.cholesky(Hz)
    Linv = np.linalg.inv(L)
    M = Linv @ Dz @ np.swapaxes(Linv, -1, -2)
    mu = np.linalg.eigvalsh(0.5 * (M + np.swapaxes(M, -1, -2)))
    lo, hi = mu.min(), mu.max()
    # 1 + t mu > 0 for every eigenvalue
    t_plus = safety / -lo if lo < 0 else np.inf
    t_minus = -safety / hi if hi > 0 else -np.inf
    return float(t_minus), float(t_plus)


def build_deformation(H: MetricField, a, spec: DeformationSpec | Sequence[DeformationSpec],
                      polytope: DelzantPolytope, require_soliton: bool = True,
                      soliton_tol: float = 1e-6, resolution: int = 21) -> DeformationFamily:
    """Construct the family ``H + tD`` for one or several pair specs.

    Raises
    ------
    DeformationError
        For ``n = 1`` (the only compactly supported solution is ``D = 0``), a
        support box touching the boundary, or a background whose soliton
        residual exceeds ``soliton_tol`` on the box when ``require_soliton``.
    """
    n = H.dim
    if n < 2:
        raise DeformationError("no nontrivial compactly supported deformation in dimension 1: "
                               "V' = 0 with compact support forces V = 0")
    a = _coerce(a, n)
    specs = [spec] if isinstance(spec, DeformationSpec) else list(spec)
    parts = [_perturbation(polytope, s, a) for s in specs]
    if len(parts) == 1:
        D = parts[0]
    else:
        def evaluate(z):
            vals = [p(z) for p in parts]
            return tuple(sum(v[k] for v in vals) for k in range(3))
        D = MetricField(n, evaluate, kind="analytic", name="D[sum]")

    grid = _support_grid(polytope, specs, resolution)
    if require_soliton:
        Hz, dHz, _ = H(grid)
        sup = float(np.max(np.abs(_residual(Hz, dHz, a, grid))))
        if sup > soliton_tol:
            raise DeformationError(f"background is not a soliton on the support box (|S| = {sup:.2e})")
    t_minus, t_plus = _admissible_interval(H, D, grid)
    if np.isinf(t_plus) or np.isinf(t_minus):
        raise DeformationError("perturbation is semidefinite; admissible interval is unbounded")
    return DeformationFamily(H, D, a, t_minus, t_plus, specs, polytope, grid)


def verify_family(fam: DeformationFamily, grid=None, t_samples=None, boundary_tol: float = 1e-6) -> dict:
    """Certify the family on a grid and a set of parameter values.

    Reports the divergence-condition residual, the drift of ``s^c_xi`` and of
    the soliton residual relative to the background, the positivity margin
    (smallest eigenvalue of ``H_t``, and of ``H^{-1} H_t``), the Kahler defect at the bump centre and its maximum
    over the support grid, and
    whether the boundary report matches the background's.
    """
    P = fam.polytope
    if grid is None:
        grid = np.concatenate([fam.grid, interior_grid(P, 15, 0.05)])
    if t_samples is None:
        t_samples = [0.5 * fam.t_minus, 0.5 * fam.t_plus]
    a = fam.a
    Hz, dHz, d2Hz = fam.background(grid)
    Dz, dDz, d2Dz = fam.perturbation(grid)
    base_s = _modified(Hz, dHz, d2Hz, a, grid)
    base_S = _residual(Hz, dHz, a, grid)
    div = float(np.max(np.abs(divergence_residual(fam.perturbation, a, grid))))
    base_bc = check_boundary_conditions(fam.background, P, boundary_tol)
    center = fam.center
    base_K = float(np.max(np.abs(kahler_defect(fam.background, center))))
    support = fam.grid
    base_K_support = float(np.max(np.abs(kahler_defect(fam.background, support))))

    per_t = []
    for t in t_samples:
        Ht = (Hz + t * Dz, dHz + t * dDz, d2Hz + t * d2Dz)
        s = _modified(*Ht, a, grid)
        S = _residual(Ht[0], Ht[1], a, grid)
        margin = float(np.min(np.linalg.eigvalsh(Ht[0])))
        rel = float(np.min(np.linalg.eigvalsh(np.linalg.solve(Hz, Ht[0]))))
        bc = check_boundary_conditions(fam.at(t), P, boundary_tol)
        K = float(np.max(np.abs(kahler_defect(fam.at(t), center))))
        K_max = float(np.max(np.abs(kahler_defect(fam.at(t), support))))
        per_t.append({
            "t": float(t),
            "s_c_xi_drift": float(np.max(np.abs(s - base_s))),
            "soliton_residual_drift": float(np.max(np.abs(S - base_S))),
            "positivity_margin": margin,
            "relative_margin": rel,
            "kahler_defect_center": K,
            "kahler_defect_max": K_max,
            "boundary_same": bc.same_as(base_bc),
        })
    return {
        "divergence_residual": div,
        "t_interval": [fam.t_minus, fam.t_plus],
        "background_kahler_defect_center": base_K,
        "background_kahler_defect_max": base_K_support,
        "center": center.tolist(),
        "samples": per_t,
        "grid_points": int(len(grid)),
    }
