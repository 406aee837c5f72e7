"""
Delzant polytopes in facet form, their combinatorics, and quadrature.

A polytope is stored as a list of facets ``(u_j, lambda_j)`` describing

    Delta = {z : <u_j, z> + lambda_j >= 0 for all j}

with ``u_j`` a primitive inward integer normal.  Vertices and their active
facet sets are derived once at construction.

The boundary measure used throughout is ``dmu = dsigma / |u_j|`` on the facet
``F_j`` where ``dsigma`` is Euclidean surface measure, so that
``u_j ^ dmu = -dv``.  In dimension one a facet is a point and carries the mass
``1 / |u_j| = 1``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linprog

__all__ = [
    "Facet",
    "Vertex",
    "DelzantPolytope",
    "QuadratureScheme",
    "PolytopeError",
    "parse_polytope",
    "load_polytope",
    "catalog_names",
    "vertices",
    "is_delzant",
    "is_reflexive",
    "quadrature",
    "interior_grid",
    "translate",
    "transform",
]

_VERTEX_TOL = 1e-9
MAX_ORDER = 60


class PolytopeError(ValueError):
    """Raised for malformed, unbounded or empty polytope data."""


@dataclass(frozen=True)
class Facet:
    normal: tuple[int, ...]
    support: float

    def __post_init__(self):
        if not any(self.normal):
            raise PolytopeError("facet normal must be nonzero")
        if math.gcd(*self.normal) != 1:
            raise PolytopeError(f"facet normal {list(self.normal)} is not primitive")

    def __call__(self, z):
        """Affine function ``l_j(z) = <u_j, z> + lambda_j``."""
        return np.asarray(z, dtype=float) @ np.asarray(self.normal, dtype=float) + self.support


@dataclass(frozen=True)
class Vertex:
    point: tuple[float, ...]
    active: tuple[int, ...]


@dataclass(frozen=True)
class DelzantPolytope:
    """Facet description of a rational convex polytope.

    Construction validates boundedness and nonempty interior and caches the
    vertex list.  The Delzant condition itself is checked separately by
    :func:`is_delzant`, so that non-Delzant inputs can still be inspected.
    """

    dim: int
    facets: tuple[Facet, ...]
    name: str | None = None
    _vertices: tuple[Vertex, ...] = field(default=(), init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.dim < 1:
            raise PolytopeError("dimension must be positive")
        for f in self.facets:
            if len(f.normal) != self.dim:
                raise PolytopeError(
                    f"facet normal {list(f.normal)} has length {len(f.normal)}, expected {self.dim}")
        _check_bounded(self.normals)
        if _inradius(self.normals, self.supports) <= _VERTEX_TOL:
            raise PolytopeError("polytope has empty interior")
        object.__setattr__(self, "_vertices", tuple(_enumerate_vertices(self.normals, self.supports)))

    @property
    def normals(self) -> np.ndarray:
        return np.array([f.normal for f in self.facets], dtype=float)

    @property
    def supports(self) -> np.ndarray:
        return np.array([f.support for f in self.facets], dtype=float)

    @property
    def vertex_points(self) -> np.ndarray:
        return np.array([v.point for v in self._vertices])

    def affine_values(self, z) -> np.ndarray:
        """All ``l_j(z)``; shape ``(..., n_facets)``."""
        return np.asarray(z, dtype=float) @ self.normals.T + self.supports

    def contains(self, z, margin: float = 0.0) -> np.ndarray:
        return np.all(self.affine_values(z) > margin, axis=-1)

    def facet_vertices(self, j: int) -> np.ndarray:
        return np.array([v.point for v in self._vertices if j in v.active])

    def to_dict(self) -> dict:
        d = {"dim": self.dim}
        if self.name is not None:
            d["name"] = self.name
        d["facets"] = [{"normal": list(f.normal), "support": f.support} for f in self.facets]
        return d

    def __str__(self):
        label = self.name or "polytope"
        return f"{label}: dim={self.dim}, facets={len(self.facets)}, vertices={len(self._vertices)}"


def _check_bounded(U: np.ndarray) -> None:
    # Bounded iff no nonzero recession direction d with U d >= 0.
    n = U.shape[1]
    for k in range(n):
        for sign in (1.0, -1.0):
            c = np.zeros(n)
            c[k] = -sign
            res = linprog(c, A_ub=-U, b_ub=np.zeros(len(U)), bounds=[(-1, 1)] * n, method="highs")
            if res.status == 0 and -res.fun > 1e-9:
                raise PolytopeError("polytope is unbounded")


def _inradius(U: np.ndarray, lam: np.ndarray) -> float:
    # Chebyshev ball: max r s.t. <u_j, z> + lambda_j >= r |u_j|.
    n = U.shape[1]
    norms = np.linalg.norm(U, axis=1)
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A = np.hstack([-U, norms[:, None]])
    res = linprog(c, A_ub=A, b_ub=lam, bounds=[(None, None)] * n + [(None, 1e6)], method="highs")
    if res.status != 0:
        return -np.inf
    return -res.fun


def _enumerate_vertices(U: np.ndarray, lam: np.ndarray) -> list[Vertex]:
    n = U.shape[1]
    found: list[np.ndarray] = []
    for combo in itertools.combinations(range(len(U)), n):
        A = U[list(combo)]
        if abs(np.linalg.det(A)) < 1e-12:
            continue
        z = np.linalg.solve(A, -lam[list(combo)])
        if np.all(U @ z + lam >= -_VERTEX_TOL):
            if not any(np.allclose(z, w, atol=1e-9) for w in found):
                found.append(z)
    out = []
    for z in sorted(found, key=lambda p: tuple(np.round(p, 9))):
        active = tuple(int(j) for j in np.flatnonzero(np.abs(U @ z + lam) <= _VERTEX_TOL))
        # snap to exact rationals where the data is integral
        z = np.where(np.abs(z - np.round(z)) < 1e-12, np.round(z), z)
        out.append(Vertex(tuple(float(x) for x in z), active))
    return out


# ---------------------------------------------------------------------------
# parsing and catalog


def parse_polytope(document) -> DelzantPolytope:
    """Build a polytope from a JSON string, bytes, or an already-decoded dict.

    Schema: ``{"dim": int, "name": str?, "facets": [{"normal": [int...], "support": number}]}``.
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise PolytopeError(f"malformed polytope document: {exc}") from None
    if not isinstance(document, dict):
        raise PolytopeError("polytope document must be a JSON object")
    try:
        dim = document["dim"]
        raw_facets = document["facets"]
    except KeyError as exc:
        raise PolytopeError(f"polytope document missing key {exc}") from None
    if not isinstance(dim, int) or isinstance(dim, bool):
        raise PolytopeError("'dim' must be an integer")
    facets = []
    for entry in raw_facets:
        try:
            normal = entry["normal"]
            support = entry["support"]
        except (KeyError, TypeError):
            raise PolytopeError(f"malformed facet entry {entry!r}") from None
        if not all(isinstance(x, int) and not isinstance(x, bool) for x in normal):
            raise PolytopeError(f"facet normal {normal!r} must be integral")
        if not isinstance(support, (int, float)) or isinstance(support, bool):
            raise PolytopeError(f"facet support {support!r} must be a number")
        facets.append(Facet(tuple(normal), float(support)))
    return DelzantPolytope(dim, tuple(facets), document.get("name"))


def catalog_names() -> list[str]:
    files = resources.files("toricsolitons").joinpath("catalog").iterdir()
    return sorted(p.name[:-5] for p in files if p.name.endswith(".json"))


@lru_cache(maxsize=None)
def _load_catalog(name: str) -> DelzantPolytope:
    text = resources.files("toricsolitons").joinpath("catalog", f"{name}.json").read_text()
    P = parse_polytope(text)
    ok, report = is_delzant(P)
    if not ok:
        raise PolytopeError(f"catalog entry {name} is not Delzant: {report}")
    return P


def load_polytope(name_or_path: str | Path) -> DelzantPolytope:
    """Load a shipped polytope by name (``"CP2"``) or a JSON file by path."""
    if str(name_or_path) in catalog_names():
        return _load_catalog(str(name_or_path))
    path = Path(name_or_path)
    if not path.exists():
        raise PolytopeError(f"unknown polytope {name_or_path!r}; catalog has {catalog_names()}")
    return parse_polytope(path.read_text())


# ---------------------------------------------------------------------------
# combinatorics


def vertices(P: DelzantPolytope) -> list[Vertex]:
    return list(P._vertices)


def is_delzant(P: DelzantPolytope) -> tuple[bool, list[dict]]:
    """Check simplicity and unimodularity at every vertex.

    Returns ``(ok, violations)``; each violation records the vertex, its active
    facets and, for simple vertices, the determinant of the active normals.
    """
    violations = []
    U = np.array([f.normal for f in P.facets], dtype=np.int64)
    for v in P._vertices:
        if len(v.active) != P.dim:
            violations.append({"vertex": list(v.point), "active": list(v.active),
                               "reason": "not simple"})
            continue
        det = int(round(np.linalg.det(U[list(v.active)].astype(float))))
        if abs(det) != 1:
            violations.append({"vertex": list(v.point), "active": list(v.active),
                               "determinant": det, "reason": "not unimodular"})
    return not violations, violations


def is_reflexive(P: DelzantPolytope) -> bool:
    """True iff every support constant equals one (the monotone position)."""
    return all(f.support == 1 for f in P.facets)


def translate(P: DelzantPolytope, shift) -> DelzantPolytope:
    """Polytope ``P + shift``: supports become ``lambda_j - <u_j, shift>``."""
    shift = np.asarray(shift, dtype=float)
    facets = tuple(Facet(f.normal, float(f.support - np.dot(f.normal, shift))) for f in P.facets)
    return DelzantPolytope(P.dim, facets, P.name)


def transform(P: DelzantPolytope, A) -> DelzantPolytope:
    """Image ``A(P)`` under a unimodular integer matrix; normals map by ``A^{-T}``."""
    A = np.asarray(A)
    if A.shape != (P.dim, P.dim) or abs(round(np.linalg.det(A))) != 1:
        raise PolytopeError("transform requires a unimodular integer matrix")
    AinvT = np.rint(np.linalg.inv(A).T).astype(int)
    facets = tuple(Facet(tuple(int(x) for x in AinvT @ np.array(f.normal)), f.support)
                   for f in P.facets)
    return DelzantPolytope(P.dim, facets, P.name)


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True)
class QuadratureScheme:
    """Interior and per-facet boundary rules over a polytope.

    ``integrate(f)`` approximates ``int_Delta f dv``; ``integrate_boundary(f)``
    approximates ``int_{dDelta} f dmu``.  Integrands are called with an array
    of points of shape ``(m, n)`` and must return shape ``(m,)``.
    """

    points: np.ndarray
    weights: np.ndarray
    boundary_points: tuple[np.ndarray, ...]
    boundary_weights: tuple[np.ndarray, ...]
    order: int

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        return float(np.dot(self.weights, f(self.points)))

    def integrate_boundary(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        return float(sum(np.dot(w, f(p)) for p, w in zip(self.boundary_points, self.boundary_weights)))

    @property
    def all_boundary_points(self) -> np.ndarray:
        return np.concatenate(self.boundary_points)

    @property
    def all_boundary_weights(self) -> np.ndarray:
        return np.concatenate(self.boundary_weights)


def _face_simplices(P: DelzantPolytope, face: frozenset) -> list[np.ndarray]:
    """Fan triangulation of the face cut out by the facet set ``face``.

    Each simplex is returned as an array of ``d+1`` points, ``d = n - |face|``.
    Relies on simplicity: the facets of a face are its intersections with one
    more facet, whenever nonempty.
    """
    verts = [np.array(v.point) for v in P._vertices if face <= set(v.active)]
    d = P.dim - len(face)
    if d == 0:
        return [np.array(verts)]
    apex = np.mean(verts, axis=0)
    out = []
    for k in range(len(P.facets)):
        if k in face:
            continue
        sub = face | {k}
        if not any(sub <= set(v.active) for v in P._vertices):
            continue
        for s in _face_simplices(P, sub):
            out.append(np.vstack([apex, s]))
    return out


def fan_triangulation(P: DelzantPolytope) -> list[np.ndarray]:
    """Simplices (``(n+1, n)`` arrays) of the fan over the vertex centroid."""
    return _face_simplices(P, frozenset())


def _collapsed_rule(d: int, npts: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre product rule on the unit d-simplex via the Duffy map.

    Returns barycentric coordinates ``(m, d+1)`` and weights summing to ``1/d!``.
    """
    if d == 0:
        return np.ones((1, 1)), np.ones(1)
    x, w = np.polynomial.legendre.leggauss(npts)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    grids = np.meshgrid(*([x] * d), indexing="ij")
    U = np.stack([g.ravel() for g in grids], axis=-1)
    W = np.prod(np.meshgrid(*([w] * d), indexing="ij"), axis=0).ravel()
    lam = np.empty((len(U), d + 1))
    rest = np.ones(len(U))
    for k in range(d):
        lam[:, k + 1] = rest * U[:, k]
        rest = rest * (1.0 - U[:, k])
    lam[:, 0] = rest
    jac = np.ones(len(U))
    for k in range(d - 1):
        jac *= (1.0 - U[:, k]) ** (d - 1 - k)
    return lam, W * jac


@lru_cache(maxsize=None)
def _cached_rule(d: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    # the Duffy Jacobian raises the degree in the first variable by d-1
    npts = max(1, math.ceil((order + d) / 2))
    return _collapsed_rule(d, npts)


def _gram_volume(simplex: np.ndarray) -> float:
    E = (simplex[1:] - simplex[0]).T
    d = E.shape[1]
    return math.sqrt(max(np.linalg.det(E.T @ E), 0.0)) / math.factorial(d)


@lru_cache(maxsize=64)
def quadrature(P: DelzantPolytope, order: int = 10) -> QuadratureScheme:
    """Quadrature exact for polynomials of degree <= ``order`` on every simplex
    of the fan triangulation, with boundary weights for ``dmu``.
    """
    if not (1 <= order <= MAX_ORDER):
        raise ValueError(f"quadrature order must be in [1, {MAX_ORDER}], got {order}")
    n = P.dim
    lam, w = _cached_rule(n, order)
    pts, wts = [], []
    for S in fan_triangulation(P):
        vol_ref = abs(np.linalg.det(S[1:] - S[0]))
        pts.append(lam @ S)
        wts.append(w * vol_ref)

    blam, bw = _cached_rule(n - 1, order)
    bpts, bwts = [], []
    for j, f in enumerate(P.facets):
        density = 1.0 / np.linalg.norm(f.normal)
        fp, fw = [], []
        for S in _face_simplices(P, frozenset({j})):
            scale = _gram_volume(S) * math.factorial(n - 1)
            fp.append(blam @ S)
            fw.append(bw * scale * density)
        bpts.append(np.concatenate(fp))
        bwts.append(np.concatenate(fw))
    return QuadratureScheme(np.concatenate(pts), np.concatenate(wts), tuple(bpts), tuple(bwts), order)


def interior_grid(P: DelzantPolytope, resolution: int, margin: float) -> np.ndarray:
    """Uniform lattice of points with ``l_j(z) >= margin`` for every facet.

    The lattice spans the bounding box of the shrunken region with
    ``resolution`` points per axis.
    """
    if margin <= 0:
        raise ValueError("margin must be positive")
    U, lam = P.normals, P.supports - margin
    if _inradius(U, lam) < 0:
        raise ValueError(f"margin {margin} leaves no interior points")
    corners = np.array([v.point for v in _enumerate_vertices(U, lam)])
    if len(corners) == 0:
        raise ValueError(f"margin {margin} leaves no interior points")
    lo, hi = corners.min(axis=0), corners.max(axis=0)
    axes = [np.linspace(a, b, resolution) for a, b in zip(lo, hi)]
    Z = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=-1)
    Z = Z[np.all(Z @ P.normals.T + P.supports >= margin - 1e-12, axis=-1)]
    if len(Z) == 0:
        raise ValueError(f"margin {margin} leaves no grid points at resolution {resolution}")
    return Z
