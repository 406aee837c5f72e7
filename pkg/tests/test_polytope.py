import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from toricsolitons.polytope import (Facet, PolytopeError, catalog_names, fan_triangulation,
                                    interior_grid, is_delzant, is_reflexive, load_polytope,
                                    parse_polytope, quadrature, transform, translate, vertices)

POLYGONS = ["CP2", "CP1xCP1", "Bl1CP2", "Bl2CP2", "Bl3CP2"]


def _as_set(points):
    return {tuple(np.round(p, 10)) for p in points}


def test_parse_interval():
    P = parse_polytope({"dim": 1, "facets": [{"normal": [1], "support": 1}, {"normal": [-1], "support": 1}]})
    assert _as_set(P.vertex_points) == {(-1.0,), (1.0,)}


def test_parse_from_json_text():
    text = json.dumps({"dim": 2, "name": "tri", "facets": [
        {"normal": [1, 0], "support": 1}, {"normal": [0, 1], "support": 1}, {"normal": [-1, -1], "support": 1}]})
    P = parse_polytope(text)
    assert P.name == "tri"
    assert _as_set(P.vertex_points) == {(-1.0, -1.0), (2.0, -1.0), (-1.0, 2.0)}


def test_unbounded_rejected():
    with pytest.raises(PolytopeError, match="unbounded"):
        parse_polytope({"dim": 2, "facets": [{"normal": [1, 0], "support": 1}, {"normal": [0, 1], "support": 1}]})


def test_empty_rejected():
    with pytest.raises(PolytopeError):
        parse_polytope({"dim": 1, "facets": [{"normal": [1], "support": -2}, {"normal": [-1], "support": 1}]})


@pytest.mark.parametrize("normal", [[2, 0], [0, 0], [2, 4]])
def test_nonprimitive_normal(normal):
    with pytest.raises(PolytopeError):
        Facet(tuple(normal), 1.0)


def test_malformed_document():
    with pytest.raises(PolytopeError):
        parse_polytope({"dim": 2})
    with pytest.raises(PolytopeError):
        parse_polytope("{not json")


def test_vertices_bl1():
    P = load_polytope("Bl1CP2")
    assert _as_set(P.vertex_points) == {(-1.0, 0.0), (0.0, -1.0), (2.0, -1.0), (-1.0, 2.0)}
    for v in vertices(P):
        assert len(v.active) == 2
        for j in v.active:
            assert abs(P.facets[j](np.array(v.point))) < 1e-12


def test_catalog_listing():
    names = catalog_names()
    for name in POLYGONS + ["interval", "CP3", "cube"]:
        assert name in names
    assert len(load_polytope("CP2").facets) == 3
    assert len(load_polytope("Bl1CP2").facets) == 4
    assert load_polytope("interval").dim == 1


@pytest.mark.parametrize("name", ["interval", "CP2", "CP1xCP1", "Bl1CP2", "Bl2CP2", "Bl3CP2", "CP3", "cube"])
def test_catalog_valid(name):
    P = load_polytope(name)
    assert is_delzant(P)[0]
    assert is_reflexive(P)


def test_not_delzant():
    P = parse_polytope({"dim": 2, "facets": [
        {"normal": [1, 0], "support": 1}, {"normal": [0, 1], "support": 1}, {"normal": [-1, -2], "support": 1}]})
    ok, report = is_delzant(P)
    assert not ok
    assert any(abs(abs(r["determinant"]) - 2) < 1e-9 for r in report)


def test_wide_interval_not_reflexive():
    P = parse_polytope({"dim": 1, "facets": [{"normal": [1], "support": 2}, {"normal": [-1], "support": 2}]})
    assert is_delzant(P)[0]
    assert not is_reflexive(P)


def test_translate_changes_supports():
    P = translate(load_polytope("CP2"), [0.5, 0.0])
    assert not is_reflexive(P)
    assert is_delzant(P)[0]


def test_quadrature_cp2_totals():
    Q = quadrature(load_polytope("CP2"), 4)
    assert Q.integrate(lambda z: np.ones(len(z))) == pytest.approx(4.5, abs=1e-13)
    assert Q.integrate_boundary(lambda z: np.ones(len(z))) == pytest.approx(9.0, abs=1e-13)
    for j in range(3):
        assert Q.boundary_weights[j].sum() == pytest.approx(3.0, abs=1e-13)


def test_quadrature_interval_point_masses():
    Q = quadrature(load_polytope("interval"), 3)
    assert Q.integrate_boundary(lambda z: np.ones(len(z))) == pytest.approx(2.0, abs=1e-14)
    assert Q.integrate(lambda z: z[:, 0] ** 2) == pytest.approx(2 / 3, abs=1e-14)


def test_nodes_inside():
    P = load_polytope("Bl2CP2")
    Q = quadrature(P, 8)
    assert np.all(P.affine_values(Q.points) > 0)
    for j, pts in enumerate(Q.boundary_points):
        assert np.allclose(P.facets[j](pts), 0, atol=1e-12)


def test_order_range():
    with pytest.raises(ValueError):
        quadrature(load_polytope("CP2"), 0)
    with pytest.raises(ValueError):
        quadrature(load_polytope("CP2"), 1000)


@pytest.mark.parametrize("name", ["interval", "CP2", "CP1xCP1", "Bl1CP2", "Bl2CP2", "Bl3CP2", "CP3", "cube"])
def test_boundary_volume_identity(name):
    P = load_polytope(name)
    Q = quadrature(P, 2)
    vol = Q.weights.sum()
    bdy = Q.all_boundary_weights.sum()
    assert abs(bdy - P.dim * vol) < 1e-12


def _exact_monomial(simplex, alpha):
    """Exact integral of z^alpha over a simplex via the Grundmann-Moeller-free
    formula: expand in barycentric coordinates."""
    from math import factorial
    d = simplex.shape[1]
    V = simplex
    vol = abs(np.linalg.det(V[1:] - V[0])) / factorial(d)
    # z_k = sum_m lambda_m V[m,k]; integrate monomials of lambda exactly
    total = 0.0
    factors = [k for k, e in enumerate(alpha) for _ in range(e)]
    for choice in itertools.product(range(d + 1), repeat=len(factors)):
        coef = np.prod([V[m, k] for m, k in zip(choice, factors)]) if factors else 1.0
        counts = np.bincount(np.array(choice, dtype=int), minlength=d + 1) if factors else np.zeros(d + 1, int)
        num = np.prod([factorial(c) for c in counts])
        total += coef * num * factorial(d) / factorial(d + sum(counts))
    return vol * total


@pytest.mark.parametrize("name,order", [("Bl1CP2", 5), ("Bl3CP2", 6), ("CP3", 4)])
def test_quadrature_exactness(name, order):
    P = load_polytope(name)
    Q = quadrature(P, order)
    rng = np.random.default_rng(7)
    simplices = fan_triangulation(P)
    for _ in range(4):
        alpha = rng.multinomial(rng.integers(0, order + 1), [1 / P.dim] * P.dim)
        exact = sum(_exact_monomial(S, alpha) for S in simplices)
        got = Q.integrate(lambda z: np.prod(z ** alpha, axis=1))
        assert abs(got - exact) < 1e-12 * max(1, abs(exact))


def test_interior_grid_interval():
    Z = interior_grid(load_polytope("interval"), 5, 0.1)
    assert np.allclose(Z[:, 0], np.linspace(-0.9, 0.9, 5))


def test_interior_grid_margin():
    P = load_polytope("CP2")
    Z = interior_grid(P, 20, 0.05)
    assert len(Z) > 50
    assert P.affine_values(Z).min() >= 0.05 - 1e-12


def test_interior_grid_empty():
    with pytest.raises(ValueError):
        interior_grid(load_polytope("interval"), 5, 10)


unimodular = st.sampled_from([
    np.array([[1, 0], [0, 1]]), np.array([[0, 1], [1, 0]]), np.array([[1, 1], [0, 1]]),
    np.array([[1, 0], [-2, 1]]), np.array([[2, 1], [1, 1]]), np.array([[0, -1], [1, 0]]),
    np.array([[-1, 0], [0, 1]]),
])


@settings(max_examples=20, deadline=None)
@given(A=unimodular, name=st.sampled_from(POLYGONS))
def test_transform_preserves_totals(A, name):
    P = load_polytope(name)
    Pa = transform(P, A)
    assert is_delzant(Pa)[0] and is_reflexive(Pa)
    Q, Qa = quadrature(P, 2), quadrature(Pa, 2)
    assert abs(Q.weights.sum() - Qa.weights.sum()) < 1e-12
    assert abs(Q.all_boundary_weights.sum() - Qa.all_boundary_weights.sum()) < 1e-12
    g = lambda z: np.exp(0.3 * z[:, 0] - 0.1 * z[:, 1])
    ga = lambda zp: g(zp @ np.linalg.inv(A).T)
    assert abs(quadrature(P, 20).integrate(g) - quadrature(Pa, 20).integrate(ga)) < 1e-10


def test_roundtrip_dict():
    P = load_polytope("Bl2CP2")
    assert parse_polytope(P.to_dict()) == P
