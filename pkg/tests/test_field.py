import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _fd import check_derivatives
from toricsolitons.field import (PotentialField, analytic_field, check_boundary_conditions, dump_field,
                                 field_from_potential, grid_field, guillemin_field, kahler_defect,
                                 polynomial_field, polynomial_potential, read_field_csv, sum_field,
                                 transformed_field, write_field_csv)
from toricsolitons.polytope import interior_grid, load_polytope, parse_polytope

CATALOG = ["interval", "CP2", "CP1xCP1", "Bl1CP2", "Bl2CP2", "Bl3CP2", "CP3", "cube"]


def guillemin_H(name):
    return field_from_potential(guillemin_field(load_polytope(name)))


def test_guillemin_interval_closed_form():
    phi = guillemin_field(load_polytope("interval"))
    z = np.linspace(-0.9, 0.9, 7)[:, None]
    d = phi(z)
    assert np.allclose(d[2][:, 0, 0], 1 / (1 - z[:, 0] ** 2), atol=1e-13)
    H = field_from_potential(phi)
    Hz, dH, d2H = H(np.array([[0.0]]))
    assert Hz[0, 0, 0] == pytest.approx(1.0, abs=1e-14)
    assert dH[0, 0, 0, 0] == pytest.approx(0.0, abs=1e-14)
    assert d2H[0, 0, 0, 0, 0] == pytest.approx(-2.0, abs=1e-13)
    assert np.allclose(H.H(z)[:, 0, 0], 1 - z[:, 0] ** 2, atol=1e-14)


def test_guillemin_outside_raises():
    phi = guillemin_field(load_polytope("CP2"))
    with pytest.raises(ValueError):
        phi(np.array([[3.0, 0.0]]))
    with pytest.raises(ValueError):
        phi(np.array([[-1.0, 0.0]]))


def test_guillemin_hessian_pd_cp2():
    G = guillemin_field(load_polytope("CP2"))(np.zeros((1, 2)))[2][0]
    assert G.dtype == np.longdouble
    assert np.all(np.linalg.eigvalsh(G.astype(float)) > 0)


@pytest.mark.parametrize("name", ["CP2", "Bl2CP2", "CP3"])
def test_guillemin_convex_on_segments(name):
    P = load_polytope(name)
    phi = guillemin_field(P)
    Z = interior_grid(P, 6, 0.05)
    rng = np.random.default_rng(1)
    for _ in range(30):
        x, y = Z[rng.integers(len(Z), size=2)]
        mid = phi(((x + y) / 2)[None])[0][0]
        assert mid <= 0.5 * (phi(x[None])[0][0] + phi(y[None])[0][0]) + 1e-14


def test_flat_potential():
    phi = polynomial_potential({(2, 0): 0.5, (0, 2): 0.5}, 2)
    H = field_from_potential(phi)
    Hz, dH, d2H = H(np.random.default_rng(0).uniform(-1, 1, (5, 2)))
    assert np.allclose(Hz, np.eye(2), atol=1e-15)
    assert np.allclose(dH, 0) and np.allclose(d2H, 0)


def test_quartic_perturbation_derivatives():
    rng = np.random.default_rng(3)
    coeffs = {(2, 0): 0.5, (0, 2): 0.5}
    for alpha in [(4, 0), (3, 1), (2, 2), (1, 3), (0, 4), (3, 0), (1, 2)]:
        coeffs[alpha] = 0.02 * rng.standard_normal()
    H = field_from_potential(polynomial_potential(coeffs, 2))
    check_derivatives(H, rng.uniform(-0.5, 0.5, (6, 2)))


@pytest.mark.parametrize("name", CATALOG)
def test_guillemin_derivatives(name):
    P = load_polytope(name)
    H = guillemin_H(name)
    Z = interior_grid(P, 5, 0.15)
    check_derivatives(H, Z[:: max(1, len(Z) // 8)], h=1e-3, rtol=1e-6)


@pytest.mark.parametrize("name", CATALOG)
def test_guillemin_positive_on_grid(name):
    P = load_polytope(name)
    Z = interior_grid(P, 12, 0.05)
    assert np.all(np.linalg.eigvalsh(guillemin_H(name).H(Z))[..., 0] > 0)


@pytest.mark.parametrize("name", CATALOG)
def test_index_symmetries_exact(name):
    P = load_polytope(name)
    Hz, dH, d2H = guillemin_H(name)(interior_grid(P, 6, 0.1))
    assert np.array_equal(Hz, np.swapaxes(Hz, -1, -2))
    assert np.array_equal(dH, dH.swapaxes(-3, -2))
    assert np.array_equal(d2H, d2H.swapaxes(-4, -3))
    assert np.array_equal(d2H, d2H.swapaxes(-1, -2))


def test_analytic_field_fd_fallback():
    def H(z):
        x, y = z[..., 0], z[..., 1]
        out = np.empty(z.shape[:-1] + (2, 2))
        out[..., 0, 0] = 2 + np.sin(x) * y
        out[..., 1, 1] = 2 + np.cos(y) * x**2
        out[..., 0, 1] = out[..., 1, 0] = 0.3 * np.exp(x * y)
        return out

    field = analytic_field(2, H)
    z = np.array([[0.1, 0.2], [-0.3, 0.4]])
    _, dH, d2H = field(z)
    x, y = z[:, 0], z[:, 1]
    assert np.allclose(dH[:, 0, 0, 0], np.cos(x) * y, atol=1e-8)
    assert np.allclose(dH[:, 0, 1, 1], 0.3 * x * np.exp(x * y), atol=1e-8)
    assert np.allclose(d2H[:, 1, 1, 0, 0], 2 * np.cos(y), atol=1e-6)
    assert np.allclose(d2H[:, 0, 0, 0, 1], np.cos(x), atol=1e-6)


def test_analytic_field_dimension_check():
    with pytest.raises(ValueError):
        analytic_field(2, lambda z: np.ones(z.shape[:-1] + (3, 3)))(np.zeros((1, 2)))


def random_polynomial_field(n, rng, scale=0.2):
    C0 = np.eye(n) * 2 + 0.1 * rng.standard_normal((n, n))
    return polynomial_field((C0, scale * rng.standard_normal((n, n, n)), scale * rng.standard_normal((n,) * 4)))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 3))
def test_polynomial_field_derivatives(seed, n):
    rng = np.random.default_rng(seed)
    check_derivatives(random_polynomial_field(n, rng), rng.uniform(-0.5, 0.5, (3, n)), rtol=1e-8)


def test_sum_field():
    P = load_polytope("CP2")
    H = guillemin_H("CP2")
    D = random_polynomial_field(2, np.random.default_rng(2))
    Z = interior_grid(P, 6, 0.1)
    for a, b in zip(sum_field(H, D, 0.0)(Z), H(Z)):
        assert np.array_equal(a, b)
    t = 0.37
    for a, b, d in zip(sum_field(H, D, 2 * t)(Z), sum_field(H, D, t)(Z), D(Z)):
        assert np.allclose(a - b, t * d, atol=1e-14)
    with pytest.raises(ValueError):
        sum_field(H, guillemin_H("interval"), 1.0)


def test_grid_field_interval():
    z = np.linspace(-1, 1, 101)[:, None]
    field = grid_field(z, (1 - z**2)[:, :, None])
    Hz, dH, d2H = field(np.array([[0.3]]))
    assert Hz[0, 0, 0] == pytest.approx(0.91, abs=1e-6)
    assert dH[0, 0, 0, 0] == pytest.approx(-0.6, abs=1e-6)
    assert d2H[0, 0, 0, 0, 0] == pytest.approx(-2.0, abs=1e-5)
    with pytest.raises(ValueError):
        field(np.array([[1.5]]))


def test_grid_field_2d_and_mask():
    P = load_polytope("CP1xCP1")
    ax = np.linspace(-1, 1, 41)
    Z = np.stack(np.meshgrid(ax, ax, indexing="ij"), -1).reshape(-1, 2)
    H = np.zeros((len(Z), 2, 2))
    H[:, 0, 0] = 1 - Z[:, 0] ** 2
    H[:, 1, 1] = 1 - Z[:, 1] ** 2
    field = grid_field(Z, H, polytope=P)
    ref = guillemin_H("CP1xCP1")
    q = np.array([[0.21, -0.33], [0.5, 0.1]])
    for a, b in zip(field(q), ref(q)):
        assert np.allclose(a, b, atol=1e-8)
    with pytest.raises(ValueError):
        field(np.array([[1.0, 0.0]]))


def test_grid_field_incomplete_grid():
    with pytest.raises(ValueError, match="tensor grid"):
        grid_field(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.tile(np.eye(2), (3, 1, 1)))


def test_csv_roundtrip(tmp_path):
    P = load_polytope("Bl1CP2")
    Z = interior_grid(P, 7, 0.1)
    H = guillemin_H("Bl1CP2")
    text = dump_field(H, Z, tmp_path / "f.csv")
    assert text.splitlines()[0] == "z1,z2,H11,H12,H22"
    Z2, H2 = read_field_csv(tmp_path / "f.csv")
    assert np.array_equal(Z2, Z)
    assert np.array_equal(H2, H.H(Z))
    Z3, _ = read_field_csv(write_field_csv(Z, H.H(Z)))
    assert np.array_equal(Z3, Z)


def test_csv_feeds_grid_field(tmp_path):
    z = np.linspace(-1, 1, 81)[:, None]
    write_field_csv(z, (1 - z**2)[:, :, None], tmp_path / "h.csv")
    field = grid_field(*read_field_csv(tmp_path / "h.csv"))
    assert field.H(np.array([[0.3]]))[0, 0, 0] == pytest.approx(0.91, abs=1e-9)


@pytest.mark.parametrize("name", CATALOG)
def test_guillemin_boundary_passes(name):
    rep = check_boundary_conditions(guillemin_H(name), load_polytope(name))
    assert rep.passed, rep.to_dict()


def test_boundary_interval_values():
    rep = check_boundary_conditions(guillemin_H("interval"), load_polytope("interval"), tolerance=1e-9)
    assert rep.passed
    assert max(rep.kernel_defect + rep.derivative_defect) < 1e-9


def test_identity_fails_boundary():
    P = load_polytope("interval")
    ident = polynomial_field((np.eye(1), np.zeros((1, 1, 1)), np.zeros((1, 1, 1, 1))))
    rep = check_boundary_conditions(ident, P)
    assert not rep.passed
    assert min(rep.kernel_defect) == pytest.approx(1.0, abs=1e-12)


def test_boundary_wrong_scale_fails():
    # H = 2(1 - z^2) has the right kernel but dH(u,u) = 4u
    P = load_polytope("interval")
    H = polynomial_field((2 * np.eye(1), np.zeros((1, 1, 1)), -2 * np.ones((1, 1, 1, 1))))
    rep = check_boundary_conditions(H, P)
    assert max(rep.kernel_defect) < 1e-9
    assert min(rep.derivative_defect) == pytest.approx(2.0, abs=1e-9)


@pytest.mark.parametrize("name", ["CP2", "Bl1CP2", "Bl3CP2", "CP3"])
def test_potential_fields_are_kahler(name):
    P = load_polytope(name)
    K = kahler_defect(guillemin_H(name), interior_grid(P, 6, 0.05))
    assert np.abs(K).max() < 1e-10


def test_kahler_defect_one_dim():
    K = kahler_defect(random_polynomial_field(1, np.random.default_rng(0)), np.array([[0.1], [0.2]]))
    assert np.array_equal(K, np.zeros_like(K))


def test_kahler_defect_antisymmetric():
    F = random_polynomial_field(3, np.random.default_rng(5))
    K = kahler_defect(F, np.array([[0.1, -0.2, 0.05]]))
    assert np.allclose(K, -K.swapaxes(-1, -3), atol=1e-14)
    assert np.abs(K).max() > 1e-3


def test_transformed_field_matches_transformed_potential():
    A = np.array([[1, 1], [0, 1]])
    P = load_polytope("Bl1CP2")
    from toricsolitons.polytope import transform
    Pa = transform(P, A)
    direct = guillemin_H("Bl1CP2")
    moved = transformed_field(direct, A)
    ref = field_from_potential(guillemin_field(Pa))
    Z = interior_grid(Pa, 6, 0.1)
    for a, b in zip(moved(Z), ref(Z)):
        assert np.allclose(a, b, atol=1e-11)


def test_potential_sum():
    phi = guillemin_field(load_polytope("CP2")) + polynomial_potential({(2, 0): 0.1}, 2)
    assert isinstance(phi, PotentialField)
    G = phi(np.zeros((1, 2)))[2][0]
    G0 = guillemin_field(load_polytope("CP2"))(np.zeros((1, 2)))[2][0]
    assert G[0, 0] - G0[0, 0] == pytest.approx(0.2)
