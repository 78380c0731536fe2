import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anisopd.conductivity import (
    AnisotropySqrt,
    AnisotropyXiZeta,
    ConductivityField,
    assemble_tensor,
    constant_conductivity,
    load_conductivity_csv,
    phantom,
    sqrt_of_anisotropy,
    unit_spd,
)
from anisopd.grid import EllipticityError, Grid, check_ellipticity, save_field_csv

xis = st.floats(0.05, 20.0)
zetas = st.floats(-5.0, 5.0)


def test_identity_example():
    c = constant_conductivity(Grid(4))
    g = assemble_tensor(c)
    np.testing.assert_array_equal(g[0, 0], 1.0)
    np.testing.assert_array_equal(g[0, 1], 0.0)
    np.testing.assert_array_equal(g[1, 1], 1.0)


def test_diagonal_example():
    c = constant_conductivity(Grid(4), detsqrt=2.0, xi=2.0, zeta=0.0)
    g = assemble_tensor(c)
    np.testing.assert_allclose(g[0, 0], 4.0)
    np.testing.assert_allclose(g[1, 1], 1.0)
    np.testing.assert_allclose(g[0, 1], 0.0)


def test_sqrt_examples():
    a = sqrt_of_anisotropy(AnisotropyXiZeta(np.array(1.0), np.array(0.0)))
    assert a.lam == pytest.approx(1.0) and a.mu == pytest.approx(0.0)
    a = sqrt_of_anisotropy(AnisotropyXiZeta(np.array(2.0), np.array(0.0)))
    assert a.lam == pytest.approx(np.sqrt(2.0), abs=1e-15)
    M = unit_spd(a.lam, a.mu)
    np.testing.assert_allclose(M @ M, np.diag([2.0, 0.5]), atol=1e-14)


def test_rejects_nonpositive_xi():
    with pytest.raises(ValueError):
        AnisotropyXiZeta(np.array([1.0, 0.0]), np.zeros(2))
    with pytest.raises(ValueError):
        AnisotropySqrt(np.array([-1.0]), np.zeros(1))


def test_rejects_nonpositive_detsqrt():
    g = Grid(4)
    a = AnisotropyXiZeta(np.ones(g.shape), np.zeros(g.shape))
    with pytest.raises(ValueError):
        ConductivityField(g, np.zeros(g.shape), a)


def test_ellipticity_bound_is_checked():
    c = constant_conductivity(Grid(4), detsqrt=1.0, xi=20.0, zeta=0.0, kappa=8.0)
    with pytest.raises(EllipticityError):
        assemble_tensor(c)


@settings(max_examples=200, deadline=None)
@given(xi=xis, zeta=zetas)
def test_unit_determinant(xi, zeta):
    M = unit_spd(xi, zeta)
    assert abs(np.linalg.det(M) - 1.0) < 1e-14 * max(1.0, np.abs(M).max() ** 2)
    # exact by construction: xi * (1 + zeta^2) / xi - zeta^2
    assert abs(M[0, 0] * M[1, 1] - M[0, 1] ** 2 - 1.0) < 1e-14 * (1 + zeta**2)


@settings(max_examples=200, deadline=None)
@given(xi=xis, zeta=zetas)
def test_sqrt_round_trip(xi, zeta):
    a = sqrt_of_anisotropy(AnisotropyXiZeta(np.array(xi), np.array(zeta)))
    assert a.lam > 0
    S = unit_spd(a.lam, a.mu)
    M = unit_spd(xi, zeta)
    assert np.abs(S @ S - M).max() < 1e-12 * max(1.0, np.abs(M).max())
    assert np.all(np.linalg.eigvalsh(S) > 0)


@settings(max_examples=200, deadline=None)
@given(xi=xis, zeta=zetas)
def test_eigenvalues_reciprocal(xi, zeta):
    lo, hi = np.linalg.eigvalsh(unit_spd(xi, zeta))
    assert lo > 0 and hi >= 1.0 - 1e-12
    assert abs(lo * hi - 1.0) < 1e-10


def test_round_trip_on_grid_fields(rng):
    xi = np.exp(rng.uniform(-1, 1, (9, 9)))
    zeta = rng.uniform(-1, 1, (9, 9))
    a = AnisotropyXiZeta(xi, zeta)
    S = sqrt_of_anisotropy(a).matrix()
    sq = np.einsum("abxy,bcxy->acxy", S, S)
    assert np.abs(sq - a.matrix()).max() < 1e-12
    inv = np.einsum("abxy,bcxy->acxy", a.matrix(), a.inverse_matrix())
    np.testing.assert_allclose(inv[0, 0], 1.0, atol=1e-13)
    np.testing.assert_allclose(inv[0, 1], 0.0, atol=1e-13)


@pytest.mark.parametrize("name", ["smooth", "rough"])
def test_phantom_ranges_and_corners(name):
    g = Grid(128)
    c = phantom(name, g)
    assert 0.5 <= c.xi.min() and c.xi.max() <= 2.0
    assert -0.5 <= c.zeta.min() and c.zeta.max() <= 0.5
    assert 0.5 <= c.detsqrt.min() and c.detsqrt.max() <= 2.0
    for i, j in [(0, 0), (0, -1), (-1, 0), (-1, -1)]:
        assert c.detsqrt[i, j] == 1.0 and c.xi[i, j] == 1.0 and c.zeta[i, j] == 0.0
    gamma = c.tensor()
    lo, hi = check_ellipticity(gamma, 8.0)
    assert lo >= 1 / 8 and hi <= 8
    det = gamma[0, 0] * gamma[1, 1] - gamma[0, 1] ** 2
    np.testing.assert_allclose(det, c.detsqrt**2, rtol=1e-13)


def test_rough_phantom_two_values():
    c = phantom("rough", Grid(128))
    assert set(np.unique(c.detsqrt)) == {1.0, 2.0}


def test_smooth_phantom_is_smooth():
    # second differences shrink like h^2 for a smooth field, not for a jump
    ratio = {}
    for name in ("smooth", "rough"):
        j = [np.abs(np.diff(phantom(name, Grid(n)).detsqrt, 2, axis=0)).max() for n in (64, 128)]
        ratio[name] = j[0] / j[1]
    assert ratio["smooth"] > 3.0
    assert ratio["rough"] < 1.5


def test_unknown_phantom():
    with pytest.raises(ValueError):
        phantom("nope", Grid(8))


def test_load_conductivity_csv(tmp_path):
    g = Grid(16)
    c = phantom("smooth", g)
    for name, f in (("d", c.detsqrt), ("x", c.xi), ("z", c.zeta)):
        save_field_csv(tmp_path / f"{name}.csv", f)
    c2 = load_conductivity_csv(g, tmp_path / "d.csv", tmp_path / "x.csv", tmp_path / "z.csv")
    assert np.array_equal(c2.tensor(), c.tensor())
    with pytest.raises(ValueError):
        load_conductivity_csv(Grid(8), tmp_path / "d.csv", tmp_path / "x.csv", tmp_path / "z.csv")
