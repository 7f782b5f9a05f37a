import numpy as np
import pytest

from codazzi_lab import codazzi as cz
from codazzi_lab import fundforms as ff
from codazzi_lab.frames import compute_geometry
from codazzi_lab.geometry import catalog


@pytest.fixture(scope="module")
def sphere():
    f = cz.random_trig_potential(1, 3)
    return compute_geometry(catalog("round_sphere", resolution=48), scalars={"f": f, "h": "x3"})


def test_covariant_derivative_is_linear(geometry):
    geo = geometry("ellipsoid", 32)
    h = cz.second_fundamental_tensor(geo)
    r = cz.random_symmetric_field(geo, seed=3, extrinsic=True)
    combo = h.scaled(2.0) + r.scaled(-0.5)
    lhs = cz.covariant_derivative(combo, geo).first
    rhs = 2.0 * cz.covariant_derivative(h, geo).first - 0.5 * cz.covariant_derivative(r, geo).first
    np.testing.assert_allclose(lhs, rhs, atol=1e-10, equal_nan=True)


def test_metric_is_parallel(geometry):
    geo = geometry("torus_of_revolution", 32)
    D = cz.covariant_derivative(cz.metric_tensor(geo, 3.0), geo, "dual")
    assert np.abs(D.first).max() < 1e-12


def test_second_fundamental_form_is_codazzi(geometry):
    geo = geometry("torus_of_revolution", 32)
    assert cz.codazzi_residual(cz.covariant_derivative(cz.second_fundamental_tensor(geo), geo, "dual")) < 1e-12


def test_hessian_field_on_unit_sphere_is_codazzi(sphere):
    phi = cz.hessian_codazzi(sphere, "f", 1.0)
    assert np.abs(phi.comps).max() > 0.1
    assert cz.codazzi_residual(cz.covariant_derivative(phi, sphere, "dual")) < 1e-10
    # the wrong curvature constant breaks the property
    wrong = cz.hessian_codazzi(sphere, "f", 0.0)
    assert cz.codazzi_residual(cz.covariant_derivative(wrong, sphere, "dual")) > 1e-2


def test_height_function_gives_zero_field(sphere):
    phi = cz.hessian_codazzi(sphere, "h", 1.0)
    assert np.abs(phi.comps).max() < 1e-12


def test_flat_hessian_is_codazzi():
    geo = compute_geometry(catalog("flat_torus_R4", resolution=32), scalars={"f": "sin(x1)*x3 + x2*x4"})
    phi = cz.hessian_codazzi(geo, "f", 0.0)
    assert cz.codazzi_residual(cz.covariant_derivative(phi, geo, "dual")) < 1e-12


def test_random_field_is_not_codazzi(geometry):
    geo = geometry("clifford_torus", 32)
    phi = cz.random_symmetric_field(geo, seed=5)
    assert cz.codazzi_residual(cz.covariant_derivative(phi, geo)) > 1e-2


@pytest.mark.parametrize("which", ["h", "random"])
def test_commutation_rule(geometry, which):
    geo = geometry("ellipsoid", 96)
    phi = cz.second_fundamental_tensor(geo) if which == "h" else cz.random_symmetric_field(geo, seed=9)
    curv = ff.curvature_data(geo)
    D2 = cz.second_covariant_derivative(cz.covariant_derivative(phi, geo, "dual"), phi, geo)
    lhs, rhs = cz.commutator_sides(phi, D2, curv.riemann, curv.normal)
    assert np.nanmax(np.abs(lhs)) > 1e-2  # the identity is not trivially satisfied
    assert cz.commutator_residual(phi, D2, curv.riemann, curv.normal) < 1e-3
    # k = l: both sides vanish identically
    assert np.nanmax(np.abs(np.diagonal(lhs, axis1=-2, axis2=-1))) == 0.0


def test_commutation_rule_codimension_two(geometry):
    geo = geometry("graph_immersion", 64)
    phi = cz.second_fundamental_tensor(geo)
    curv = ff.curvature_data(geo)
    D2 = cz.second_covariant_derivative(cz.covariant_derivative(phi, geo, "dual"), phi, geo)
    assert cz.commutator_residual(phi, D2, curv.riemann, curv.normal) < 1e-4


def test_symmetry_enforced():
    comps = np.zeros((4, 1, 2, 2))
    comps[..., 0, 0, 1] = 1.0
    with pytest.raises(ValueError, match="not symmetric"):
        cz.NormalValuedSymTensor(comps)


def test_cannot_mix_intrinsic_and_extrinsic(geometry):
    geo = geometry("clifford_torus", 16)
    with pytest.raises(ValueError):
        cz.second_fundamental_tensor(geo) + cz.metric_tensor(geo)


def test_seeded_constructors_are_deterministic(geometry):
    geo = geometry("clifford_torus", 16)
    a = cz.random_symmetric_field(geo, seed=11).comps
    b = cz.random_symmetric_field(geo, seed=11).comps
    assert np.array_equal(a, b)
    assert cz.random_trig_potential(4, 3) == cz.random_trig_potential(4, 3)
    assert cz.random_trig_potential(4, 3) != cz.random_trig_potential(5, 3)
