import numpy as np
import pytest

from codazzi_lab import codazzi as cz
from codazzi_lab import fundforms as ff
from codazzi_lab import spectral as sp
from codazzi_lab.errors import HypothesisError
from codazzi_lab.frames import compute_geometry
from codazzi_lab.geometry import catalog


@pytest.mark.parametrize("method", ["frame", "divergence"])
def test_laplacian_flat_torus_eigenfunction(geometry, method):
    geo = geometry("flat_torus_R4", 32, a=1.0, b=2.0)
    u, v = geo.points
    f = np.sin(u) + np.cos(2 * v)
    # metric diag(a^2, b^2): Delta f = -sin u - (4/4) cos 2v
    np.testing.assert_allclose(sp.scalar_laplacian(geo, f, method), -np.sin(u) - np.cos(2 * v), atol=1e-10)


@pytest.mark.parametrize("method", ["frame", "divergence"])
def test_laplacian_sphere_height(geometry, method):
    geo = geometry("round_sphere", 64)
    x3 = geo.x[..., 2]
    lap = sp.scalar_laplacian(geo, x3, method)
    ok = np.isfinite(lap)
    assert ok.mean() > 0.8
    np.testing.assert_allclose(lap[ok], -2 * x3[ok], atol=1e-6)


def test_laplacian_integrates_to_zero_on_closed_sphere():
    geo = compute_geometry(catalog("round_sphere", band=0.0, resolution=(64, 32)))
    f = np.sin(geo.points[1]) * np.sin(geo.points[0]) ** 3
    lap = sp.scalar_laplacian(geo, f, "divergence")
    lap = np.nan_to_num(lap)  # the edge rows carry measure O(h^3) and are dropped
    assert abs(sp.stokes_theorem_integral(geo, lap)) < 1e-3
    assert sp.stokes_theorem_integral(geo, np.ones(geo.shape)) == pytest.approx(4 * np.pi, rel=1e-3)


def test_unknown_laplacian_method(geometry):
    with pytest.raises(ValueError):
        sp.scalar_laplacian(geometry("flat_torus_R4", 16), np.zeros((16, 16)), "bogus")


def test_mean_curvature_branches(geometry):
    geo = geometry("round_sphere", 32, r=2.0)
    mc = sp.mean_curvature_vector(cz.second_fundamental_tensor(geo), geo)
    assert mc.branch == "adapted"
    np.testing.assert_allclose(mc.magnitude, 0.5, atol=1e-12)
    cl = geometry("clifford_torus", 16, a=0.6, b=0.8)
    mc = sp.mean_curvature_vector(cz.second_fundamental_tensor(cl), cl)
    np.testing.assert_allclose(mc.magnitude, (0.8 / 0.6 - 0.6 / 0.8) / 2, atol=1e-12)
    assert max(sp.parallelism_residual(mc, cl)) < 1e-12
    minimal = geometry("clifford_torus", 16)
    mc = sp.mean_curvature_vector(cz.second_fundamental_tensor(minimal), minimal)
    assert mc.branch == "zero"
    assert max(sp.parallelism_residual(mc, minimal)) < 1e-12


def test_mixed_mean_curvature_regime(geometry):
    geo = geometry("torus_of_revolution", 32)
    with pytest.raises(HypothesisError, match="mixed Phi regime"):
        sp.mean_curvature_vector(cz.second_fundamental_tensor(geo), geo)


def test_mean_curvature_needs_extrinsic_tensor(geometry):
    geo = geometry("clifford_torus", 16)
    with pytest.raises(ValueError):
        sp.mean_curvature_vector(cz.metric_tensor(geo), geo)


def test_ellipsoid_is_not_parallel(geometry):
    geo = geometry("ellipsoid", 64)
    for mode in ("dual", "fd"):
        mc = sp.mean_curvature_vector(cz.second_fundamental_tensor(geo), geo, mode=mode)
        assert sp.parallelism_residual(mc, geo)[0] > 1e-2


def test_eigen_spectrum_sorted_and_smooth(geometry):
    geo = geometry("torus_of_revolution", 32)  # no umbilics, so eigenvectors are smooth
    A = ff.second_fundamental_form(geo).h[..., 0, :, :]
    spec = sp.eigen_spectrum(A, 2)
    assert spec.reconstruction_residual < 1e-12
    assert (spec.values[..., 0] >= spec.values[..., 1]).all()
    # neighbouring eigenvectors never flip sign along either axis
    for ax in (0, 1):
        dots = (spec.vectors * np.roll(spec.vectors, 1, axis=ax)).sum(axis=-2)
        assert (np.take(dots, range(1, 32), axis=ax) > 0).all()


def test_degenerate_points_flagged(geometry):
    geo = geometry("round_sphere", 16)
    spec = sp.eigen_spectrum(ff.second_fundamental_form(geo).h[..., 0, :, :], 2)
    assert spec.degenerate.all()


def test_curvature_gap_term_matches_invariant_form(geometry):
    geo = geometry("torus_of_revolution", 32)
    curv = ff.curvature_data(geo)
    A = cz.random_symmetric_field(geo, seed=2).comps[..., 0, :, :]
    spec = sp.eigen_spectrum(A, 2)
    np.testing.assert_allclose(sp.curvature_gap_term(spec, curv.riemann),
                               sp.curvature_gap_invariant(A, curv.riemann), atol=1e-12)


@pytest.mark.parametrize("name, params", [("round_sphere", {}), ("clifford_torus", {"a": 0.6, "b": 0.8})])
def test_simons_parallel_identity(geometry, name, params):
    geo = geometry(name, 64, **params)
    curv = ff.curvature_data(geo)
    assert sp.simons_residual_parallel(cz.second_fundamental_tensor(geo), geo, curv) < 1e-8


def test_simons_parallel_gate(geometry):
    geo = geometry("ellipsoid", 32)
    with pytest.raises(HypothesisError, match="parallel-mean-curvature"):
        sp.simons_residual_parallel(cz.second_fundamental_tensor(geo), geo, ff.curvature_data(geo))


def test_simons_flat_identity_ellipsoid(geometry):
    geo = geometry("ellipsoid", 96)
    terms = sp.simons_terms_flat(cz.second_fundamental_tensor(geo), geo, ff.curvature_data(geo))
    # every term participates
    for t in (terms.lhs, terms.gradient, terms.trace_hessian, terms.curvature):
        assert np.nanmax(np.abs(t)) > 1e-2
    assert terms.residual < 1e-3


def test_simons_flat_identity_for_intrinsic_field():
    geo = compute_geometry(catalog("round_sphere", resolution=64), scalars={"f": cz.random_trig_potential(2, 3)})
    phi = cz.hessian_codazzi(geo, "f", 1.0)
    terms = sp.simons_terms_flat(phi, geo, ff.curvature_data(geo))
    assert terms.residual < 1e-4 * np.nanmax(np.abs(terms.lhs))


def test_simons_flat_gate(geometry):
    geo = geometry("graph_immersion", 32)
    with pytest.raises(HypothesisError, match="flat-normal-bundle"):
        sp.simons_residual_flat(cz.second_fundamental_tensor(geo), geo, ff.curvature_data(geo))


def test_rigidity_integrals_vanish_on_clifford_torus(geometry):
    geo = geometry("clifford_torus", 32, a=0.6, b=0.8)
    ti = sp.rigidity_integrals(cz.second_fundamental_tensor(geo), geo, ff.curvature_data(geo))
    assert abs(ti.gradient_integral) < 1e-12 and abs(ti.curvature_integral) < 1e-12


def test_rigidity_integrals_detect_nonconstant_spectrum(geometry):
    geo = geometry("torus_of_revolution", 32)
    phi = cz.random_symmetric_field(geo, seed=1)
    ti = sp.rigidity_integrals(phi, geo, ff.curvature_data(geo))
    assert ti.gradient_integral > 1e-2
    assert ti.curvature_min < 0 < ti.curvature_max
