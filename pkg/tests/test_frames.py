import numpy as np
import pytest

from codazzi_lab.frames import (
    compute_geometry,
    orthonormality_residual,
    structure_equation_residual,
)
from codazzi_lab.geometry import catalog, inline_immersion


def _equal_up_to_sign(a, b):
    return np.allclose(a, b, atol=1e-12) or np.allclose(a, -b, atol=1e-12)


def test_plane_frame_is_standard():
    imm = inline_immersion("plane", ["u", "v"], ["u", "v", "0"], 0.0, 3, (0, 0), (1, 1), (False, False), (8, 8))
    geo = compute_geometry(imm)
    e = geo.frame.vectors[3, 3]
    np.testing.assert_allclose(e[:2], np.eye(3)[:2], atol=1e-14)
    assert _equal_up_to_sign(e[2], np.array([0.0, 0.0, 1.0]))
    assert np.abs(geo.gamma).max() < 1e-14


def test_sphere_equator_frame():
    # odd polar resolution puts a midpoint on the equator; phi = 0 is the first azimuth sample
    geo = compute_geometry(catalog("round_sphere", resolution=(9, 16)))
    assert geo.points[0][4, 0] == pytest.approx(np.pi / 2)
    e = geo.frame.vectors[4, 0]
    assert _equal_up_to_sign(e[0], np.array([0.0, 0.0, -1.0]))
    assert _equal_up_to_sign(e[1], np.array([0.0, 1.0, 0.0]))
    assert _equal_up_to_sign(e[2], np.array([1.0, 0.0, 0.0]))


def test_clifford_torus_frame_at_origin():
    geo = compute_geometry(catalog("clifford_torus", resolution=16))
    e = geo.frame.vectors[0, 0]
    assert _equal_up_to_sign(e[0], np.array([0.0, 1.0, 0.0, 0.0]))
    assert _equal_up_to_sign(e[1], np.array([0.0, 0.0, 0.0, 1.0]))
    assert _equal_up_to_sign(e[2], 2**-0.5 * np.array([1.0, 0.0, -1.0, 0.0]))


@pytest.mark.parametrize("name", ["clifford_torus", "ellipsoid", "sphere_product", "graph_immersion"])
def test_frames_orthonormal_and_structure_equations(name, geometry):
    geo = geometry(name, 24) if name != "sphere_product" else compute_geometry(catalog(name, resolution=(8, 24, 8)))
    assert orthonormality_residual(geo) < 1e-10
    assert geo.connection.antisymmetry_residual() < 1e-10
    exact = structure_equation_residual(geo, exact=True)
    assert max(exact.values()) < 1e-10


def test_normal_vectors_tangent_to_the_model():
    geo = compute_geometry(catalog("sphere_product", resolution=(8, 16, 8)))
    x = geo.x
    # in the unit sphere every frame vector is orthogonal to the position
    assert np.abs(np.einsum("...AN,...N->...A", geo.frame.vectors, x)).max() < 1e-12


def test_hyperbolic_frames_orthonormal_in_minkowski_metric():
    rho = 0.8
    comps = [f"cosh({rho})", f"sinh({rho})*sin(t)*cos(p)", f"sinh({rho})*sin(t)*sin(p)", f"sinh({rho})*cos(t)"]
    imm = inline_immersion("geodesic_sphere", ["t", "p"], comps, -1.0, 3, (0.3, 0.0), (np.pi - 0.3, 2 * np.pi),
                           (False, True), (16, 16))
    geo = compute_geometry(imm)
    assert orthonormality_residual(geo) < 1e-10
    assert max(structure_equation_residual(geo, exact=True).values()) < 1e-10


def test_grid_structure_equations_converge():
    res = [structure_equation_residual(compute_geometry(catalog("ellipsoid", resolution=n, band=0.4)))
           for n in (16, 32)]
    assert res[1]["second"] < res[0]["second"] / 8
