"""Second fundamental form, curvature tensors and the Gauss/Codazzi/Ricci checks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import grid
from .codazzi import (
    NormalValuedSymTensor,
    codazzi_residual,
    covariant_derivative,
    second_fundamental_tensor,
)
from .errors import GeometryError, IllConditionedChart
from .frames import Geometry, curvature_two_form, frame_components
from .geometry import SpaceForm

TORSION_TOL = 1e-10


@dataclass
class SecondFundamentalForm:
    h: np.ndarray  # (*G, p, n, n)
    symmetry_residual: float
    tensor: NormalValuedSymTensor


@dataclass
class CurvatureData:
    riemann: np.ndarray  # R[i, j, k, l] = R^i_jkl
    normal: np.ndarray  # perpR[a, b, j, k]

    @property
    def sectional(self) -> np.ndarray:
        """K(e_i, e_j) = R^i_jij on frame 2-planes, shape (*G, n, n)."""
        return np.einsum("...ijij->...ij", self.riemann)

    def sectional_samples(self) -> np.ndarray:
        n = self.riemann.shape[-1]
        iu = np.triu_indices(n, 1)
        return self.sectional[..., iu[0], iu[1]]

    def antisymmetry_residual(self) -> float:
        R = self.riemann
        a = np.abs(R + np.swapaxes(R, -1, -2)).max(initial=0.0)
        b = np.abs(R + np.swapaxes(R, -4, -3)).max(initial=0.0)
        return float(max(a, b))

    def bianchi_residual(self) -> float:
        R = self.riemann
        cyc = R + np.einsum("...ijkl->...iklj", R) + np.einsum("...ijkl->...iljk", R)
        return float(np.abs(cyc).max(initial=0.0))

    def normal_antisymmetry_residual(self) -> float:
        P = self.normal
        if P.size == 0:
            return 0.0
        a = np.abs(P + np.swapaxes(P, -1, -2)).max()
        b = np.abs(P + np.swapaxes(P, -4, -3)).max()
        return float(max(a, b))


def second_fundamental_form(geo: Geometry) -> SecondFundamentalForm:
    """h^a_ij = Gamma^a_{i,j}, with the symmetry defect as a torsion sentinel."""
    n = geo.n
    h = geo.gamma[..., n:, :n, :]
    sym = float(np.abs(h - np.swapaxes(h, -1, -2)).max(initial=0.0))
    if sym > TORSION_TOL:
        raise GeometryError(f"torsion anomaly: second fundamental form asymmetric by {sym:.2e}",
                            stage="fundforms")
    h = 0.5 * (h + np.swapaxes(h, -1, -2))
    tensor = second_fundamental_tensor(geo)
    tensor.comps = h
    return SecondFundamentalForm(h, sym, tensor)


def _space_form_block(sf: SpaceForm, n: int) -> np.ndarray:
    eye = np.eye(n)
    return sf.c * (np.einsum("ik,jl->ijkl", eye, eye) - np.einsum("il,jk->ijkl", eye, eye))


def gauss_riemann(h: np.ndarray, sf: SpaceForm) -> np.ndarray:
    """R^i_jkl = R~^i_jkl + sum_a (h^a_ik h^a_jl - h^a_il h^a_jk)."""
    n = h.shape[-1]
    quad = np.einsum("...aik,...ajl->...ijkl", h, h)
    return _space_form_block(sf, n) + quad - np.swapaxes(quad, -1, -2)


def normal_curvature(h: np.ndarray, sf: SpaceForm) -> np.ndarray:
    """perpR^a_bjk = sum_i (h^a_ij h^b_ik - h^a_ik h^b_ij); the ambient term vanishes."""
    quad = np.einsum("...aij,...bik->...abjk", h, h)
    return quad - np.swapaxes(quad, -1, -2)


def curvature_data(geo: Geometry, sff: SecondFundamentalForm | None = None) -> CurvatureData:
    sff = sff or second_fundamental_form(geo)
    return CurvatureData(gauss_riemann(sff.h, geo.sf), normal_curvature(sff.h, geo.sf))


def connection_curvatures(geo: Geometry, exact: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Intrinsic and normal curvature from the structure equations of the connection forms."""
    n = geo.n
    tan = frame_components(geo, curvature_two_form(geo, exact, "tangent"))[..., :n, :n, :, :]
    nor = frame_components(geo, curvature_two_form(geo, exact, "normal"))[..., n:, n:, :, :]
    return tan, nor


def intrinsic_riemann_oracle(geo: Geometry, cond_min: float = 1e-8) -> np.ndarray:
    """Frame-basis R from coordinate Christoffel symbols of the sampled induced metric.

    Derivatives of g and of the Christoffel symbols are finite differences on
    the chart grid, so this path shares nothing with the Gauss equation.
    """
    g = geo.metric
    ev = np.linalg.eigvalsh(g)
    cond = ev[..., 0] / ev[..., -1]
    if cond.min() < cond_min:
        raise IllConditionedChart("ill-conditioned chart", stage="oracle",
                                  location=np.unravel_index(int(cond.argmin()), cond.shape))
    ginv = np.linalg.inv(g)
    dg = geo.coordinate_gradient(g)  # dg[..., a, b, c] = d_c g_ab
    # Gamma^c_ab = 1/2 g^cd (d_a g_db + d_b g_da - d_d g_ab)
    low = _christoffel_lower(dg)
    chr_ = np.einsum("...cd,...dab->...cab", ginv, low)
    dchr = geo.coordinate_gradient(chr_)  # dchr[..., r, n, s, m] = d_m Gamma^r_ns
    # R^r_smn = d_m G^r_ns - d_n G^r_ms + G^r_ml G^l_ns - G^r_nl G^l_ms
    term1 = np.einsum("...rnsm->...rsmn", dchr)
    term2 = np.einsum("...rmsn->...rsmn", dchr)
    quad = np.einsum("...rml,...lns->...rsmn", chr_, chr_)
    Rc = term1 - term2 + quad - np.einsum("...rsmn->...rsnm", quad)
    theta, E = geo.frame.theta, geo.frame.inv_theta
    return np.einsum("...ir,...sj,...mk,...nl,...rsmn->...ijkl", theta, E, E, E, Rc,
                     optimize=True)


def _christoffel_lower(dg: np.ndarray) -> np.ndarray:
    """Gamma_{d,ab} = 1/2 (d_a g_db + d_b g_da - d_d g_ab) from dg[..., x, y, z] = d_z g_xy."""
    t1 = np.einsum("...dba->...dab", dg)  # d_a g_db
    t2 = np.einsum("...dab->...dab", dg)  # d_b g_da
    t3 = np.einsum("...abd->...dab", dg)  # d_d g_ab
    return 0.5 * (t1 + t2 - t3)


def codazzi_residual_h(geo: Geometry, mode: str = "fd") -> float:
    """max |h_{ij,k} - h_{ik,j}|; the ambient term vanishes in a space form."""
    return codazzi_residual(covariant_derivative(second_fundamental_tensor(geo), geo, mode))


def ricci_tensor(riemann: np.ndarray) -> np.ndarray:
    """Ric_ij = sum_k R^k_ikj."""
    return np.einsum("...kikj->...ij", riemann)


def gauss_check(geo: Geometry, curv: CurvatureData) -> float:
    return grid.nanmax_abs(curv.riemann - intrinsic_riemann_oracle(geo))


def ricci_check(geo: Geometry, curv: CurvatureData, exact: bool = False) -> float:
    if geo.p == 0:
        return 0.0
    _, nor = connection_curvatures(geo, exact)
    return grid.nanmax_abs(curv.normal - nor)
