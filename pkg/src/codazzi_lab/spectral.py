"""Mean curvature vector, eigenvalue fields, Laplacians and the Simons-type identities."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import grid
from .codazzi import (
    CovariantDerivativeField,
    NormalValuedSymTensor,
    covariant_derivative,
    second_covariant_derivative,
)
from .errors import HypothesisError
from .fundforms import CurvatureData
from .frames import Geometry

#: relative tolerance for clustering, parallelism and the vanishing of Phi
DEFAULT_TOL = 1e-6


def _scale(phi: NormalValuedSymTensor) -> float:
    return max(1.0, float(np.abs(phi.comps).max(initial=0.0)))


@dataclass
class MeanCurvatureData:
    """Phi = (1/n) sum_a (tr phi^a) e_a and the choice of e_{n+1}.

    ``direction`` holds the components of e_{n+1} in the original normal
    frame.  ``branch`` is "adapted" (e_{n+1} = Phi/|Phi|) or "zero" (Phi
    vanishes and a parallel normal direction was chosen instead).
    """

    components: np.ndarray  # (*G, p)
    magnitude: np.ndarray  # (*G,)
    phibar: np.ndarray  # (1/n) tr phi^{n+1}
    direction: np.ndarray  # (*G, p)
    branch: str
    adapted_index: int | None = None
    trace_derivative: np.ndarray | None = None  # exact d(tr phi^a)/du, (*G, p, n)

    def adapted_component(self, phi: NormalValuedSymTensor) -> np.ndarray:
        """phi^{n+1}_ij = sum_a direction^a phi^a_ij."""
        return np.einsum("...a,...aij->...ij", self.direction, phi.comps)

    def off_direction_trace(self, phi: NormalValuedSymTensor) -> float:
        """max |tr phi^b| over normals b orthogonal to e_{n+1}."""
        tr = phi.trace()
        along = np.einsum("...a,...a->...", tr, self.direction)
        rest = tr - along[..., None] * self.direction
        return float(np.abs(rest).max(initial=0.0))


def mean_curvature_vector(phi: NormalValuedSymTensor, geo: Geometry, tol: float = DEFAULT_TOL,
                          mode: str = "dual") -> MeanCurvatureData:
    if not phi.extrinsic:
        raise ValueError("mean curvature vector needs an extrinsic tensor")
    n = geo.n
    tr = phi.trace()
    comps = tr / n
    mag = np.linalg.norm(comps, axis=-1)
    thresh = tol * _scale(phi)
    dtr = None
    if mode == "dual" and phi.dcomps is not None:
        dtr = np.trace(phi.dcomps, axis1=-3, axis2=-2)
    big = mag > thresh
    if big.all():
        direction = comps / mag[..., None]
        return MeanCurvatureData(comps, mag, mag, direction, "adapted", None, dtr)
    if big.any():
        where = np.unravel_index(int(np.argmin(mag)), mag.shape)
        raise HypothesisError("mixed Phi regime: |Phi| vanishes on part of the chart only", stage="spectral",
                              location=where)
    # Phi == 0: pick a normal direction that is parallel in the normal bundle
    gam = geo.gamma[..., n:, n:, :]
    for g in range(phi.q):
        if np.abs(gam[..., g, :, :]).max(initial=0.0) < thresh:
            direction = np.zeros(mag.shape + (phi.q,))
            direction[..., g] = 1.0
            return MeanCurvatureData(comps, mag, comps[..., g], direction, "zero", g, dtr)
    raise HypothesisError("Phi vanishes, no adapted direction", stage="spectral")


def parallelism_residual(mc: MeanCurvatureData, geo: Geometry) -> tuple[float, float]:
    """(max |d phibar|, max_k |nabla-perp_k e_{n+1}|).

    The second entry bounds every omega^{n+1}_b(e_k) at once: e_{n+1} has unit
    length, so its normal covariant derivative is orthogonal to it and its
    norm is the largest of those connection coefficients in a frame aligned
    with it.
    """
    n = geo.n
    if mc.branch == "adapted":
        if mc.trace_derivative is not None:
            # d|Phi| = <Phi, dPhi>/|Phi| with Phi^a = tr phi^a / n
            d_coord = np.einsum("...a,...ak->...k", mc.direction, mc.trace_derivative) / n
            dphibar = geo.to_frame(d_coord)
            ddir_coord = (mc.trace_derivative / n
                          - mc.direction[..., None] * (d_coord[..., None, :])) / mc.magnitude[..., None, None]
            ddir = geo.to_frame(ddir_coord)
        else:
            dphibar = geo.frame_derivative(mc.phibar)
            ddir = geo.frame_derivative(mc.direction)
    else:
        dphibar = geo.frame_derivative(mc.phibar)
        ddir = np.zeros(mc.direction.shape + (n,))
    nperp = ddir + np.einsum("...b,...abk->...ak", mc.direction, geo.gamma[..., n:, n:, :])
    second = np.linalg.norm(nperp, axis=-2)
    return grid.nanmax_abs(dphibar), grid.nanmax_abs(second) if nperp.size else 0.0


@dataclass
class SpectralField:
    values: np.ndarray  # (*G, n) descending
    vectors: np.ndarray  # (*G, n, n), columns are eigenvectors in the frame
    degenerate: np.ndarray  # (*G,) bool
    reconstruction_residual: float
    gap: np.ndarray  # smallest neighbouring eigenvalue gap per point


def _align_signs(vectors: np.ndarray, grid_ndim: int) -> np.ndarray:
    """Flip eigenvector columns so neighbouring samples point the same way.

    Each line along the last grid axis is made consistent first; the line
    starts then form a grid of one dimension less and are aligned the same
    way, and the resulting flips are applied to whole lines.
    """
    if grid_ndim == 0:
        return vectors
    ax = grid_ndim - 1
    dots = np.einsum("...ij,...ij->...j", np.take(vectors, range(1, vectors.shape[ax]), axis=ax),
                     np.take(vectors, range(vectors.shape[ax] - 1), axis=ax))
    flips = np.where(dots < 0, -1.0, 1.0)
    first = np.ones_like(np.take(flips, [0], axis=ax))
    flips = np.cumprod(np.concatenate([first, flips], axis=ax), axis=ax)
    out = vectors * flips[..., None, :]
    starts = np.take(out, 0, axis=ax)
    aligned = _align_signs(starts, grid_ndim - 1)
    line_flip = np.sign(np.einsum("...ij,...ij->...j", aligned, starts))
    return out * np.expand_dims(line_flip, ax)[..., None, :]


def eigen_spectrum(comps: np.ndarray, grid_ndim: int | None = None, cluster_tol: float = DEFAULT_TOL
                   ) -> SpectralField:
    """Pointwise symmetric eigendecomposition, eigenvalues descending."""
    if grid_ndim is None:
        grid_ndim = comps.ndim - 2
    w, v = np.linalg.eigh(comps)
    w, v = w[..., ::-1], v[..., ::-1]
    v = _align_signs(v, grid_ndim)
    recon = np.einsum("...ik,...k,...jk->...ij", v, w, v)
    res = float(np.abs(recon - comps).max(initial=0.0))
    n = w.shape[-1]
    gap = (w[..., :-1] - w[..., 1:]).min(axis=-1) if n > 1 else np.full(w.shape[:-1], np.inf)
    scale = max(1.0, float(np.abs(w).max(initial=0.0)))
    return SpectralField(w, v, gap < cluster_tol * scale, res, gap)


def scalar_laplacian(geo: Geometry, u: np.ndarray, method: str = "frame") -> np.ndarray:
    """Laplace-Beltrami operator of a scalar grid field.

    "frame" sums the covariant Hessian u_{,kk} = e_k(e_k u) - G^m_{k,k} e_m u;
    "divergence" uses (1/sqrt g) d_a (sqrt g g^ab d_b u) in the chart.
    """
    if method == "frame":
        du = geo.frame_derivative(u)
        ddu = geo.frame_derivative(du)
        tang = geo.gamma[..., : geo.n, : geo.n, :]
        hess = ddu - np.einsum("...mij,...m->...ij", tang, du)
        return np.trace(hess, axis1=-2, axis2=-1)
    if method == "divergence":
        g = geo.metric
        vol = geo.volume
        flux = vol[..., None] * np.einsum("...ab,...b->...a", np.linalg.inv(g), geo.coordinate_gradient(u))
        div = sum(grid.diff(flux[..., a], a, h, per, geo.fd_order)
                  for a, (h, per) in enumerate(zip(geo.chart.spacing(), geo.chart.periodic)))
        return div / vol
    raise ValueError(f"unknown Laplacian method {method!r}")


def curvature_gap_term(spec: SpectralField, riemann: np.ndarray) -> np.ndarray:
    """sum_{i,j} R^i_jij (l_i - l_j)^2 evaluated in the eigenframe (no factor 1/2).

    Inside an eigenspace the differences vanish and across eigenspaces the sum
    does not depend on the chosen bases, so degenerate points are harmless.
    """
    Q = spec.vectors
    K = np.einsum("...abcd,...ai,...bj,...ci,...dj->...ij", riemann, Q, Q, Q, Q, optimize=True)
    lam = spec.values
    return (K * (lam[..., :, None] - lam[..., None, :]) ** 2).sum(axis=(-2, -1))


def curvature_gap_invariant(A: np.ndarray, riemann: np.ndarray) -> np.ndarray:
    """The same sum as a frame-independent contraction, for cross-checks.

    In the eigenframe sum_j K_ij = Ric_ii, so the sum equals
    2 (tr(A^2 Ric) - R^a_bcd A_ac A_bd).
    """
    ric = np.einsum("...kikj->...ij", riemann)
    a2 = np.einsum("...ij,...jk->...ik", A, A)
    t1 = np.einsum("...ik,...ki->...", a2, ric)
    t2 = np.einsum("...abcd,...ac,...bd->...", riemann, A, A)
    return 2.0 * (t1 - t2)


@dataclass
class SimonsTerms:
    lhs: np.ndarray  # 1/2 Laplacian |phi|^2
    gradient: np.ndarray  # |nabla phi|^2
    trace_hessian: np.ndarray  # sum lambda_i (tr phi)_{,ii}; zero for the parallel form
    curvature: np.ndarray  # 1/2 sum R^i_jij (l_i - l_j)^2

    @property
    def residual_field(self) -> np.ndarray:
        return self.lhs - self.gradient - self.trace_hessian - self.curvature

    @property
    def residual(self) -> float:
        return grid.nanmax_abs(self.residual_field)


def simons_terms_parallel(phi: NormalValuedSymTensor, geo: Geometry, curv: CurvatureData, mode: str = "dual",
                          tol: float = DEFAULT_TOL, D: CovariantDerivativeField | None = None) -> SimonsTerms:
    """Both sides of the identity for the e_{n+1} component under parallel mean curvature."""
    mc = mean_curvature_vector(phi, geo, tol, mode)
    first, second = parallelism_residual(mc, geo)
    thresh = tol * _scale(phi)
    if first > thresh or second > thresh:
        raise HypothesisError(f"parallel-mean-curvature hypotheses not met (d phibar {first:.2e}, "
                              f"normal connection {second:.2e})", stage="simons")
    D = D or covariant_derivative(phi, geo, mode)
    top = mc.adapted_component(phi)
    dtop = np.einsum("...a,...aijk->...ijk", mc.direction, D.first)
    spec = eigen_spectrum(top, len(geo.shape))
    lhs = 0.5 * scalar_laplacian(geo, (top**2).sum(axis=(-2, -1)))
    grad = (dtop**2).sum(axis=(-3, -2, -1))
    return SimonsTerms(lhs, grad, np.zeros_like(lhs), 0.5 * curvature_gap_term(spec, curv.riemann))


def simons_residual_parallel(phi: NormalValuedSymTensor, geo: Geometry, curv: CurvatureData, mode: str = "dual",
                             tol: float = DEFAULT_TOL) -> float:
    return simons_terms_parallel(phi, geo, curv, mode, tol).residual


def simons_terms_flat(phi: NormalValuedSymTensor, geo: Geometry, curv: CurvatureData, mode: str = "dual",
                      tol: float = DEFAULT_TOL, D: CovariantDerivativeField | None = None) -> SimonsTerms:
    """All four terms of the identity for a flat normal bundle.

    The trace Hessian (tr phi^a)_{,ij} is the trace of the second covariant
    derivative phi^a_{kk,ij}; contracted against phi^a_ij it equals
    sum lambda^a_i (tr phi^a)_{,ii} in any frame diagonalising phi^a.
    """
    if phi.extrinsic and geo.p:
        flat = float(np.abs(curv.normal).max(initial=0.0))
        h_scale = float(np.abs(geo.gamma[..., geo.n:, : geo.n, :]).max(initial=0.0))
        if flat > tol * max(1.0, h_scale**2):
            raise HypothesisError(f"flat-normal-bundle hypotheses not met (max |perp R| {flat:.2e})",
                                  stage="simons")
    D = D or covariant_derivative(phi, geo, mode)
    D2 = second_covariant_derivative(D, phi, geo)
    tr_hess = np.einsum("...akkij->...aij", D2.second)
    tr_hess = 0.5 * (tr_hess + np.swapaxes(tr_hess, -1, -2))
    lhs = 0.5 * scalar_laplacian(geo, phi.squared_norm())
    grad = D.squared_norm()
    mid = np.einsum("...aij,...aij->...", phi.comps, tr_hess)
    curv_term = np.zeros_like(lhs)
    for a in range(phi.q):
        spec = eigen_spectrum(phi.comps[..., a, :, :], len(geo.shape))
        curv_term = curv_term + 0.5 * curvature_gap_term(spec, curv.riemann)
    return SimonsTerms(lhs, grad, mid, curv_term)


def simons_residual_flat(phi: NormalValuedSymTensor, geo: Geometry, curv: CurvatureData, mode: str = "dual",
                         tol: float = DEFAULT_TOL) -> float:
    return simons_terms_flat(phi, geo, curv, mode, tol).residual


def stokes_theorem_integral(geo: Geometry, field: np.ndarray) -> float:
    """Integral of a scalar field against the Riemannian volume over a closed chart."""
    return grid.integrate(field, geo.volume, geo.chart.spacing(), geo.chart)


@dataclass
class RigidityIntegrals:
    gradient_integral: float
    curvature_integral: float
    gradient_max: float
    curvature_max: float
    curvature_min: float


def rigidity_integrals(phi: NormalValuedSymTensor, geo: Geometry, curv: CurvatureData, mode: str = "dual",
                      tol: float = DEFAULT_TOL) -> RigidityIntegrals:
    """Integrals of |nabla phi^{n+1}|^2 and sum_{i,j} R^i_jij (l_i - l_j)^2, with pointwise extrema."""
    if phi.extrinsic:
        mc = mean_curvature_vector(phi, geo, tol, mode)
        top = mc.adapted_component(phi)
        D = covariant_derivative(phi, geo, mode)
        dtop = np.einsum("...a,...aijk->...ijk", mc.direction, D.first)
    else:
        top = phi.comps[..., 0, :, :]
        dtop = covariant_derivative(phi, geo, mode).first[..., 0, :, :, :]
    spec = eigen_spectrum(top, len(geo.shape))
    g = (dtop**2).sum(axis=(-3, -2, -1))
    c = curvature_gap_term(spec, curv.riemann)
    return RigidityIntegrals(stokes_theorem_integral(geo, g), stokes_theorem_integral(geo, c),
                            grid.nanmax_abs(g), grid.nanmax_abs(c), float(np.nanmin(c)))
