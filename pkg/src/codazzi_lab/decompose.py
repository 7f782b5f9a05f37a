"""Eigenvalue blocks, cross-block connection, total geodesy and the product-decomposition verdict."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import grid
from .codazzi import NormalValuedSymTensor
from .errors import HypothesisError
from .fundforms import CurvatureData
from .frames import Geometry
from .spectral import (
    DEFAULT_TOL,
    SpectralField,
    eigen_spectrum,
    mean_curvature_vector,
    parallelism_residual,
    rigidity_integrals,
)

#: curvature gate: min sampled R^i_jij must stay above -CURVATURE_SLACK
CURVATURE_SLACK = 1e-8
#: stencil order for derivatives of eigenvector fields (local, so umbilics stay local)
EIGEN_STENCIL = 6

VERDICT_DECOMPOSES = "decomposes"
VERDICT_HYPOTHESES = "hypotheses fail"
VERDICT_NONCONSTANT = "non-constant spectrum"


@dataclass
class Block:
    value: float
    multiplicity: int
    start: int
    stop: int


@dataclass
class BlockStructure:
    blocks: list[Block]
    constancy: list[float]  # per sorted index, max |lambda_i - median(lambda_i)|
    tol: float

    @property
    def l(self) -> int:
        return len(self.blocks)

    @property
    def multiplicities(self) -> tuple[int, ...]:
        return tuple(b.multiplicity for b in self.blocks)

    @property
    def constant(self) -> bool:
        return max(self.constancy, default=0.0) <= self.tol


def _tol(values: np.ndarray, eps: float) -> float:
    return eps * max(1.0, float(np.abs(values).max(initial=0.0)))


def cluster_eigenvalues(spec: SpectralField, eps: float = DEFAULT_TOL) -> BlockStructure:
    """Group the per-index medians into clusters separated by more than ``eps`` (relative)."""
    n = spec.values.shape[-1]
    flat = spec.values.reshape(-1, n)
    med = np.median(flat, axis=0)
    constancy = np.abs(flat - med).max(axis=0)
    tol = _tol(flat, eps)
    blocks: list[Block] = []
    start = 0
    for i in range(1, n + 1):
        if i == n or med[i - 1] - med[i] > tol:
            blocks.append(Block(float(np.mean(med[start:i])), i - start, start, i))
            start = i
    return BlockStructure(blocks, [float(c) for c in constancy], tol)


def block_projectors(spec: SpectralField, blocks: BlockStructure) -> list[np.ndarray]:
    """P_B = sum of outer products of the block's eigenvectors, shape (*G, n, n)."""
    V = spec.vectors
    return [np.einsum("...ai,...bi->...ab", V[..., b.start:b.stop], V[..., b.start:b.stop]) for b in blocks.blocks]


def _frame_gradient(geo: Geometry, f: np.ndarray, order: int | str) -> np.ndarray:
    return geo.to_frame(grid.gradient(f, geo.chart.spacing(), geo.chart.periodic, order))


def _covariant_derivative_matrix(geo: Geometry, P: np.ndarray, order: int | str) -> np.ndarray:
    """(nabla_k P)_ab for a tangent (1,1) field in frame components, shape (*G, n, n, k)."""
    n = geo.n
    tang = geo.gamma[..., :n, :n, :]
    dP = _frame_gradient(geo, P, order)
    return dP - np.einsum("...mb,...mak->...abk", P, tang) - np.einsum("...am,...mbk->...abk", P, tang)


def cross_block_connection_residual(geo: Geometry, spec: SpectralField, blocks: BlockStructure,
                                    order: int | str | None = None) -> float:
    """max over blocks A != B and directions k of |P_A (nabla_k P_B) P_B|.

    The Frobenius norm equals sqrt(sum omega^i_j(e_k)^2) over i in A, j in B
    for any eigenframe, so rotations inside a block do not change it.
    """
    if blocks.l < 2:
        return 0.0
    order = geo.fd_order if order is None else order
    Ps = block_projectors(spec, blocks)
    worst = 0.0
    for b, PB in enumerate(Ps):
        dPB = _covariant_derivative_matrix(geo, PB, order)
        for a, PA in enumerate(Ps):
            if a == b:
                continue
            M = np.einsum("...am,...mck,...cb->...abk", PA, dPB, PB)
            worst = max(worst, grid.nanmax_abs(np.sqrt((M**2).sum(axis=(-3, -2)))))
    return worst


def invariant_subspace_residual(geo: Geometry, spec: SpectralField, blocks: BlockStructure,
                                order: int | str | None = None) -> float:
    """Size of the part of nabla_v u leaving V_B, for u, v in the same block B.

    Computed as |(1 - P_B)(nabla P_B) P_B| with the derivative direction also
    projected onto V_B; zero means every eigenspace is totally geodesic.
    """
    order = geo.fd_order if order is None else order
    eye = np.eye(geo.n)
    worst = 0.0
    for PB in block_projectors(spec, blocks):
        dPB = _covariant_derivative_matrix(geo, PB, order)
        M = np.einsum("...am,...mck,...cb,...kd->...abd", eye - PB, dPB, PB, PB)
        worst = max(worst, grid.nanmax_abs(np.sqrt((M**2).sum(axis=(-3, -2, -1)))))
    return worst


def _sign_aligned_gradient(geo: Geometry, u: np.ndarray, order: int) -> np.ndarray:
    """Frame derivative of a unit eigenvector field, e_k(u^a) as [..., a, k].

    Eigenvectors carry no preferred sign, so each stencil sample is flipped
    to agree with the centre sample before differencing.  This makes the
    derivative independent of how signs were chosen across the grid.
    """
    stencil = grid.stencil(order)
    width = max(stencil)
    parts = []
    for ax, (h, per) in enumerate(zip(geo.chart.spacing(), geo.chart.periodic)):
        acc = np.zeros_like(u)
        for s, w in stencil.items():
            nb = np.roll(u, -s, axis=ax)
            sgn = np.where(np.einsum("...a,...a->...", nb, u) < 0, -1.0, 1.0)
            acc += w * sgn[..., None] * nb
        acc /= h
        if not per:
            edge = [slice(None)] * u.ndim
            edge[ax] = np.r_[0:width, u.shape[ax] - width:u.shape[ax]]
            acc[tuple(edge)] = np.nan
        parts.append(acc)
    return geo.to_frame(np.stack(parts, axis=-1))


def _dilate(mask: np.ndarray, width: int, periodic) -> np.ndarray:
    out = mask.copy()
    for ax, per in enumerate(periodic):
        grown = out.copy()
        for s in range(1, width + 1):
            for sign in (-1, 1):
                shifted = np.roll(out, sign * s, axis=ax)
                if not per:
                    edge = [slice(None)] * out.ndim
                    edge[ax] = slice(0, s) if sign > 0 else slice(-s, None)
                    shifted[tuple(edge)] = False
                grown |= shifted
        out = grown
    return out


@dataclass
class DerdzinskiResult:
    residual: float
    masked_fraction: float
    terms: dict = field(default_factory=dict)  # max magnitude of each correction term


def derdzinski_residual(geo: Geometry, A: np.ndarray, index: int, spec: SpectralField | None = None,
                        v_index: int | None = None, gap_min: float = 0.05, order: int = EIGEN_STENCIL,
                        v: np.ndarray | None = None) -> DerdzinskiResult:
    """max |A(nabla_v u) - lam nabla_v u - dlam(v) u + <u,v> grad lam| for eigenfields u, v.

    ``index`` picks the sorted eigenvalue lam and its eigenfield u.  v is the
    eigenfield ``v_index`` of the same eigenvalue, an explicit frame-component
    field in that eigenspace, or u itself.  Points where that eigenvalue comes within ``gap_min`` (relative) of
    another one, plus a stencil-wide collar around them, are excluded: the
    eigenfields are not smooth at umbilics.
    """
    spec = spec or eigen_spectrum(A, len(geo.shape))
    lam = spec.values[..., index]
    u = spec.vectors[..., :, index]
    if v is None:
        v = u if v_index is None else spec.vectors[..., :, v_index]
    n = geo.n
    vals = spec.values
    others = np.delete(vals, index, axis=-1)
    dist = np.abs(others - lam[..., None]).min(axis=-1) if n > 1 else np.full(lam.shape, np.inf)
    bad = dist < gap_min * max(1.0, float(np.abs(vals).max()))
    if order == "spectral":
        raise ValueError("eigenfield derivatives need a local stencil order")
    bad = _dilate(bad, order // 2, geo.chart.periodic)
    tang = geo.gamma[..., :n, :n, :]
    du = _sign_aligned_gradient(geo, u, order)
    cov_u = du + np.einsum("...abk,...b->...ak", tang, u)
    nabla_v_u = np.einsum("...ak,...k->...a", cov_u, v)
    dlam = _frame_gradient(geo, lam, order)
    t_A = np.einsum("...ab,...b->...a", A, nabla_v_u)
    t_l = lam[..., None] * nabla_v_u
    t_d = np.einsum("...k,...k->...", dlam, v)[..., None] * u
    t_g = np.einsum("...a,...a->...", u, v)[..., None] * dlam
    res = np.linalg.norm(t_A - t_l - t_d + t_g, axis=-1)
    res = np.where(bad, np.nan, res)

    def mx(t):
        return grid.nanmax_abs(np.where(bad[..., None], np.nan, t))

    return DerdzinskiResult(grid.nanmax_abs(res), float(bad.mean()),
                            {"lambda_nabla_v_u": mx(t_l), "dlambda_v_u": mx(t_d), "metric_grad": mx(t_g)})


def umbilicity_check(top: np.ndarray) -> tuple[float, float]:
    """(max |phi_ij - (tr phi / n) delta_ij|, variation of tr phi / n over the grid)."""
    n = top.shape[-1]
    mean = np.trace(top, axis1=-2, axis2=-1) / n
    dev = top - mean[..., None, None] * np.eye(n)
    return float(np.abs(dev).max(initial=0.0)), float(mean.max() - mean.min())


# ---------------------------------------------------------------------------
# report


@dataclass
class Gate:
    name: str
    passed: bool
    value: float | None
    detail: str = ""


@dataclass
class DecompositionReport:
    gates: list[Gate]
    integrals: dict | None
    blocks: BlockStructure | None
    cross_block: float | None
    invariant_subspace: float | None
    verdict: str
    reasons: list[str]

    def to_dict(self) -> dict:
        out = {
            "verdict": self.verdict,
            "reasons": list(self.reasons),
            "gates": [asdict(g) for g in self.gates],
            "integrals": self.integrals,
            "cross_block_residual": self.cross_block,
            "invariant_subspace_residual": self.invariant_subspace,
        }
        if self.blocks is not None:
            out["l"] = self.blocks.l
            out["blocks"] = [{"eigenvalue": b.value, "multiplicity": b.multiplicity} for b in self.blocks.blocks]
            out["constancy"] = max(self.blocks.constancy, default=0.0)
        else:
            out["l"] = None
            out["blocks"] = []
            out["constancy"] = None
        return out


def decomposition_report(phi: NormalValuedSymTensor, geo: Geometry, curv: CurvatureData, mode: str = "dual",
                         tol: float = DEFAULT_TOL, residual_tol: float = 1e-6) -> DecompositionReport:
    gates: list[Gate] = []
    reasons: list[str] = []
    closed = geo.chart.closed
    gates.append(Gate("closed_chart", closed, None, "" if closed else "not a closed chart"))
    kmin = float(curv.sectional_samples().min()) if geo.n > 1 else 0.0
    gates.append(Gate("curvature", kmin >= -CURVATURE_SLACK, kmin, "min sampled R^i_jij"))

    if phi.extrinsic:
        try:
            mc = mean_curvature_vector(phi, geo, tol, mode)
        except HypothesisError as exc:
            mc = None
            gates.append(Gate("parallelism", False, None, str(exc)))
        if mc is not None:
            d_phibar, normal = parallelism_residual(mc, geo)
            scale = tol * max(1.0, float(np.abs(phi.comps).max(initial=0.0)))
            ok = d_phibar <= scale and normal <= scale
            gates.append(Gate("parallelism", ok, max(d_phibar, normal),
                              f"d phibar {d_phibar:.3e}, normal connection {normal:.3e}"))
            top = mc.adapted_component(phi)
        else:
            top = None
    else:
        top = phi.comps[..., 0, :, :]

    for g in gates:
        if not g.passed:
            reasons.append(f"{g.name} gate: {g.detail}" + (f" ({g.value:.3e})" if g.value is not None else ""))

    integrals = None
    if closed and top is not None and all(g.passed for g in gates):
        ti = rigidity_integrals(phi, geo, curv, mode, tol)
        integrals = asdict(ti)

    blocks = cross = inv = None
    if top is not None:
        spec = eigen_spectrum(top, len(geo.shape), tol)
        blocks = cluster_eigenvalues(spec, tol)
        if blocks.constant:
            cross = cross_block_connection_residual(geo, spec, blocks)
            inv = invariant_subspace_residual(geo, spec, blocks)

    if any(not g.passed for g in gates):
        verdict = VERDICT_HYPOTHESES
    elif blocks is None or not blocks.constant:
        verdict = VERDICT_NONCONSTANT
        reasons.append("eigenvalues of phi^{n+1} vary over the chart")
    else:
        bad = [(name, val) for name, val in (("cross-block connection", cross), ("invariant subspace", inv))
               if val is not None and val > residual_tol]
        if integrals is not None:
            bad += [(name, integrals[key]) for name, key in (("gradient integral", "gradient_integral"),
                                                             ("curvature integral", "curvature_integral"))
                    if abs(integrals[key]) > residual_tol]
        if bad:
            verdict = VERDICT_HYPOTHESES
            reasons += [f"{name} residual {val:.3e} above {residual_tol:.1e}" for name, val in bad]
        else:
            verdict = VERDICT_DECOMPOSES
    return DecompositionReport(gates, integrals, blocks, cross, inv, verdict, reasons)
