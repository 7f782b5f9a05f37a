"""Adapted orthonormal frames, connection coefficients and structure equations.

The frame at every sample is produced by Gram-Schmidt (in the model metric)
applied to jets of the immersion, so its derivatives come out of the same
Taylor arithmetic instead of differencing stored frames.  Tangent vectors come
from the coordinate vectors; the normal completion uses one fixed set of
smooth candidate fields over the whole grid (chosen to keep every Gram-Schmidt
pivot away from zero), which makes the frame field a smooth, periodic function
of the chart point.
"""
from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import grid
from .errors import DegenerateImmersion, FrameDiscontinuity, ModelConstraintError
from .expr import compile_expression
from .geometry import MODEL_TOL, ImmersionSpec, SpaceForm
from .jets import Jet

log = logging.getLogger(__name__)

PIVOT_MIN = 1e-3
CHUNK = 2048


@dataclass
class AdaptedFrame:
    """Frame field e_A (rows of ``vectors``) plus the chart Jacobian data.

    ``theta[k, a] = <d_a X, e_k>`` is the coframe in coordinates and
    ``inv_theta[a, k]`` its inverse, so ``e_k = sum_a inv_theta[a, k] d_a X``.
    """

    vectors: np.ndarray  # (*G, n+p, N)
    theta: np.ndarray  # (*G, n, n)
    inv_theta: np.ndarray  # (*G, n, n)
    dtheta: np.ndarray  # (*G, n, n, n) exact coordinate derivative on the last axis
    n: int
    p: int
    normal_candidates: tuple[str, ...] = ()
    rotation: np.ndarray | None = None  # accumulated normal-frame rotation, if adapted

    @property
    def tangent(self) -> np.ndarray:
        return self.vectors[..., : self.n, :]

    @property
    def normal(self) -> np.ndarray:
        return self.vectors[..., self.n :, :]


@dataclass
class ConnectionForms:
    """gamma[A, B, k] = omega^A_B(e_k); ``dgamma`` adds exact coordinate derivatives."""

    gamma: np.ndarray  # (*G, n+p, n+p, n)
    dgamma: np.ndarray | None  # (*G, n+p, n+p, n, n) or None after grid-level edits

    def antisymmetry_residual(self) -> float:
        return float(np.abs(self.gamma + np.swapaxes(self.gamma, -3, -2)).max())


@dataclass
class ScalarJetData:
    """A scalar function on M: value, frame gradient and frame Hessian (with exact derivative)."""

    value: np.ndarray
    frame_gradient: np.ndarray  # (*G, n)
    hessian: np.ndarray  # (*G, n, n)
    dhessian: np.ndarray  # (*G, n, n, n)


@dataclass
class Geometry:
    """Everything sampled on the grid for one immersion."""

    imm: ImmersionSpec
    points: list
    x: np.ndarray
    frame: AdaptedFrame
    connection: ConnectionForms
    metric: np.ndarray
    fd_order: int | str = "spectral"
    scalars: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.frame.n

    @property
    def p(self) -> int:
        return self.frame.p

    @property
    def sf(self) -> SpaceForm:
        return self.imm.target

    @property
    def chart(self):
        return self.imm.chart

    @property
    def shape(self) -> tuple:
        return self.chart.shape

    @property
    def gamma(self) -> np.ndarray:
        return self.connection.gamma

    @property
    def volume(self) -> np.ndarray:
        return np.sqrt(np.linalg.det(self.metric))

    def coordinate_gradient(self, f: np.ndarray) -> np.ndarray:
        return grid.gradient(f, self.chart.spacing(), self.chart.periodic, self.fd_order)

    def to_frame(self, coord_grad: np.ndarray) -> np.ndarray:
        """Convert trailing coordinate-derivative axis to frame directions e_k."""
        ncomp = coord_grad.ndim - len(self.shape) - 1
        e = self.frame.inv_theta.reshape(self.shape + (1,) * ncomp + (self.n, self.n))
        return np.einsum("...a,...ak->...k", coord_grad, e)

    def frame_derivative(self, f: np.ndarray, exact: np.ndarray | None = None) -> np.ndarray:
        """e_k(f) for every component of ``f``; exact coordinate derivatives win when given."""
        return self.to_frame(exact if exact is not None else self.coordinate_gradient(f))


# ---------------------------------------------------------------------------
# jet-level construction


def _candidates(X: Jet, dX: list, sf: SpaceForm, n: int):
    """Smooth fields that may complete the tangent frame, with display names."""
    names, fields = [], []
    if sf.c == 0:
        names.append("X")
        fields.append(X)
    for a in range(n):
        for b in range(a, n):
            names.append(f"X_{a}{b}")
            fields.append(dX[a].d(b))
    N = sf.embedding_dim
    for i in range(N):
        unit = np.zeros(N)
        unit[i] = 1.0
        names.append(f"E{i}")
        fields.append(Jet.constant(np.broadcast_to(unit, X.shape).copy(), X.nvars, X.order))
    return names, fields


def _gram_schmidt_step(v, basis, sf):
    for b, sign in basis:
        coef = sf.inner(v, b) * sign
        coef = coef.expand_dims(-1) if isinstance(coef, Jet) else coef[..., None]
        v = v - b * coef
    return v


def _quadric_unit(X, sf):
    """Unit position vector and its model norm sign for curved models."""
    return X * abs(sf.c) ** 0.5, (1.0 if sf.c > 0 else -1.0)


def select_normal_candidates(imm: ImmersionSpec, u_flat: list[np.ndarray]) -> tuple[list[int], list[str], float]:
    """Choose the fixed candidate set that keeps normal Gram-Schmidt pivots largest."""
    sf, n, p = imm.target, imm.dim, imm.codim
    seeds = Jet.variables(u_flat, 2)
    X = imm.evaluate(seeds)
    dX = [X.d(a) for a in range(n)]
    names, cands = _candidates(X, dX, sf, n)
    basis = []
    if sf.c != 0:
        q, s = _quadric_unit(X.truncate(0), sf)
        basis.append((q.value, s))
    for a in range(n):
        w = _gram_schmidt_step(dX[a].value, basis, sf)
        basis.append((w / np.sqrt(sf.inner(w, w))[..., None], 1.0))
    proj, scale = [], []
    for c in cands:
        v = c.value
        proj.append(_gram_schmidt_step(v, basis, sf))
        scale.append(np.maximum(np.sqrt(np.abs((v * v).sum(-1))), 1e-300))
    if p == 0:
        return [], [], 1.0
    best, best_score = None, -1.0
    for combo in combinations(range(len(cands)), p):
        vecs = np.stack([proj[i] / scale[i][..., None] for i in combo], axis=-2)
        gram = np.einsum("...in,...jn->...ij", vecs * sf.eta, vecs)
        score = float(np.sqrt(np.clip(np.linalg.det(gram), 0.0, None)).min())
        if score > best_score + 1e-12:
            best, best_score = combo, score
    return list(best), [names[i] for i in best], best_score


def _upper_triangular_inverse(T: list[list[Jet]], n: int) -> list[list[Jet]]:
    """Inverse of an upper-triangular jet matrix by back substitution."""
    inv = [[None] * n for _ in range(n)]
    for j in range(n):
        for i in range(j, -1, -1):
            acc = 1.0 if i == j else 0.0
            for m in range(i + 1, j + 1):
                acc = acc - T[i][m] * inv[m][j]
            inv[i][j] = acc / T[i][i] if isinstance(acc, Jet) else T[i][i].reciprocal() * acc
    zero = inv[0][0] * 0.0
    for j in range(n):
        for i in range(j + 1, n):
            inv[i][j] = zero
    return inv


def _chunk_geometry(imm: ImmersionSpec, u_flat, cand_idx, order, scalar_progs):
    sf, n, p = imm.target, imm.dim, imm.codim
    seeds = Jet.variables(u_flat, order)
    X = imm.evaluate(seeds)
    dX = [X.d(a) for a in range(n)]
    basis = []
    if sf.c != 0:
        q, s = _quadric_unit(X, sf)
        basis.append((q, s))
    frame = []
    for a in range(n):
        w = _gram_schmidt_step(dX[a], basis, sf)
        e = w / sf.inner(w, w).sqrt().expand_dims(-1)
        basis.append((e, 1.0))
        frame.append(e)
    if p:
        _, cands = _candidates(X, dX, sf, n)
        for i in cand_idx:
            w = _gram_schmidt_step(cands[i], basis, sf)
            e = w / sf.inner(w, w).sqrt().expand_dims(-1)
            basis.append((e, 1.0))
            frame.append(e)
    F = Jet.stack(frame, axis=-2)  # batch (P, n+p, N)
    eta = sf.eta
    # omega_coord[a][A, B] = <d_a e_B, e_A>
    omega = []
    for a in range(n):
        dF = F.d(a)
        omega.append((F.truncate(dF.order).expand_dims(-2) * dF.expand_dims(-3) * eta).sum(-1))
    T = [[(dX[a] * frame[k].truncate(dX[a].order) * eta).sum(-1) for a in range(n)] for k in range(n)]
    Einv = _upper_triangular_inverse(T, n)
    gamma = None
    for a in range(n):
        # Gamma[A, B, k] = sum_a Einv[a][k] omega_a[A, B]
        col = Jet.stack([Einv[a][k] for k in range(n)], axis=-1)  # (P, n)
        term = omega[a].expand_dims(-1) * col.expand_dims(-2).expand_dims(-2)
        gamma = term if gamma is None else gamma + term
    theta = Jet.stack([Jet.stack(row, axis=-1) for row in T], axis=-2)  # (P, n, n)
    out = {
        "x": X.value,
        "vectors": F.value,
        "theta": theta.value,
        "inv_theta": np.stack([np.stack([Einv[a][k].value for k in range(n)], -1) for a in range(n)], -2),
        "dtheta": np.stack([theta.d(b).value for b in range(n)], axis=-1),
        "gamma": gamma.value,
        "dgamma": np.stack([gamma.d(b).value for b in range(n)], axis=-1) if gamma.order >= 1 else None,
        "metric": np.stack([np.stack([(dX[a].value * dX[b].value * eta).sum(-1) for b in range(n)], -1)
                            for a in range(n)], -2),
    }
    scalars = {}
    for key, prog in scalar_progs.items():
        comps = [X[..., i] for i in range(X.shape[-1])]
        Fs = prog(*comps, *seeds)
        if not isinstance(Fs, Jet):
            Fs = Jet.constant(np.broadcast_to(np.asarray(Fs, dtype=float), X.shape[:-1]).copy(), n, order)
        grad = [sum((Einv[a][i] * Fs.d(a) for a in range(n)), start=0.0) for i in range(n)]
        hess = []
        for i in range(n):
            row = []
            for j in range(n):
                second = sum((Einv[b][j] * grad[i].d(b) for b in range(n)), start=0.0)
                corr = sum((gamma[..., m, i, j] * grad[m] for m in range(n)), start=0.0)
                row.append(second - corr)
            hess.append(Jet.stack(row, axis=-1))
        H = Jet.stack(hess, axis=-2)
        scalars[key] = {
            "value": Fs.value,
            "frame_gradient": np.stack([g.value for g in grad], -1),
            "hessian": H.value,
            "dhessian": np.stack([H.d(b).value for b in range(n)], axis=-1),
        }
    out["scalars"] = scalars
    return out


def _threads() -> int:
    env = os.environ.get("CODAZZI_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def compute_geometry(imm: ImmersionSpec, order: int = 4, fd_order: int | str = "spectral", scalars: dict | None = None,
                     chunk: int = CHUNK, check: bool = True) -> Geometry:
    """Sample the immersion on its chart grid and build frame, connection and metric.

    ``scalars`` maps a key to an expression in the embedding coordinates
    ``x1..xN`` and the chart coordinate names; each gets value, frame gradient
    and covariant Hessian computed through jets.
    """
    if order < 3:
        raise ValueError("frame construction needs jets of order >= 3")
    chart, sf = imm.chart, imm.target
    n, p, N = imm.dim, imm.codim, sf.embedding_dim
    if p < 0:
        raise DegenerateImmersion("chart dimension exceeds ambient dimension", stage="frames")
    pts = chart.points()
    flat = [q.ravel() for q in pts]
    total = flat[0].size
    cand_idx, cand_names, score = select_normal_candidates(imm, flat)
    if p and score < PIVOT_MIN:
        raise FrameDiscontinuity(
            f"no smooth normal completion (best pivot {score:.2e}); frame discontinuity", stage="frames")
    names = [f"x{i + 1}" for i in range(N)] + list(imm.coords)
    progs = {k: compile_expression(src, names) for k, src in (scalars or {}).items()}

    slices = [slice(s, min(s + chunk, total)) for s in range(0, total, chunk)]

    def work(sl):
        return _chunk_geometry(imm, [f[sl] for f in flat], cand_idx, order, progs)

    workers = min(_threads(), len(slices))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(work, slices))
    else:
        parts = [work(sl) for sl in slices]

    def gather(key, src=None):
        items = [(pt if src is None else pt["scalars"][src])[key] for pt in parts]
        arr = np.concatenate(items, axis=0)
        return arr.reshape(chart.shape + arr.shape[1:])

    frame = AdaptedFrame(gather("vectors"), gather("theta"), gather("inv_theta"), gather("dtheta"), n, p,
                         tuple(cand_names))
    dgamma = gather("dgamma") if parts[0]["dgamma"] is not None else None
    geo = Geometry(imm, pts, gather("x"), frame, ConnectionForms(gather("gamma"), dgamma), gather("metric"),
                   fd_order)
    for key in progs:
        geo.scalars[key] = ScalarJetData(*(gather(f, key) for f in ("value", "frame_gradient", "hessian",
                                                                     "dhessian")))
    if check:
        validate_geometry(geo)
    return geo


def validate_geometry(geo: Geometry) -> None:
    """Model constraint, rank, orthonormality and frame continuity checks."""
    sf = geo.sf
    if sf.c != 0:
        bad = sf.constraint_residual(geo.x)
        if bad.max() > MODEL_TOL * max(1.0, 1.0 / abs(sf.c)):
            idx = np.unravel_index(int(bad.argmax()), bad.shape)
            raise ModelConstraintError("model constraint violated", stage="frames", location=idx)
    sv = np.linalg.svd(geo.metric, compute_uv=False)
    if sv[..., -1].min() <= 1e-20:
        idx = np.unravel_index(int(sv[..., -1].argmin()), sv.shape[:-1])
        raise DegenerateImmersion("degenerate point", stage="frames", location=idx)
    if orthonormality_residual(geo) > 1e-10:
        raise FrameDiscontinuity("frame lost orthonormality", stage="frames")
    V = geo.frame.vectors
    for axis, periodic in enumerate(geo.chart.periodic):
        nxt = np.roll(V, -1, axis=axis)
        dots = (V * nxt * sf.eta).sum(-1)
        if not periodic:
            sl = [slice(None)] * dots.ndim
            sl[axis] = slice(0, -1)
            dots = dots[tuple(sl)]
        if dots.min() <= 0.0:
            idx = np.unravel_index(int(dots.argmin()), dots.shape)
            raise FrameDiscontinuity("frame discontinuity", stage="frames", location=idx)


def orthonormality_residual(geo: Geometry) -> float:
    V = geo.frame.vectors
    gram = np.einsum("...an,...bn->...ab", V * geo.sf.eta, V)
    return float(np.abs(gram - np.eye(gram.shape[-1])).max())


# ---------------------------------------------------------------------------
# public operations


def orthonormal_adapted_frame(imm: ImmersionSpec, **kw) -> AdaptedFrame:
    return compute_geometry(imm, **kw).frame


def connection_coefficients(geo: Geometry) -> ConnectionForms:
    return geo.connection


def coordinate_connection(geo: Geometry, exact: bool = False):
    """omega^A_B(d_a) = sum_k Gamma[A,B,k] theta[k,a]; with ``exact`` also its derivatives."""
    gamma, theta = geo.gamma, geo.frame.theta
    form = np.einsum("...ABk,...ka->...ABa", gamma, theta)
    if not exact:
        return form, None
    dg = geo.connection.dgamma
    if dg is None:
        return form, None
    dform = (np.einsum("...ABkb,...ka->...ABab", dg, theta)
             + np.einsum("...ABk,...kab->...ABab", gamma, geo.frame.dtheta))
    return form, dform


def curvature_two_form(geo: Geometry, exact: bool = False, block: str = "full") -> np.ndarray:
    """Omega^A_B(d_a, d_b) from the connection forms.

    ``block`` restricts the quadratic sum over C: "full" (ambient), "tangent"
    (intrinsic curvature of M) or "normal" (curvature of the normal bundle).
    """
    form, dform = coordinate_connection(geo, exact)
    if dform is None:
        dform = geo.coordinate_gradient(form)
    # dform[..., a, b] = d_b omega(d_a)
    d = np.swapaxes(dform, -1, -2) - dform
    n = geo.n
    if block == "full":
        sl = slice(None)
    elif block == "tangent":
        sl = slice(0, n)
    elif block == "normal":
        sl = slice(n, None)
    else:
        raise ValueError(block)
    wa = form[..., :, sl, :]
    wb = form[..., sl, :, :]
    quad = np.einsum("...ACa,...CBb->...ABab", wa, wb)
    return d + quad - np.swapaxes(quad, -1, -2)


def frame_components(geo: Geometry, two_form: np.ndarray) -> np.ndarray:
    """Evaluate a coordinate 2-form on frame vectors: T(e_k, e_l)."""
    E = geo.frame.inv_theta
    return np.einsum("...ABab,...ak,...bl->...ABkl", two_form, E, E)


def structure_equation_residual(geo: Geometry, exact: bool = False) -> dict:
    """Max residuals of both structure equations pulled back to the chart."""
    n, sf = geo.n, geo.sf
    theta = geo.frame.theta
    full = np.zeros(geo.shape + (n + geo.p, n))
    full[..., :n, :] = theta
    form, _ = coordinate_connection(geo)
    if exact:
        dth = geo.frame.dtheta
        dth_full = np.zeros(geo.shape + (n + geo.p, n, n))
        dth_full[..., :n, :, :] = dth
    else:
        dth_full = geo.coordinate_gradient(full)
    # d theta^A (d_a, d_b) + (omega^A_B ^ theta^B)(d_a, d_b)
    dtheta = np.swapaxes(dth_full, -1, -2) - dth_full
    wedge = np.einsum("...ABa,...Bb->...Aab", form, full)
    first = dtheta + wedge - np.swapaxes(wedge, -1, -2)
    omega2 = curvature_two_form(geo, exact=exact, block="full")
    target = sf.c * (np.einsum("...Aa,...Bb->...ABab", full, full) - np.einsum("...Ab,...Ba->...ABab", full, full))
    second = omega2 - target
    return {"first": grid.nanmax_abs(first), "second": grid.nanmax_abs(second)}
