"""Normal-valued symmetric 2-tensors, their covariant derivatives and the Codazzi test.

Components are stored as ``comps[..., alpha, i, j]`` in the adapted frame.  In
intrinsic mode there is a single pseudo-normal slot and every normal
connection term drops out (the trivial immersion of M into itself).
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import grid
from .frames import Geometry

SYMMETRY_TOL = 1e-10


@dataclass
class NormalValuedSymTensor:
    comps: np.ndarray  # (*G, q, n, n)
    extrinsic: bool = True
    dcomps: np.ndarray | None = None  # exact coordinate derivatives (*G, q, n, n, n)
    label: str = "phi"
    codazzi_guaranteed: bool = True

    def __post_init__(self):
        asym = float(np.abs(self.comps - np.swapaxes(self.comps, -1, -2)).max(initial=0.0))
        if asym > SYMMETRY_TOL * max(1.0, float(np.abs(self.comps).max(initial=0.0))):
            raise ValueError(f"{self.label} is not symmetric (residual {asym:.2e})")

    @property
    def q(self) -> int:
        return self.comps.shape[-3]

    def __add__(self, other: "NormalValuedSymTensor") -> "NormalValuedSymTensor":
        if self.extrinsic != other.extrinsic:
            raise ValueError("cannot add extrinsic and intrinsic tensors")
        d = None if self.dcomps is None or other.dcomps is None else self.dcomps + other.dcomps
        return NormalValuedSymTensor(self.comps + other.comps, self.extrinsic, d, f"{self.label}+{other.label}",
                                     self.codazzi_guaranteed and other.codazzi_guaranteed)

    def scaled(self, s: float) -> "NormalValuedSymTensor":
        d = None if self.dcomps is None else s * self.dcomps
        return replace(self, comps=s * self.comps, dcomps=d, label=f"{s}*{self.label}")

    def squared_norm(self) -> np.ndarray:
        return (self.comps**2).sum(axis=(-3, -2, -1))

    def trace(self) -> np.ndarray:
        return np.trace(self.comps, axis1=-2, axis2=-1)


@dataclass
class CovariantDerivativeField:
    first: np.ndarray  # (*G, q, n, n, k)
    second: np.ndarray | None = None  # (*G, q, n, n, k, l)

    def squared_norm(self) -> np.ndarray:
        return (self.first**2).sum(axis=(-4, -3, -2, -1))


def _normal_block(geo: Geometry) -> np.ndarray:
    n = geo.n
    return geo.gamma[..., n:, n:, :]


def covariant_derivative(phi: NormalValuedSymTensor, geo: Geometry, mode: str = "fd") -> CovariantDerivativeField:
    """phi_{ij,k} = e_k(phi_ij) - phi_mj G^m_{i,k} - phi_im G^m_{j,k} + phi^b_ij G^a_{b,k}."""
    n = geo.n
    exact = phi.dcomps if mode == "dual" else None
    d = geo.frame_derivative(phi.comps, exact)
    tang = geo.gamma[..., :n, :n, :]
    out = d - np.einsum("...amj,...mik->...aijk", phi.comps, tang) - np.einsum("...aim,...mjk->...aijk", phi.comps,
                                                                               tang)
    if phi.extrinsic and geo.p:
        out = out + np.einsum("...bij,...abk->...aijk", phi.comps, _normal_block(geo))
    return CovariantDerivativeField(out)


def second_covariant_derivative(D: CovariantDerivativeField, phi: NormalValuedSymTensor,
                                geo: Geometry) -> CovariantDerivativeField:
    """Connection-corrected derivative of phi_{ij,k} along e_l (finite differences in the chart)."""
    n = geo.n
    first = D.first
    d = geo.frame_derivative(first)
    tang = geo.gamma[..., :n, :n, :]
    out = (d
           - np.einsum("...amjk,...mil->...aijkl", first, tang)
           - np.einsum("...aimk,...mjl->...aijkl", first, tang)
           - np.einsum("...aijm,...mkl->...aijkl", first, tang))
    if phi.extrinsic and geo.p:
        out = out + np.einsum("...bijk,...abl->...aijkl", first, _normal_block(geo))
    return CovariantDerivativeField(first, out)


def codazzi_defect(D: CovariantDerivativeField) -> np.ndarray:
    return D.first - np.swapaxes(D.first, -1, -2)


def codazzi_residual(D: CovariantDerivativeField) -> float:
    """max |phi_{ij,k} - phi_{ik,j}| over interior samples."""
    return grid.nanmax_abs(codazzi_defect(D))


def commutator_sides(phi: NormalValuedSymTensor, D2: CovariantDerivativeField, riemann: np.ndarray,
                     normal_riemann: np.ndarray | None):
    """Both sides of the Hessian commutation rule, indexed [..., a, i, j, k, l]."""
    lhs = D2.second - np.swapaxes(D2.second, -1, -2)
    # R^m_{ilk}: riemann[..., m, i, l, k]
    rhs = -(np.einsum("...amj,...milk->...aijkl", phi.comps, riemann)
            + np.einsum("...aim,...mjlk->...aijkl", phi.comps, riemann))
    if phi.extrinsic and normal_riemann is not None and normal_riemann.shape[-4] == phi.q:
        rhs = rhs + np.einsum("...bij,...ablk->...aijkl", phi.comps, normal_riemann)
    return lhs, rhs


def commutator_residual(phi: NormalValuedSymTensor, D2: CovariantDerivativeField, riemann: np.ndarray,
                        normal_riemann: np.ndarray | None) -> float:
    lhs, rhs = commutator_sides(phi, D2, riemann, normal_riemann)
    return grid.nanmax_abs(lhs - rhs)


# ---------------------------------------------------------------------------
# constructors


def second_fundamental_tensor(geo: Geometry) -> NormalValuedSymTensor:
    n = geo.n
    h = geo.gamma[..., n:, :n, :]
    dh = None if geo.connection.dgamma is None else geo.connection.dgamma[..., n:, :n, :, :]
    return NormalValuedSymTensor(h, True, dh, "h")


def metric_tensor(geo: Geometry, scale: float = 1.0) -> NormalValuedSymTensor:
    n = geo.n
    comps = np.broadcast_to(scale * np.eye(n), geo.shape + (1, n, n)).copy()
    return NormalValuedSymTensor(comps, False, np.zeros(comps.shape + (n,)), f"{scale}*g")


def hessian_codazzi(geo: Geometry, key: str, curvature: float, constant_curvature: bool = True
                    ) -> NormalValuedSymTensor:
    """Hess f + K f g from the scalar ``key`` computed in the jet stage (intrinsic mode)."""
    n = geo.n
    s = geo.scalars[key]
    eye = np.eye(n)
    comps = s.hessian + curvature * s.value[..., None, None] * eye
    coord_grad = np.einsum("...ka,...k->...a", geo.frame.theta, s.frame_gradient)
    dcomps = s.dhessian + curvature * np.einsum("...a,ij->...ija", coord_grad, eye)
    return NormalValuedSymTensor(comps[..., None, :, :], False, dcomps[..., None, :, :, :], f"phi_f[{key}]",
                                 constant_curvature)


def random_symmetric_field(geo: Geometry, seed: int = 42, q: int = 1, extrinsic: bool = False,
                           terms: int = 3) -> NormalValuedSymTensor:
    """Smooth symmetric field from fixed-seed trigonometric polynomials in the chart coordinates.

    Frequencies are whole periods over each axis so the field stays periodic
    on periodic axes.
    """
    rng = np.random.default_rng(seed)
    n = geo.n
    chart = geo.chart
    phases = [2 * np.pi * (u - a) / (b - a) for u, a, b in zip(geo.points, chart.lower, chart.upper)]
    comps = np.zeros(geo.shape + (q, n, n))
    for al in range(q):
        for i in range(n):
            for j in range(i, n):
                val = np.full(geo.shape, rng.normal())
                for _ in range(terms):
                    k = rng.integers(0, 3, size=n)
                    arg = sum(int(kk) * ph for kk, ph in zip(k, phases))
                    val = val + rng.normal() * np.sin(arg) + rng.normal() * np.cos(arg)
                comps[..., al, i, j] = val
                comps[..., al, j, i] = val
    return NormalValuedSymTensor(comps, extrinsic, None, f"random[{seed}]", False)


def random_trig_potential(seed: int, embedding_dim: int, terms: int = 3) -> str:
    """Expression for a fixed-seed trigonometric polynomial in the embedding coordinates."""
    rng = np.random.default_rng(seed)
    parts = [f"{rng.normal():.6f}"]
    for _ in range(terms):
        k = rng.integers(-2, 3, size=embedding_dim)
        arg = " + ".join(f"{int(kk)}*x{i + 1}" for i, kk in enumerate(k) if kk) or "0"
        parts.append(f"{rng.normal():.6f}*sin({arg}) + {rng.normal():.6f}*cos({arg})")
    return " + ".join(parts)
