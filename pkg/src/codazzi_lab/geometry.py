"""Space-form models, chart domains, parametric immersions and their jets."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import CatalogError, ChartError, DegenerateImmersion, ModelConstraintError
from .expr import compile_expression
from .jets import Jet, multi_indices

MODEL_TOL = 1e-12
RANK_TOL = 1e-10
#: default width of the excluded band at polar coordinate singularities
POLE_BAND = 0.3


@dataclass(frozen=True)
class SpaceForm:
    """Simply connected space form of curvature ``c`` via its standard quadric."""

    c: float
    ambient_dim: int

    def __post_init__(self):
        if self.ambient_dim < 1:
            raise ValueError("ambient dimension must be positive")

    @property
    def model(self) -> str:
        if self.c == 0:
            return "flat"
        return "spherical" if self.c > 0 else "hyperbolic"

    @property
    def embedding_dim(self) -> int:
        return self.ambient_dim + (0 if self.c == 0 else 1)

    @property
    def signature(self) -> tuple[int, ...]:
        sig = [1] * self.embedding_dim
        if self.c < 0:
            sig[0] = -1
        return tuple(sig)

    @property
    def eta(self) -> np.ndarray:
        return np.array(self.signature, dtype=float)

    @property
    def radius(self) -> float:
        return math.inf if self.c == 0 else 1.0 / math.sqrt(abs(self.c))

    def inner(self, u, v):
        """Model (possibly Lorentzian) inner product along the last axis."""
        prod = u * v
        if self.c < 0:
            prod = prod * self.eta
        return prod.sum(axis=-1)

    def constraint_residual(self, x: np.ndarray) -> np.ndarray:
        """|<X,X> - 1/c| for curved models, zero for the flat one."""
        if self.c == 0:
            return np.zeros(x.shape[:-1])
        return np.abs(self.inner(x, x) - 1.0 / self.c)

    def to_dict(self) -> dict:
        return {"c": self.c, "ambient_dim": self.ambient_dim}


def ambient_curvature(sf: SpaceForm, A: int, B: int, C: int, D: int) -> float:
    """Curvature tensor of the space form: (delta^A_C delta_BD - delta^A_D delta_BC) c."""
    return ((A == C) * (B == D) - (A == D) * (B == C)) * sf.c


def ambient_riemann(sf: SpaceForm) -> np.ndarray:
    """Full tensor R~[A,B,C,D] over an orthonormal frame of the ambient space."""
    d = sf.ambient_dim
    eye = np.eye(d)
    return sf.c * (np.einsum("ac,bd->abcd", eye, eye) - np.einsum("ad,bc->abcd", eye, eye))


@dataclass(frozen=True)
class ChartDomain:
    """Box chart with per-axis periodicity and sampling resolution.

    Periodic axes are sampled at ``a + k L / N``; the others on the open
    midpoint grid ``a + (k + 1/2) L / N``.  ``weighted`` marks axes that carry a
    declared latitude quadrature weight (the sphere chart), which makes the chart
    count as closed for integration.
    """

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    periodic: tuple[bool, ...]
    resolution: tuple[int, ...]
    weighted: tuple[bool, ...] = ()

    def __post_init__(self):
        n = len(self.lower)
        if not (len(self.upper) == len(self.periodic) == len(self.resolution) == n):
            raise ChartError("chart axis descriptions have inconsistent lengths")
        if not self.weighted:
            object.__setattr__(self, "weighted", (False,) * n)
        for a, b in zip(self.lower, self.upper):
            if not b > a:
                raise ChartError(f"empty chart interval [{a}, {b}]")
        for r in self.resolution:
            if r < 8:
                raise ChartError(f"resolution {r} below minimum of 8 per axis")

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.resolution)

    @property
    def closed(self) -> bool:
        return all(p or w for p, w in zip(self.periodic, self.weighted))

    @property
    def fully_periodic(self) -> bool:
        return all(self.periodic)

    def spacing(self) -> tuple[float, ...]:
        return tuple((b - a) / n for a, b, n in zip(self.lower, self.upper, self.resolution))

    def axes(self) -> list[np.ndarray]:
        out = []
        for a, b, n, p in zip(self.lower, self.upper, self.resolution, self.periodic):
            h = (b - a) / n
            k = np.arange(n, dtype=float)
            out.append(a + k * h if p else a + (k + 0.5) * h)
        return out

    def points(self) -> list[np.ndarray]:
        return list(np.meshgrid(*self.axes(), indexing="ij"))

    def with_resolution(self, resolution) -> "ChartDomain":
        """Resample; an integer sets the finest axis and keeps the axis ratios."""
        if isinstance(resolution, int):
            top = max(self.resolution)
            resolution = tuple(max(8, round(r * resolution / top)) for r in self.resolution)
        return replace(self, resolution=tuple(int(r) for r in resolution))

    def contains(self, u) -> bool:
        return all(a <= x <= b for a, b, x in zip(self.lower, self.upper, u))


@dataclass(frozen=True)
class ImmersionSpec:
    """Parametric immersion of a chart into a space-form model.

    ``components`` are expression programs in the chart coordinate names; they
    evaluate on floats, arrays and jets alike.
    """

    name: str
    params: dict
    target: SpaceForm
    chart: ChartDomain
    coords: tuple[str, ...]
    components: tuple[str, ...]
    _programs: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        if len(self.coords) != self.chart.dim:
            raise ChartError("coordinate names do not match chart dimension")
        if len(self.components) != self.target.embedding_dim:
            raise ChartError(
                f"{len(self.components)} components for embedding dimension {self.target.embedding_dim}"
            )
        progs = tuple(compile_expression(src, self.coords) for src in self.components)
        object.__setattr__(self, "_programs", progs)

    @property
    def dim(self) -> int:
        return self.chart.dim

    @property
    def codim(self) -> int:
        return self.target.ambient_dim - self.dim

    def evaluate(self, u: Sequence):
        """Evaluate the immersion; jets in -> stacked jet out, arrays in -> array out."""
        vals = [prog(*u) for prog in self._programs]
        if any(isinstance(v, Jet) for v in vals):
            ref = next(v for v in vals if isinstance(v, Jet))
            vals = [v if isinstance(v, Jet) else Jet.constant(np.broadcast_to(v, ref.shape), ref.nvars, ref.order)
                    for v in vals]
            return Jet.stack(vals, axis=-1)
        shape = np.broadcast_shapes(*(np.shape(x) for x in u))
        return np.stack([np.broadcast_to(np.asarray(v, dtype=float), shape) for v in vals], axis=-1)

    def with_resolution(self, resolution) -> "ImmersionSpec":
        return replace(self, chart=self.chart.with_resolution(resolution))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "params": dict(self.params),
            "target": self.target.to_dict(),
            "coords": list(self.coords),
            "components": list(self.components),
        }


# ---------------------------------------------------------------------------
# jets of an immersion


_FD_STENCILS = {
    0: {0: 1.0},
    1: {-1: -0.5, 1: 0.5},
    2: {-1: 1.0, 0: -2.0, 1: 1.0},
    3: {-2: -0.5, -1: 1.0, 1: -1.0, 2: 0.5},
    4: {-2: 1.0, -1: -4.0, 0: 6.0, 1: -4.0, 2: 1.0},
}


def _fd_partial(imm: ImmersionSpec, u, m, steps) -> np.ndarray:
    """Central-difference mixed partial, second-order accurate in each step."""
    terms = [((), 1.0)]
    for a, k in enumerate(m):
        terms = [(off + (s,), w * c / steps[a] ** k) for off, w in terms for s, c in _FD_STENCILS[k].items()]
    total = 0.0
    for off, w in terms:
        pt = [u[a] + off[a] * steps[a] for a in range(len(u))]
        total = total + w * imm.evaluate([np.asarray(x, dtype=float) for x in pt])
    return total


def evaluate_jet(imm: ImmersionSpec, u, order: int = 4, method: str = "dual",
                 step: float = 1e-4, check: bool = True) -> Jet:
    """Jet of the immersion at chart point ``u`` up to ``order`` (at most 4).

    ``method="dual"`` pushes seeded Taylor variables through the expression
    program; ``method="fd"`` is the independent finite-difference oracle with
    step ``step`` times the axis extent (enlarged for orders above two so
    rounding stays below truncation error).
    """
    if order > 4 or order < 0:
        raise ValueError("jet order must be in 0..4")
    u = [float(x) for x in u]
    if len(u) != imm.dim:
        raise ValueError("chart point has wrong dimension")
    if not imm.chart.contains(u):
        raise ChartError(f"point {u} outside chart domain", stage="jet")
    if method == "dual":
        jet = imm.evaluate(Jet.variables([np.asarray(x) for x in u], order))
    elif method == "fd":
        extent = [b - a for a, b in zip(imm.chart.lower, imm.chart.upper)]
        derivs = {}
        for m in multi_indices(imm.dim, order):
            k = sum(m)
            h = step if k <= 2 else max(step, np.finfo(float).eps ** (1.0 / (k + 2)))
            derivs[m] = _fd_partial(imm, u, m, [h * e for e in extent])
        jet = Jet.from_derivatives(derivs, imm.dim, order)
    else:
        raise ValueError(f"unknown differentiation method {method!r}")
    if check:
        x = jet.value
        if imm.target.c != 0 and float(imm.target.constraint_residual(x)) > MODEL_TOL:
            raise ModelConstraintError("model constraint violated", stage="jet", location=tuple(u))
        if order >= 1:
            jac = np.stack([jet.d(a).value for a in range(imm.dim)], axis=0)
            sv = np.linalg.svd(jac, compute_uv=False)
            if sv[-1] <= RANK_TOL * max(sv[0], 1.0):
                raise DegenerateImmersion("degenerate immersion point", stage="jet", location=tuple(u))
    return jet


# ---------------------------------------------------------------------------
# catalog

TWO_PI = 2.0 * math.pi


def _sphere_coords(prefix: str, k: int) -> list[str]:
    if k == 1:
        return [f"{prefix}"]
    return [f"{prefix}{i}" for i in range(1, k)] + [f"{prefix}phi"]


def _sphere_exprs(coords: list[str], scale: str) -> list[str]:
    """Hyperspherical parametrisation of S^k: (sin t1 * Y_{k-1}, cos t1)."""
    if len(coords) == 1:
        return [f"{scale}*cos({coords[0]})", f"{scale}*sin({coords[0]})"]
    t = coords[0]
    inner = _sphere_exprs(coords[1:], f"{scale}*sin({t})")
    return inner + [f"{scale}*cos({t})"]


def _sphere_axes(k: int, band: float):
    """Per-axis (lower, upper, periodic, weighted) for the S^k chart."""
    axes = [(band, math.pi - band, False, band == 0)] * (k - 1)
    axes.append((0.0, TWO_PI, True, False))
    return axes


def _build(name, params, sf, axes, coords, comps, resolution) -> ImmersionSpec:
    if isinstance(resolution, int):
        resolution = (resolution,) * len(axes)
    chart = ChartDomain(
        lower=tuple(a[0] for a in axes),
        upper=tuple(a[1] for a in axes),
        periodic=tuple(a[2] for a in axes),
        resolution=tuple(resolution),
        weighted=tuple(a[3] for a in axes),
    )
    return ImmersionSpec(name, params, sf, chart, tuple(coords), tuple(comps))


def _num(x) -> str:
    return repr(float(x))


def _unit_pair(a, b, what):
    if a <= 0 or b <= 0 or abs(a * a + b * b - 1.0) > 1e-12:
        raise CatalogError(f"catalog constraint: {what} needs a, b > 0 with a^2 + b^2 = 1 (got {a}, {b})")


def round_sphere(n: int = 2, r: float = 1.0, band: float = POLE_BAND, resolution=128) -> ImmersionSpec:
    if n < 1 or r <= 0:
        raise CatalogError("catalog constraint: round_sphere needs n >= 1 and r > 0")
    coords = ["phi"] if n == 1 else ["theta"] + [f"t{i}" for i in range(2, n)] + ["phi"]
    comps = _sphere_exprs(coords, _num(r))
    return _build("round_sphere", {"n": n, "r": r}, SpaceForm(0.0, n + 1), _sphere_axes(n, band), coords, comps,
                  resolution)


def clifford_torus(a: float = 2**-0.5, b: float = 2**-0.5, resolution=128) -> ImmersionSpec:
    _unit_pair(a, b, "clifford_torus")
    comps = [f"{_num(a)}*cos(u)", f"{_num(a)}*sin(u)", f"{_num(b)}*cos(v)", f"{_num(b)}*sin(v)"]
    axes = [(0.0, TWO_PI, True, False)] * 2
    return _build("clifford_torus", {"a": a, "b": b}, SpaceForm(1.0, 3), axes, ["u", "v"], comps, resolution)


def flat_torus_R4(a: float = 1.0, b: float = 2.0, resolution=128) -> ImmersionSpec:
    if a <= 0 or b <= 0:
        raise CatalogError("catalog constraint: flat_torus_R4 radii must be positive")
    comps = [f"{_num(a)}*cos(u)", f"{_num(a)}*sin(u)", f"{_num(b)}*cos(v)", f"{_num(b)}*sin(v)"]
    axes = [(0.0, TWO_PI, True, False)] * 2
    return _build("flat_torus_R4", {"a": a, "b": b}, SpaceForm(0.0, 4), axes, ["u", "v"], comps, resolution)


def sphere_product(p: int = 1, q: int = 2, a: float = 0.5, b: float = 0.75**0.5,
                   band: float = POLE_BAND, resolution=None) -> ImmersionSpec:
    """S^p(a) x S^q(b) in the unit sphere S^(p+q+1).

    By default polar axes get 128 samples and azimuths 16: the product is
    homogeneous along every azimuth, so resolution there buys nothing.
    """
    if p < 1 or q < 1:
        raise CatalogError("catalog constraint: sphere_product needs p, q >= 1")
    _unit_pair(a, b, "sphere_product")
    cs = ["s"] if p == 1 else [f"s{i}" for i in range(1, p)] + ["sphi"]
    ct = ["t"] if q == 1 else [f"t{i}" for i in range(1, q)] + ["tphi"]
    comps = _sphere_exprs(cs, _num(a)) + _sphere_exprs(ct, _num(b))
    axes = _sphere_axes(p, band) + _sphere_axes(q, band)
    if resolution is None:
        resolution = tuple(16 if periodic else 128 for _, _, periodic, _ in axes)
    return _build("sphere_product", {"p": p, "q": q, "a": a, "b": b}, SpaceForm(1.0, p + q + 1), axes, cs + ct,
                  comps, resolution)


def ellipsoid(a: float = 2.0, b: float = 1.0, c: float = 1.0, band: float = POLE_BAND,
              resolution=128) -> ImmersionSpec:
    if min(a, b, c) <= 0:
        raise CatalogError("catalog constraint: ellipsoid semi-axes must be positive")
    comps = [f"{_num(a)}*cos(u)*cos(v)", f"{_num(b)}*cos(u)*sin(v)", f"{_num(c)}*sin(u)"]
    axes = [(-math.pi / 2 + band, math.pi / 2 - band, False, band == 0), (0.0, TWO_PI, True, False)]
    return _build("ellipsoid", {"a": a, "b": b, "c": c}, SpaceForm(0.0, 3), axes, ["u", "v"], comps, resolution)


def torus_of_revolution(R: float = 2.0, r: float = 1.0, resolution=128) -> ImmersionSpec:
    if not (R > r > 0):
        raise CatalogError("catalog constraint: torus_of_revolution needs R > r > 0")
    comps = [f"({_num(R)} + {_num(r)}*cos(v))*cos(u)", f"({_num(R)} + {_num(r)}*cos(v))*sin(u)",
             f"{_num(r)}*sin(v)"]
    axes = [(0.0, TWO_PI, True, False)] * 2
    return _build("torus_of_revolution", {"R": R, "r": r}, SpaceForm(0.0, 3), axes, ["u", "v"], comps, resolution)


DEFAULT_GRAPH = ("0.5*u*u + 0.3*u*v - 0.2*v*v", "0.1*u*u - 0.4*u*v + 0.6*v*v")


def graph_immersion(f: Sequence[str] = DEFAULT_GRAPH, coords: Sequence[str] = ("u", "v"),
                    half_width: float = 1.0, resolution=128) -> ImmersionSpec:
    """Graph u -> (u, f(u)) of a map R^n -> R^p into flat R^(n+p)."""
    f = tuple(f.split(";")) if isinstance(f, str) else tuple(f)
    coords = list(coords)
    comps = list(coords) + [s.strip() for s in f]
    axes = [(-half_width, half_width, False, False)] * len(coords)
    return _build("graph_immersion", {"f": ";".join(s.strip() for s in f)}, SpaceForm(0.0, len(comps)), axes,
                  coords, comps, resolution)


CATALOG: dict[str, Callable[..., ImmersionSpec]] = {
    "round_sphere": round_sphere,
    "clifford_torus": clifford_torus,
    "flat_torus_R4": flat_torus_R4,
    "sphere_product": sphere_product,
    "ellipsoid": ellipsoid,
    "torus_of_revolution": torus_of_revolution,
    "graph_immersion": graph_immersion,
}


def catalog(name: str, **params) -> ImmersionSpec:
    try:
        factory = CATALOG[name]
    except KeyError:
        raise CatalogError(f"unknown catalog entry {name!r}") from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise CatalogError(f"bad parameters for {name}: {exc}") from None


def inline_immersion(name: str, coords: Sequence[str], components: Sequence[str], c: float, ambient_dim: int,
                     lower, upper, periodic, resolution, weighted=None, params=None) -> ImmersionSpec:
    chart = ChartDomain(tuple(map(float, lower)), tuple(map(float, upper)), tuple(map(bool, periodic)),
                        tuple(map(int, resolution)), tuple(map(bool, weighted or ())))
    return ImmersionSpec(name, dict(params or {}), SpaceForm(float(c), int(ambient_dim)), chart, tuple(coords),
                         tuple(components))
