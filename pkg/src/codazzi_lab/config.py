"""Scenario configuration: a flat ``dotted.key = value`` text format.

One key per line, ``#`` starts a comment.  Lists are comma separated.
Example::

    immersion.name = clifford_torus
    immersion.params.a = 0.6
    immersion.params.b = 0.8
    grid.n1 = 128
    grid.n2 = 128
    checks = decompose, simons5
    tol.codazzi_h = 1e-6
    phi.kind = h
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

from .errors import ConfigError
from .geometry import CATALOG

CHECKS = (
    "structure", "gauss", "codazzi_h", "ricci", "ricci_tensor", "codazzi", "commutator", "parallelism",
    "spectrum", "simons5", "simons6", "stokes", "decompose", "umbilicity", "derdzinski",
)

#: direct prerequisites; CHECKS is already in dependency order
PREREQUISITES = {
    "structure": (),
    "gauss": ("structure",),
    "codazzi_h": ("structure",),
    "ricci": ("structure",),
    "ricci_tensor": ("gauss",),
    "codazzi": ("structure",),
    "commutator": ("codazzi",),
    "parallelism": ("structure",),
    "spectrum": ("structure",),
    "simons5": ("parallelism", "spectrum", "codazzi"),
    "simons6": ("spectrum", "codazzi", "ricci"),
    "stokes": ("simons5",),
    "decompose": ("parallelism", "spectrum"),
    "umbilicity": ("spectrum",),
    "derdzinski": ("spectrum",),
}

PHI_KINDS = ("h", "hessian_codazzi", "metric", "random", "combination")
MODES = ("dual", "fd")
STENCILS = ("2", "4", "6", "spectral")


def check_closure(checks) -> tuple[str, ...]:
    """Requested checks plus all prerequisites, in pipeline order."""
    want: set[str] = set()
    stack = list(checks)
    while stack:
        c = stack.pop()
        if c not in PREREQUISITES:
            raise ConfigError(f"unknown check {c!r}", field="checks")
        if c not in want:
            want.add(c)
            stack.extend(PREREQUISITES[c])
    return tuple(c for c in CHECKS if c in want)


@dataclass(frozen=True)
class InlineImmersion:
    coords: tuple[str, ...]
    components: tuple[str, ...]
    curvature: float
    ambient_dim: int
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    periodic: tuple[bool, ...]


@dataclass(frozen=True)
class PhiSpec:
    kind: str = "h"
    f: str | None = None
    curvature: float | None = None  # K in Hess f + K f g; inferred when None
    parts: tuple[str, ...] = ()
    coefficients: tuple[float, ...] = ()
    extrinsic: bool = False  # random fields only


@dataclass(frozen=True)
class ScenarioConfig:
    immersion: str
    params: dict = field(default_factory=dict)
    inline: InlineImmersion | None = None
    grid: tuple[int, ...] | None = None
    mode: str = "dual"
    stencil: str = "spectral"
    checks: tuple[str, ...] = ()
    tol: dict = field(default_factory=dict)
    phi: PhiSpec = PhiSpec()
    seed: int = 42
    name: str | None = None

    def __post_init__(self):
        if self.inline is None and self.immersion not in CATALOG:
            raise ConfigError(f"unknown catalog entry {self.immersion!r}", field="immersion.name")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}", field="mode")
        if self.stencil not in STENCILS:
            raise ConfigError(f"stencil must be one of {STENCILS}", field="fd.stencil")
        for k, v in self.tol.items():
            if k not in PREREQUISITES:
                raise ConfigError(f"tolerance for unknown check {k!r}", field=f"tol.{k}")
            if not v > 0:
                raise ConfigError("tolerances must be positive", field=f"tol.{k}")
        if self.phi.kind not in PHI_KINDS:
            raise ConfigError(f"phi.kind must be one of {PHI_KINDS}", field="phi.kind")
        if self.grid is not None and any(n < 8 for n in self.grid):
            raise ConfigError("grid resolution below 8", field="grid")
        object.__setattr__(self, "checks", check_closure(self.checks))

    @property
    def fd_order(self) -> int | str:
        return self.stencil if self.stencil == "spectral" else int(self.stencil)

    def with_overrides(self, grid: int | None = None, tol: dict | None = None, mode: str | None = None
                       ) -> "ScenarioConfig":
        new_grid = self.grid
        if grid is not None:
            new_grid = (grid,)
        return replace(self, grid=new_grid, tol={**self.tol, **(tol or {})}, mode=mode or self.mode)

    def to_dict(self) -> dict:
        return parse_pairs(emit_pairs(self))


# ---------------------------------------------------------------------------
# text format


def _scalar(text: str):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ", ".join(_fmt(x) for x in v)
    return str(v)


def parse_pairs(pairs: list[tuple[str, str, int]]) -> dict:
    return {k: v for k, v, _ in pairs}


def read_pairs(text: str) -> list[tuple[str, str, int]]:
    out = []
    seen: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key or any(not part for part in key.split(".")):
            raise ConfigError("malformed key", line=lineno)
        if key in seen:
            raise ConfigError(f"duplicate key (first on line {seen[key]})", line=lineno, field=key)
        seen[key] = lineno
        out.append((key, value, lineno))
    return out


def _split_list(value: str) -> list[str]:
    return [s.strip() for s in value.split(",") if s.strip()]


def parse_config(text: str) -> ScenarioConfig:
    pairs = read_pairs(text)
    where = {k: ln for k, _, ln in pairs}
    kv = {k: v for k, v, _ in pairs}

    def fail(msg, key):
        raise ConfigError(msg, line=where.get(key), field=key)

    def num(key, conv=float):
        try:
            return conv(kv[key])
        except ValueError:
            fail(f"expected a number, got {kv[key]!r}", key)

    name = kv.get("immersion.name")
    if name is None:
        raise ConfigError("missing immersion.name", field="immersion.name")
    params = {}
    for k in kv:
        if k.startswith("immersion.params."):
            params[k[len("immersion.params."):]] = _scalar(kv[k])
    inline = None
    if name == "inline":
        try:
            coords = tuple(_split_list(kv["immersion.coords"]))
            comps = tuple(s.strip() for s in kv["immersion.components"].split(";"))
            inline = InlineImmersion(
                coords, comps, num("immersion.target.c"), num("immersion.target.dim", int),
                tuple(float(x) for x in _split_list(kv["chart.lower"])),
                tuple(float(x) for x in _split_list(kv["chart.upper"])),
                tuple(_scalar(x) is True for x in _split_list(kv["chart.periodic"])),
            )
        except KeyError as exc:
            raise ConfigError(f"inline immersion needs {exc.args[0]}", field=exc.args[0]) from None
        except ValueError as exc:
            raise ConfigError(f"bad inline chart: {exc}") from None
        n = len(inline.coords)
        if not (len(inline.lower) == len(inline.upper) == len(inline.periodic) == n):
            raise ConfigError("chart.lower/upper/periodic must have one entry per coordinate", field="chart")

    grid_keys = sorted((k for k in kv if k.startswith("grid.n")), key=lambda k: int(k[6:]) if k[6:].isdigit() else -1)
    grid = None
    if grid_keys:
        for i, k in enumerate(grid_keys, 1):
            if k != f"grid.n{i}":
                fail("grid axes must be numbered grid.n1, grid.n2, ...", k)
        grid = tuple(num(k, int) for k in grid_keys)

    tol = {}
    for k in kv:
        if k.startswith("tol."):
            tol[k[4:]] = num(k)

    phi = PhiSpec(
        kind=kv.get("phi.kind", "h"),
        f=kv.get("phi.f"),
        curvature=num("phi.curvature") if "phi.curvature" in kv else None,
        parts=tuple(_split_list(kv.get("phi.parts", ""))),
        coefficients=tuple(float(x) for x in _split_list(kv.get("phi.coefficients", ""))),
        extrinsic=_scalar(kv.get("phi.extrinsic", "false")) is True,
    )
    if phi.kind == "combination" and len(phi.parts) != len(phi.coefficients):
        fail("phi.parts and phi.coefficients differ in length", "phi.coefficients")
    if "hessian_codazzi" in (phi.kind,) + phi.parts and not phi.f:
        raise ConfigError("hessian_codazzi needs phi.f", field="phi.f")

    known = {"immersion.name", "immersion.coords", "immersion.components", "immersion.target.c",
             "immersion.target.dim", "chart.lower", "chart.upper", "chart.periodic", "mode", "fd.stencil",
             "checks", "seed", "name", "phi.kind", "phi.f", "phi.curvature", "phi.parts", "phi.coefficients",
             "phi.extrinsic"}
    for k in kv:
        if k in known or k.startswith(("immersion.params.", "tol.", "grid.n")):
            continue
        fail("unknown key", k)

    try:
        return ScenarioConfig(
            immersion=name,
            params=params,
            inline=inline,
            grid=grid,
            mode=kv.get("mode", "dual"),
            stencil=kv.get("fd.stencil", "spectral"),
            checks=tuple(_split_list(kv.get("checks", ""))),
            tol=tol,
            phi=phi,
            seed=num("seed", int) if "seed" in kv else 42,
            name=kv.get("name"),
        )
    except ConfigError as exc:
        if exc.line is None and exc.field in where:
            raise ConfigError(str(exc.args[0]), line=where[exc.field], field=exc.field) from None
        raise


def emit_pairs(cfg: ScenarioConfig) -> list[tuple[str, str, int]]:
    out: list[tuple[str, object]] = []
    if cfg.name is not None:
        out.append(("name", cfg.name))
    out.append(("immersion.name", cfg.immersion))
    for k in sorted(cfg.params):
        out.append((f"immersion.params.{k}", cfg.params[k]))
    if cfg.inline is not None:
        il = cfg.inline
        out += [("immersion.coords", il.coords), ("immersion.components", "; ".join(il.components)),
                ("immersion.target.c", il.curvature), ("immersion.target.dim", il.ambient_dim),
                ("chart.lower", il.lower), ("chart.upper", il.upper), ("chart.periodic", il.periodic)]
    if cfg.grid is not None:
        out += [(f"grid.n{i}", n) for i, n in enumerate(cfg.grid, 1)]
    out += [("mode", cfg.mode), ("fd.stencil", cfg.stencil), ("seed", cfg.seed), ("checks", cfg.checks)]
    out += [(f"tol.{k}", cfg.tol[k]) for k in sorted(cfg.tol)]
    p = cfg.phi
    out.append(("phi.kind", p.kind))
    if p.f is not None:
        out.append(("phi.f", p.f))
    if p.curvature is not None:
        out.append(("phi.curvature", p.curvature))
    if p.parts:
        out += [("phi.parts", p.parts), ("phi.coefficients", p.coefficients)]
    if p.extrinsic:
        out.append(("phi.extrinsic", True))
    return [(k, _fmt(v), i) for i, (k, v) in enumerate(out, 1)]


def emit_config(cfg: ScenarioConfig) -> str:
    return "".join(f"{k} = {v}\n" for k, v, _ in emit_pairs(cfg))


def load_config(path) -> ScenarioConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text)
