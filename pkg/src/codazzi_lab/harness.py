"""Scenario pipeline, convergence studies and report emission."""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import codazzi as cz
from . import decompose as dc
from . import fundforms as ff
from . import spectral as sp
from .config import ScenarioConfig
from .errors import ChartError, ConfigError, HypothesisError
from .frames import Geometry, compute_geometry, orthonormality_residual, structure_equation_residual
from .geometry import ImmersionSpec, catalog, inline_immersion

SCHEMA = "codazzi-lab/1"

DEFAULT_TOL = {
    "structure": 1e-8,
    "gauss": 1e-5,
    "codazzi_h": 1e-8,
    "ricci": 1e-5,
    "ricci_tensor": 1e-5,
    "codazzi": 1e-5,
    "commutator": 1e-4,
    "parallelism": 1e-6,
    "spectrum": 1e-10,
    "simons5": 1e-6,
    "simons6": 1e-3,
    "stokes": 1e-6,
    "decompose": 1e-6,
    "umbilicity": 1e-8,
    "derdzinski": 1e-4,
}
#: looser defaults when derivatives come from the grid instead of jets
FD_TOL = {"structure": 1e-6, "codazzi_h": 1e-6}
#: derdzinski tolerance when every eigenvalue is constant (invariant-subspace form)
INVARIANT_SUBSPACE_TOL = 1e-6

ANCHORS = {
    "structure": "structure equations: d theta = -omega ^ theta, d omega = -omega ^ omega + Omega",
    "gauss": "Gauss equation",
    "codazzi_h": "Codazzi equation for the second fundamental form",
    "ricci": "Ricci equation for the normal curvature",
    "ricci_tensor": "harmonic curvature: the Ricci tensor satisfies the Codazzi equation",
    "codazzi": "Codazzi equation phi_ij,k = phi_ik,j",
    "commutator": "commutation rule for second covariant derivatives",
    "parallelism": "parallel mean curvature: d phibar = 0 and omega^{n+1}_b = 0",
    "spectrum": "eigenframe phi^{n+1}_ij = lambda_i delta_ij",
    "simons5": "Simons-type identity under parallel mean curvature",
    "simons6": "Simons-type identity with flat normal bundle",
    "stokes": "integral identity from Stokes' theorem",
    "decompose": "local product decomposition M = M_1 x ... x M_l",
    "umbilicity": "phi^{n+1} is a constant multiple of the metric",
    "derdzinski": "A(nabla_v u) = lambda nabla_v u + d lambda(v) u - <u,v> grad lambda",
}

STATUS_PASS, STATUS_FAIL, STATUS_HYP = "pass", "fail", "hypotheses not met"
#: residuals below this are round-off; convergence orders are not estimated from them
ROUNDOFF_FLOOR = 1e-11


@dataclass
class CheckRecord:
    name: str
    residual: float | None
    tolerance: float
    passed: bool
    status: str
    anchor: str
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "residual": self.residual,
            "tolerance": self.tolerance,
            "pass": self.passed,
            "status": self.status,
            "anchor": self.anchor,
            "details": self.details,
        }


@dataclass
class VerificationReport:
    scenario: dict
    checks: list[CheckRecord]
    decomposition: dict | None
    timing: dict

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> CheckRecord:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "scenario": self.scenario,
            "checks": [c.to_dict() for c in self.checks],
            "decomposition": self.decomposition,
            "timing": self.timing,
        }


# ---------------------------------------------------------------------------
# scenario setup


def build_immersion(cfg: ScenarioConfig) -> ImmersionSpec:
    if cfg.inline is not None:
        il = cfg.inline
        dim = len(il.coords)
        res = (128 if dim <= 2 else 32,) * dim
        imm = inline_immersion(cfg.name or "inline", il.coords, il.components, il.curvature, il.ambient_dim,
                               il.lower, il.upper, il.periodic, res)
    else:
        imm = catalog(cfg.immersion, **cfg.params)
    if cfg.grid is not None:
        if len(cfg.grid) == 1:
            imm = imm.with_resolution(cfg.grid[0])
        elif len(cfg.grid) != imm.chart.dim:
            raise ConfigError(f"grid has {len(cfg.grid)} axes, chart has {imm.chart.dim}", field="grid")
        else:
            imm = imm.with_resolution(cfg.grid)
    return imm


def _constant_curvature(curv: ff.CurvatureData, tol: float = 1e-6) -> tuple[float, bool]:
    k = curv.sectional_samples()
    med = float(np.median(k))
    return med, float(np.abs(k - med).max()) <= tol * max(1.0, abs(med))


def build_phi(cfg: ScenarioConfig, geo: Geometry, curv: ff.CurvatureData) -> cz.NormalValuedSymTensor:
    spec = cfg.phi

    def part(kind: str) -> cz.NormalValuedSymTensor:
        if kind == "h":
            if geo.p == 0:
                raise ConfigError("phi = h needs positive codimension", field="phi.kind")
            return cz.second_fundamental_tensor(geo)
        if kind == "metric":
            return cz.metric_tensor(geo)
        if kind == "hessian_codazzi":
            K, const = _constant_curvature(curv)
            if spec.curvature is not None:
                K = spec.curvature
            return cz.hessian_codazzi(geo, "f", K, const)
        if kind == "random":
            q = geo.p if spec.extrinsic else 1
            return cz.random_symmetric_field(geo, cfg.seed, q=q, extrinsic=spec.extrinsic)
        raise ConfigError(f"unknown phi part {kind!r}", field="phi.parts")

    if spec.kind != "combination":
        return part(spec.kind)
    total = None
    for kind, coef in zip(spec.parts, spec.coefficients):
        term = part(kind).scaled(coef)
        try:
            total = term if total is None else total + term
        except ValueError as exc:
            raise ConfigError(str(exc), field="phi.parts") from None
    if total is None:
        raise ConfigError("empty combination", field="phi.parts")
    return total


def _finite(x):
    """JSON-safe float: NaN/inf become None."""
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _finite(obj)
    return obj


# ---------------------------------------------------------------------------
# checks


class _Context:
    """Lazily computed intermediates shared between checks."""

    def __init__(self, cfg: ScenarioConfig, geo: Geometry):
        self.cfg = cfg
        self.geo = geo
        self.mode = cfg.mode
        self._cache: dict = {}

    def get(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    @property
    def curv(self) -> ff.CurvatureData:
        return self.get("curv", lambda: ff.curvature_data(self.geo))

    @property
    def phi(self) -> cz.NormalValuedSymTensor:
        return self.get("phi", lambda: build_phi(self.cfg, self.geo, self.curv))

    @property
    def D(self) -> cz.CovariantDerivativeField:
        return self.get("D", lambda: cz.covariant_derivative(self.phi, self.geo, self.mode))

    @property
    def mc(self) -> sp.MeanCurvatureData | HypothesisError:
        def make():
            try:
                return sp.mean_curvature_vector(self.phi, self.geo, self.tol_rel(), self.mode)
            except HypothesisError as exc:
                return exc
        return self.get("mc", make)

    def tol_rel(self) -> float:
        return self.cfg.tol.get("parallelism", DEFAULT_TOL["parallelism"])

    @property
    def top(self) -> np.ndarray | None:
        """phi^{n+1} (adapted) or the single tangential component in intrinsic mode."""
        phi = self.phi
        if not phi.extrinsic:
            return phi.comps[..., 0, :, :]
        mc = self.mc
        if isinstance(mc, HypothesisError):
            return phi.comps[..., 0, :, :] if phi.q == 1 else None
        return mc.adapted_component(phi)

    @property
    def spectrum(self) -> sp.SpectralField | None:
        top = self.top
        return None if top is None else self.get(
            "spec", lambda: sp.eigen_spectrum(top, len(self.geo.shape), self.tol_rel()))

    @property
    def blocks(self) -> dc.BlockStructure | None:
        spec = self.spectrum
        return None if spec is None else self.get("blocks", lambda: dc.cluster_eigenvalues(spec, self.tol_rel()))


def _tolerance(cfg: ScenarioConfig, name: str) -> float:
    if name in cfg.tol:
        return cfg.tol[name]
    if cfg.mode == "fd" and name in FD_TOL:
        return FD_TOL[name]
    return DEFAULT_TOL[name]


def _record(name, residual, tol, details=None, status=None) -> CheckRecord:
    residual = _finite(residual)
    if status == STATUS_HYP:
        passed = False
    else:
        passed = residual is not None and residual <= tol
        status = STATUS_PASS if passed else STATUS_FAIL
    return CheckRecord(name, residual, tol, passed, status, ANCHORS[name], _jsonable(details or {}))


def _check_structure(ctx: _Context, tol):
    geo = ctx.geo
    se = structure_equation_residual(geo, exact=ctx.mode == "dual")
    ortho = orthonormality_residual(geo)
    anti = geo.connection.antisymmetry_residual()
    d = {"first": se["first"], "second": se["second"], "orthonormality": ortho, "antisymmetry": anti}
    return _record("structure", max(d.values()), tol, d)


def _check_gauss(ctx, tol):
    return _record("gauss", ff.gauss_check(ctx.geo, ctx.curv), tol,
                   {"sectional_min": float(ctx.curv.sectional_samples().min()),
                    "sectional_max": float(ctx.curv.sectional_samples().max())})


def _check_codazzi_h(ctx, tol):
    if ctx.geo.p == 0:
        return _record("codazzi_h", 0.0, tol, {"note": "no normal directions"})
    return _record("codazzi_h", ff.codazzi_residual_h(ctx.geo, ctx.mode), tol)


def _check_ricci(ctx, tol):
    geo, curv = ctx.geo, ctx.curv
    return _record("ricci", ff.ricci_check(geo, curv, exact=ctx.mode == "dual"), tol,
                   {"max_normal_curvature": float(np.abs(curv.normal).max(initial=0.0)),
                    "flat_normal_bundle": bool(np.abs(curv.normal).max(initial=0.0) <= 1e-8)})


def _check_ricci_tensor(ctx, tol):
    ric = ff.ricci_tensor(ctx.curv.riemann)
    t = cz.NormalValuedSymTensor(ric[..., None, :, :], False, None, "Ric", False)
    return _record("ricci_tensor", cz.codazzi_residual(cz.covariant_derivative(t, ctx.geo, "fd")), tol)


def _check_codazzi(ctx, tol):
    phi = ctx.phi
    return _record("codazzi", cz.codazzi_residual(ctx.D), tol,
                   {"phi": phi.label, "codazzi_guaranteed": phi.codazzi_guaranteed,
                    "max_abs_phi": float(np.abs(phi.comps).max(initial=0.0))})


def _check_commutator(ctx, tol):
    D2 = cz.second_covariant_derivative(ctx.D, ctx.phi, ctx.geo)
    lhs, rhs = cz.commutator_sides(ctx.phi, D2, ctx.curv.riemann, ctx.curv.normal)
    return _record("commutator", float(np.nanmax(np.abs(lhs - rhs))), tol,
                   {"max_lhs": float(np.nanmax(np.abs(lhs))), "max_rhs": float(np.nanmax(np.abs(rhs)))})


def _parallelism(ctx):
    """(residual pair, absolute tolerance, failure message or None)."""
    phi = ctx.phi
    rel = ctx.tol_rel()
    scale = rel * max(1.0, float(np.abs(phi.comps).max(initial=0.0)))
    if not phi.extrinsic:
        return (0.0, 0.0), scale, None
    mc = ctx.mc
    if isinstance(mc, HypothesisError):
        # |Phi| is still a scalar field; its variation is the d phibar residual
        mag = np.linalg.norm(phi.trace(), axis=-1) / ctx.geo.n
        return (float(np.nanmax(np.abs(ctx.geo.frame_derivative(mag)))), float("nan")), scale, str(mc)
    return sp.parallelism_residual(mc, ctx.geo), scale, None


def _check_parallelism(ctx, tol):
    (dphi, normal), scale, msg = ctx.get("parallel", lambda: _parallelism(ctx))
    details = {"d_phibar": dphi, "normal_connection": normal}
    if msg:
        details["note"] = msg
    elif ctx.phi.extrinsic:
        details["branch"] = ctx.mc.branch
        details["mean_curvature_min"] = float(ctx.mc.magnitude.min())
        details["mean_curvature_max"] = float(ctx.mc.magnitude.max())
    res = max(dphi, normal) if not math.isnan(normal) else dphi
    return _record("parallelism", res, scale, details)


def _check_spectrum(ctx, tol):
    spec = ctx.spectrum
    if spec is None:
        return _record("spectrum", None, tol, {"note": str(ctx.mc)}, STATUS_HYP)
    blocks = ctx.blocks
    axes = tuple(range(len(ctx.geo.shape)))
    return _record("spectrum", spec.reconstruction_residual, tol, {
        "eigenvalue_min": spec.values.min(axis=axes).tolist(),
        "eigenvalue_max": spec.values.max(axis=axes).tolist(),
        "degenerate_fraction": float(spec.degenerate.mean()),
        "clusters": [[b.value, b.multiplicity] for b in blocks.blocks],
        "constant": blocks.constant,
    })


def _gate_failure(name, tol, gate_residual, msg):
    return _record(name, gate_residual, tol, {"note": msg}, STATUS_HYP)


def _check_simons5(ctx, tol):
    (dphi, normal), scale, msg = ctx.get("parallel", lambda: _parallelism(ctx))
    if msg or dphi > scale or normal > scale:
        return _gate_failure("simons5", tol, max(dphi, 0 if math.isnan(normal) else normal),
                             msg or "parallel mean curvature hypotheses not met")
    try:
        terms = sp.simons_terms_parallel(ctx.phi, ctx.geo, ctx.curv, ctx.mode, ctx.tol_rel(), ctx.D)
    except HypothesisError as exc:
        return _gate_failure("simons5", tol, None, str(exc))
    except ValueError:  # intrinsic tensor: the identity is the single-component case of the flat form
        terms = sp.simons_terms_flat(ctx.phi, ctx.geo, ctx.curv, ctx.mode, ctx.tol_rel(), ctx.D)
    return _record("simons5", terms.residual, tol, _term_maxima(terms))


def _term_maxima(terms: sp.SimonsTerms) -> dict:
    return {"half_laplacian": float(np.nanmax(np.abs(terms.lhs))),
            "gradient": float(np.nanmax(np.abs(terms.gradient))),
            "trace_hessian": float(np.nanmax(np.abs(terms.trace_hessian))),
            "curvature": float(np.nanmax(np.abs(terms.curvature)))}


def _check_simons6(ctx, tol):
    try:
        terms = sp.simons_terms_flat(ctx.phi, ctx.geo, ctx.curv, ctx.mode, ctx.tol_rel(), ctx.D)
    except HypothesisError as exc:
        return _gate_failure("simons6", tol, float(np.abs(ctx.curv.normal).max()), str(exc))
    return _record("simons6", terms.residual, tol, _term_maxima(terms))


def _check_stokes(ctx, tol):
    geo = ctx.geo
    if not geo.chart.closed:
        raise ChartError("not a closed chart", stage="stokes")
    (dphi, normal), scale, msg = ctx.get("parallel", lambda: _parallelism(ctx))
    if msg or dphi > scale or normal > scale:
        return _gate_failure("stokes", tol, None, msg or "parallel mean curvature hypotheses not met")
    ti = sp.rigidity_integrals(ctx.phi, geo, ctx.curv, ctx.mode, ctx.tol_rel())
    lap = sp.scalar_laplacian(geo, ctx.phi.squared_norm())
    details = {"gradient_integral": ti.gradient_integral, "curvature_integral": ti.curvature_integral,
               "gradient_max": ti.gradient_max, "curvature_max": ti.curvature_max,
               "curvature_min": ti.curvature_min,
               "laplacian_integral": sp.stokes_theorem_integral(geo, lap)}
    return _record("stokes", max(abs(ti.gradient_integral), abs(ti.curvature_integral)), tol, details)


def _check_decompose(ctx, tol):
    rep = dc.decomposition_report(ctx.phi, ctx.geo, ctx.curv, ctx.mode, ctx.tol_rel(), tol)
    ctx._cache["decomposition"] = rep
    d = rep.to_dict()
    if rep.verdict == dc.VERDICT_DECOMPOSES:
        vals = [v for v in (rep.cross_block, rep.invariant_subspace) if v is not None]
        if rep.integrals:
            vals += [abs(rep.integrals["gradient_integral"]), abs(rep.integrals["curvature_integral"])]
        return _record("decompose", max(vals, default=0.0), tol, {"verdict": rep.verdict, "l": d["l"]})
    if rep.verdict == dc.VERDICT_NONCONSTANT:
        return _record("decompose", max(rep.blocks.constancy), tol, {"verdict": rep.verdict})
    return _record("decompose", None, tol, {"verdict": rep.verdict, "reasons": rep.reasons}, STATUS_HYP)


def _check_umbilicity(ctx, tol):
    top = ctx.top
    if top is None:
        return _record("umbilicity", None, tol, {"note": str(ctx.mc)}, STATUS_HYP)
    dev, var = dc.umbilicity_check(top)
    return _record("umbilicity", max(dev, var), tol, {"trace_free_part": dev, "mean_variation": var})


def _check_derdzinski(ctx, tol_cfg):
    spec, blocks, geo = ctx.spectrum, ctx.blocks, ctx.geo
    if spec is None:
        return _record("derdzinski", None, tol_cfg, {"note": str(ctx.mc)}, STATUS_HYP)
    if blocks.constant:
        tol = ctx.cfg.tol.get("derdzinski", INVARIANT_SUBSPACE_TOL)
        return _record("derdzinski", dc.invariant_subspace_residual(geo, spec, blocks), tol,
                       {"form": "invariant subspace"})
    if spec.degenerate.all():
        return _record("derdzinski", None, tol_cfg, {"note": "eigenframe ambiguity"}, STATUS_HYP)
    results = [dc.derdzinski_residual(geo, ctx.top, i, spec) for i in range(geo.n)]
    worst = max(r.residual for r in results)
    return _record("derdzinski", worst, tol_cfg, {
        "form": "three-term",
        "per_eigenfield": [r.residual for r in results],
        "masked_fraction": max(r.masked_fraction for r in results),
        "term_maxima": [r.terms for r in results],
    })


CHECK_FUNCS = {
    "structure": _check_structure,
    "gauss": _check_gauss,
    "codazzi_h": _check_codazzi_h,
    "ricci": _check_ricci,
    "ricci_tensor": _check_ricci_tensor,
    "codazzi": _check_codazzi,
    "commutator": _check_commutator,
    "parallelism": _check_parallelism,
    "spectrum": _check_spectrum,
    "simons5": _check_simons5,
    "simons6": _check_simons6,
    "stokes": _check_stokes,
    "decompose": _check_decompose,
    "umbilicity": _check_umbilicity,
    "derdzinski": _check_derdzinski,
}


# ---------------------------------------------------------------------------
# pipeline


def run_scenario(cfg: ScenarioConfig) -> VerificationReport:
    """Run the check pipeline; failed checks are recorded, structural errors raise."""
    t0 = time.perf_counter()
    timing = {}
    imm = build_immersion(cfg)
    scalars = None
    if cfg.phi.f and ("hessian_codazzi" in (cfg.phi.kind,) + cfg.phi.parts):
        scalars = {"f": cfg.phi.f}
    geo = compute_geometry(imm, fd_order=cfg.fd_order, scalars=scalars)
    timing["geometry"] = time.perf_counter() - t0
    ctx = _Context(cfg, geo)
    records = []
    for name in cfg.checks:
        t = time.perf_counter()
        records.append(CHECK_FUNCS[name](ctx, _tolerance(cfg, name)))
        timing[name] = time.perf_counter() - t
    decomposition = ctx._cache.get("decomposition")
    scenario = {
        "config": cfg.to_dict(),
        "immersion": _jsonable(imm.to_dict()),
        "geometry": {
            "n": geo.n,
            "p": geo.p,
            "resolution": list(imm.chart.resolution),
            "periodic": list(imm.chart.periodic),
            "closed_chart": imm.chart.closed,
            "model": imm.target.model,
            "curvature": imm.target.c,
            "normal_candidates": list(geo.frame.normal_candidates),
        },
    }
    timing["total"] = time.perf_counter() - t0
    return VerificationReport(scenario, records,
                              _jsonable(decomposition.to_dict()) if decomposition is not None else None,
                              {k: round(v, 6) for k, v in timing.items()})


@dataclass
class ConvergenceRow:
    check: str
    resolutions: list[int]
    residuals: list[float | None]
    orders: list[float | None]
    flagged: bool


def convergence_study(cfg: ScenarioConfig, resolutions) -> list[ConvergenceRow]:
    """Observed order log2(r_h / r_{h/2}) per adjacent pair of resolutions.

    In finite-difference mode a check is flagged when any order falls below
    1.5 while both residuals are above round-off.
    """
    resolutions = [int(r) for r in resolutions]
    if len(resolutions) < 3:
        raise ConfigError("convergence study needs at least three resolutions", field="grids")
    for a, b in zip(resolutions, resolutions[1:]):
        if b != 2 * a:
            raise ConfigError(f"non-nested resolutions {a} -> {b} (each grid must double the last)", field="grids")
    reports = [run_scenario(cfg.with_overrides(grid=r)) for r in resolutions]
    rows = []
    for name in cfg.checks:
        res = [rep.check(name).residual for rep in reports]
        orders = []
        for r0, r1 in zip(res, res[1:]):
            if r0 is None or r1 is None or max(r0, r1) < ROUNDOFF_FLOOR or r1 == 0:
                orders.append(None)
            else:
                orders.append(math.log2(r0 / r1))
        flagged = cfg.mode == "fd" and any(o is not None and o < 1.5 for o in orders)
        rows.append(ConvergenceRow(name, resolutions, res, orders, flagged))
    return rows


# ---------------------------------------------------------------------------
# emission


def _fmt_num(x) -> str:
    return "n/a" if x is None else f"{x:.3e}"


def emit_report(report: VerificationReport | dict, fmt: str = "json") -> bytes:
    data = report.to_dict() if isinstance(report, VerificationReport) else report
    if fmt == "json":
        return (json.dumps(data, indent=2, allow_nan=False) + "\n").encode()
    if fmt != "markdown":
        raise ValueError(f"unknown report format {fmt!r}")
    sc = data["scenario"]
    imm = sc["immersion"]
    lines = [f"# codazzi-lab report: {imm['name']}", ""]
    params = ", ".join(f"{k}={v}" for k, v in imm["params"].items())
    geo = sc["geometry"]
    lines += [f"- immersion: `{imm['name']}({params})` in {geo['model']} (c = {geo['curvature']})",
              f"- dimension n = {geo['n']}, codimension p = {geo['p']}, grid {' x '.join(map(str, geo['resolution']))}",
              f"- mode: {sc['config'].get('mode', 'dual')}", ""]
    lines += ["| check | residual | tolerance | status | identity |", "|---|---|---|---|---|"]
    for c in data["checks"]:
        lines.append(f"| {c['name']} | {_fmt_num(c['residual'])} | {_fmt_num(c['tolerance'])} | {c['status']} "
                     f"| {c['anchor']} |")
    dec = data.get("decomposition")
    if dec:
        lines += ["", f"**Decomposition verdict:** {dec['verdict']}"]
        if dec.get("blocks"):
            lines.append("")
            lines += ["| eigenvalue | multiplicity |", "|---|---|"]
            lines += [f"| {b['eigenvalue']:.6g} | {b['multiplicity']} |" for b in dec["blocks"]]
        for r in dec.get("reasons", []):
            lines.append(f"- {r}")
    t = data.get("timing", {})
    if "total" in t:
        lines += ["", f"_total time {t['total']:.2f} s_"]
    return ("\n".join(lines) + "\n").encode()


def emit_convergence(rows: list[ConvergenceRow], fmt: str = "markdown") -> bytes:
    if fmt == "json":
        data = [{"check": r.check, "resolutions": r.resolutions, "residuals": _jsonable(r.residuals),
                 "orders": _jsonable(r.orders), "flagged": r.flagged} for r in rows]
        return (json.dumps(data, indent=2) + "\n").encode()
    out = ["| check | " + " | ".join(str(n) for n in rows[0].resolutions) + " | orders | flagged |",
           "|---" * (len(rows[0].resolutions) + 3) + "|"] if rows else []
    for r in rows:
        orders = ", ".join("n/a" if o is None else f"{o:.2f}" for o in r.orders)
        out.append(f"| {r.check} | " + " | ".join(_fmt_num(x) for x in r.residuals)
                   + f" | {orders} | {'yes' if r.flagged else 'no'} |")
    return ("\n".join(out) + "\n").encode()
