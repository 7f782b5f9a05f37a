"""Command line entry point: ``codazzi-lab list|verify|converge|report``."""
from __future__ import annotations

import argparse
import inspect
import json
import sys

from .config import load_config
from .errors import CodazziLabError, ConfigError
from .geometry import CATALOG
from .harness import convergence_study, emit_convergence, emit_report, run_scenario

EXIT_OK, EXIT_FAIL, EXIT_ERROR = 0, 1, 2


def _tol_arg(text: str) -> tuple[str, float]:
    name, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {text!r}")
    try:
        return name.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"tolerance for {name!r} is not a number") from None


def _grids_arg(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="codazzi-lab", description="Numerical checks of submanifold identities.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("list", help="list catalog immersions and their default parameters")

    v = sub.add_parser("verify", help="run a scenario and emit a report")
    v.add_argument("config")
    v.add_argument("--grid", type=int, help="resolution of the finest chart axis")
    v.add_argument("--tol", type=_tol_arg, action="append", default=[], metavar="NAME=V")
    v.add_argument("--mode", choices=("dual", "fd"))
    v.add_argument("--output", help="write the report here instead of stdout")
    v.add_argument("--format", choices=("json", "markdown"), default="json")

    c = sub.add_parser("converge", help="run a scenario on nested grids and estimate orders")
    c.add_argument("config")
    c.add_argument("--grids", type=_grids_arg, default=[64, 128, 256])
    c.add_argument("--mode", choices=("dual", "fd"))
    c.add_argument("--output")
    c.add_argument("--format", choices=("json", "markdown"), default="markdown")

    r = sub.add_parser("report", help="render a json report")
    r.add_argument("report")
    r.add_argument("--format", choices=("json", "markdown"), default="markdown")
    r.add_argument("--output")
    return p


def _write(data: bytes, path: str | None) -> None:
    if path:
        with open(path, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.write(data.decode())
        sys.stdout.flush()


def _list() -> int:
    for name, factory in CATALOG.items():
        params = ", ".join(f"{k}={prm.default!r}" for k, prm in inspect.signature(factory).parameters.items()
                           if k not in ("resolution", "band"))
        print(f"{name}({params})")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "list":
            return _list()
        if args.command == "verify":
            cfg = load_config(args.config).with_overrides(args.grid, dict(args.tol), args.mode)
            report = run_scenario(cfg)
            _write(emit_report(report, args.format), args.output)
            return EXIT_OK if report.passed else EXIT_FAIL
        if args.command == "converge":
            cfg = load_config(args.config).with_overrides(mode=args.mode)
            rows = convergence_study(cfg, args.grids)
            _write(emit_convergence(rows, args.format), args.output)
            return EXIT_FAIL if any(r.flagged for r in rows) else EXIT_OK
        if args.command == "report":
            try:
                with open(args.report, encoding="utf-8") as fh:
                    data = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read report: {exc}") from None
            _write(emit_report(data, args.format), args.output)
            return EXIT_OK
    except CodazziLabError as exc:
        print(f"codazzi-lab: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
