"""Command-line front end: ``ssfinsler {eval,grid,classify,fit,verify,catalog}``.

Reports are JSON documents on stdout (``--format csv`` emits the record
table instead).  Exit codes: 0 success, 1 a ``verify`` check failed, 2 the
input could not be parsed, 3 a domain error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

import numpy as np

from . import __version__
from .checks import check_names, random_config, run_checks
from .errors import DomainError, FinslerError, FitError, ParseError
from .families import FAMILIES, GridSpec, classify, fit_model
from .geometry import Config, compatibility_residuals, landsberg_surface_residual, tensor_bundle
from .models import CATALOG, R_MAX, PhiModel, catalog_list, make_model, regularity_check

SCHEMA_VERSION = "1.0"

EXIT_OK, EXIT_CHECK_FAILED, EXIT_PARSE, EXIT_DOMAIN = 0, 1, 2, 3

DEFAULT_GRID = "0.5:2.5:5,-0.8:0.8:6"


class UsageError(Exception):
    """Bad flag combination or malformed value; reported with exit code 2."""


# ---------------------------------------------------------------- arguments
def _model_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("metric")
    src = g.add_mutually_exclusive_group()
    src.add_argument("--phi", metavar="EXPR", help="phi(r, s) as an expression")
    src.add_argument("--metric", metavar="NAME", choices=sorted(CATALOG), help="catalog model")
    g.add_argument("--h", metavar="EXPR", help="profile h(v) of the homogeneous model")
    g.add_argument("--psi", metavar="EXPR", help="profile psi(v) of the psi_family model")
    g.add_argument("--c0", metavar="EXPR", help="coefficient c0(r) of the psi_family model")
    g.add_argument("--a", metavar="EXPR", help="factor a(r) of the riemannian model")
    g.add_argument("--c1", metavar="V", type=float, help="c1 of the riemannian model")
    g.add_argument("--c3", metavar="V", type=float, help="c3 of the riemannian model")
    g.add_argument("--r0", metavar="V", type=float, default=R_MAX, help="ball radius r_max (default %(default)s)")


def _output_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--no-meta", action="store_true", help="omit timing and host information")
    p.add_argument("--config", metavar="FILE", help="JSON file of flag defaults (keys are long flag names)")


def _grid_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--grid", metavar="SPEC", default=DEFAULT_GRID, help="'rlo:rhi:count,flo:fhi:count' with s = f*r")
    p.add_argument("--n", type=int, default=3, help="dimension (default %(default)s)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=min(4, os.cpu_count() or 1))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ssfinsler", description="Spherically symmetric Finsler metric toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="all objects at one configuration")
    _model_flags(p)
    p.add_argument("--n", type=int, help="dimension (checked against --x/--y)")
    p.add_argument("--x", metavar="LIST", required=False, help="comma-separated x")
    p.add_argument("--y", metavar="LIST", required=False, help="comma-separated y")
    _output_flags(p)

    p = sub.add_parser("grid", help="records over an (r, s) grid")
    _model_flags(p)
    _grid_flags(p)
    _output_flags(p)

    p = sub.add_parser("classify", help="Riemannian / Berwald / Landsberg verdicts")
    _model_flags(p)
    _grid_flags(p)
    p.add_argument("--tol", type=float, default=1e-7)
    _output_flags(p)

    p = sub.add_parser("fit", help="fit the spray against a canonical family")
    _model_flags(p)
    _grid_flags(p)
    p.add_argument("--family", choices=sorted(FAMILIES), default="berwald_n3")
    p.add_argument("--samples", type=int, default=16, help="Chebyshev samples per r (even)")
    p.add_argument("--tol", type=float, default=1e-7)
    _output_flags(p)

    p = sub.add_parser("verify", help="run the named verification checks")
    p.add_argument("--only", metavar="NAME", action="append", help="run only this check (repeatable, or comma list)")
    p.add_argument("--tol", type=float, help="override the tolerance of every error bound")
    p.add_argument("--seed", type=int, default=0)
    _output_flags(p)

    p = sub.add_parser("catalog", help="list models, families and checks")
    _output_flags(p)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    try:
        with open(args.config, encoding="utf-8") as fh:
            conf = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {args.config!r}: {exc}") from exc
    if not isinstance(conf, dict):
        raise UsageError("config file must hold a JSON object")
    known = vars(args)
    flags = []
    for key, value in conf.items():
        dest = key.replace("-", "_")
        if dest not in known or dest in ("command", "config"):
            raise UsageError(f"unknown config key {key!r}")
        if isinstance(value, bool):
            if value:
                flags.append(f"--{dest.replace('_', '-')}")
            continue
        values = value if isinstance(value, list) else [value]
        for v in values:
            flags += [f"--{dest.replace('_', '-')}", str(v)]
    # flags given on the command line win over the file
    return parser.parse_args([args.command, *flags, *argv[1:]])


# ------------------------------------------------------------------- models
def model_from_args(args) -> PhiModel:
    extras = {k: getattr(args, k) for k in ("h", "psi", "c0", "a", "c1", "c3") if getattr(args, k) is not None}
    if args.phi is not None:
        if extras:
            raise UsageError(f"--phi does not combine with {', '.join('--' + k for k in extras)}")
        return make_model("expression", r_max=args.r0, phi=args.phi)
    if args.metric is None:
        raise UsageError("one of --phi or --metric is required")
    try:
        return make_model(args.metric, r_max=args.r0, **extras)
    except ParseError:
        raise
    except FinslerError as exc:
        raise UsageError(str(exc)) from exc
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _vector(text: str, flag: str) -> np.ndarray:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"{flag} must be a comma-separated list of numbers, got {text!r}") from exc
    return np.array(vals)


# ------------------------------------------------------------------ records
def point_record(model: PhiModel, cfg: Config, index: int | None = None) -> dict:
    """Scalars, residuals and tensor norms of a model at one configuration."""
    b = tensor_bundle(model, cfg)
    comp = compatibility_residuals(b.phi, b.pq)
    reg = regularity_check(model, cfg.r, cfg.s)
    rec = {
        "index": index,
        "n": cfg.n,
        "r": cfg.r,
        "s": cfg.s,
        "u": cfg.u,
        "phi": b.phi.value,
        "P": b.pq.dP(0),
        "Q": b.pq.dQ(0),
        "H": b.scalars.H.value,
        "K": b.scalars.K.value,
        "C1": comp.C1,
        "C2": comp.C2,
        "landsberg_2d": landsberg_surface_residual(b.phi, b.pq) if cfg.n == 2 else None,
        "trace_identity": float(np.max(np.abs(np.einsum("hjkh->jk", b.berwald) - b.E))),
        "e_form": float(np.max(np.abs(b.E - b.E_H))),
        "inverse_metric": float(np.max(np.abs(b.g_inv @ b.g - np.eye(cfg.n)))),
        "max_abs_berwald": float(np.max(np.abs(b.berwald))),
        "max_abs_E": float(np.max(np.abs(b.E))),
        "trace_E": float(np.trace(b.E)),
        "hs_limit_defect": b.hs_limit_defect,
        "regular_nD": bool(reg.regular_nD),
        "regular_2D": bool(reg.regular_2D),
    }
    if index is None:
        del rec["index"]
    return rec


def _grid_point(model: PhiModel, grid: GridSpec, index: int, r: float, s: float) -> dict:
    rng = np.random.default_rng([grid.seed, index])
    try:
        model.check_admissible(r, s)
        return point_record(model, random_config(rng, grid.n, r, s), index)
    except FinslerError as exc:
        return {"index": index, "n": grid.n, "r": r, "s": s, "error": f"{type(exc).__name__}: {exc}"}


def grid_records(model: PhiModel, grid: GridSpec, threads: int = 1) -> list[dict]:
    """Records for every grid point, in grid order whatever the thread count."""
    pts = grid.points()
    work = lambda item: _grid_point(model, grid, item[0], *item[1])  # noqa: E731
    if threads <= 1:
        recs = [work(it) for it in enumerate(pts)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            recs = list(pool.map(work, enumerate(pts)))
    return sorted(recs, key=lambda rec: rec["index"])


def _grid_from_args(args, model: PhiModel) -> GridSpec:
    try:
        grid = GridSpec.parse(args.grid, n=args.n, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    grid.validate(model.r_max, model.s_safety)
    return grid


def _summary(records: list[dict]) -> dict:
    keys = ("C1", "C2", "landsberg_2d", "trace_identity", "e_form", "inverse_metric", "max_abs_berwald", "max_abs_E")
    out = {}
    for k in keys:
        vals = [abs(r[k]) for r in records if r.get(k) is not None]
        out[f"max_{k}" if not k.startswith("max") else k] = max(vals) if vals else None
    out["points"] = len(records)
    out["errors"] = sum(1 for r in records if "error" in r)
    return out


# ---------------------------------------------------------------- commands
def cmd_eval(args) -> tuple[dict, list[dict], int]:
    model = model_from_args(args)
    if args.x is None or args.y is None:
        raise UsageError("eval needs --x and --y")
    x, y = _vector(args.x, "--x"), _vector(args.y, "--y")
    if args.n is not None and (x.size != args.n or y.size != args.n):
        raise UsageError(f"--n {args.n} does not match the lengths of --x ({x.size}) and --y ({y.size})")
    try:
        cfg = Config(x, y)
    except DomainError:
        raise
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    model.check_admissible(cfg.r, cfg.s)
    rec = point_record(model, cfg)
    body = {"input": {"model": model.describe(), "x": x.tolist(), "y": y.tolist()}, "record": rec}
    return body, [rec], EXIT_OK


def cmd_grid(args) -> tuple[dict, list[dict], int]:
    model = model_from_args(args)
    grid = _grid_from_args(args, model)
    recs = grid_records(model, grid, args.threads)
    body = {"input": {"model": model.describe(), "grid": grid.to_dict()}, "records": recs, "summary": _summary(recs)}
    return body, recs, EXIT_OK


def cmd_classify(args) -> tuple[dict, list[dict], int]:
    model = model_from_args(args)
    grid = _grid_from_args(args, model)
    result = classify(model, grid.n, grid, args.tol)
    body = {"input": {"model": model.describe(), "grid": grid.to_dict(), "tol": args.tol}, "classification": result.to_dict()}
    row = {**{f"flag_{k}": v for k, v in result.flags.items()}, **{f"residual_{k}": v for k, v in result.residuals.items()}}
    row["family"] = None if result.family is None else result.family.family
    return body, [row], EXIT_OK


def cmd_fit(args) -> tuple[dict, list[dict], int]:
    model = model_from_args(args)
    grid = _grid_from_args(args, model)
    if args.samples < 2 or args.samples % 2:
        raise UsageError("--samples must be an even number >= 2")
    res = fit_model(model, args.family, grid.r_values(), count=args.samples, tol=args.tol)
    body = {"input": {"model": model.describe(), "family": args.family, "grid": grid.to_dict(), "tol": args.tol}, "fit": res.to_dict()}
    rows = [{"r": r, **{k: v[i] for k, v in res.coefficients.items()}} for i, r in enumerate(res.r_values)]
    return body, rows, EXIT_OK


def cmd_verify(args) -> tuple[dict, list[dict], int]:
    names = None
    if args.only:
        names = [n.strip() for item in args.only for n in item.split(",") if n.strip()]
        unknown = [n for n in names if n not in check_names()]
        if unknown:
            raise UsageError(f"unknown check(s) {unknown}; available: {', '.join(check_names())}")
    results = run_checks(names, seed=args.seed, tol=args.tol)
    for res in results:
        print(res.line(), file=getattr(args, "stderr", None) or sys.stderr)
    failed = [r.name for r in results if not r.passed]
    body = {
        "input": {"only": names, "tol": args.tol, "seed": args.seed},
        "checks": [r.to_dict(meta=not args.no_meta) for r in results],
        "summary": {"total": len(results), "passed": len(results) - len(failed), "failed": failed},
    }
    rows = [{"name": r.name, "passed": r.passed, "worst": _worst(r), "error": r.error} for r in results]
    return body, rows, EXIT_CHECK_FAILED if failed else EXIT_OK


def _worst(res) -> float | None:
    vals = [p.value for p in res.parts if p.kind == "max"]
    return max(vals) if vals else None


def cmd_catalog(args) -> tuple[dict, list[dict], int]:
    models = [{"name": name, "params": params, "description": CATALOG[name].description} for name, params in catalog_list()]
    families = [{"name": k, "coefficients": list(v.coefficients)} for k, v in FAMILIES.items()]
    body = {"models": models, "families": families, "checks": check_names()}
    rows = [{"name": m["name"], "params": ";".join(f"{k}={v}" for k, v in m["params"].items())} for m in models]
    return body, rows, EXIT_OK


COMMANDS = {
    "eval": cmd_eval,
    "grid": cmd_grid,
    "classify": cmd_classify,
    "fit": cmd_fit,
    "verify": cmd_verify,
    "catalog": cmd_catalog,
}


# ------------------------------------------------------------------- output
def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def render_json(report: dict) -> str:
    # repr-based float output is the shortest string that round-trips exactly
    return json.dumps(_clean(report), indent=2, sort_keys=False, allow_nan=False) + "\n"


def render_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    cols: list[str] = []
    for row in rows:
        for k in row:
            if k not in cols:
                cols.append(k)
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: ("" if v is None else repr(v) if isinstance(v, float) else v) for k, v in _clean(row).items()})
    return buf.getvalue()


def run(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    t0 = time.perf_counter()
    try:
        args = _apply_config(parser, argv)
        args.stderr = stderr
        body, rows, code = COMMANDS[args.command](args)
    except SystemExit as exc:  # argparse
        return int(exc.code) if isinstance(exc.code, int) else EXIT_PARSE
    except ParseError as exc:
        print(f"parse error: {exc}", file=stderr)
        return EXIT_PARSE
    except UsageError as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_PARSE
    except (DomainError, FitError) as exc:
        print(f"domain error: {exc}", file=stderr)
        return EXIT_DOMAIN
    except FinslerError as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_DOMAIN
    report = {"schema_version": SCHEMA_VERSION, "tool": {"name": "ssfinsler", "version": __version__}, "command": args.command}
    report.update(body)
    if not args.no_meta:
        report["meta"] = {
            "elapsed_s": time.perf_counter() - t0,
            "threads": getattr(args, "threads", 1),
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        }
    stdout.write(render_csv(rows) if args.format == "csv" else render_json(report))
    return code


def main(argv: Sequence[str] | None = None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
