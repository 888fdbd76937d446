"""Command-line front end.

    magspec run CONFIG.yaml        # command chosen by the config's section
    magspec sweep CONFIG.yaml      # same, but insists the config is a sweep
    magspec verify                 # invariant suite at modest size

Exit codes: 0 success, 1 verify violation, 2 invalid config, 3 a solve did
not converge, 4 empty domain. The worker count for independent solves comes
from ``MAGSPEC_WORKERS`` (unset means serial).
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import replace

from . import __version__
from .assembly import assemble_magnetic, assemble_nonmagnetic, assemble_weighted_form, dump_triplets
from .config import COMMANDS, RunConfig, load_config, set_from_dict
from .eigensolve import SolverOpts, ground_state, ground_state_generalized
from .errors import (EmptyMask, InvalidParams, InvalidSpec, MagspecError, NoConvergence,
                     ParseError, ResolutionTooCoarse, TooFewRecords, ValidationError,
                     WrongWeightTag)
from .grid import build_grid
from .potential_p import lambda_shrinking, property_p_verdict
from .report import (EIG_COLUMNS, FLUX_COLUMNS, KATO_COLUMNS, PCHECK_COLUMNS, SWEEP_COLUMNS,
                     ResultTable, emit_svg, write_atomic)
from .semiclassical import DIVERGE_RATIO, TAIL_RATIO, classify_limit, flux_scan, sweep
from .suite import run_checks

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_NOCONV, EXIT_EMPTY = 0, 1, 2, 3, 4
WORKERS_ENV = "MAGSPEC_WORKERS"


def workers_from_env() -> int | None:
    raw = os.environ.get(WORKERS_ENV, "").strip()
    if not raw:
        return None
    try:
        k = int(raw)
    except ValueError:
        raise ValidationError(WORKERS_ENV, f"expected an integer, got {raw!r}") from None
    if k < 1:
        raise ValidationError(WORKERS_ENV, f"must be >= 1, got {k}")
    return k


def solver_opts(cfg: RunConfig) -> SolverOpts:
    return replace(SolverOpts(), **cfg.solver)


def _solve(fn, *args):
    try:
        return fn(*args)
    except NoConvergence as exc:
        return exc.result


def _verdict_dict(v) -> dict:
    return {"kind": v.kind, "label": v.label, "growth_ratio": v.growth_ratio,
            "tail_ratio": v.tail_ratio, "growth_exponent": v.growth_exponent, "bound": v.bound}


def _run_eig(cfg, opts, workers):
    g = build_grid(cfg.domain_spec(), cfg.h)
    w = cfg.weight_obj()
    n = float(cfg.params.get("n", 1.0))
    op = cfg.params.get("operator", "magnetic")
    ops = ("magnetic", "nonmagnetic") if op == "both" else (op,)
    rows, dumps = [], []
    for kind in ops:
        if kind == "weighted":
            P = assemble_weighted_form(g, w, n)
            r = _solve(ground_state_generalized, P, opts)
            dumps.append(P.stiffness)
        else:
            S = (assemble_magnetic if kind == "magnetic" else assemble_nonmagnetic)(g, w, n)
            r = _solve(ground_state, S, opts)
            dumps.append(S.matrix)
        rows.append((kind, n, r.lam, r.residual, r.iters, bool(r.converged), g.h, g.N))
    return ResultTable(EIG_COLUMNS, rows), {}, dumps[0]


def _run_sweep(cfg, opts, workers):
    g = build_grid(cfg.domain_spec(), cfg.h)
    recs = sweep(g, cfg.weight_obj(), cfg.params["n_list"], opts, workers)
    rows = [(r.n, r.lambda_mag, r.lambda_nonmag, r.gap, r.residual_mag, r.residual_nonmag, r.h,
             r.converged) for r in recs]
    meta = {"wall_times": [r.wall_time for r in recs], "N": g.N}
    kw = {"ratio": cfg.params.get("thresh_ratio", DIVERGE_RATIO), "tail": cfg.params.get("tail_ratio", TAIL_RATIO)}
    try:
        meta["verdict"] = {c: _verdict_dict(classify_limit(recs, c, **kw))
                           for c in ("lambda_mag", "lambda_nonmag")}
    except TooFewRecords as exc:
        meta["verdict"] = {"kind": "too_few_records", "detail": str(exc)}
    return ResultTable(SWEEP_COLUMNS, rows), meta, None


def _run_kato(cfg, opts, workers):
    g = build_grid(cfg.domain_spec(), cfg.h)
    w = cfg.weight_obj()
    n = float(cfg.params["n"])
    mag = _solve(ground_state, assemble_magnetic(g, w, n), opts)
    non = _solve(ground_state, assemble_nonmagnetic(g, w, n), opts)
    row = (n, mag.lam, non.lam, mag.lam - non.lam, mag.residual, non.residual, g.h)
    meta = {"converged": bool(mag.converged and non.converged),
            "kato_holds": mag.lam - non.lam >= -1e-6 * max(1.0, non.lam), "N": g.N}
    return ResultTable(KATO_COLUMNS, [row]), meta, None


def _run_flux(cfg, opts, workers):
    g = build_grid(cfg.domain_spec(), cfg.h)
    pts = flux_scan(g, float(cfg.params["beta"]), cfg.params["t_list"], opts, workers)
    rows = [(p.t, p.flux, p.lambda_mag, p.residual, p.converged) for p in pts]
    return ResultTable(FLUX_COLUMNS, rows), {"N": g.N}, None


def _run_pcheck(cfg, opts, workers):
    K = set_from_dict(cfg.params["set"])
    factor = float(cfg.params.get("h_factor", 1 / 8))
    fam = lambda_shrinking(K, cfg.params["radii"], lambda r: factor * r, opts, workers)
    rows = [(j + 1, r, h, lam, pb) for j, (r, h, lam, pb)
            in enumerate(zip(fam.radii, fam.h_used, fam.lambdas, fam.poincare_bounds()))]
    meta = {"converged": list(fam.converged), "residuals": list(fam.residuals)}
    kw = {"ratio": cfg.params.get("thresh_ratio", DIVERGE_RATIO), "tail": cfg.params.get("tail_ratio", TAIL_RATIO)}
    try:
        meta["verdict"] = _verdict_dict(property_p_verdict(fam, **kw))
    except TooFewRecords as exc:
        meta["verdict"] = {"kind": "too_few_records", "detail": str(exc)}
    return ResultTable(PCHECK_COLUMNS, rows), meta, None


RUNNERS = {"eig": _run_eig, "sweep": _run_sweep, "kato": _run_kato, "flux": _run_flux, "pcheck": _run_pcheck}
SORT_KEY = {"sweep": "n", "flux": "t", "pcheck": "j", "kato": "n"}
PLOT = {"sweep": ("n", ("lambda_mag", "lambda_nonmag")), "flux": ("t", ("lambda_mag",)),
        "pcheck": ("j", ("lambda", "poincare_bound"))}


def _converged(table: ResultTable, meta: dict) -> bool:
    if "converged" in table.columns:
        return all(table.column("converged"))
    conv = meta.get("converged", True)
    return all(conv) if isinstance(conv, list) else bool(conv)


def run(cfg: RunConfig) -> tuple[ResultTable | None, int]:
    """Execute the configured command and write the requested outputs."""
    t0 = time.perf_counter()
    try:
        workers = workers_from_env()
        opts = solver_opts(cfg)
        table, meta, matrix = RUNNERS[cfg.command](cfg, opts, workers)
    except EmptyMask as exc:
        print(f"error: {exc}", file=sys.stderr)
        return None, EXIT_EMPTY
    except (ValidationError, InvalidSpec, InvalidParams, ResolutionTooCoarse, WrongWeightTag,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return None, EXIT_CONFIG
    if cfg.command in SORT_KEY:
        table = table.sorted_by(SORT_KEY[cfg.command])
    table.metadata = {"command": cfg.command, "version": __version__, "config": cfg.to_dict(),
                      "wall_time": time.perf_counter() - t0, **meta}
    code = EXIT_OK if _converged(table, meta) else EXIT_NOCONV
    out = cfg.output
    if "csv" in out:
        write_atomic(out["csv"], table.to_csv())
    else:
        sys.stdout.write(table.to_csv())
    if "json" in out:
        write_atomic(out["json"], table.to_json())
    if "svg" in out and cfg.command in PLOT and len(table.rows) >= 2:
        x, ys = PLOT[cfg.command]
        write_atomic(out["svg"], emit_svg(table, x, ys, title=cfg.command))
    if "matrix" in out and matrix is not None:
        write_atomic(out["matrix"], dump_triplets(matrix))
    return table, code


def verify(stream=sys.stdout) -> int:
    results = run_checks()
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}", file=stream)
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="magspec", description="Magnetic and non-magnetic Schrodinger spectra on masked grids.")
    p.add_argument("--version", action="version", version=f"magspec {__version__}")
    sub = p.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run whatever command the config selects")
    r.add_argument("config")
    for c in COMMANDS:
        s = sub.add_parser(c, help=f"run a config that must contain a '{c}' section")
        s.add_argument("config")
    sub.add_parser("verify", help="run the invariant suite")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.cmd == "verify":
        return verify()
    try:
        cfg = load_config(args.config)
    except ParseError as exc:
        where = f" (line {exc.line})" if exc.line is not None else ""
        print(f"error: {exc}{where}", file=sys.stderr)
        return EXIT_CONFIG
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.cmd != "run" and cfg.command != args.cmd:
        print(f"error: config selects {cfg.command!r}, not {args.cmd!r}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        _, code = run(cfg)
    except MagspecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return code


if __name__ == "__main__":
    sys.exit(main())
