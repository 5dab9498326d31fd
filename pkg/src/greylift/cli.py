"""greylift command line: reproducible experiments and CSV/JSON artifacts.

Subcommands: eval, sample-y, fbm, lift, ggbm, law, verify. Every run prints a
one-line JSON summary to stdout; file outputs are written atomically and are
byte-identical for identical command lines (seeded determinism end to end).

Exit codes: 0 success (and verification pass), 1 verification failure,
2 argument/parameter errors, 3 numerical errors.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import markov_lift
from .fbm_exact import fbm_cholesky, fbm_circulant, fbm_mvn
from .greyproc import (GgbmLawQuery, GreyOUQuery, ggbm_char, ggbm_density,
                       ggbm_paths, grey_ou_char, grey_ou_density)
from .model import (AccuracyError, GreyError, ParameterError, TimeGrid,
                    save_ensemble, validate_params)
from .sampling import make_stream, sample_y_beta
from .specfun import m_wright, m_wright_2var, mittag_leffler, gen_mittag_leffler
from .verify import run_law_suite

_EXIT_VERIFY_FAIL = 1
_EXIT_USAGE = 2
_EXIT_NUMERICAL = 3


def _jline(obj) -> None:
    sys.stdout.write(json.dumps(obj, sort_keys=True) + "\n")


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("GREYLIFT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ParameterError(f"GREYLIFT_THREADS must be an integer, got {env!r}")
    return os.cpu_count() or 1


def _grid(args) -> TimeGrid:
    return TimeGrid.regular(args.t_max, args.steps)


def _add_grid_flags(p):
    p.add_argument("--t-max", type=float, default=1.0, help="grid horizon (default 1.0)")
    p.add_argument("--steps", type=int, default=64, help="number of uniform steps (default 64)")


def _add_common(p):
    p.add_argument("--paths", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--d", type=int, default=1, help="spatial dimension (default 1)")
    p.add_argument("--out", type=str, default=None, help="CSV output path")


def _emit_ensemble(ens, args, beta=None, alpha=None, extra=None):
    summary = {"command": args.command, "method": ens.method, "paths": ens.n_paths,
               "times": ens.grid.n, "d": ens.d, "seed": ens.seed}
    if extra:
        summary.update(extra)
    if args.out:
        meta = save_ensemble(ens, args.out, beta=beta, alpha=alpha)
        summary["out"] = args.out
        summary["meta"] = meta
    else:
        summary["final_mean"] = float(ens.values[:, -1, :].mean())
        summary["final_var"] = float(ens.values[:, -1, :].var())
    _jline(summary)


def _cmd_eval(args):
    if args.fn == "ml":
        val = mittag_leffler(args.beta, args.z)
        q = {"fn": "ml", "beta": args.beta, "z": args.z}
    elif args.fn == "gml":
        val = gen_mittag_leffler(args.beta, args.rho, args.z)
        q = {"fn": "gml", "beta": args.beta, "rho": args.rho, "z": args.z}
    elif args.fn == "mw":
        val = m_wright(args.beta, args.x)
        q = {"fn": "mw", "beta": args.beta, "x": args.x}
    else:
        val = m_wright_2var(args.beta, args.x, args.t)
        q = {"fn": "mw2", "beta": args.beta, "x": args.x, "t": args.t}
    _jline({"command": "eval", "query": q, "value": val})
    return 0


def _cmd_sample_y(args):
    stream = make_stream(args.seed, args.stream)
    draws = sample_y_beta(args.beta, stream, n=args.n)
    lines = "\n".join(f"{v:.17g}" for v in draws)
    if args.out:
        from .model import _atomic_write
        _atomic_write(args.out, lines + "\n")
        _jline({"command": "sample-y", "beta": args.beta, "n": args.n,
                "seed": args.seed, "out": args.out})
    else:
        sys.stdout.write(lines + "\n")
    return 0


def _cmd_fbm(args):
    grid = _grid(args)
    stream = make_stream(args.seed, 0)
    if args.method == "cholesky":
        ens = fbm_cholesky(args.hurst, grid, args.paths, args.d, stream)
    elif args.method == "circulant":
        ens = fbm_circulant(args.hurst, grid, args.paths, args.d, stream)
    else:
        ens = fbm_mvn(args.hurst, grid, args.paths, args.d, stream,
                      left_trunc=args.left_trunc, n_quad=args.n_quad)
    _emit_ensemble(ens, args, alpha=2.0 * args.hurst)
    return 0


def _cmd_lift(args):
    grid = _grid(args)
    regime = "rough" if args.hurst < 0.5 else "smooth"
    nodes = markov_lift.build_nodes(args.hurst, regime, args.nodes, args.xmin, args.xmax)
    stream = make_stream(args.seed, 0)
    _, ens = markov_lift.simulate_bank(nodes, grid, args.paths, args.d, stream)
    extra = {"nodes": nodes.m, "xmin": args.xmin, "xmax": args.xmax}
    if args.report_cov_error:
        cov = markov_lift.LiftCovariance(nodes)
        from .fbm_exact import fbm_kernel
        ts = np.linspace(0.1, 1.0, 5) * grid.times[-1]
        errs = [abs(cov(t, s) - fbm_kernel(args.hurst, t, s)) / fbm_kernel(args.hurst, t, s)
                for t in ts for s in ts if s <= t]
        extra["cov_rel_error_sup"] = max(errs)
        extra["truncation_bound"] = markov_lift.truncation_bound(
            args.hurst, regime, args.xmin, args.xmax, grid.times[-1])
    _emit_ensemble(ens, args, alpha=2.0 * args.hurst, extra=extra)
    return 0


def _cmd_ggbm(args):
    params = validate_params(args.beta, args.alpha)
    grid = _grid(args)
    stream = make_stream(args.seed, 0)
    ens = ggbm_paths(params, grid, args.paths, args.d, args.method, stream)
    _emit_ensemble(ens, args, beta=args.beta, alpha=args.alpha)
    return 0


def _cmd_law(args):
    residual = 0.0      # char evaluations carry no outer quadrature
    if args.kind in ("char", "density"):
        params = validate_params(args.beta, args.alpha)
        times = [float(v) for v in args.times.split(",")]
        vals = [float(v) for v in args.values.split(",")]
        q = GgbmLawQuery(params=params, times=times, d=args.d,
                         thetas=vals if args.kind == "char" else None,
                         points=vals if args.kind == "density" else None)
        if args.kind == "char":
            val = ggbm_char(q)
        else:
            val, residual = ggbm_density(q, return_residual=True)
        qd = {"kind": args.kind, "beta": args.beta, "alpha": args.alpha,
              "times": times, "values": vals, "d": args.d}
    else:
        regime = {"rough": "rough_Z", "smooth": "smooth_W"}[args.regime]
        q = GreyOUQuery(beta=args.beta, x=args.x, t=args.t, d=args.d, regime=regime)
        vals = [float(v) for v in args.values.split(",")]
        if args.kind == "grey-ou-char":
            val = grey_ou_char(q, vals)
        else:
            val, residual = grey_ou_density(q, vals, return_residual=True)
        qd = {"kind": args.kind, "beta": args.beta, "x": args.x, "t": args.t,
              "regime": args.regime, "values": vals, "d": args.d}
    _jline({"command": "law", "query": qd, "value": val,
            "quadrature_residual": residual})
    return 0


def _cmd_verify(args):
    params = validate_params(args.beta, args.alpha)
    report = run_law_suite(params, n_paths=args.paths, seed=args.seed,
                           corrupt_y=args.corrupt_y, threads=_threads(args))
    payload = {
        "command": "verify", "beta": args.beta, "alpha": args.alpha,
        "paths": args.paths, "seed": report.seed, "retried": report.retried,
        "pass": report.passed,
        "probes": [{"description": p.description, "analytic": p.analytic,
                    "estimate": p.estimate.value, "std_error": p.estimate.std_error,
                    "z": p.z} for p in report.probes],
    }
    if args.json:
        from .model import _atomic_write
        _atomic_write(args.json, json.dumps(payload, sort_keys=True, indent=1) + "\n")
    _jline({"command": "verify", "pass": report.passed, "retried": report.retried,
            "worst_z": report.worst().z, "json": args.json})
    return 0 if report.passed else _EXIT_VERIFY_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="greylift",
        description="generalized grey Brownian motion: simulation, lifts, law checks")
    ap.add_argument("--threads", type=int, default=None,
                    help="worker threads (default: GREYLIFT_THREADS or cpu count)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="evaluate a special function")
    p.add_argument("fn", choices=["ml", "gml", "mw", "mw2"])
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--z", type=float, default=0.0)
    p.add_argument("--x", type=float, default=0.0)
    p.add_argument("--t", type=float, default=1.0)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("sample-y", help="draw the subordination variable Y")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stream", type=int, default=0)
    p.add_argument("--out", type=str, default=None)
    p.set_defaults(func=_cmd_sample_y)

    p = sub.add_parser("fbm", help="exact fractional Brownian motion paths")
    p.add_argument("--method", choices=["cholesky", "circulant", "mvn"], default="cholesky")
    p.add_argument("--hurst", type=float, required=True)
    p.add_argument("--left-trunc", type=float, default=None)
    p.add_argument("--n-quad", type=int, default=None)
    _add_grid_flags(p)
    _add_common(p)
    p.set_defaults(func=_cmd_fbm)

    p = sub.add_parser("lift", help="OU-superposition fBm approximation")
    p.add_argument("--hurst", type=float, required=True)
    p.add_argument("--nodes", type=int, default=200,
                   help="quadrature node count (default 200)")
    p.add_argument("--xmin", type=float, default=1e-4)
    p.add_argument("--xmax", type=float, default=1e4)
    p.add_argument("--report-cov-error", action="store_true")
    _add_grid_flags(p)
    _add_common(p)
    p.set_defaults(func=_cmd_lift)

    p = sub.add_parser("ggbm", help="generalized grey Brownian motion paths")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--method", choices=["exact", "lift"], default="exact")
    _add_grid_flags(p)
    _add_common(p)
    p.set_defaults(func=_cmd_ggbm)

    p = sub.add_parser("law", help="closed-form law evaluation (JSON)")
    p.add_argument("kind", choices=["char", "density", "grey-ou-char", "grey-ou-density"])
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--times", type=str, default="1.0", help="comma-separated query times")
    p.add_argument("--values", type=str, default="1.0",
                   help="comma-separated thetas / points / k / y")
    p.add_argument("--x", type=float, default=1.0, help="grey-OU mean reversion")
    p.add_argument("--t", type=float, default=1.0, help="grey-OU query time")
    p.add_argument("--regime", choices=["rough", "smooth"], default="rough")
    p.add_argument("--d", type=int, default=1)
    p.set_defaults(func=_cmd_law)

    p = sub.add_parser("verify", help="Monte Carlo law suite; exit 0 iff pass")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--paths", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--json", type=str, default=None)
    p.add_argument("--corrupt-y", action="store_true",
                   help="negative control: corrupt the subordination scale")
    p.set_defaults(func=_cmd_verify)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ParameterError as exc:
        sys.stderr.write(f"greylift {args.command}: parameter error: {exc}\n")
        return _EXIT_USAGE
    except (AccuracyError, GreyError) as exc:
        sys.stderr.write(f"greylift {args.command}: numerical error: "
                         f"{type(exc).__name__}: {exc}\n")
        return _EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
