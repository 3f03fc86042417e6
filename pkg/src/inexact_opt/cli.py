"""Command line entry point ``opt``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import warnings
from typing import List, Optional

from . import budget as bud
from . import harness as hx
from .oracles import OracleError
from .plotting import PlotError, plot_files
from .records import SolverError


def _floats(text: str) -> List[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def _ints(text: str) -> List[int]:
    return [int(v) for v in _floats(text)]


def _load(args) -> dict:
    cfg = hx.apply_seed_override(hx.load_config(args.config))
    if getattr(args, "seeds", None):
        cfg["seeds"] = list(range(args.seeds))
    return cfg


def cmd_run(args) -> int:
    cfg = _load(args)
    man = hx.run(cfg, args.out)
    for f in man["files"]:
        print(f"{f['path']}: status={f['status']} calls={f['calls']} gap={f['final_gap']:.3e}")
    return hx.EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args)
    out = args.out or cfg["output_dir"]
    p_grid = args.p or [cfg["solver"]["p"]]
    ok = True
    for p in p_grid:
        c = json.loads(json.dumps(cfg))
        c["solver"]["p"] = p
        tag = f"_p{p:g}" if args.p else ""
        rep = hx.sweep(c, eps_grid=args.eps, n_grid=args.n, out_dir=out, tag=tag)
        fit = "n/a" if rep.fit is None else f"{rep.fit.slope:.3f} [{rep.fit.ci_low:.3f}, {rep.fit.ci_high:.3f}]"
        verdict = "PASS" if rep.passed else "FAIL"
        print(f"p={p:g} axis={rep.axis} slope={fit} theory={rep.theory} tol={rep.tolerance} {verdict}: "
              f"{rep.reason}")
        ok &= rep.passed
    return hx.EXIT_OK if ok else hx.EXIT_SLOPE


def cmd_validate(args) -> int:
    cfg = _load(args)
    rep = hx.validate(cfg, pairs=args.pairs)
    print(json.dumps(rep, indent=2, sort_keys=True, default=float))
    return hx.EXIT_OK if rep["passed"] else hx.EXIT_VALIDATION


BUDGET_THEOREMS = ("thm1", "thm1_sc", "thm2", "thm3", "cor1", "cor2", "uniform_convex")


def budgets_for(args) -> List[bud.Budget]:
    names = BUDGET_THEOREMS if args.theorem == "all" else (args.theorem,)
    rows = []
    for name in names:
        try:
            if name == "thm1":
                rows.append(bud.thm1_budget(args.p, args.L, args.R, args.D, args.eps, args.C))
            elif name == "thm1_sc":
                rows.append(bud.thm1_sc_budget(args.p, args.L, args.mu2, args.D, args.R, args.eps, args.C))
            elif name in ("thm2", "thm3"):
                fn = bud.thm2_budget if name == "thm2" else bud.thm3_budget
                rows.append(fn(args.p, args.n, args.L, args.R, args.D, args.eps, args.C, k=args.k,
                               mu2=args.mu2))
            elif name == "cor1":
                rows.append(bud.cor1_budget(args.p, [(args.nu, args.L_nu)], args.R, args.eps, args.C,
                                            mu2=args.mu2))
            elif name == "cor2":
                rows.append(bud.cor2_budget(args.p, args.nu, args.L_nu, args.R, args.D, args.eps, args.C,
                                            mu2=args.mu2))
            elif name == "uniform_convex":
                rows.append(bud.uniform_convex_budget(args.rho, args.kappa, args.delta, args.p, args.L, args.D,
                                                      args.R, args.eps, args.C))
        except (bud.BudgetError, ValueError, TypeError) as e:
            if args.theorem != "all":
                raise hx.ConfigError(f"{name}: {e}") from None
    return rows


def budget_csv(rows: List[bud.Budget]) -> str:
    buf = io.StringIO()
    fields = ["theorem", "oracle_calls", "iterations", "batch", "delta_max", "dominating_term", "constant_C",
              "calls_real", "iterations_real", "det_real", "var_real", "extras"]
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for b in rows:
        d = {k: getattr(b, k) for k in fields[:-1]}
        d["extras"] = json.dumps(b.extras, sort_keys=True)
        w.writerow(d)
    return buf.getvalue()


def budget_from_csv(text: str) -> List[bud.Budget]:
    out = []
    for r in csv.DictReader(io.StringIO(text)):
        out.append(bud.Budget(r["theorem"], int(r["oracle_calls"]), int(r["iterations"]), int(r["batch"]),
                              float(r["delta_max"]), r["dominating_term"], float(r["constant_C"]),
                              float(r["calls_real"]), float(r["iterations_real"]), float(r["det_real"]),
                              float(r["var_real"]), json.loads(r["extras"])))
    return out


def cmd_budget(args) -> int:
    rows = budgets_for(args)
    if args.format == "csv":
        sys.stdout.write(budget_csv(rows))
    else:
        print(f"{'theorem':<15}{'calls':>12}{'iters':>10}{'batch':>8}{'delta_max':>12}  dominating")
        for b in rows:
            print(f"{b.theorem:<15}{b.oracle_calls:>12}{b.iterations:>10}{b.batch:>8}{b.delta_max:>12.3e}  "
                  f"{b.dominating_term}")
    for b in rows:
        w = bud.dimension_warning(b, args.n)
        if w:
            print(f"warning: {w}", file=sys.stderr)
    return hx.EXIT_OK


def cmd_plot(args) -> int:
    if not args.files:
        print("warning: no input files; nothing plotted", file=sys.stderr)
        return hx.EXIT_OK
    for p in plot_files(args.files, args.out):
        print(p)
    return hx.EXIT_OK


def cmd_quantile(args) -> int:
    cfg = _load(args)
    rep = hx.quantile_check(cfg, args.sigma, args.multiplier, out_dir=args.out)
    print(json.dumps(rep, indent=2, sort_keys=True))
    return hx.EXIT_OK if rep["passed"] else hx.EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="opt", description="Inexact-oracle optimization experiments")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a config (or re-run a manifest), one CSV per seed")
    r.add_argument("-c", "--config", required=True)
    r.add_argument("-o", "--out", default=None)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="calls-to-target sweep with slope fit")
    s.add_argument("-c", "--config", required=True)
    s.add_argument("--eps", type=_floats, default=None)
    s.add_argument("--p", type=_floats, default=None)
    s.add_argument("--n", type=_ints, default=None)
    s.add_argument("-o", "--out", default=None)
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("validate", help="sampled check of the oracle contract")
    v.add_argument("-c", "--config", required=True)
    v.add_argument("--pairs", type=int, default=1000)
    v.set_defaults(func=cmd_validate)

    b = sub.add_parser("budget", help="oracle-call budgets")
    b.add_argument("--theorem", default="all", choices=("all",) + BUDGET_THEOREMS)
    b.add_argument("--p", type=float, default=1.0)
    b.add_argument("--L", type=float, default=1.0)
    b.add_argument("--R", type=float, default=1.0)
    b.add_argument("--D", type=float, default=0.0)
    b.add_argument("--eps", type=float, default=1e-3)
    b.add_argument("--mu2", type=float, default=None)
    b.add_argument("--n", type=int, default=None)
    b.add_argument("--k", type=int, default=2)
    b.add_argument("--nu", type=float, default=1.0)
    b.add_argument("--L_nu", type=float, default=1.0)
    b.add_argument("--rho", type=float, default=2.0)
    b.add_argument("--kappa", type=float, default=1.0)
    b.add_argument("--delta", type=float, default=1e-3)
    b.add_argument("--C", type=float, default=bud.DEFAULT_C)
    b.add_argument("--format", choices=("table", "csv"), default="table")
    b.set_defaults(func=cmd_budget)

    pl = sub.add_parser("plot", help="SVG figures from run or sweep CSVs")
    pl.add_argument("files", nargs="*")
    pl.add_argument("-o", "--out", default="plots")
    pl.set_defaults(func=cmd_plot)

    q = sub.add_parser("quantile", help="high-probability check over many seeds")
    q.add_argument("-c", "--config", required=True)
    q.add_argument("--sigma", type=float, required=True)
    q.add_argument("--multiplier", type=float, default=3.0)
    q.add_argument("--seeds", type=int, default=None, help="use seeds 0..N-1")
    q.add_argument("-o", "--out", default=None)
    q.set_defaults(func=cmd_quantile)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except hx.ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return hx.EXIT_CONFIG
    except PlotError as e:
        print(f"input error: {e}", file=sys.stderr)
        return hx.EXIT_CONFIG
    except (SolverError, OracleError) as e:
        print(f"solver error: {e}", file=sys.stderr)
        return hx.EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
