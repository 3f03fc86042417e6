"""Experiment runner: configs, runs, sweeps with rate fitting, oracle validation.

Configs are JSON documents validated against ``config.schema.json``.  Every
field is defaulted by :func:`normalize`, and the normalized document is echoed
into the manifest together with its SHA-256 hash.  Output files carry the
first twelve hex digits of that hash and the seed in their names.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import jsonschema
import numpy as np
from scipy import stats

from . import __version__
from . import budget as bud
from . import oracles as orc
from . import problems as prb
from .first_order import IGMConfig, igm_restart, igm_run, igm_universal
from .records import CSV_COLUMNS, RunRecord, SolverError
from .reductions import DEFAULT_C
from .rng import GENERATOR_NAME, stream
from .zeroth_order import ZOConfig, zo_run

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VALIDATION, EXIT_SLOPE = 0, 2, 3, 4, 5
SWEEP_COLUMNS = ("eps", "seed", "calls", "iterations", "gap")
ZO_FAMILIES = {"zo_two_point": "two_point", "zo_k_point": "k_point", "zo_directional": "directional"}
DIVERGENCE_FACTOR = 100


class ConfigError(ValueError):
    pass


def schema() -> dict:
    return json.loads(resources.files("inexact_opt").joinpath("config.schema.json").read_text("utf-8"))


DEFAULTS = {
    "setup": None,
    "oracle": {"delta": 0.0, "D": 0.0, "noise_bound": None, "bias_kind": "none", "k": 2, "batch": "auto",
               "claim": None},
    "solver": {"p": 1.0, "L": None, "eps": [1e-3], "max_calls": None, "max_iters": 1_000_000, "mu2": None,
               "tau": "auto", "c_tau": 1.0, "strict_tolerance": False, "L_mode": "worst",
               "restart_stop": "iterate"},
    "seeds": [0],
    "constant_C": DEFAULT_C,
    "output_dir": "out",
    "record_walltime": False,
    "min_fit_calls": 10,
    "slope_tolerance": None,
}


def _format_path(path) -> str:
    return ".".join(str(p) for p in path) or "<root>"


def validate_config(cfg: dict):
    validator = jsonschema.Draft202012Validator(schema())
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        raise ConfigError("\n".join(f"field {_format_path(e.absolute_path)}: {e.message}" for e in errors))


def parse_config_text(text: str, source: str = "<config>") -> dict:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{source}:{e.lineno}:{e.colno}: {e.msg}") from None
    if not isinstance(obj, dict):
        raise ConfigError(f"{source}: top level must be an object")
    if "config" in obj and "config_hash" in obj:
        obj = obj["config"]  # a manifest: re-run its echoed config
    validate_config(obj)
    return normalize(obj)


def load_config(path) -> dict:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"{path}: {e.strerror}") from None
    return parse_config_text(text, str(path))


def normalize(cfg: dict) -> dict:
    """Fill in every default so that the echoed config is complete."""
    out = copy.deepcopy(cfg)
    for key, default in DEFAULTS.items():
        if isinstance(default, dict):
            merged = copy.deepcopy(default)
            merged.update(out.get(key) or {})
            out[key] = merged
        elif key not in out:
            out[key] = copy.deepcopy(default)
    out["problem"] = dict(out["problem"])
    fam = out["solver"]["family"]
    if fam == "igm_universal":
        out["solver"]["L"] = "adaptive"
    elif out["solver"]["L"] == "adaptive":
        raise ConfigError("field solver.L: 'adaptive' is only valid for igm_universal")
    return out


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def apply_seed_override(cfg: dict, env=None) -> dict:
    """``OPT_SEED`` replaces the configured seed list by a single seed."""
    env = os.environ if env is None else env
    val = env.get("OPT_SEED")
    if val is None or val == "":
        return cfg
    try:
        seed = int(val)
    except ValueError:
        raise ConfigError(f"OPT_SEED must be an integer, got {val!r}") from None
    if seed < 0:
        raise ConfigError("OPT_SEED must be non-negative")
    cfg = copy.deepcopy(cfg)
    cfg["seeds"] = [seed]
    return cfg


# ---------------------------------------------------------------- building blocks


def build_problem(cfg: dict) -> prb.TestProblem:
    spec = dict(cfg["problem"])
    if cfg.get("setup"):
        if spec["name"] in ("log_quadratic", "separable_holder"):
            raise ConfigError(f"field setup: problem {spec['name']} defines its own set")
        spec["domain"] = cfg["setup"]
    o = cfg["oracle"]
    spec["D"] = o["D"]
    if o["noise_bound"] is not None:
        spec["noise_bound"] = o["noise_bound"]
    try:
        return prb.build(spec)
    except (prb.ProblemError, KeyError, ValueError) as e:
        raise ConfigError(f"field problem: {e}") from None


def _smooth_L(cfg: dict, problem: prb.TestProblem) -> float:
    L = cfg["solver"]["L"]
    if isinstance(L, (int, float)):
        return float(L)
    o = cfg["oracle"]
    if o["bias_kind"] == "holder":
        from .reductions import holder_to_smooth
        k = problem.constants
        return holder_to_smooth(k.L_nu, k.nu, o["delta"]) if k.nu < 1 else float(k.L_nu)
    if problem.constants.L is None:
        raise ConfigError("field solver.L: problem has no smoothness constant; give L or use bias_kind 'holder'")
    return float(problem.constants.L)


def _mu2(cfg: dict, problem: prb.TestProblem) -> float:
    mu = cfg["solver"]["mu2"]
    mu = problem.constants.mu2 if mu is None else mu
    if not mu or mu <= 0:
        raise ConfigError("field solver.mu2: restarts need a positive strong-convexity modulus")
    return float(mu)


def cell_budget(cfg: dict, problem: prb.TestProblem, eps: float) -> bud.Budget:
    """Budget of the family's guarantee for one target accuracy."""
    s, o = cfg["solver"], cfg["oracle"]
    fam, p, C = s["family"], s["p"], cfg["constant_C"]
    R = problem.domain.R
    D = o["D"]
    if fam == "igm":
        return bud.thm1_budget(p, _smooth_L(cfg, problem), R, D, eps, C)
    if fam == "igm_restart":
        return bud.thm1_sc_budget(p, _smooth_L(cfg, problem), _mu2(cfg, problem), D, R, eps, C)
    if fam == "igm_universal":
        k = problem.constants
        profile = [(k.nu, k.L_nu)] if k.nu is not None else []
        if k.L is not None:
            profile.append((1.0, k.L))
        if not profile:
            raise ConfigError("field problem: universal method needs a Hoelder profile for its budget")
        return bud.cor1_budget(p, profile, R, eps, C)
    n = problem.n
    kq = 2 if fam == "zo_two_point" else max(2, min(o["k"], n + 1))
    L = _smooth_L(cfg, problem)
    fn = bud.thm3_budget if fam == "zo_directional" else bud.thm2_budget
    if s["mu2"] is not None:
        return fn(p, n, L, R, D, eps, C, k=kq, mu2=s["mu2"], D2=D)
    return fn(p, n, L, R, D, eps, C, k=kq)


def theory_slope(cfg: dict, problem: prb.TestProblem) -> Optional[float]:
    fam, p = cfg["solver"]["family"], cfg["solver"]["p"]
    D = cfg["oracle"]["D"]
    if fam == "igm_restart" or (fam in ZO_FAMILIES and cfg["solver"]["mu2"] is not None):
        return 1.0 if D > 0 else None
    if fam == "igm_universal":
        nu = problem.constants.nu
        return bud.holder_theory_slope(p, 1.0 if nu is None else nu)
    return 2.0 if D > 0 else bud.fo_theory_slope(p)


def default_tolerance(cfg: dict, problem: prb.TestProblem) -> float:
    if cfg["slope_tolerance"] is not None:
        return float(cfg["slope_tolerance"])
    if cfg["oracle"]["D"] > 0:
        return 0.2
    nu = problem.constants.nu
    if cfg["solver"]["family"] == "igm_universal" and nu is not None and nu < 1.0:
        return 0.15
    return 0.1


def make_oracle(cfg: dict, problem: prb.TestProblem, rng, counter=None) -> orc.FirstOrderOracle:
    o = cfg["oracle"]
    batch = 1 if o["batch"] == "auto" else int(o["batch"])
    if o["bias_kind"] == "holder":
        return orc.biased_fo_from_holder(problem, o["delta"], rng, batch=batch, counter=counter)
    return orc.FirstOrderOracle(problem, rng, delta=o["delta"], bias_kind=o["bias_kind"], batch=batch,
                                counter=counter)


def execute(cfg: dict, eps: float, seed: int, run_index: int = 0,
            problem: Optional[prb.TestProblem] = None, stop_on_target: bool = True) -> RunRecord:
    """One solver run for one target accuracy and seed."""
    problem = problem if problem is not None else build_problem(cfg)
    s, o = cfg["solver"], cfg["oracle"]
    fam = s["family"]
    b = cell_budget(cfg, problem, eps)
    max_calls = s["max_calls"] if s["max_calls"] is not None else DIVERGENCE_FACTOR * b.oracle_calls
    rng = stream(seed, "oracle", run_index)
    target = eps if stop_on_target else None
    if fam in ZO_FAMILIES:
        zcfg = ZOConfig(estimator=ZO_FAMILIES[fam], p=s["p"], L=_smooth_L(cfg, problem), tau=s["tau"],
                        c_tau=s["c_tau"], k=2 if fam == "zo_two_point" else o["k"], delta=o["delta"],
                        target_eps=target, max_iters=s["max_iters"], max_calls=max_calls,
                        batch=1 if o["batch"] == "auto" else int(o["batch"]),
                        strict_tolerance=s["strict_tolerance"], L_mode=s["L_mode"],
                        restart_mu2=s["mu2"], D=o["D"], C=cfg["constant_C"])
        rec = zo_run(problem, problem.domain, zcfg, rng, stream(seed, "pilot", run_index), seed=seed)
    else:
        counter = orc.CallCounter(max_calls=max_calls)
        oracle = make_oracle(cfg, problem, rng, counter)
        if fam == "igm_universal":
            rec = igm_universal(oracle, problem.domain, s["p"], eps, max_iters=s["max_iters"], seed=seed,
                                record_walltime=cfg["record_walltime"])
        else:
            batch = b.batch if o["batch"] == "auto" else int(o["batch"])
            icfg = IGMConfig(p=s["p"], L=_smooth_L(cfg, problem), target_eps=target, max_iters=s["max_iters"],
                             batch=batch, delta_budget=b.delta_max, C=cfg["constant_C"],
                             record_walltime=cfg["record_walltime"])
            if fam == "igm":
                rec = igm_run(oracle, problem.domain, icfg, seed=seed)
            else:
                rec = igm_restart(oracle, problem.domain, icfg, _mu2(cfg, problem), D=o["D"], seed=seed,
                                  stop=s["restart_stop"])
        if rec.calls != counter.total_calls:
            raise SolverError("recorded calls disagree with the oracle counter")
    rec.extras["budget_calls"] = b.oracle_calls
    return rec


# ---------------------------------------------------------------- run


def _sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def run(cfg: dict, out_dir=None) -> dict:
    """One run per seed at the smallest configured target; writes CSVs and a manifest."""
    out = Path(out_dir if out_dir is not None else cfg["output_dir"])
    h = config_hash(cfg)
    problem = build_problem(cfg)
    eps = min(cfg["solver"]["eps"])
    files = []
    for seed in cfg["seeds"]:
        rec = execute(cfg, eps, seed, 0, problem)
        text = rec.to_csv()
        name = f"run_{h[:12]}_seed{seed}.csv"
        _write(out / name, text)
        files.append({"path": name, "seed": seed, "sha256": _sha256_text(text), "status": rec.status,
                      "calls": rec.calls, "iterations": rec.iterations, "final_gap": rec.final_gap})
    manifest = {"config": cfg, "config_hash": h, "generator": GENERATOR_NAME, "version": __version__,
                "files": files}
    _write(out / f"manifest_{h[:12]}.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


# ---------------------------------------------------------------- sweep


@dataclass
class SlopeFit:
    slope: float
    ci_low: float
    ci_high: float
    intercept: float
    points: int


def fit_slope(x: Sequence[float], y: Sequence[float], level: float = 0.95) -> SlopeFit:
    """Least-squares slope of ``log y`` on ``log x`` with a t-based confidence interval."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    if lx.size < 2:
        raise ValueError("need at least two points")
    res = stats.linregress(lx, ly)
    if lx.size > 2:
        t = stats.t.ppf(0.5 + level / 2, lx.size - 2)
        half = t * res.stderr
    else:
        half = float("inf")
    return SlopeFit(float(res.slope), float(res.slope - half), float(res.slope + half), float(res.intercept),
                    int(lx.size))


@dataclass
class SweepReport:
    axis: str
    rows: List[dict]
    grid: List[float]
    medians: List[Optional[float]]
    fit: Optional[SlopeFit]
    theory: Optional[float]
    tolerance: float
    passed: bool
    reason: str = ""
    divergent: List[float] = field(default_factory=list)
    fitted_points: List[float] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"axis": self.axis, "grid": self.grid, "medians": self.medians,
                "fit": None if self.fit is None else self.fit.__dict__, "theory": self.theory,
                "tolerance": self.tolerance, "passed": self.passed, "reason": self.reason,
                "divergent": self.divergent, "fitted_points": self.fitted_points}

    def to_csv(self) -> str:
        lines = [",".join(SWEEP_COLUMNS)]
        for r in sorted(self.rows, key=lambda r: (r["key"], r["seed"])):
            calls = "" if r["calls"] is None else str(r["calls"])
            it = "" if r["iterations"] is None else str(r["iterations"])
            lines.append(f"{float(r['eps'])!r},{int(r['seed'])},{calls},{it},{float(r['gap'])!r}")
        return "\n".join(lines) + "\n"


def _median_or_none(vals):
    if any(v is None for v in vals):
        return None
    return float(np.median(vals))


def sweep(cfg: dict, eps_grid: Optional[Sequence[float]] = None, n_grid: Optional[Sequence[int]] = None,
          out_dir=None, tag: str = "") -> SweepReport:
    """Calls-to-target on a grid, median over seeds, log-log slope vs theory.

    Along ``eps`` the abscissa is ``1/eps``; along ``n`` (fixed smallest eps) it
    is ``n`` with theory slope 1.  Cells that miss the target within 100x the
    budget are divergent and fail the sweep.  Cells whose median is below
    ``min_fit_calls`` are dominated by integer rounding and left out of the fit.
    """
    eps_grid = sorted((float(e) for e in (eps_grid if eps_grid is not None else cfg["solver"]["eps"])),
                      reverse=True)
    rows, medians, divergent = [], [], []
    if n_grid is not None:
        axis = "n"
        grid = [int(n) for n in n_grid]
        eps_fixed = min(eps_grid)
        for i, n in enumerate(grid):
            c = copy.deepcopy(cfg)
            c["problem"]["n"] = n
            problem = build_problem(c)
            calls = []
            for seed in cfg["seeds"]:
                rec = execute(c, eps_fixed, seed, i, problem)
                hit = rec.first_reaching(eps_fixed)
                calls.append(None if hit is None else hit[1])
                rows.append({"key": n, "eps": eps_fixed, "seed": seed, "calls": calls[-1],
                             "iterations": None if hit is None else hit[0], "gap": rec.final_gap})
            medians.append(_median_or_none(calls))
            if medians[-1] is None:
                divergent.append(n)
        theory = 1.0
        tol = cfg["slope_tolerance"] or 0.3
        xs = grid
        problem0 = None
    else:
        axis = "eps"
        grid = list(eps_grid)
        problem0 = build_problem(cfg)
        for i, eps in enumerate(grid):
            calls = []
            for seed in cfg["seeds"]:
                rec = execute(cfg, eps, seed, i, problem0)
                hit = rec.first_reaching(eps)
                calls.append(None if hit is None else hit[1])
                gap_at = rec.rows[[r[0] for r in rec.rows].index(hit[0])][2] if hit else rec.final_gap
                rows.append({"key": -eps, "eps": eps, "seed": seed, "calls": calls[-1],
                             "iterations": None if hit is None else hit[0], "gap": gap_at})
            medians.append(_median_or_none(calls))
            if medians[-1] is None:
                divergent.append(eps)
        theory = theory_slope(cfg, problem0)
        tol = default_tolerance(cfg, problem0)
        xs = [1.0 / e for e in grid]
    keep = [(x, m, g) for x, m, g in zip(xs, medians, grid) if m is not None and m >= cfg["min_fit_calls"]]
    fit = None
    reason = ""
    if divergent:
        passed, reason = False, f"divergent cells: {divergent}"
    elif len(keep) < 4:
        passed, reason = False, f"only {len(keep)} grid points above {cfg['min_fit_calls']} calls; need 4"
    else:
        fit = fit_slope([k[0] for k in keep], [k[1] for k in keep])
        if theory is None:
            passed, reason = True, "no polynomial theory slope for this family; fit reported only"
        else:
            passed = abs(fit.slope - theory) <= tol
            reason = f"slope {fit.slope:.3f} vs theory {theory:.3f} +- {tol}"
    if fit is None and len(keep) >= 2:
        fit = fit_slope([k[0] for k in keep], [k[1] for k in keep])
    report = SweepReport(axis, rows, [float(g) for g in grid], medians, fit, theory, tol, passed, reason,
                         [float(d) for d in divergent], [float(k[2]) for k in keep])
    if out_dir is not None:
        out = Path(out_dir)
        h = config_hash(cfg)[:12]
        stem = f"sweep_{h}{tag}"
        _write(out / f"{stem}.csv", report.to_csv())
        _write(out / f"{stem}.json", json.dumps(dict(report.to_json(), config=cfg, config_hash=config_hash(cfg),
                                                     generator=GENERATOR_NAME), indent=2, sort_keys=True) + "\n")
    return report


# ---------------------------------------------------------------- validate


def validate(cfg: dict, pairs: int = 1000, seed: int = 0, queries: int = 10_000) -> dict:
    """Sampled checks of the oracle contract implied by the config."""
    problem = build_problem(cfg)
    fam = cfg["solver"]["family"]
    o = cfg["oracle"]
    if fam in ZO_FAMILIES:
        return _validate_zero_order(cfg, problem, seed, queries)
    rng = stream(seed, "validate")
    oracle = make_oracle(cfg, problem, rng)
    claim = oracle.claim
    if o["claim"]:
        c = o["claim"]
        claim = orc.Claim(delta=c.get("delta", claim.delta), L=c.get("L", claim.L), mu=c.get("mu", claim.mu),
                          D=c.get("D", claim.D))
    if not np.isfinite(claim.L):
        raise ConfigError("field oracle.claim.L: no smoothness constant to validate")
    sample = 1 if problem.D == 0 else 64
    rep = orc.validate_assumption1(oracle, claim, sample_size=sample, pairs=pairs, rng=stream(seed, "pairs"))
    return {"kind": "first_order", "passed": rep.passed, "pairs": rep.pairs, "violations": rep.violations,
            "max_violation": rep.max_violation, "variance_estimate": rep.variance_estimate,
            "variance_ok": rep.variance_ok, "claim": claim.__dict__}


def _validate_zero_order(cfg: dict, problem: prb.TestProblem, seed: int, queries: int) -> dict:
    o = cfg["oracle"]
    fam = cfg["solver"]["family"]
    delta = o["delta"]
    rng = stream(seed, "validate")
    n = problem.n
    k = 2 if fam == "zo_two_point" else max(1, min(o["k"], n + 1))
    pts = problem.domain
    from .geometry import sample_points
    X = sample_points(pts, queries, stream(seed, "points"))
    worst = 0.0
    if fam == "zo_directional":
        oracle = orc.DirectionalOracle(problem, rng, delta=delta, k=k)
        bound = delta
        for x in X:
            real = oracle.open_realization(1)
            s = rng.standard_normal(n)
            s /= np.linalg.norm(s)
            v = oracle.query(real, x, s)
            worst = max(worst, abs(v - float(np.dot(problem.grad(x) + real.xi, s))))
        lip_ok = True
    else:
        oracle = orc.ZeroOrderOracle(problem, rng, delta=delta, k=k)
        bound = 2 * delta
        for x in X:
            real = oracle.open_realization(1)
            v = oracle.eval(real, x)
            worst = max(worst, abs(v - oracle.exact_value(real, x)))
        # Lipschitz certificate of the smooth bias on sampled pairs
        Y = sample_points(pts, queries, stream(seed, "points2"))
        ratios = [abs(oracle.bias_field(x) - oracle.bias_field(y)) / max(np.linalg.norm(x - y), 1e-300)
                  for x, y in zip(X, Y)]
        R = pts.R if pts.R > 0 else 1.0
        lip_ok = max(ratios) <= R * delta * (1 + 1e-9) + 1e-15 and max(ratios) <= delta / R * (1 + 1e-9) + 1e-15
    passed = worst <= bound * (1 + 1e-12) + 1e-12 and lip_ok
    return {"kind": "zeroth_order" if fam != "zo_directional" else "directional", "passed": bool(passed),
            "queries": queries, "max_deviation": worst, "bound": bound, "bias_lipschitz_ok": bool(lip_ok)}


# ---------------------------------------------------------------- quantile


def quantile_check(cfg: dict, sigma: float, multiplier: float = 3.0, out_dir=None) -> dict:
    """Empirical ``(1 - sigma)``-quantile of the final gap after the high-probability budget."""
    seeds = cfg["seeds"]
    if len(seeds) < 50:
        raise ConfigError(f"field seeds: quantile check needs at least 50 seeds, got {len(seeds)}")
    fam = cfg["solver"]["family"]
    if fam != "igm":
        raise ConfigError("field solver.family: quantile check runs the igm family only")
    problem = build_problem(cfg)
    eps = min(cfg["solver"]["eps"])
    b = cell_budget(cfg, problem, eps)
    calls = int(math.floor(multiplier * bud.high_prob_calls(b.oracle_calls, sigma, eps)))
    batch = b.batch if cfg["oracle"]["batch"] == "auto" else int(cfg["oracle"]["batch"])
    iters = max(1, calls // batch)
    gaps = []
    s = cfg["solver"]
    for seed in seeds:
        counter = orc.CallCounter(max_calls=iters * batch)
        oracle = make_oracle(cfg, problem, stream(seed, "oracle", 0), counter)
        icfg = IGMConfig(p=s["p"], L=_smooth_L(cfg, problem), target_eps=None, max_iters=iters, batch=batch,
                         C=cfg["constant_C"])
        rec = igm_run(oracle, problem.domain, icfg, seed=seed)
        gaps.append(rec.final_gap)
    q = float(np.quantile(gaps, 1.0 - sigma, method="inverted_cdf"))
    report = {"sigma": sigma, "eps": eps, "seeds": len(seeds), "calls_per_run": iters * batch,
              "high_prob_calls": bud.high_prob_calls(b.oracle_calls, sigma, eps), "multiplier": multiplier,
              "quantile": q, "mean_gap": float(np.mean(gaps)), "passed": q <= eps}
    if out_dir is not None:
        _write(Path(out_dir) / f"quantile_{config_hash(cfg)[:12]}.json",
               json.dumps(dict(report, gaps=gaps), indent=2, sort_keys=True) + "\n")
    return report
