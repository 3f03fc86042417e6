"""Gradient-free and directional-derivative methods.

Random-direction estimators turn value (or directional derivative) queries
into stochastic gradients, which drive the same intermediate gradient scheme
as the first-order solvers.

* two-point: ``g = n/tau * (f(x + tau s) - f(x)) * s`` for ``s`` uniform on the sphere;
* k-point: one base value and ``k-1`` orthonormal random directions sharing it,
  ``g = n/(k-1) * sum_i (f(x + tau s_i) - f(x))/tau * s_i``;
* directional: ``g = n * <grad f(x, xi), s> * s``.

The estimators are unbiased for the gradient of a ball-smoothed ``f`` and
have second moment about ``n/(k-1)`` times the squared gradient norm.  The
driving method therefore uses the inflated constant
``L_eff = L * ratio**(p+1)``, where ``ratio`` is the measured second-moment
ratio, which turns the first-order iteration count into ``ratio`` times as
many iterations.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass
from typing import Optional, Union

import numpy as np

from . import budget as bud
from . import geometry as geo
from .first_order import IGMConfig, igm_restart, igm_run
from .oracles import CallCounter, DirectionalOracle, FirstOrderReply, Realization, ZeroOrderOracle
from .problems import TestProblem
from .records import RunRecord, SolverError
from .reductions import DEFAULT_C

ESTIMATORS = ("two_point", "k_point", "directional")


class ToleranceWarning(UserWarning):
    pass


def sample_sphere(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform direction on the unit 2-sphere: a normalized standard normal vector."""
    if n < 1:
        raise SolverError("n must be >= 1")
    while True:
        s = rng.standard_normal(n)
        r = np.linalg.norm(s)
        if r > 0:
            return s / r


def orthonormal_directions(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` orthonormal directions, jointly Haar distributed (rows of the result).

    A single direction is drawn exactly as :func:`sample_sphere` does.
    """
    if not 1 <= count <= n:
        raise SolverError(f"need 1 <= count <= n, got {count}")
    if count == 1:
        return sample_sphere(n, rng)[None, :]
    Q, R = np.linalg.qr(rng.standard_normal((n, count)))
    # fixing the signs of diag(R) makes the distribution exactly Haar
    Q = Q * np.where(np.diag(R) < 0, -1.0, 1.0)
    return Q.T


def two_point_estimate(oracle: ZeroOrderOracle, real: Realization, x, tau: float, s) -> np.ndarray:
    if tau <= 0:
        raise SolverError("tau must be positive")
    if real.remaining < 2:
        raise SolverError("realization needs two remaining queries")
    x = np.asarray(x, float)
    s = np.asarray(s, float)
    n = x.size
    f1 = oracle.eval(real, x + tau * s)
    f0 = oracle.eval(real, x)
    return (n / tau) * (f1 - f0) * s


def k_point_estimate(oracle: ZeroOrderOracle, real: Realization, x, tau: float, k: int,
                     rng: np.random.Generator, directions=None) -> np.ndarray:
    """Average of ``k-1`` two-point estimates that share the base value at ``x``.

    ``directions`` may pin the ``k-1`` unit directions (rows), e.g. the
    coordinate axes for ``k = n+1``.
    """
    x = np.asarray(x, float)
    n = x.size
    if not 2 <= k <= n + 1:
        raise SolverError(f"k must satisfy 2 <= k <= n+1, got {k}")
    if k > real.remaining:
        raise SolverError("k exceeds the realization's remaining queries")
    if tau <= 0:
        raise SolverError("tau must be positive")
    S = orthonormal_directions(n, k - 1, rng) if directions is None else np.asarray(directions, float)
    if S.shape != (k - 1, n):
        raise SolverError("directions must have shape (k-1, n)")
    f0 = oracle.eval(real, x)
    diffs = np.array([oracle.eval(real, x + tau * s) - f0 for s in S])
    return (n / (k - 1)) * (diffs / tau) @ S


def directional_estimate(oracle: DirectionalOracle, real: Realization, x, s) -> np.ndarray:
    s = np.asarray(s, float)
    return s.size * oracle.query(real, x, s) * s


def directional_k_estimate(oracle: DirectionalOracle, real: Realization, x, count: int,
                           rng: np.random.Generator) -> np.ndarray:
    """``n/count * sum_i <grad, s_i> s_i`` over ``count <= n`` orthonormal directions."""
    n = np.asarray(x).size
    S = orthonormal_directions(n, count, rng)
    return (n / count) * sum(oracle.query(real, x, s) * s for s in S)


def directional_L(problem: TestProblem, rng: np.random.Generator, samples: int = 2000,
                  step: float = 1e-4) -> float:
    """Direction-averaged curvature ``E_s <grad f(x + t s) - grad f(x), s> / t`` over sampled x, s."""
    X = geo.sample_points(problem.domain, samples, rng)
    vals = []
    for x in X:
        s = sample_sphere(problem.n, rng)
        vals.append(float(np.dot(problem.grad(x + step * s) - problem.grad(x), s)) / step)
    return float(max(np.mean(vals), 0.0))


@dataclass
class ZOConfig:
    estimator: str = "two_point"
    p: float = 1.0
    L: Optional[float] = None
    tau: Union[float, str] = "auto"
    c_tau: float = 1.0
    k: int = 2
    delta: float = 0.0
    target_eps: Optional[float] = None
    max_iters: int = 1_000_000
    max_calls: Optional[int] = None
    batch: int = 1
    pilot_samples: int = 200
    strict_tolerance: bool = False
    L_mode: str = "worst"
    restart_mu2: Optional[float] = None
    D: float = 0.0
    C: float = DEFAULT_C

    def __post_init__(self):
        if self.estimator not in ESTIMATORS:
            raise SolverError(f"unknown estimator {self.estimator!r}")
        if not 0.0 <= self.p <= 1.0:
            raise SolverError("p must lie in [0, 1]")
        if isinstance(self.tau, (int, float)) and self.tau <= 0:
            raise SolverError("tau must be positive")
        if self.k < 1:
            raise SolverError("k must be >= 1")
        if self.batch < 1:
            raise SolverError("batch must be >= 1")
        if self.L_mode not in ("worst", "directional"):
            raise SolverError("L_mode must be 'worst' or 'directional'")


def auto_tau(delta: float, L: float, R: float, c_tau: float = 1.0) -> float:
    """``c_tau * sqrt(delta / L)``; without noise a cancellation-safe ``sqrt(machine eps) * R`` floor."""
    if delta > 0:
        return c_tau * math.sqrt(delta / L)
    return math.sqrt(np.finfo(float).eps) * max(R, 1.0)


class EstimatorOracle:
    """Adapter exposing a zeroth-order estimator through the first-order ``query`` interface.

    Each ``query(x, m)`` opens ``m`` realizations and averages their
    estimates; ``F`` is not available and is reported as NaN.
    """

    def __init__(self, base, config: ZOConfig, tau: float, rng: np.random.Generator):
        self.base = base
        self.problem = base.problem
        self.counter = base.counter
        self.config = config
        self.tau = tau
        self.rng = rng
        n = self.problem.n
        self.k = config.k
        if config.estimator == "two_point":
            self.k = 2
        self.directions_per_realization = min(self.k, n) if config.estimator == "directional" else self.k - 1

    def estimate(self, x) -> np.ndarray:
        real = self.base.open_realization()
        if self.config.estimator == "two_point":
            return two_point_estimate(self.base, real, x, self.tau, sample_sphere(self.problem.n, self.rng))
        if self.config.estimator == "k_point":
            return k_point_estimate(self.base, real, x, self.tau, self.k, self.rng)
        return directional_k_estimate(self.base, real, x, self.directions_per_realization, self.rng)

    def query(self, x, m: int = 1) -> FirstOrderReply:
        G = sum(self.estimate(x) for _ in range(m)) / m
        return FirstOrderReply(float("nan"), G)


def _pilot_ratio(problem: TestProblem, config: ZOConfig, tau: float, x0: np.ndarray,
                 rng: np.random.Generator):
    """Second-moment ratio ``E||g||^2 / ||E g||^2`` of the estimator at ``x0`` (noise-free pilot), and the pilot's query count."""
    k = 2 if config.estimator == "two_point" else config.k
    n = problem.n
    if config.estimator == "directional":
        pilot = DirectionalOracle(problem, rng, delta=0.0, k=min(k, n + 1), counter=CallCounter())
    else:
        pilot = ZeroOrderOracle(problem, rng, delta=0.0, k=k, counter=CallCounter())
    est = EstimatorOracle(pilot, config, tau, rng)
    G = np.array([est.estimate(x0) for _ in range(config.pilot_samples)])
    mean = G.mean(axis=0)
    g_true = problem.grad(x0)
    ref = float(np.dot(g_true, g_true))
    if ref <= 1e-300:
        ref = float(np.dot(mean, mean))
    if ref <= 1e-300:
        return n / max(1, est.directions_per_realization), pilot.counter.total_calls
    return max(1.0, float(np.mean(np.sum(G * G, axis=1))) / ref), pilot.counter.total_calls


def tolerance_bound(config: ZOConfig, problem: TestProblem, L: float) -> Optional[float]:
    """Largest noise level covered by the gradient-free (or directional) guarantee."""
    if config.target_eps is None:
        return None
    n = problem.n
    k = 2 if config.estimator == "two_point" else max(2, min(config.k, n + 1))
    R = problem.domain.R
    fn = bud.thm3_budget if config.estimator == "directional" else bud.thm2_budget
    return fn(config.p, n, L, R, max(problem.D, 0.0), config.target_eps, config.C, k=k).delta_max


def zo_run(problem: TestProblem, setup: geo.ProxSetup, config: ZOConfig, rng: np.random.Generator,
           pilot_rng: Optional[np.random.Generator] = None, seed: Optional[int] = None,
           counter: Optional[CallCounter] = None) -> RunRecord:
    """Minimize with value (or directional-derivative) queries only.

    The problem must have an interior minimizer.  If ``config.delta`` exceeds
    the tolerance of the guarantee a :class:`ToleranceWarning` is issued, or a
    :class:`SolverError` raised when ``strict_tolerance`` is set.  The pilot
    estimate of the second-moment ratio uses ``pilot_rng`` and its queries are
    reported in ``extras['pilot_calls']``, not in the run's call count.
    """
    if not problem.x_star_interior():
        raise SolverError("gradient-free methods need an interior minimizer")
    n = problem.n
    L = config.L if config.L is not None else problem.constants.L
    if L is None or L <= 0:
        raise SolverError("a smoothness constant L is required")
    k = 2 if config.estimator == "two_point" else config.k
    if config.estimator != "directional" and not 2 <= k <= n + 1:
        raise SolverError(f"k must satisfy 2 <= k <= n+1, got {k}")
    if config.estimator == "directional" and not 1 <= k <= n + 1:
        raise SolverError(f"k must satisfy 1 <= k <= n+1, got {k}")
    L_check = L
    if config.L_mode == "directional":
        L_check = directional_L(problem, pilot_rng if pilot_rng is not None else np.random.default_rng(1))
    bound = tolerance_bound(config, problem, L_check)
    tol_ok = bound is None or config.delta <= bound
    if not tol_ok:
        msg = f"noise level {config.delta:.3g} exceeds the tolerance {bound:.3g} of the guarantee"
        if config.strict_tolerance:
            raise SolverError(msg)
        warnings.warn(msg, ToleranceWarning, stacklevel=2)
    R = setup.R
    tau = auto_tau(config.delta, L, R, config.c_tau) if config.tau == "auto" else float(config.tau)
    counter = counter if counter is not None else CallCounter(max_calls=config.max_calls)
    if config.estimator == "directional":
        base = DirectionalOracle(problem, rng, delta=config.delta, k=k, counter=counter)
    else:
        base = ZeroOrderOracle(problem, rng, delta=config.delta, k=k, counter=counter)
    est = EstimatorOracle(base, config, tau, rng)
    x0 = setup.center.copy()
    ratio, pilot_calls = _pilot_ratio(problem, config, tau, x0,
                                      pilot_rng if pilot_rng is not None else np.random.default_rng(0))
    L_eff = L * ratio ** (config.p + 1.0)
    igm_cfg = IGMConfig(p=config.p, L=L_eff, target_eps=config.target_eps, max_iters=config.max_iters,
                        batch=config.batch, C=config.C)
    if config.restart_mu2 is not None:
        rec = igm_restart(est, setup, igm_cfg, mu2=config.restart_mu2, D=config.D * ratio, seed=seed)
    else:
        rec = igm_run(est, setup, igm_cfg, seed=seed)
    rec.config = dict(asdict(config), tau_used=tau)
    rec.extras.update(second_moment_ratio=ratio, L_effective=L_eff, tau=tau, pilot_calls=pilot_calls,
                      realizations=counter.realizations, tolerance_bound=bound, tolerance_ok=tol_ok,
                      queries_per_realization=k if config.estimator != "directional"
                      else est.directions_per_realization)
    return rec
