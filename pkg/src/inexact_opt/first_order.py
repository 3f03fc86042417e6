"""Intermediate gradient methods with inexact stochastic oracles.

One scheme covers the whole family ``p in [0, 1]``: with weights
``a_{k+1} = (k+1)**p / (2**p L)`` and ``A_{k+1} = A_k + a_{k+1}``,

    y     = (A_k x_bar + a z) / A_{k+1}
    z'    = prox(z, G(y), a)
    x_bar = (A_k x_bar + a z') / A_{k+1}

``p = 0`` is a dual-averaged gradient method with constant step, ``p = 1``
is the similar-triangles fast gradient method.  Larger ``p`` converges faster
but accumulates oracle bias as ``N**p * delta``.

:func:`igm_restart` turns the convex method into a linearly convergent one
under strong convexity; :func:`igm_universal` estimates the smoothness
constant by backtracking and needs no Hoelder constants.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from . import geometry as geo
from .oracles import BudgetExceeded
from .records import RunRecord, SolverError
from .reductions import DEFAULT_C

FEAS_TOL = 1e-10
MAX_DOUBLINGS = 60


@dataclass
class IGMConfig:
    p: float = 1.0
    L: Union[float, str] = 1.0
    target_eps: Optional[float] = None
    max_iters: int = 10_000
    batch: Union[int, Callable[[int], int]] = 1
    delta_budget: float = 0.0
    max_calls: Optional[int] = None
    x0: Optional[np.ndarray] = None
    record_walltime: bool = False
    check_invariants: bool = True
    C: float = DEFAULT_C

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise SolverError(f"p must lie in [0, 1], got {self.p}")
        if self.L != "adaptive" and not (isinstance(self.L, (int, float)) and self.L > 0):
            raise SolverError("L must be positive or 'adaptive'")
        if isinstance(self.batch, int) and self.batch < 1:
            raise SolverError("batch must be >= 1")
        if self.target_eps is not None and self.target_eps <= 0:
            raise SolverError("target_eps must be positive")

    def batch_at(self, k: int) -> int:
        m = self.batch(k) if callable(self.batch) else self.batch
        if m < 1:
            raise SolverError("batch must be >= 1")
        return int(m)

    def echo(self) -> dict:
        d = asdict(self)
        d["batch"] = "schedule" if callable(self.batch) else self.batch
        d["x0"] = None if self.x0 is None else np.asarray(self.x0, float).tolist()
        return d


@dataclass
class IGMState:
    k: int
    A: float
    y: np.ndarray
    z: np.ndarray
    x_bar: np.ndarray
    grad_accumulator: np.ndarray = field(repr=False, default=None)

    @classmethod
    def start(cls, x0: np.ndarray) -> "IGMState":
        x0 = np.asarray(x0, float)
        return cls(0, 0.0, x0.copy(), x0.copy(), x0.copy(), np.zeros_like(x0))


def weight(k_next: int, p: float, L: float) -> float:
    """``a_{k+1} = (k+1)**p / (2**p L)``."""
    return k_next**p / (2.0**p * L)


def min_weight_sum(N: int, p: float, L: float) -> float:
    """Lower bound ``N**(p+1) / (2**(p+1) (p+1) L)`` on ``A_N``."""
    return N ** (p + 1.0) / (2.0 ** (p + 1.0) * (p + 1.0) * L)


def query_point(state: IGMState, a: float) -> np.ndarray:
    A1 = state.A + a
    return (state.A * state.x_bar + a * state.z) / A1


def advance(state: IGMState, setup: geo.ProxSetup, a: float, y: np.ndarray, G: np.ndarray) -> IGMState:
    """One step of the scheme given the gradient reply ``G`` at ``y``."""
    A1 = state.A + a
    if not np.all(np.isfinite(G)):
        raise SolverError(f"non-finite oracle reply at iteration {state.k + 1}")
    z = geo.prox_step(setup, state.z, G, a)
    x_bar = (state.A * state.x_bar + a * z) / A1
    # averaging may leave the set by rounding only; pull it back
    if not geo.contains(setup, x_bar, tol=0.0):
        x_bar = geo.project(setup, x_bar)
    return IGMState(state.k + 1, A1, y, z, x_bar, state.grad_accumulator + a * G)


def _check_state(state: IGMState, setup: geo.ProxSetup, p: float, L: float):
    for name in ("y", "z", "x_bar"):
        v = getattr(state, name)
        if not np.all(np.isfinite(v)):
            raise SolverError(f"non-finite {name} at iteration {state.k}; L is probably too small")
        if not geo.contains(setup, v, tol=FEAS_TOL):
            raise SolverError(f"{name} left the feasible set at iteration {state.k}")
    if state.k > 0 and state.A < min_weight_sum(state.k, p, L) * (1 - 1e-12):
        raise SolverError("weight sum fell below its guaranteed growth")


class _Clock:
    def __init__(self, enabled: bool):
        self.enabled = enabled
        self.t0 = time.perf_counter_ns()

    def __call__(self) -> int:
        return time.perf_counter_ns() - self.t0 if self.enabled else 0


def _gap_fn(oracle):
    problem = getattr(oracle, "problem", None)
    if problem is None or problem.f_star is None:
        return lambda x: float("nan")
    return problem.gap


def _default_x0(setup: geo.ProxSetup, x0) -> np.ndarray:
    if x0 is not None:
        x = np.asarray(x0, float)
        if not geo.contains(setup, x, tol=FEAS_TOL):
            raise SolverError("x0 lies outside the feasible set")
        return x.copy()
    return setup.center.copy()


def igm_run(oracle, setup: geo.ProxSetup, config: IGMConfig, seed: Optional[int] = None,
            record: Optional[RunRecord] = None, k_offset: int = 0) -> RunRecord:
    """Run the order-``p`` method with a known smoothness constant.

    Stops when the true gap of ``x_bar`` reaches ``config.target_eps`` (if the
    optimum is known), after ``config.max_iters`` iterations, or when the
    oracle budget runs out (status ``"budget_exceeded"``).
    """
    if config.L == "adaptive":
        raise SolverError("igm_run needs a numeric L; use igm_universal for adaptive L")
    L = float(config.L)
    p = config.p
    gap = _gap_fn(oracle)
    rec = record if record is not None else RunRecord(seed=seed, config=config.echo())
    clock = _Clock(config.record_walltime)
    state = IGMState.start(_default_x0(setup, config.x0))
    base_calls = oracle.counter.total_calls
    g = gap(state.x_bar)
    if record is None:
        rec.add(k_offset, oracle.counter.total_calls, g, clock())
    eps = config.target_eps
    status = "max_iters"
    if eps is not None and g <= eps:
        status = "converged"
    else:
        for _ in range(config.max_iters):
            a = weight(state.k + 1, p, L)
            y = query_point(state, a)
            try:
                reply = oracle.query(y, config.batch_at(state.k))
            except BudgetExceeded:
                status = "budget_exceeded"
                break
            state = advance(state, setup, a, y, reply.G)
            if config.check_invariants:
                _check_state(state, setup, p, L)
            g = gap(state.x_bar)
            rec.add(k_offset + state.k, oracle.counter.total_calls, g, clock())
            if eps is not None and g <= eps:
                status = "converged"
                break
    rec.x_final = state.x_bar
    rec.status = status
    rec.extras.setdefault("A_final", state.A)
    rec.extras["solver_calls"] = rec.extras.get("solver_calls", 0) + oracle.counter.total_calls - base_calls
    return rec


# ------------------------------------------------------------------ restarts


def restart_schedule(p: float, L: float, mu2: float, R2: float, eps: float, C: float = DEFAULT_C):
    """``(stages, inner_iterations)`` of the restart scheme."""
    if mu2 <= 0:
        raise SolverError("mu2 must be positive")
    ratio = mu2 * R2 * R2 / eps
    stages = max(1, math.ceil(math.log2(ratio) - 1e-12)) if ratio > 1 else 1
    inner = max(1, math.ceil(C * (L / mu2) ** (1.0 / (p + 1.0)) - 1e-9))
    return stages, inner


def igm_restart(oracle, setup: geo.ProxSetup, config: IGMConfig, mu2: float, R2: Optional[float] = None,
                D: float = 0.0, seed: Optional[int] = None, stop: str = "iterate") -> RunRecord:
    """Restarted method for ``mu2``-strongly convex problems (euclidean setups).

    Stage ``j`` starts at the previous output and runs a fixed number of
    iterations so that the gap bound halves.  With noise, stage ``j`` uses the
    batch ``ceil(C D / (mu2 g_j N_inner))`` where ``g_j = mu2 R2^2 2^-(j+1)`` is
    its target gap, so that the calls sum to about ``2 C D / (mu2 eps)``.

    ``stop`` selects when the run ends: ``"iterate"`` as soon as the true gap
    of the current iterate is below ``target_eps``, ``"stage"`` at the first
    stage boundary where it is, ``"schedule"`` only after the full schedule.
    """
    if mu2 is None or mu2 <= 0:
        raise SolverError("mu2 must be positive")
    if setup.norm.kind != "euclidean":
        raise SolverError("restarts need a euclidean prox-setup")
    if config.target_eps is None:
        raise SolverError("restarts need target_eps")
    if stop not in ("iterate", "stage", "schedule"):
        raise SolverError(f"unknown stop rule {stop!r}")
    if config.L == "adaptive":
        raise SolverError("restarts need a numeric L")
    L = float(config.L)
    R2 = setup.R if R2 is None else float(R2)
    eps = config.target_eps
    stages, inner = restart_schedule(config.p, L, mu2, R2, eps, config.C)
    rec = RunRecord(seed=seed, config=dict(config.echo(), mu2=mu2, R2=R2, D=D))
    gap = _gap_fn(oracle)
    clock = _Clock(config.record_walltime)
    x = _default_x0(setup, config.x0)
    rec.add(0, oracle.counter.total_calls, gap(x), clock())
    k = 0
    status = "max_iters"
    stage_log = []
    for j in range(stages):
        g_target = mu2 * R2 * R2 * 2.0 ** (-(j + 1))
        m = max(config.batch_at(k), math.ceil(config.C * D / (mu2 * g_target * inner) - 1e-9)) if D > 0 \
            else config.batch_at(k)
        stage_cfg = IGMConfig(p=config.p, L=L, target_eps=eps if stop == "iterate" else None,
                              max_iters=inner, batch=m,
                              x0=x, record_walltime=False, check_invariants=config.check_invariants,
                              C=config.C)
        sub = RunRecord()
        sub.add(k, oracle.counter.total_calls, float("nan"))
        igm_run(oracle, setup, stage_cfg, record=sub, k_offset=k)
        for row in sub.rows[1:]:
            rec.add(row[0], row[1], row[2], clock())
        x = sub.x_final
        k = sub.iterations
        stage_log.append({"stage": j, "batch": m, "iterations": inner, "gap": gap(x)})
        if sub.status == "budget_exceeded":
            status = "budget_exceeded"
            break
        if (stop == "iterate" and sub.status == "converged") or (stop == "stage" and gap(x) <= eps):
            status = "converged"
            break
    else:
        status = "converged" if gap(x) <= eps else "schedule_done"
    rec.x_final = x
    rec.status = status
    rec.extras.update(stages=stages, inner_iterations=inner, stage_log=stage_log,
                      stages_run=len(stage_log))
    return rec


# ------------------------------------------------------------------ universal


def _universal_weight(k_next: int, p: float, L: float, A: float) -> float:
    # the second term keeps a^2 L <= A + a, which the acceptance test relies on
    a_p = (k_next / 2.0) ** p / L
    a_fast = (1.0 + math.sqrt(1.0 + 4.0 * L * A)) / (2.0 * L)
    return min(a_p, a_fast)


def igm_universal(oracle, setup: geo.ProxSetup, p: float, target_eps: float, L0: float = 1.0,
                  max_iters: int = 100_000, max_calls: Optional[int] = None, seed: Optional[int] = None,
                  record_walltime: bool = False) -> RunRecord:
    """Order-``p`` method with backtracking on the smoothness constant.

    Each trial costs two oracle calls (at ``y`` and at the new ``x_bar``) and
    is accepted when

        F(x_bar') <= F(y) + <G(y), x_bar' - y> + L_k/2 ||x_bar' - y||^2 + a/A' * eps/2;

    after acceptance the estimate is halved for the next iteration.
    """
    if not 0.0 <= p <= 1.0:
        raise SolverError("p must lie in [0, 1]")
    if target_eps <= 0:
        raise SolverError("target_eps must be positive")
    gap = _gap_fn(oracle)
    rec = RunRecord(seed=seed, config={"p": p, "target_eps": target_eps, "L0": L0, "max_iters": max_iters,
                                       "max_calls": max_calls, "family": "igm_universal"})
    clock = _Clock(record_walltime)
    if max_calls is not None:
        oracle.counter.max_calls = oracle.counter.total_calls + max_calls
    state = IGMState.start(setup.center)
    g = gap(state.x_bar)
    rec.add(0, oracle.counter.total_calls, g, clock())
    L = float(L0)
    L_hist = []
    status = "max_iters"
    if g <= target_eps:
        status = "converged"
    else:
        try:
            for _ in range(max_iters):
                for trial in range(MAX_DOUBLINGS + 1):
                    a = _universal_weight(state.k + 1, p, L, state.A)
                    A1 = state.A + a
                    y = query_point(state, a)
                    ry = oracle.query(y, 1)
                    new = advance(state, setup, a, y, ry.G)
                    rx = oracle.query(new.x_bar, 1)
                    d = new.x_bar - y
                    model = ry.F + float(np.dot(ry.G, d)) + 0.5 * L * setup.norm.primal(d) ** 2 \
                        + a / A1 * target_eps / 2.0
                    if rx.F <= model:
                        break
                    if trial == MAX_DOUBLINGS:
                        raise SolverError("backtracking exceeded 60 doublings; objective is not Hoelder "
                                          "or badly scaled")
                    L *= 2.0
                state = new
                L_hist.append(L)
                g = gap(state.x_bar)
                rec.add(state.k, oracle.counter.total_calls, g, clock())
                if g <= target_eps:
                    status = "converged"
                    break
                L /= 2.0
        except BudgetExceeded:
            status = "budget_exceeded"
    rec.x_final = state.x_bar
    rec.status = status
    rec.extras["L_history"] = L_hist
    return rec
