"""Oracle-complexity budgets as explicit functions of the problem constants.

Every ``O(.)`` is realized as ``C * (expression)`` with one shared constant
``C`` (default 10).  Integer fields are ceilings of the real-valued ones; the
real values are kept on the record (``calls_real``, ``iterations_real``)
because only they are continuous in ``p``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from .reductions import DEFAULT_C, uniform_to_strong


class BudgetError(ValueError):
    pass


def _ceil(x: float) -> int:
    # absorb float noise such as 1000.0000000000001, otherwise a true ceiling
    r = round(x)
    if abs(x - r) <= 1e-12 * max(1.0, abs(x)):
        return int(r)
    return int(math.ceil(x))


def _log_factor(arg: float) -> int:
    """``ceil(ln(arg))`` clamped to at least one stage."""
    if arg <= 1.0:
        return 1
    return max(1, _ceil(math.log(arg)))


def _check_p(p: float):
    if not 0.0 <= p <= 1.0:
        raise BudgetError(f"p must lie in [0, 1], got {p}")


def _positive(**kw):
    for k, v in kw.items():
        if v is None or not v > 0:
            raise BudgetError(f"{k} must be positive, got {v}")


@dataclass
class Budget:
    theorem: str
    oracle_calls: int
    iterations: int
    batch: int
    delta_max: float
    dominating_term: str
    constant_C: float
    calls_real: float
    iterations_real: float
    det_real: float = 0.0
    var_real: float = 0.0
    extras: dict = field(default_factory=dict)

    def as_row(self) -> dict:
        row = asdict(self)
        extras = row.pop("extras")
        row.update({f"x_{k}": v for k, v in extras.items()})
        return row


def _assemble(theorem, det_real, var_real, iterations_real, delta_max, C, extras=None) -> Budget:
    calls_real = max(det_real, var_real)
    iterations = max(1, _ceil(iterations_real))
    calls = max(_ceil(calls_real), iterations)
    batch = max(1, -(-calls // iterations))
    dom = "variance" if var_real > det_real else "deterministic"
    return Budget(theorem, calls, iterations, batch, float(delta_max), dom, float(C),
                  float(calls_real), float(iterations_real), float(det_real), float(var_real),
                  dict(extras or {}))


def thm1_budget(p, L, R, D, eps, C=DEFAULT_C) -> Budget:
    """Convex case: ``max{C (L R^2/eps)^(1/(p+1)), C D R^2/eps^2}`` calls."""
    _check_p(p)
    _positive(L=L, R=R, eps=eps, C=C)
    if D < 0:
        raise BudgetError("D must be non-negative")
    ratio = L * R * R / eps
    det = C * ratio ** (1.0 / (p + 1.0))
    var = C * D * R * R / eps**2
    delta = eps * (1.0 / ratio) ** (p / (p + 1.0)) / C
    return _assemble("thm1", det, var, det, delta, C)


def thm1_sc_budget(p, L2, mu2, D2, R2, eps, C=DEFAULT_C) -> Budget:
    """Strongly convex case with restarts.

    ``iterations`` uses ``ln(mu2 R2^2/eps)``, the same log as the call count,
    so it matches the restart schedule.  The count with ``ln(L2 R2^2/eps)`` is
    kept in ``extras['iterations_L_log']``.
    """
    _check_p(p)
    _positive(L2=L2, mu2=mu2, R2=R2, eps=eps, C=C)
    if D2 < 0:
        raise BudgetError("D2 must be non-negative")
    kappa_term = C * (L2 / mu2) ** (1.0 / (p + 1.0))
    log_mu = _log_factor(mu2 * R2 * R2 / eps)
    log_L = _log_factor(L2 * R2 * R2 / eps)
    det = kappa_term * log_mu
    var = C * D2 / (mu2 * eps)
    delta = eps * (mu2 / L2) ** (p / (p + 1.0)) / C
    return _assemble("thm1_sc", det, var, det, delta, C,
                     {"log_factor": log_mu, "iterations_L_log": max(1, _ceil(kappa_term * log_L))})


class IterationPair(NamedTuple):
    smooth: float
    nonsmooth: float
    total: float


def remark3_iterations(p, L, R, M, eps, mu2=None, C=DEFAULT_C) -> IterationPair:
    """Iterations when the upper model carries an extra ``M * ||y - x||`` term.

    Convex: ``C (L R^2/eps)^(1/(p+1)) + C M^2 R^2/eps^2``.
    Strongly convex: ``C (L/mu2)^(1/(p+1)) ln(L R^2/eps) + C M^2/(mu2 eps)``.
    """
    _check_p(p)
    _positive(R=R, eps=eps, C=C)
    if L < 0 or M < 0:
        raise BudgetError("L and M must be non-negative")
    if mu2 is None:
        smooth = C * (L * R * R / eps) ** (1.0 / (p + 1.0)) if L > 0 else 0.0
        ns = C * M * M * R * R / eps**2
    else:
        _positive(mu2=mu2)
        smooth = C * (L / mu2) ** (1.0 / (p + 1.0)) * max(1.0, math.log(L * R * R / eps)) if L > 0 else 0.0
        ns = C * M * M / (mu2 * eps)
    return IterationPair(smooth, ns, smooth + ns)


Profile = Union[Iterable[Tuple[float, float]], Callable[[float], float]]


def _holder_expr(p, nu, L_nu, R, eps, mu2=None):
    """Bare Hoelder expression (no ``C``), convex or strongly convex form."""
    if mu2 is None:
        return (L_nu * R ** (1.0 + nu) / eps) ** (2.0 / (1.0 + 2.0 * p * nu + nu))
    return ((L_nu ** (1.0 + nu) / (mu2 * eps ** (1.0 + nu))) ** ((1.0 + nu) / (1.0 + 2.0 * p * nu + nu))
            * _log_factor(mu2 * R * R / eps))


def _profile_points(profile: Profile) -> Sequence[Tuple[float, float]]:
    if callable(profile):
        grid = np.round(np.arange(0, 101) * 0.01, 2)
        pts = [(float(nu), float(profile(nu))) for nu in grid]
    else:
        pts = [(float(nu), float(Ln)) for nu, Ln in profile]
    pts = [(nu, Ln) for nu, Ln in pts if np.isfinite(Ln) and Ln > 0]
    if not pts:
        raise BudgetError("Hoelder profile is empty")
    for nu, _ in pts:
        if not 0.0 <= nu <= 1.0:
            raise BudgetError(f"nu={nu} outside [0, 1]")
    return pts


def cor1_budget(p, holder_profile: Profile, R, eps, C=DEFAULT_C, mu2=None) -> Budget:
    """Universal (smoothness-adaptive) methods: infimum over the Hoelder profile.

    ``holder_profile`` is either a list of ``(nu, L_nu)`` pairs or a callable
    ``nu -> L_nu`` evaluated on the grid ``0, 0.01, ..., 1``.  The minimizing
    ``nu`` is reported in ``extras['nu_star']``.
    """
    _check_p(p)
    _positive(R=R, eps=eps, C=C)
    best = None
    for nu, Ln in _profile_points(holder_profile):
        e = _holder_expr(p, nu, Ln, R, eps, mu2)
        if best is None or e < best[0]:
            best = (e, nu, Ln)
    expr, nu, Ln = best
    det = C * expr
    delta = eps / expr**p / C
    return _assemble("cor1" if mu2 is None else "cor1_sc", det, 0.0, det, delta, C,
                     {"nu_star": nu, "L_nu_star": Ln})


def cor2_budget(p, nu, L_nu, R, D, eps, C=DEFAULT_C, mu2=None, D2=None) -> Budget:
    """Non-adaptive Hoelder method with a stochastic term: ``max{N_bar, variance term}``."""
    _check_p(p)
    _positive(L_nu=L_nu, R=R, eps=eps, C=C)
    if not 0.0 <= nu <= 1.0:
        raise BudgetError("nu must lie in [0, 1]")
    expr = _holder_expr(p, nu, L_nu, R, eps, mu2)
    det = C * expr
    if mu2 is None:
        var = C * D * R * R / eps**2
    else:
        var = C * (D if D2 is None else D2) / (mu2 * eps)
    delta = eps / expr**p / C
    return _assemble("cor2" if mu2 is None else "cor2_sc", det, var, det, delta, C, {"nu": nu})


def _zo_check(n, k):
    if n < 1:
        raise BudgetError("n must be >= 1")
    if not 2 <= k <= n + 1:
        raise BudgetError(f"k must satisfy 2 <= k <= n+1, got k={k}, n={n}")


def _zo_scale(base: Budget, theorem, n, k, delta) -> Budget:
    return _assemble(theorem, n * base.det_real, n * base.var_real, base.iterations_real * n / k, delta,
                     base.constant_C, dict(base.extras, n=n, k=k))


def thm2_budget(p, n, L, R, D, eps, C=DEFAULT_C, k=2, mu2=None, D2=None) -> Budget:
    """Gradient-free methods: calls x n, tolerance / n, iterations x n/k."""
    _zo_check(n, k)
    if mu2 is None:
        base = thm1_budget(p, L, R, D, eps, C)
        name = "thm2"
    else:
        base = thm1_sc_budget(p, L, mu2, D if D2 is None else D2, R, eps, C)
        name = "thm2_sc"
    return _zo_scale(base, name, n, k, base.delta_max / n)


def thm3_budget(p, n, L, R, D, eps, C=DEFAULT_C, k=2, mu2=None, D2=None) -> Budget:
    """Directional-derivative methods: as gradient-free, with a square-root tolerance."""
    _zo_check(n, k)
    if mu2 is None:
        base = thm1_budget(p, L, R, D, eps, C)
        inner = eps * (eps / (L * R * R)) ** (p / (p + 1.0)) / C
        name = "thm3"
    else:
        base = thm1_sc_budget(p, L, mu2, D if D2 is None else D2, R, eps, C)
        inner = eps * (mu2 / L) ** (p / (p + 1.0)) / C
        name = "thm3_sc"
    return _zo_scale(base, name, n, k, math.sqrt(L / n * inner))


def high_prob_calls(N_eps, sigma, eps) -> int:
    """Calls for the high-probability guarantee: ``N * ceil(ln(1/(sigma*eps)))``."""
    if not 0.0 < sigma < 1.0:
        raise BudgetError("sigma must lie in (0, 1)")
    if eps <= 0 or sigma * eps >= 1.0:
        raise BudgetError("need sigma * eps < 1")
    return int(N_eps) * max(1, _ceil(math.log(1.0 / (sigma * eps))))


def uniform_convex_budget(rho, kappa_rho, delta, p, L2, D2, R2, eps, C=DEFAULT_C) -> Budget:
    """Strongly convex budget with ``mu`` obtained from uniform convexity."""
    mu = uniform_to_strong(kappa_rho, rho, delta)
    b = thm1_sc_budget(p, L2, mu, D2, R2, eps, C)
    b.theorem = "uniform_convex"
    b.extras.update(mu_effective=mu, rho=rho)
    return b


def dimension_warning(budget: Budget, n: Optional[int]) -> Optional[str]:
    """Validity note: deterministic lower bounds assume ``N(eps)`` below the dimension."""
    if n is None or budget.dominating_term != "deterministic":
        return None
    if budget.oracle_calls > n:
        return (f"{budget.theorem}: N(eps)={budget.oracle_calls} exceeds dimension n={n}; "
                "the optimality claim of the bound does not apply")
    return None


def fo_theory_slope(p: float) -> float:
    """Exponent of ``1/eps`` in the deterministic first-order count."""
    return 1.0 / (p + 1.0)


def holder_theory_slope(p: float, nu: float) -> float:
    return 2.0 / (1.0 + 2.0 * p * nu + nu)
