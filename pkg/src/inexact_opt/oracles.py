"""Call-counted inexact oracles and sampled checks of their contracts.

Three oracle kinds share one :class:`CallCounter`:

* :class:`FirstOrderOracle` answers ``(F, G)`` at a point, averaged over a
  mini-batch, with optional deterministic bias.
* :class:`ZeroOrderOracle` answers noisy function values.  Values obtained
  through one :class:`Realization` share the random draw ``xi`` and the
  bounded random offset, and at most ``k`` queries are allowed per realization.
* :class:`DirectionalOracle` answers noisy directional derivatives under the
  same realization rules.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.stats import t as student_t

from . import geometry as geo
from .problems import TestProblem
from .reductions import holder_to_smooth

DOMAIN_TOL = 1e-9


class OracleError(RuntimeError):
    pass


class BudgetExceeded(OracleError):
    pass


class RealizationExhausted(OracleError):
    pass


@dataclass
class CallCounter:
    total_calls: int = 0
    realizations: int = 0
    max_calls: Optional[int] = None

    def charge(self, m: int = 1):
        if self.max_calls is not None and self.total_calls + m > self.max_calls:
            raise BudgetExceeded(f"oracle budget of {self.max_calls} calls exceeded")
        self.total_calls += m

    def remaining(self) -> Optional[int]:
        return None if self.max_calls is None else self.max_calls - self.total_calls


@dataclass(frozen=True)
class FirstOrderReply:
    F: float
    G: np.ndarray


@dataclass(frozen=True)
class Claim:
    """Constants an oracle is declared to satisfy: slack, smoothness, strong convexity, variance."""

    delta: float = 0.0
    L: float = 1.0
    mu: float = 0.0
    D: float = 0.0


def _check_domain(problem: TestProblem, x: np.ndarray):
    if not geo.contains(problem.domain, x, tol=DOMAIN_TOL):
        raise OracleError("query point lies outside the feasible set")


class FirstOrderOracle:
    """Stochastic first-order oracle with optional bias.

    ``bias_kind``:

    ``"none"`` / ``"holder"``
        exact mean reply; ``"holder"`` only tags the oracle with the
        smoothness constant of the Hoelder-to-smooth reduction.
    ``"additive"``
        ``G = grad f + b w`` for a fixed unit ``w`` and ``F = f - b * diam``,
        with ``b = delta / (2 diam)``; this is a ``(delta, L)``-oracle on a set
        of diameter ``diam``.
    """

    def __init__(self, problem: TestProblem, rng: np.random.Generator, *, delta: float = 0.0,
                 bias_kind: str = "none", batch: int = 1, counter: Optional[CallCounter] = None,
                 claim: Optional[Claim] = None, bias_direction=None, check_domain: bool = True):
        if bias_kind not in ("none", "holder", "additive"):
            raise OracleError(f"unknown bias kind {bias_kind!r}")
        if delta < 0:
            raise OracleError("delta must be non-negative")
        if batch < 1:
            raise OracleError("batch must be >= 1")
        self.problem = problem
        self.rng = rng
        self.delta = float(delta)
        self.bias_kind = bias_kind
        self.batch = int(batch)
        self.counter = counter if counter is not None else CallCounter()
        self.check_domain = check_domain
        k = problem.constants
        self.claim = claim or Claim(delta=self.delta, L=k.L if k.L is not None else float("nan"),
                                    mu=k.mu2, D=problem.D)
        if bias_kind == "additive":
            w = rng.standard_normal(problem.n) if bias_direction is None else np.asarray(bias_direction, float)
            self._w = w / np.linalg.norm(w)
            self._diam = problem.domain.diameter
            self._b = self.delta / (2.0 * self._diam)
        else:
            self._w = None
            self._b = 0.0

    @property
    def calls(self) -> int:
        return self.counter.total_calls

    def replies(self, x, m: int):
        """``m`` unaveraged replies at ``x`` as arrays ``F (m,)`` and ``G (m, n)``."""
        x = np.asarray(x, dtype=float)
        if self.check_domain:
            _check_domain(self.problem, x)
        self.counter.charge(m)
        xi = self.problem.sample_xi(self.rng, m)
        f = self.problem.f(x)
        g = self.problem.grad(x)
        F = f + xi @ x
        G = g[None, :] + xi
        if self._b:
            F = F - self._b * self._diam
            G = G + self._b * self._w
        return F, G

    def query(self, x, m: Optional[int] = None) -> FirstOrderReply:
        m = self.batch if m is None else int(m)
        F, G = self.replies(x, m)
        return FirstOrderReply(float(F.mean()), G.mean(axis=0))


def fo_oracle_query(problem: TestProblem, rng: np.random.Generator, x, m: int = 1, *,
                    delta: float = 0.0, bias_kind: str = "none",
                    counter: Optional[CallCounter] = None) -> FirstOrderReply:
    """One-shot query; prefer a long-lived :class:`FirstOrderOracle` inside solvers."""
    return FirstOrderOracle(problem, rng, delta=delta, bias_kind=bias_kind, counter=counter).query(x, m)


def biased_fo_from_holder(problem: TestProblem, delta: float, rng: np.random.Generator,
                          **kwargs) -> FirstOrderOracle:
    """Exact oracle of a Hoelder-gradient problem, declared as a ``(delta, L(delta))``-oracle."""
    k = problem.constants
    if k.nu is None or k.L_nu is None:
        raise OracleError("problem does not declare Hoelder constants")
    if k.nu < 1 and delta <= 0:
        raise OracleError("delta must be positive for nu < 1")
    L = holder_to_smooth(k.L_nu, k.nu, delta) if delta > 0 else k.L_nu
    claim = Claim(delta=float(delta), L=L, mu=0.0, D=problem.D)
    return FirstOrderOracle(problem, rng, delta=delta, bias_kind="holder", claim=claim, **kwargs)


# ---------------------------------------------------------------- zeroth order


@dataclass
class Realization:
    """One draw of the randomness, usable for at most ``capacity`` queries."""

    xi: np.ndarray
    offset: float
    capacity: int
    used: int = 0

    @property
    def remaining(self) -> int:
        return self.capacity - self.used

    def _take(self):
        if self.used >= self.capacity:
            raise RealizationExhausted(f"realization allows only {self.capacity} queries")
        self.used += 1


class _RealizationOracle:
    def __init__(self, problem: TestProblem, rng: np.random.Generator, *, delta: float = 0.0,
                 k: int = 2, counter: Optional[CallCounter] = None):
        n = problem.n
        if not 1 <= k <= n + 1:
            raise OracleError(f"k must lie in [1, n+1], got {k}")
        if delta < 0:
            raise OracleError("delta must be non-negative")
        self.problem = problem
        self.rng = rng
        self.delta = float(delta)
        self.k = int(k)
        self.counter = counter if counter is not None else CallCounter()

    @property
    def calls(self) -> int:
        return self.counter.total_calls

    def open_realization(self, capacity: Optional[int] = None) -> Realization:
        cap = self.k if capacity is None else int(capacity)
        if cap > self.k:
            raise OracleError(f"capacity {cap} exceeds k={self.k}")
        xi = self.problem.sample_xi(self.rng, 1)[0]
        offset = float(self.rng.uniform(-self.delta, self.delta)) if self.delta > 0 else 0.0
        self.counter.realizations += 1
        return Realization(xi, offset, cap)


class ZeroOrderOracle(_RealizationOracle):
    """Noisy values ``f(x, xi) + smooth_bias(x) + offset(xi)``.

    The smooth bias is ``delta * sin(scale * <w, x - center>)`` with a fixed
    unit ``w``; its Lipschitz constant is ``delta * scale``.  The default
    ``scale = min(R, 1/R)`` keeps it below both ``delta * R`` and ``delta / R``.
    """

    def __init__(self, problem: TestProblem, rng: np.random.Generator, *, delta: float = 0.0,
                 k: int = 2, counter: Optional[CallCounter] = None, bias_scale: Optional[float] = None):
        super().__init__(problem, rng, delta=delta, k=k, counter=counter)
        R = problem.domain.R if problem.domain.R > 0 else 1.0
        self.bias_scale = float(min(R, 1.0 / R) if bias_scale is None else bias_scale)
        w = rng.standard_normal(problem.n)
        self._w = w / np.linalg.norm(w)

    def bias_field(self, x) -> float:
        if self.delta == 0:
            return 0.0
        t = float(np.dot(self._w, np.asarray(x, float) - self.problem.domain.center))
        return self.delta * np.sin(self.bias_scale * t)

    @property
    def bias_lipschitz(self) -> float:
        return self.delta * self.bias_scale

    def exact_value(self, real: Realization, x) -> float:
        """``f(x, xi)`` without the bias terms (for checks only, not charged)."""
        x = np.asarray(x, float)
        return self.problem.f(x) + float(real.xi @ x)

    def eval(self, real: Realization, x) -> float:
        real._take()
        self.counter.charge(1)
        x = np.asarray(x, float)
        return self.exact_value(real, x) + self.bias_field(x) + real.offset


class DirectionalOracle(_RealizationOracle):
    """Noisy directional derivatives ``<grad f(x, xi), s> + offset(xi)`` for unit ``s``."""

    def query(self, real: Realization, x, s) -> float:
        s = np.asarray(s, float)
        if abs(np.linalg.norm(s) - 1.0) > 1e-12:
            raise OracleError("direction must have unit 2-norm")
        real._take()
        self.counter.charge(1)
        x = np.asarray(x, float)
        return float(np.dot(self.problem.grad(x) + real.xi, s)) + real.offset


def zo_open_realization(oracle: ZeroOrderOracle) -> Realization:
    return oracle.open_realization()


def dir_oracle_query(oracle: DirectionalOracle, real: Realization, x, s) -> float:
    return oracle.query(real, x, s)


# ---------------------------------------------------------------- validation


@dataclass
class ValidationReport:
    passed: bool
    pairs: int
    violations: int
    max_violation: float
    variance_estimate: float
    variance_ok: bool
    worst_pair: Optional[dict] = None
    details: dict = field(default_factory=dict)


def _validation_pairs(problem: TestProblem, rng: np.random.Generator, count: int):
    dom = problem.domain
    X = geo.sample_points(dom, count, rng)
    Y = geo.sample_points(dom, count, rng)
    kind = rng.integers(0, 3, count)
    t = 10.0 ** rng.uniform(-4, 0, count)
    for i in range(count):
        if kind[i] == 1:
            # short segment towards another feasible point
            Y[i] = X[i] + t[i] * (Y[i] - X[i])
        elif kind[i] == 2 and dom.norm.kind == "euclidean":
            # move along a coordinate axis (eigendirection of diagonal quadratics)
            e = np.zeros(problem.n)
            e[rng.integers(problem.n)] = 1.0 if rng.random() < 0.5 else -1.0
            Y[i] = geo.project(dom, X[i] + t[i] * dom.diameter * e)
    return X, Y


def validate_assumption1(oracle: FirstOrderOracle, claim: Optional[Claim] = None, sample_size: int = 1,
                         pairs: int = 1000, rng: Optional[np.random.Generator] = None,
                         slack_se: Optional[float] = None, alpha: float = 0.01) -> ValidationReport:
    """Falsification test of the two-sided model inequality and the variance bound.

    For each sampled pair ``(x, y)`` the mean reply at ``x`` is estimated from
    ``sample_size`` draws and

        mu/2 ||y-x||^2 <= f(y) - E F(x) - <E G(x), y-x> <= L/2 ||y-x||^2 + delta

    is checked with ``slack_se`` standard errors of statistical slack.  By
    default the slack is the Student-t quantile that keeps the family-wise
    false-alarm rate over all pairs at ``alpha`` (Bonferroni).
    """
    if sample_size < 1:
        raise OracleError("sample_size must be >= 1")
    claim = claim or oracle.claim
    if slack_se is None:
        df = max(sample_size - 1, 1)
        slack_se = float(student_t.ppf(1.0 - alpha / (2.0 * pairs), df))
    rng = rng if rng is not None else np.random.default_rng(0)
    problem = oracle.problem
    dom = problem.domain
    X, Y = _validation_pairs(problem, rng, pairs)
    violations = 0
    worst = 0.0
    worst_pair = None
    var_sum = 0.0
    var_terms = []
    for x, y in zip(X, Y):
        F, G = oracle.replies(x, sample_size)
        d = y - x
        s = F + G @ d
        term = problem.f(y) - float(s.mean())
        se = float(s.std(ddof=1) / np.sqrt(sample_size)) if sample_size > 1 else 0.0
        dist = dom.norm.primal(d)
        scale = 1e-10 * max(1.0, abs(problem.f(y)), abs(float(F.mean())))
        lower = 0.5 * claim.mu * dist**2 - slack_se * se - scale
        upper = 0.5 * claim.L * dist**2 + claim.delta + slack_se * se + scale
        excess = max(lower - term, term - upper, 0.0)
        if excess > 0:
            violations += 1
            if excess > worst:
                worst = excess
                worst_pair = {"x": x.tolist(), "y": y.tolist(), "term": term,
                              "lower": lower, "upper": upper}
        if sample_size > 1:
            dev = G - G.mean(axis=0)
            per = np.array([dom.norm.dual(v) ** 2 for v in dev])
            v = float(per.sum() / (sample_size - 1))
            var_sum += v
            var_terms.append(v)
    var_est = var_sum / pairs if sample_size > 1 else 0.0
    var_se = float(np.std(var_terms) / np.sqrt(len(var_terms))) if var_terms else 0.0
    # a single one-sided test on the pooled estimate
    var_ok = var_est <= claim.D * (1 + 1e-9) + float(student_t.ppf(1.0 - alpha, max(len(var_terms) - 1, 1))) * var_se + 1e-12
    return ValidationReport(violations == 0 and var_ok, pairs, violations, worst, var_est, var_ok,
                            worst_pair, {"claim": claim.__dict__})
