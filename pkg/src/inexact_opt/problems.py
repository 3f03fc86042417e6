"""Test objectives with known optima and certified constants."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from . import geometry as geo


class ProblemError(ValueError):
    pass


@dataclass(frozen=True)
class Constants:
    L: Optional[float] = None
    mu2: float = 0.0
    nu: Optional[float] = None
    L_nu: Optional[float] = None
    rho: Optional[float] = None
    kappa_rho: Optional[float] = None
    M: Optional[float] = None


@dataclass(frozen=True)
class TestProblem:
    """A deterministic objective on a prox-setup, optionally with additive noise.

    With ``D > 0`` the problem stands for the family
    ``f(x, xi) = f(x) + <xi, x>``, whose mean is ``f`` and whose stochastic
    gradient ``grad f(x) + xi`` has dual-norm variance ``D``.
    """

    __test__ = False  # keep pytest from collecting this class

    name: str
    n: int
    f: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    f_star: float
    x_star: np.ndarray
    constants: Constants
    domain: geo.ProxSetup
    smooth: bool = True
    params: dict = field(default_factory=dict)
    D: float = 0.0
    noise_bound: float = 0.0

    @property
    def stochastic(self) -> bool:
        return self.D > 0

    def gap(self, x) -> float:
        return float(self.f(np.asarray(x, dtype=float)) - self.f_star)

    def x_star_interior(self, tol: float = 1e-9) -> bool:
        d = self.domain
        x = self.x_star
        if d.set_kind == "ball2":
            return bool(np.linalg.norm(x - d.center) < d.radius * (1 - tol))
        if d.set_kind == "box":
            return bool(np.all(x > d.lo + tol) and np.all(x < d.hi - tol))
        return bool(np.all(x > tol))

    def sample_xi(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Zero-mean noise, uniform direction on the dual unit sphere, random radius.

        The squared radius is uniform on ``[0, 2D]`` when ``noise_bound >= sqrt(2D)``
        and equal to ``D`` otherwise, so ``E||xi||_*^2 = D`` exactly.
        """
        if not self.stochastic:
            return np.zeros((size, self.n))
        if self.domain.norm.kind == "euclidean":
            u = rng.standard_normal((size, self.n))
            u /= np.linalg.norm(u, axis=1, keepdims=True)
        else:
            # uniform on the surface of the l-infinity unit cube
            u = rng.uniform(-1.0, 1.0, (size, self.n))
            face = rng.integers(0, self.n, size)
            sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
            u[np.arange(size), face] = sign
        if self.noise_bound >= np.sqrt(2.0 * self.D) * (1 - 1e-12):
            r = np.sqrt(2.0 * self.D * rng.random(size))
        else:
            r = np.full(size, np.sqrt(self.D))
        return u * r[:, None]

    def describe(self) -> dict:
        return {"name": self.name, "n": self.n, **self.params, "D": self.D}


def stochastic_wrapper(base: TestProblem, D: float, noise_bound: Optional[float] = None) -> TestProblem:
    if D < 0:
        raise ProblemError("noise variance D must be non-negative")
    if D == 0:
        return replace(base, D=0.0, noise_bound=0.0)
    bound = np.sqrt(2.0 * D) if noise_bound is None else float(noise_bound)
    if bound < np.sqrt(D) * (1 - 1e-12):
        raise ProblemError("noise_bound must be at least sqrt(D)")
    return replace(base, D=float(D), noise_bound=bound)


def _diag_quadratic_argmin(a: np.ndarray, c: np.ndarray, dom: geo.ProxSetup) -> np.ndarray:
    """Exact minimizer of ``0.5 * sum(a * (x - c)**2)`` over the set."""
    if geo.contains(dom, c, tol=0.0):
        return c.copy()
    if dom.set_kind == "box":
        return np.clip(c, dom.lo, dom.hi)
    if dom.set_kind == "ball2":
        # x(lam) = center + a (c - center) / (a + lam), pick lam with ||x - center|| = radius
        d = c - dom.center

        def excess(lam):
            return np.linalg.norm(a * d / (a + lam)) - dom.radius

        hi = 1.0
        while excess(hi) > 0:
            hi *= 2.0
        lam = brentq(excess, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        x = dom.center + a * d / (a + lam)
        return geo.project(dom, x)
    # simplex: x_i = max(0, c_i - theta / a_i), sum x = 1
    if np.any(a <= 0):
        raise ProblemError("simplex quadratic needs a positive spectrum")

    def total(theta):
        return np.maximum(c - theta / a, 0.0).sum() - 1.0

    lo_t, hi_t = -1.0, 1.0
    while total(lo_t) < 0:
        lo_t *= 2.0
    while total(hi_t) > 0:
        hi_t *= 2.0
    theta = brentq(total, lo_t, hi_t, xtol=1e-15)
    x = np.maximum(c - theta / a, 0.0)
    return x / x.sum()


def quadratic(n: int, spectrum, center=None, domain: Optional[geo.ProxSetup] = None,
              name: str = "quadratic") -> TestProblem:
    """``f(x) = 0.5 <A (x - c), x - c>`` with ``A = diag(spectrum)``."""
    a = np.asarray(spectrum, dtype=float)
    if a.shape != (n,):
        raise ProblemError(f"spectrum must have {n} entries")
    if np.any(a < 0):
        raise ProblemError("eigenvalues must be non-negative")
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    dom = domain if domain is not None else geo.ball2(n, 1.0)

    def f(x):
        d = x - c
        return 0.5 * float(np.dot(a * d, d))

    def grad(x):
        return a * (x - c)

    x_star = _diag_quadratic_argmin(a, c, dom)
    consts = Constants(L=float(a.max()), mu2=float(a.min()), nu=1.0, L_nu=float(a.max()))
    return TestProblem(name, n, f, grad, f(x_star), x_star, consts, dom,
                       params={"spectrum": a.tolist(), "center": c.tolist()})


def log_spectrum_quadratic(n: int, L: float = 1.0, mu: float = 1e-6, R: float = 1.0,
                           offset: float = 0.9) -> TestProblem:
    """Diagonal quadratic whose eigenvalues are log-spaced on ``[mu, L]``.

    The minimizer has equal weight on every eigendirection and sits at
    ``offset`` times the radius of a ball of prox-diameter ``R`` centred at the
    origin.  Equal weights on a log-spaced spectrum make the gap of first-order
    methods decay at their worst-case polynomial rate over a wide range of
    accuracies.
    """
    spectrum = np.geomspace(L, mu, n) if n > 1 else np.array([L])
    radius = np.sqrt(2.0) * R
    signs = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    c = signs * offset * radius / np.sqrt(n)
    p = quadratic(n, spectrum, c, geo.ball2(n, radius), name="log_quadratic")
    return replace(p, params={"L": L, "mu": mu, "R": R, "offset": offset})


def offset_ball(n: int, radius: float = 1.0, shift: float = 0.5) -> geo.ProxSetup:
    """Ball whose centre (the default start point) sits at distance ``shift`` from the origin."""
    return geo.ball2(n, radius, np.full(n, shift / np.sqrt(n)))


def holder_power(n: int, nu: float, domain: Optional[geo.ProxSetup] = None) -> TestProblem:
    """``f(x) = ||x||_2^(1+nu) / (1+nu)``, gradient Hoelder with exponent ``nu``.

    The Hoelder constant is ``2**(1-nu)`` (attained at ``x = -y``); a sampled
    certificate is checked against it in :func:`certify`.  The default set is
    a unit ball centred away from the minimizer, so solvers do not start at it.
    """
    if not 0.0 < nu <= 1.0:
        raise ProblemError("nu must lie in (0, 1]; use nonsmooth_abs for nu = 0")
    dom = domain if domain is not None else offset_ball(n)
    q = 1.0 + nu

    def f(x):
        return float(np.linalg.norm(x)) ** q / q

    def grad(x):
        r = np.linalg.norm(x)
        if r == 0.0:
            return np.zeros_like(x)
        return r ** (nu - 1.0) * x

    L_nu = 2.0 ** (1.0 - nu)
    consts = Constants(L=1.0 if nu == 1.0 else None, mu2=1.0 if nu == 1.0 else 0.0, nu=nu, L_nu=L_nu)
    return TestProblem("holder_power", n, f, grad, 0.0, np.zeros(n), consts, dom, params={"nu": nu})


def nonsmooth_abs(n: int, c, domain: Optional[geo.ProxSetup] = None) -> TestProblem:
    """``f(x) = |<c, x>|`` with subgradient ``sign(<c, x>) c`` and ``sign(0) = +1``."""
    c = np.asarray(c, dtype=float)
    if c.shape != (n,) or not np.any(c != 0):
        raise ProblemError("c must be a non-zero vector of length n")
    dom = domain if domain is not None else offset_ball(n)

    def f(x):
        return abs(float(np.dot(c, x)))

    def grad(x):
        return c.copy() if np.dot(c, x) >= 0 else -c

    M = 2.0 * dom.norm.dual(c)
    consts = Constants(nu=0.0, L_nu=M, M=M)
    return TestProblem("nonsmooth_abs", n, f, grad, 0.0, np.zeros(n), consts, dom,
                       smooth=False, params={"c": c.tolist()})


def separable_holder(n: int, nu: float, w_min: float = 1e-4, offset: float = 0.9) -> TestProblem:
    """``f(x) = sum_i w_i |x_i - c_i|^(1+nu) / (1+nu)`` with weights log-spaced on ``[w_min, 1]``.

    Unlike :func:`holder_power` and :func:`nonsmooth_abs`, whose level sets are
    one-dimensional in effect, the spread of weights makes every scale of
    accuracy cost new iterations, so adaptive methods show their worst-case
    rate in ``eps``.  ``nu = 0`` gives a weighted l1 distance.
    """
    if not 0.0 <= nu <= 1.0:
        raise ProblemError("nu must lie in [0, 1]")
    if not 0.0 < w_min <= 1.0:
        raise ProblemError("w_min must lie in (0, 1]")
    w = np.geomspace(1.0, w_min, n) if n > 1 else np.ones(1)
    radius = np.sqrt(2.0)
    c = np.where(np.arange(n) % 2 == 0, 1.0, -1.0) * offset * radius / np.sqrt(n)
    q = 1.0 + nu

    def f(x):
        return float(np.sum(w * np.abs(x - c) ** q)) / q

    def grad(x):
        d = x - c
        if nu == 0.0:
            return w * np.where(d >= 0, 1.0, -1.0)
        return w * np.sign(d) * np.abs(d) ** nu

    # coordinatewise |a^nu - b^nu| <= 2^(1-nu) |a-b|^nu, summed with the power-mean inequality
    L_nu = 2.0 ** (1.0 - nu) * n ** ((1.0 - nu) / 2.0)
    consts = Constants(L=1.0 if nu == 1.0 else None, mu2=float(w.min()) if nu == 1.0 else 0.0,
                       nu=nu, L_nu=L_nu, M=L_nu if nu == 0.0 else None)
    return TestProblem("separable_holder", n, f, grad, 0.0, c, consts, geo.ball2(n, radius),
                       smooth=nu > 0, params={"nu": nu, "w_min": w_min, "offset": offset})


def _uc_ratio(rho, fx, fy, fm, alpha, dist):
    num = alpha * fx + (1 - alpha) * fy - fm
    den = 0.5 * alpha * (1 - alpha) * (alpha ** (rho - 1) + (1 - alpha) ** (rho - 1)) * dist**rho
    return num / den


def certify_kappa(rho: float, n: int, rng: np.random.Generator, samples: int = 20000) -> float:
    """Smallest sampled value of the uniform-convexity ratio for ``||x||^rho / rho``.

    The ratio is scale-invariant, so unit-ball samples suffice; half of the
    pairs are antipodal-ish (``y = -t x``), where the ratio is smallest.
    """
    x = rng.standard_normal((samples, n))
    y = rng.standard_normal((samples, n))
    half = samples // 2
    y[:half] = -x[:half] * rng.uniform(0.0, 1.0, (half, 1))
    alpha = rng.uniform(0.0, 1.0, samples)
    alpha[: samples // 4] = rng.uniform(0.0, 1e-3, samples // 4)
    alpha = np.clip(alpha, 1e-9, 1 - 1e-9)
    fx = np.linalg.norm(x, axis=1) ** rho / rho
    fy = np.linalg.norm(y, axis=1) ** rho / rho
    m = alpha[:, None] * x + (1 - alpha[:, None]) * y
    fm = np.linalg.norm(m, axis=1) ** rho / rho
    dist = np.linalg.norm(x - y, axis=1)
    ok = dist > 1e-8
    return float(np.min(_uc_ratio(rho, fx[ok], fy[ok], fm[ok], alpha[ok], dist[ok])))


def _max_norm(dom: geo.ProxSetup) -> float:
    if dom.set_kind == "ball2":
        return float(np.linalg.norm(dom.center) + dom.radius)
    if dom.set_kind == "box":
        return float(np.linalg.norm(np.maximum(np.abs(dom.lo), np.abs(dom.hi))))
    return 1.0


def uniformly_convex_power(n: int, rho: float, domain: Optional[geo.ProxSetup] = None,
                           rng: Optional[np.random.Generator] = None) -> TestProblem:
    """``f(x) = ||x||_2^rho / rho`` with a sampled uniform-convexity modulus."""
    if rho < 2:
        raise ProblemError("rho must be >= 2")
    dom = domain if domain is not None else geo.ball2(n, 1.0)

    def f(x):
        return float(np.linalg.norm(x)) ** rho / rho

    def grad(x):
        r = np.linalg.norm(x)
        return r ** (rho - 2.0) * x if r > 0 else np.zeros_like(x)

    if rho == 2:
        kappa = 1.0
    else:
        kappa = certify_kappa(rho, n, rng if rng is not None else np.random.default_rng(0))
    reach = _max_norm(dom)
    L = (rho - 1.0) * reach ** (rho - 2.0) if rho > 2 else 1.0
    consts = Constants(L=L, mu2=1.0 if rho == 2 else 0.0, nu=1.0, L_nu=L, rho=rho, kappa_rho=kappa)
    return TestProblem("uniformly_convex_power", n, f, grad, 0.0, np.zeros(n), consts, dom,
                       params={"rho": rho})


def certify(problem: TestProblem, rng: np.random.Generator, samples: int = 1000,
            rtol: float = 1e-8) -> dict:
    """Check the declared constants on sampled pairs; returns name -> bool."""
    dom = problem.domain
    X = geo.sample_points(dom, samples, rng)
    Y = geo.sample_points(dom, samples, rng)
    # also probe short distances, where Hoelder and smoothness bounds are tight
    t = 10.0 ** rng.uniform(-6, 0, samples)
    Y[: samples // 2] = X[: samples // 2] + t[: samples // 2, None] * (Y[: samples // 2] - X[: samples // 2])
    k = problem.constants
    out = {"nonneg_gap": True, "strong_convexity": True, "smoothness": True, "holder": True,
           "uniform_convexity": True}
    for x, y in zip(X, Y):
        fx, fy = problem.f(x), problem.f(y)
        gx, gy = problem.grad(x), problem.grad(y)
        d = y - x
        dist = dom.norm.primal(d)
        lin = fy - fx - float(np.dot(gx, d))
        slack = rtol * max(1.0, abs(fx), abs(fy))
        if fy - problem.f_star < -slack:
            out["nonneg_gap"] = False
        if lin < 0.5 * k.mu2 * float(np.dot(d, d)) - slack:
            out["strong_convexity"] = False
        if k.L is not None and lin > 0.5 * k.L * dist**2 + slack:
            out["smoothness"] = False
        if k.nu is not None and k.L_nu is not None and dist > 0:
            if dom.norm.dual(gx - gy) > k.L_nu * dist**k.nu * (1 + rtol) + rtol:
                out["holder"] = False
        if k.rho is not None and k.kappa_rho is not None and dist > 0:
            a = float(rng.uniform(0.01, 0.99))
            fm = problem.f(a * x + (1 - a) * y)
            gap = a * fx + (1 - a) * fy - fm
            need = 0.5 * k.kappa_rho * a * (1 - a) * (a ** (k.rho - 1) + (1 - a) ** (k.rho - 1)) * dist**k.rho
            if gap < need - slack:
                out["uniform_convexity"] = False
    return out


def sampled_holder_constant(problem: TestProblem, nu: float, rng: np.random.Generator,
                            samples: int = 10000) -> float:
    """Largest sampled ratio ``||g(x) - g(y)||_* / ||x - y||^nu``."""
    dom = problem.domain
    X = geo.sample_points(dom, samples, rng)
    Y = geo.sample_points(dom, samples, rng)
    Y[: samples // 4] = -X[: samples // 4]
    best = 0.0
    for x, y in zip(X, Y):
        dist = dom.norm.primal(y - x)
        if dist <= 1e-12:
            continue
        best = max(best, dom.norm.dual(problem.grad(x) - problem.grad(y)) / dist**nu)
    return best


def build(spec: dict) -> TestProblem:
    """Construct a problem from a config mapping ``{"name": ..., parameters...}``."""
    spec = dict(spec)
    name = spec.pop("name")
    D = float(spec.pop("D", 0.0))
    noise_bound = spec.pop("noise_bound", None)
    domain = spec.pop("domain", None)
    n = int(spec.pop("n"))
    dom = domain_from_spec(n, domain) if domain is not None else None
    if name == "quadratic":
        p = quadratic(n, spec["spectrum"], spec.get("center"), dom)
    elif name == "log_quadratic":
        p = log_spectrum_quadratic(n, spec.get("L", 1.0), spec.get("mu", 1e-6), spec.get("R", 1.0),
                                   spec.get("offset", 0.9))
    elif name == "holder_power":
        p = holder_power(n, float(spec["nu"]), dom)
    elif name == "nonsmooth_abs":
        p = nonsmooth_abs(n, spec.get("c", [1.0] + [0.0] * (n - 1)), dom)
    elif name == "separable_holder":
        p = separable_holder(n, float(spec["nu"]), float(spec.get("w_min", 1e-4)), float(spec.get("offset", 0.9)))
    elif name == "uniformly_convex_power":
        p = uniformly_convex_power(n, float(spec["rho"]), dom)
    else:
        raise ProblemError(f"unknown problem {name!r}")
    return stochastic_wrapper(p, D, noise_bound) if D > 0 else p


def domain_from_spec(n: int, spec: dict) -> geo.ProxSetup:
    kind = spec.get("set", "ball2")
    if kind == "ball2":
        return geo.ball2(n, spec.get("radius", 1.0), spec.get("center"))
    if kind == "box":
        return geo.box(spec.get("lo", [-1.0] * n), spec.get("hi", [1.0] * n))
    if kind == "simplex":
        return geo.simplex(n)
    raise ProblemError(f"unknown set {kind!r}")
