"""Norm pairs, Bregman divergences and prox-mappings on the shipped feasible sets.

Two prox-setups are supported:

* ``euclidean``: the l2 norm (self-dual) with ``d(x) = 0.5 * ||x - c||_2^2``
  on a Euclidean ball or a box.
* ``ell1_entropy``: the l1 norm (dual l-infinity) with the negative entropy
  on the probability simplex.

Everything here is a pure function of immutable inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

ENTROPY_FLOOR = 1e-300
MEMBERSHIP_TOL = 1e-12


class GeometryError(ValueError):
    """Raised on dimension mismatches or unsupported set/norm combinations."""


def _as_point(x, n: Optional[int] = None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise GeometryError(f"expected a 1-d point, got shape {x.shape}")
    if n is not None and x.shape[0] != n:
        raise GeometryError(f"dimension mismatch: expected {n}, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise GeometryError("point has non-finite entries")
    return x


@dataclass(frozen=True)
class NormPair:
    kind: str = "euclidean"

    def __post_init__(self):
        if self.kind not in ("euclidean", "ell1_entropy"):
            raise GeometryError(f"unknown norm kind {self.kind!r}")

    def primal(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if self.kind == "euclidean":
            return float(np.linalg.norm(x))
        return float(np.abs(x).sum())

    def dual(self, g) -> float:
        g = np.asarray(g, dtype=float)
        if self.kind == "euclidean":
            return float(np.linalg.norm(g))
        return float(np.abs(g).max()) if g.size else 0.0


@dataclass(frozen=True)
class ProxSetup:
    """Feasible set together with its prox-structure.

    Construct through :func:`ball2`, :func:`box` or :func:`simplex`; the
    prox-diameter ``R`` is derived from the set, never passed in.
    ``R`` satisfies ``V(x, center) <= R**2`` for every ``x`` in the set.
    """

    norm: NormPair
    set_kind: str
    n: int
    center: np.ndarray
    radius: float = 0.0
    lo: Optional[np.ndarray] = None
    hi: Optional[np.ndarray] = None
    R: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "center", _as_point(self.center, self.n))
        if self.set_kind == "ball2":
            R = self.radius / np.sqrt(2.0)
        elif self.set_kind == "box":
            far = np.maximum(np.abs(self.hi - self.center), np.abs(self.center - self.lo))
            R = float(np.linalg.norm(far)) / np.sqrt(2.0)
        elif self.set_kind == "simplex":
            R = float(np.sqrt(np.log(self.n))) if self.n > 1 else 0.0
        else:
            raise GeometryError(f"unknown set {self.set_kind!r}")
        object.__setattr__(self, "R", float(R))

    @property
    def dgf(self) -> str:
        return "entropy" if self.norm.kind == "ell1_entropy" else "half_sq_l2"

    @property
    def diameter(self) -> float:
        """Diameter of the set in the primal norm."""
        if self.set_kind == "ball2":
            return 2.0 * self.radius
        if self.set_kind == "box":
            return float(np.linalg.norm(self.hi - self.lo))
        return 2.0

    def describe(self) -> dict:
        out = {"set": self.set_kind, "norm": self.norm.kind, "n": self.n, "R": self.R}
        if self.set_kind == "ball2":
            out.update(center=self.center.tolist(), radius=self.radius)
        elif self.set_kind == "box":
            out.update(lo=self.lo.tolist(), hi=self.hi.tolist())
        return out


def ball2(n: int, radius: float = 1.0, center=None) -> ProxSetup:
    if radius <= 0:
        raise GeometryError("radius must be positive")
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float)
    return ProxSetup(NormPair("euclidean"), "ball2", n, c, radius=float(radius))


def box(lo, hi) -> ProxSetup:
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if lo.shape != hi.shape or lo.ndim != 1 or np.any(lo > hi):
        raise GeometryError("box needs matching 1-d bounds with lo <= hi")
    return ProxSetup(NormPair("euclidean"), "box", lo.shape[0], 0.5 * (lo + hi), lo=lo, hi=hi)


def simplex(n: int) -> ProxSetup:
    if n < 1:
        raise GeometryError("simplex dimension must be >= 1")
    return ProxSetup(NormPair("ell1_entropy"), "simplex", n, np.full(n, 1.0 / n))


def norm(setup: ProxSetup, x, which: str = "primal") -> float:
    x = _as_point(x, setup.n)
    if which == "primal":
        return setup.norm.primal(x)
    if which == "dual":
        return setup.norm.dual(x)
    raise GeometryError(f"which must be 'primal' or 'dual', got {which!r}")


def _entropy(x: np.ndarray) -> float:
    xc = np.maximum(x, ENTROPY_FLOOR)
    return float(np.sum(xc * np.log(xc)))


def dgf_value(setup: ProxSetup, x) -> float:
    x = _as_point(x, setup.n)
    if setup.dgf == "entropy":
        return _entropy(x)
    return 0.5 * float(np.sum((x - setup.center) ** 2))


def bregman(setup: ProxSetup, x, y) -> float:
    """Bregman divergence ``V(x, y) = d(x) - d(y) - <grad d(y), x - y>``."""
    x = _as_point(x, setup.n)
    y = _as_point(y, setup.n)
    if setup.dgf == "half_sq_l2":
        return 0.5 * float(np.sum((x - y) ** 2))
    # entropy: KL divergence on the simplex, entries clamped away from zero
    xc = np.maximum(x, ENTROPY_FLOOR)
    yc = np.maximum(y, ENTROPY_FLOOR)
    v = float(np.sum(xc * np.log(xc / yc)) - xc.sum() + yc.sum())
    return max(v, 0.0)


def contains(setup: ProxSetup, x, tol: float = MEMBERSHIP_TOL) -> bool:
    x = np.asarray(x, dtype=float)
    if x.shape != (setup.n,) or not np.all(np.isfinite(x)):
        return False
    if setup.set_kind == "ball2":
        return bool(np.linalg.norm(x - setup.center) <= setup.radius * (1 + tol) + tol)
    if setup.set_kind == "box":
        return bool(np.all(x >= setup.lo - tol) and np.all(x <= setup.hi + tol))
    return bool(np.all(x >= -tol) and abs(x.sum() - 1.0) <= tol * max(1, setup.n))


def project(setup: ProxSetup, x) -> np.ndarray:
    """Nearest point of the set in the 2-norm (renormalization on the simplex)."""
    x = _as_point(x, setup.n)
    if setup.set_kind == "ball2":
        d = x - setup.center
        r = np.linalg.norm(d)
        if r <= setup.radius:
            return x.copy()
        return setup.center + d * (setup.radius / r)
    if setup.set_kind == "box":
        return np.clip(x, setup.lo, setup.hi)
    w = np.maximum(x, 0.0)
    s = w.sum()
    if s <= 0:
        return setup.center.copy()
    return w / s


def prox_step(setup: ProxSetup, z, g, a: float) -> np.ndarray:
    """Closed-form ``argmin_{x in Q} a*<g, x> + V(x, z)``."""
    z = _as_point(z, setup.n)
    g = _as_point(g, setup.n)
    if a < 0:
        raise GeometryError("step weight must be non-negative")
    if a == 0:
        return z.copy()
    if setup.dgf == "half_sq_l2":
        return project(setup, z - a * g)
    # multiplicative weights, shifted for overflow safety
    logits = np.log(np.maximum(z, ENTROPY_FLOOR)) - a * g
    logits -= logits.max()
    w = np.exp(logits)
    return w / w.sum()


def sample_points(setup: ProxSetup, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``size`` points of the set (uniform for ball and box, Dirichlet(1) on the simplex)."""
    n = setup.n
    if setup.set_kind == "ball2":
        u = rng.standard_normal((size, n))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        r = setup.radius * rng.random(size) ** (1.0 / n)
        return setup.center + u * r[:, None]
    if setup.set_kind == "box":
        return setup.lo + (setup.hi - setup.lo) * rng.random((size, n))
    return rng.dirichlet(np.ones(n), size=size)
