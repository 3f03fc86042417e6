"""Closed-form embeddings between problem classes.

* Hoelder-continuous gradients become an inexact oracle for a smooth problem,
  trading the smoothness constant against the oracle slack ``delta``.
* Uniform convexity of degree ``rho`` becomes strong convexity with a
  ``delta``-dependent modulus.
* A linear ``M * ||y - x||`` term in the upper model is absorbed into the
  variance constant.

All functions are pure; ``C`` is the shared constant that stands in for every
big-O in the budget formulas.
"""

from __future__ import annotations

from dataclasses import dataclass

DEFAULT_C = 10.0
RHO_SINGULAR_GAP = 1e-6


class ReductionError(ValueError):
    pass


@dataclass(frozen=True)
class SmoothingCertificate:
    delta: float
    L_effective: float
    nu: float
    L_nu: float


@dataclass(frozen=True)
class StrongConvexityCertificate:
    delta: float
    mu_effective: float
    rho: float
    kappa_rho: float


def holder_to_smooth(L_nu: float, nu: float, delta: float) -> float:
    """Smoothness constant of the inexact oracle induced by a Hoelder gradient.

    ``L = L_nu * (L_nu * (1 - nu) / (2 * delta * (1 + nu))) ** ((1 - nu) / (1 + nu))``;
    for ``nu == 1`` this is ``L_1`` whatever ``delta`` is.
    """
    if not 0.0 <= nu <= 1.0:
        raise ReductionError("nu must lie in [0, 1]")
    if L_nu <= 0:
        raise ReductionError("L_nu must be positive")
    if nu == 1.0:
        return float(L_nu)
    if delta <= 0:
        raise ReductionError("delta must be positive when nu < 1 (the smooth constant is infinite)")
    expo = (1.0 - nu) / (1.0 + nu)
    return float(L_nu * (L_nu * (1.0 - nu) / (2.0 * delta * (1.0 + nu))) ** expo)


def smoothing_certificate(L_nu: float, nu: float, delta: float) -> SmoothingCertificate:
    return SmoothingCertificate(delta, holder_to_smooth(L_nu, nu, delta), nu, L_nu)


def admissible_delta(epsilon: float, N: float, p: float, C: float = DEFAULT_C) -> float:
    """Largest oracle slack tolerated by an ``N``-step method of order ``p``: ``eps / (C * N**p)``."""
    if epsilon <= 0 or N < 1 or not 0.0 <= p <= 1.0:
        raise ReductionError("need epsilon > 0, N >= 1 and p in [0, 1]")
    return float(epsilon / N**p / C)


def uniform_to_strong(kappa_rho: float, rho: float, delta: float) -> float:
    """Strong-convexity modulus obtained from uniform convexity of degree ``rho``.

    Implements ``2**(1 - 4/rho) * kappa**(2/rho) * rho * (1/(rho - 2))**rho * delta**((rho - 2)/rho)``
    as printed for ``rho > 2``.  The printed factor ``(1/(rho-2))**rho`` blows
    up as ``rho -> 2+``; at ``rho == 2`` the modulus is ``kappa_2`` itself, and the
    open interval ``(2, 2 + 1e-6]`` is rejected rather than evaluated.
    """
    if rho < 2:
        raise ReductionError("rho must be >= 2")
    if kappa_rho < 0:
        raise ReductionError("kappa_rho must be non-negative")
    if rho == 2:
        return float(kappa_rho)
    if rho <= 2 + RHO_SINGULAR_GAP:
        raise ReductionError("rho too close to 2: the closed form is singular there")
    if delta <= 0:
        raise ReductionError("delta must be positive for rho > 2")
    return float(
        2.0 ** (1.0 - 4.0 / rho)
        * kappa_rho ** (2.0 / rho)
        * rho
        * (1.0 / (rho - 2.0)) ** rho
        * delta ** ((rho - 2.0) / rho)
    )


def strong_convexity_certificate(kappa_rho: float, rho: float, delta: float) -> StrongConvexityCertificate:
    return StrongConvexityCertificate(delta, uniform_to_strong(kappa_rho, rho, delta), rho, kappa_rho)


def m_term_variance(D: float, M: float) -> float:
    """Variance constant after absorbing a linear ``M``-term: ``M**2 + D``."""
    if D < 0 or M < 0:
        raise ReductionError("D and M must be non-negative")
    return float(M * M + D)
