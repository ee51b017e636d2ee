"""Closed-form exponents, bounds and relations for the LQG dimension d_gamma.

All functions are pure and work on plain floats.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

from .errors import DomainError

GAMMA_PURE_GRAVITY = math.sqrt(8.0 / 3.0)


def _check_gamma(gamma: float, allow_two: bool = False) -> float:
    gamma = float(gamma)
    upper_ok = gamma <= 2.0 if allow_two else gamma < 2.0
    if not (gamma > 0.0 and upper_ok) or math.isnan(gamma):
        rng = "(0, 2]" if allow_two else "(0, 2)"
        raise DomainError(f"gamma={gamma!r} outside {rng}")
    return gamma


def _check_dim(d: float) -> float:
    d = float(d)
    if not d > 2.0:
        raise DomainError(f"dimension d={d!r} must exceed 2")
    return d


def _cubic_branch(gamma: float) -> float:
    g2 = gamma * gamma
    return (4.0 + g2 + math.sqrt(16.0 + 2.0 * g2 + g2 * g2)) / 3.0


def _ratio_branch(gamma: float) -> float:
    # 2 g^2 / (4 + g^2 - sqrt(16 + g^4)), rationalised to avoid cancellation at small g
    g2 = gamma * gamma
    return (4.0 + g2 + math.sqrt(16.0 + g2 * g2)) / 4.0


def lower_bound(gamma: float) -> float:
    """Lower bound for d_gamma; equals 4 at gamma = sqrt(8/3)."""
    gamma = _check_gamma(gamma)
    if gamma <= GAMMA_PURE_GRAVITY:
        return max(math.sqrt(6.0) * gamma, _ratio_branch(gamma))
    return _cubic_branch(gamma)


def upper_bound(gamma: float) -> float:
    """Upper bound for d_gamma; equals 4 at gamma = sqrt(8/3)."""
    gamma = _check_gamma(gamma)
    if gamma <= GAMMA_PURE_GRAVITY:
        return min(_cubic_branch(gamma), 2.0 + 0.5 * gamma * gamma + math.sqrt(2.0) * gamma)
    return math.sqrt(6.0) * gamma


def watabiki(gamma: float) -> float:
    gamma = _check_gamma(gamma, allow_two=True)
    g2 = gamma * gamma
    return 1.0 + g2 / 4.0 + 0.25 * math.sqrt((4.0 + g2) ** 2 + 16.0 * g2)


def quad_guess(gamma: float) -> float:
    """Quadratic interpolation through d_0 = 2 and d_{sqrt(8/3)} = 4."""
    gamma = float(gamma)
    if not 0.0 <= gamma <= 2.0:
        raise DomainError(f"gamma={gamma!r} outside [0, 2]")
    return 2.0 + 0.5 * gamma * gamma + gamma / math.sqrt(6.0)


def lfpp_xi(gamma: float, d: float) -> float:
    """LFPP parameter xi = gamma / d."""
    gamma = _check_gamma(gamma)
    return gamma / _check_dim(d)


def lfpp_lambda(gamma: float, d: float) -> float:
    """Exponent of delta in continuum LFPP distances: 1 - 2/d - gamma^2/(2d)."""
    gamma = _check_gamma(gamma)
    d = _check_dim(d)
    return 1.0 - 2.0 / d - gamma * gamma / (2.0 * d)


def discrete_lfpp_exponent(gamma: float, d: float) -> float:
    """Exponent of n in discrete LFPP distances at lattice separation n."""
    gamma = _check_gamma(gamma)
    d = _check_dim(d)
    return 2.0 / d + gamma * gamma / (2.0 * d)


def heat_kernel_exponent(d: float) -> float:
    return 1.0 / (_check_dim(d) - 1.0)


def lqg_q(gamma: float) -> float:
    """Q = 2/gamma + gamma/2."""
    gamma = _check_gamma(gamma)
    return 2.0 / gamma + gamma / 2.0


@dataclass(frozen=True)
class BoundsRow:
    gamma: float
    lower: float
    upper: float
    watabiki: float
    quad: float


def bounds_table(gammas: Iterable[float], tol: float = 1e-9) -> list[BoundsRow]:
    """One row of bounds and predictions per gamma.

    Raises AssertionError if the Watabiki value falls outside the bounds,
    which would indicate a formula bug rather than bad input.
    """
    rows = []
    for g in gammas:
        lo, hi = lower_bound(g), upper_bound(g)
        wat = watabiki(g)
        if not (2.0 < lo <= hi + tol and lo - tol <= wat <= hi + tol):
            raise AssertionError(f"bound ordering violated at gamma={g}: {lo}, {wat}, {hi}")
        rows.append(BoundsRow(float(g), lo, hi, wat, quad_guess(g)))
    return rows
