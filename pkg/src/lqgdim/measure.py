"""Cell-mass approximation of the gamma-LQG measure and ball-mass queries."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numba
import numpy as np

from .errors import DomainError
from .field import FieldKind, GridField, GridSpec, circle_averages, dgff_variance
from .formulas import _check_gamma

log = logging.getLogger(__name__)

_LOG_CLAMP = 700.0


@dataclass(frozen=True)
class MassGrid:
    spec: GridSpec
    gamma: float
    cell_mass: np.ndarray
    # row_prefix[i, j] = sum of cell_mass[i, :j]
    row_prefix: np.ndarray
    field: GridField | None = None
    clamped: int = 0

    @property
    def total(self) -> float:
        return float(self.row_prefix[:, -1].sum())


@dataclass(frozen=True)
class CriticalRadii:
    spec: GridSpec
    eps: float
    r_bar: np.ndarray
    r_under: np.ndarray | None
    degenerate_fraction: float


def trapezoid_weights(n: int) -> np.ndarray:
    """Area weights of lattice cells; edge cells are half cells so the total is 1."""
    w = np.ones(n)
    w[0] = w[-1] = 0.5
    return np.outer(w, w)


def _row_prefix(mass: np.ndarray) -> np.ndarray:
    out = np.zeros((mass.shape[0], mass.shape[1] + 1))
    np.cumsum(mass, axis=1, out=out[:, 1:])
    return out


def build_measure(field: GridField, gamma: float) -> MassGrid:
    """Cell masses ``spacing^2 * w * t_min^{gamma^2/2} * exp(gamma h)``.

    For DGFF samples the exact site variance replaces ``log(1/t_min)`` in the
    normalisation, so ``E[mass] = spacing^2 * w`` at every site.
    """
    gamma = _check_gamma(gamma)
    spec = field.spec
    h = spec.spacing
    if field.kind is FieldKind.DGFF:
        var = field.variance if field.variance is not None else dgff_variance(spec.n)
        log_norm = -0.5 * gamma * gamma * var
    else:
        t_min = 1.0 if field.t_min is None else field.t_min
        log_norm = 0.5 * gamma * gamma * math.log(t_min)
    logm = gamma * field.values + log_norm
    clamped = int(np.count_nonzero(np.abs(logm) > _LOG_CLAMP))
    if clamped:
        log.warning("clamped %d cell masses to avoid overflow", clamped)
        logm = np.clip(logm, -_LOG_CLAMP, _LOG_CLAMP)
    mass = (h * h) * trapezoid_weights(spec.n) * np.exp(logm)
    return MassGrid(spec, gamma, mass, _row_prefix(mass), field=field, clamped=clamped)


@numba.njit(cache=True, nogil=True)
def _ball_mass(prefix, n, h, cx, cy, r):
    if r < 0:
        return 0.0
    r2 = r * r
    total = 0.0
    i_lo = max(0, int(math.floor((cx - r) / h)) - 1)
    i_hi = min(n - 1, int(math.ceil((cx + r) / h)) + 1)
    for i in range(i_lo, i_hi + 1):
        dx = i * h - cx
        rem = r2 - dx * dx
        if rem < 0:
            continue
        half = math.sqrt(rem)
        j_lo = max(0, int(math.ceil((cy - half) / h)))
        j_hi = min(n - 1, int(math.floor((cy + half) / h)))
        # make the chord agree exactly with the pointwise predicate
        while j_lo <= j_hi and dx * dx + (j_lo * h - cy) ** 2 > r2:
            j_lo += 1
        while j_lo - 1 >= 0 and dx * dx + ((j_lo - 1) * h - cy) ** 2 <= r2:
            j_lo -= 1
        while j_hi >= j_lo and dx * dx + (j_hi * h - cy) ** 2 > r2:
            j_hi -= 1
        while j_hi + 1 <= n - 1 and dx * dx + ((j_hi + 1) * h - cy) ** 2 <= r2:
            j_hi += 1
        if j_hi >= j_lo:
            total += prefix[i, j_hi + 1] - prefix[i, j_lo]
    return total


def ball_mass(measure: MassGrid, center, r: float) -> float:
    """Mass of cells whose lattice point lies in the closed disk B_r(center)."""
    spec = measure.spec
    cx = float(center[0]) - spec.origin[0]
    cy = float(center[1]) - spec.origin[1]
    return float(_ball_mass(measure.row_prefix, spec.n, spec.spacing, cx, cy, float(r)))


@numba.njit(cache=True, nogil=True)
def _isqrt(x):
    s = int(math.sqrt(x))
    while s * s > x:
        s -= 1
    while (s + 1) * (s + 1) <= x:
        s += 1
    return s


@numba.njit(cache=True, nogil=True)
def _site_disk_mass(prefix, n, i, j, q):
    # disk of radius q/2 lattice units: offsets with 4 (di^2 + dj^2) <= q^2
    q2 = q * q
    dmax = q // 2
    total = 0.0
    for di in range(-dmax, dmax + 1):
        ii = i + di
        if ii < 0 or ii >= n:
            continue
        w = _isqrt((q2 - 4 * di * di) // 4)
        lo = max(0, j - w)
        hi = min(n - 1, j + w)
        total += prefix[ii, hi + 1] - prefix[ii, lo]
    return total


@numba.njit(cache=True, nogil=True)
def _rbar_quarters(prefix, n, eps, q_max):
    """Largest q with mass(B_{q/2 cells}(site)) <= eps, per site (-1 if none)."""
    out = np.empty((n, n), dtype=np.int64)
    guess = 1
    for i in range(n):
        for j in range(n):
            if _site_disk_mass(prefix, n, i, j, 0) > eps:
                out[i, j] = -1
                continue
            # bracket [good, bad) by galloping from the neighbour's answer
            good = 0
            probe = max(1, guess)
            if _site_disk_mass(prefix, n, i, j, probe) <= eps:
                good = probe
                step = max(1, probe)
                bad = -1
                while True:
                    probe = good + step
                    if probe > q_max:
                        if _site_disk_mass(prefix, n, i, j, q_max) <= eps:
                            good = q_max
                        else:
                            bad = q_max
                        break
                    if _site_disk_mass(prefix, n, i, j, probe) <= eps:
                        good = probe
                        step *= 2
                    else:
                        bad = probe
                        break
                if bad < 0:
                    out[i, j] = good
                    guess = good
                    continue
            else:
                bad = probe
                step = 1
                while True:
                    probe = bad - step
                    if probe <= 0:
                        break
                    if _site_disk_mass(prefix, n, i, j, probe) <= eps:
                        good = probe
                        break
                    bad = probe
                    step *= 2
            while bad - good > 1:
                mid = (good + bad) // 2
                if _site_disk_mass(prefix, n, i, j, mid) <= eps:
                    good = mid
                else:
                    bad = mid
            out[i, j] = good
            guess = good
    return out


def _max_quarters(n: int) -> int:
    # the jump radius r = q * h / 4 must be able to span the full diagonal
    return int(math.ceil(4.0 * math.sqrt(2.0) * (n - 1))) + 1


def critical_radii(
    measure: MassGrid, field: GridField | None, eps: float, with_lower: bool = True
) -> CriticalRadii:
    """Per-site radii of balls of mass about ``eps``.

    ``r_bar``: largest r on the spacing/4 ladder with mass(B_{2r}(z)) <= eps
    (0 where the site's own cell already exceeds eps).  ``r_under``: largest r
    on a geometric ladder with exp(gamma h_r(z)) r^{2 + gamma^2/2} <= eps,
    using circle averages that stay inside the grid (NaN where none does).
    """
    if not eps > 0:
        raise DomainError(f"eps={eps} must be positive")
    spec = measure.spec
    n, h = spec.n, spec.spacing
    q = _rbar_quarters(measure.row_prefix, n, float(eps), _max_quarters(n))
    r_bar = np.where(q < 0, 0.0, q * (h / 4.0))
    degenerate = float(np.mean(r_bar < h))
    if degenerate > 0.01:
        log.warning("eps=%.3g: %.1f%% of sites have R_bar below one spacing", eps, 100 * degenerate)
    r_under = None
    if with_lower:
        if field is None:
            field = measure.field
        r_under = _lower_radii(field, measure.gamma, eps)
    return CriticalRadii(spec, float(eps), r_bar, r_under, degenerate)


def _lower_radii(field: GridField, gamma: float, eps: float) -> np.ndarray:
    spec = field.spec
    n, h = spec.n, spec.spacing
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    centers = np.stack([ii.ravel() * h + spec.origin[0], jj.ravel() * h + spec.origin[1]], axis=1)
    # distance from each site to the grid boundary
    edge = (np.minimum(np.minimum(ii, n - 1 - ii), np.minimum(jj, n - 1 - jj)) * h).ravel()
    out = np.full(n * n, np.nan)
    expo = 2.0 + 0.5 * gamma * gamma
    r = 2.0 * h
    while r <= 0.5 + 1e-12:
        ok = edge >= r - 1e-12
        if not ok.any():
            break
        avg = circle_averages(field, centers[ok], r)
        hit = gamma * avg + expo * math.log(r) <= math.log(eps)
        idx = np.flatnonzero(ok)[hit]
        out[idx] = r
        r *= 2.0**0.25
    return out.reshape(n, n)


def rescale_identity_check(measure: MassGrid, c: float, rtol: float = 1e-12) -> bool:
    """Rebuild from h + c and confirm every cell mass scales by exp(gamma c)."""
    if measure.field is None:
        raise ValueError("measure was not built from a field")
    shifted = build_measure(measure.field.shifted(c), measure.gamma)
    ratio = shifted.cell_mass / measure.cell_mass
    target = math.exp(measure.gamma * c)
    return bool(np.all(np.abs(ratio / target - 1.0) <= rtol))
