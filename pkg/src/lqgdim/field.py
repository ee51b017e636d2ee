"""Gaussian field samplers on the unit square.

Three kinds of field are produced on an ``n x n`` lattice covering [0, 1]^2:

* ``whitenoise``: the heat-kernel smoothing of space-time white noise,
  split into independent dyadic layers.  Layer ``k`` carries the part of the
  noise with time parameter ``s`` in ``[t_{k+1}^2, t_k^2]`` and has the
  stationary covariance

      C_k(r) = 1/2 * int s^{-1} exp(-r^2 / (2 s)) ds
             = 1/2 * (E1(r^2 / (2 t_k^2)) - E1(r^2 / (2 t_{k+1}^2))),

  so ``C_k(0) = log(t_k / t_{k+1}) = log 2``.
* ``whitenoise_truncated``: the same construction with the heat kernel killed
  outside a disk of radius 1/10, giving exact independence at range >= 1/5.
* ``dgff_zero_boundary``: the discrete GFF with zero boundary values,
  normalised so that variances grow like ``log`` of the distance to the
  boundary.

Array convention: ``values[i, j]`` is the field at
``(origin[0] + i * spacing, origin[1] + j * spacing)``.
"""
from __future__ import annotations

import enum
import functools
import logging
import math
import struct
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np
from scipy import fft, ndimage, special

from .errors import DomainError, ResolutionError
from .seeding import as_rng

log = logging.getLogger(__name__)

TRUNCATION_RADIUS = 0.1
CIRCLE_POINTS = 32
QUAD_NODES = 64
# negative circulant mass (in variance units) above which a warning is logged
CLIP_WARN = 1e-3


class FieldKind(str, enum.Enum):
    WHITENOISE = "whitenoise"
    WHITENOISE_TRUNCATED = "whitenoise_truncated"
    DGFF = "dgff_zero_boundary"


_KIND_CODES = {FieldKind.WHITENOISE: 0, FieldKind.WHITENOISE_TRUNCATED: 1, FieldKind.DGFF: 2}


@dataclass(frozen=True)
class GridSpec:
    """``n`` points per side on [0, 1]^2 (shifted by ``origin``)."""

    n: int
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 4:
            raise DomainError(f"grid needs n >= 4 points per side, got {self.n}")

    @property
    def spacing(self) -> float:
        return 1.0 / (self.n - 1)

    def coords(self) -> np.ndarray:
        return np.arange(self.n) * self.spacing

    def to_index(self, point) -> tuple[int, int]:
        """Nearest lattice site to a point in physical coordinates."""
        x, y = point
        i = int(round((x - self.origin[0]) / self.spacing))
        j = int(round((y - self.origin[1]) / self.spacing))
        if not (0 <= i < self.n and 0 <= j < self.n):
            raise DomainError(f"point {point} outside grid")
        return i, j

    def to_point(self, index) -> tuple[float, float]:
        i, j = index
        return (self.origin[0] + i * self.spacing, self.origin[1] + j * self.spacing)


@dataclass(frozen=True)
class GridField:
    spec: GridSpec
    values: np.ndarray
    kind: FieldKind
    # smoothing scale of a white-noise field; 1.0 means no layers at all
    t_min: float | None = None
    # exact per-site variance, only for DGFF samples
    variance: np.ndarray | None = None

    def shifted(self, c: float) -> "GridField":
        return GridField(self.spec, self.values + c, self.kind, self.t_min, self.variance)


@dataclass(frozen=True)
class LayeredField:
    spec: GridSpec
    scales: np.ndarray  # t_0 = 1 > t_1 > ... > t_K
    layers: np.ndarray  # shape (K, n, n); layer k spans scales t_k -> t_{k+1}
    truncated: bool = False
    clipped_mass: tuple[float, ...] = dc_field(default=())

    @property
    def depth(self) -> int:
        return self.layers.shape[0]

    def assemble(self, k: int | None = None) -> GridField:
        """Field smoothed at scale ``t_k``: the sum of the ``k`` coarsest layers."""
        if k is None:
            k = self.depth
        if not 0 <= k <= self.depth:
            raise IndexError(f"scale index {k} outside 0..{self.depth}")
        values = self.layers[:k].sum(axis=0) if k else np.zeros((self.spec.n,) * 2)
        kind = FieldKind.WHITENOISE_TRUNCATED if self.truncated else FieldKind.WHITENOISE
        return GridField(self.spec, values, kind, t_min=float(self.scales[k]))


# --- covariances -----------------------------------------------------------


def layer_covariance(r, t_hi: float, t_lo: float) -> np.ndarray:
    """Covariance at distance ``r`` of the white-noise layer between scales t_lo < t_hi."""
    r = np.asarray(r, dtype=float)
    out = np.full(r.shape, math.log(t_hi / t_lo))
    a = 0.5 * r**2
    x_hi, x_lo = a / t_hi**2, a / t_lo**2
    big = x_lo >= 1e-3
    out[big] = 0.5 * (special.exp1(x_hi[big]) - special.exp1(x_lo[big]))
    # small arguments: E1(x) = -euler - log x - sum_k (-x)^k / (k k!), logs cancel exactly
    small = ~big
    out[small] += 0.5 * (_e1_tail(x_lo[small]) - _e1_tail(x_hi[small]))
    return out


def _e1_tail(x):
    return sum((-x) ** k / (k * math.factorial(k)) for k in range(1, 6))


def _log_gauss_legendre(s_lo: float, s_hi: float, nodes: int = QUAD_NODES):
    """Nodes/weights for int_{s_lo}^{s_hi} f(s) ds, Gauss-Legendre in log s."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    u_lo, u_hi = math.log(s_lo), math.log(s_hi)
    u = 0.5 * (u_hi - u_lo) * x + 0.5 * (u_hi + u_lo)
    s = np.exp(u)
    return s, 0.5 * (u_hi - u_lo) * w * s


def layer_covariance_quadrature(r, t_hi: float, t_lo: float, nodes: int = QUAD_NODES) -> np.ndarray:
    """Same as :func:`layer_covariance`, by direct quadrature of the heat-kernel integral."""
    r = np.asarray(r, dtype=float)
    s, w = _log_gauss_legendre(t_lo**2, t_hi**2, nodes)
    vals = np.exp(-(r[..., None] ** 2) / (2.0 * s)) / s
    return 0.5 * vals @ w


def killed_kernel(sigma2: float, rho, radius: float = TRUNCATION_RADIUS) -> np.ndarray:
    """Heat kernel at variance ``sigma2`` killed outside a disk, single-reflection form.

    Subtracts the image across the tangent line, so the result vanishes at the
    rim and is a lower bound for the exact killed kernel.  Zero for rho >= radius.
    """
    rho = np.asarray(rho, dtype=float)
    norm = 1.0 / (2.0 * math.pi * sigma2)
    inside = rho < radius
    out = np.zeros(rho.shape)
    r_in = rho[inside]
    out[inside] = norm * (
        np.exp(-(r_in**2) / (2.0 * sigma2)) - np.exp(-((2.0 * radius - r_in) ** 2) / (2.0 * sigma2))
    )
    return out


def _torus_radius(m: int, h: float) -> np.ndarray:
    d = np.minimum(np.arange(m), m - np.arange(m)) * h
    return np.hypot(d[:, None], d[None, :])


@dataclass(frozen=True)
class _LayerPlan:
    """Lattice on which one layer is synthesised before interpolation to the grid."""

    points: int  # lattice points per side, including margins
    spacing: float
    margin: int  # lattice points outside [0, 1] on each side
    torus: int  # circulant embedding size
    direct: bool  # lattice coincides with the target grid


_PADDINGS = (2, 3, 4, 6, 8, 12, 16, 24, 32)
_MARGIN = 4


@functools.lru_cache(maxsize=256)
def _layer_spectrum_on(points: int, spacing: float, m: int, k: int, truncated: bool):
    t_hi, t_lo = 2.0**-k, 2.0 ** -(k + 1)
    h = spacing
    rad = _torus_radius(m, h)
    if not truncated:
        lam = fft.fft2(layer_covariance(rad, t_hi, t_lo)).real
    else:
        # covariance is pi * int (kappa_s conv kappa_s) ds; its spectrum is a
        # positive combination of squared kernel transforms
        s, w = _log_gauss_legendre(t_lo**2, t_hi**2)
        lam = np.zeros((m, m))
        for s_q, w_q in zip(s, w):
            kh = fft.fft2(killed_kernel(0.5 * s_q, rad)).real
            lam += (math.pi * w_q * h * h) * kh * kh
        # exact zero covariance beyond twice the kernel radius
        cov = fft.ifft2(lam).real
        cov[rad >= 2.0 * TRUNCATION_RADIUS] = 0.0
        lam = fft.fft2(cov).real
    neg = lam < 0
    clipped = float(-lam[neg].sum()) / (m * m)
    root = np.sqrt(np.where(neg, 0.0, lam) / (m * m))
    root.setflags(write=False)
    return root, clipped


@functools.lru_cache(maxsize=256)
def _plan(n: int, k: int, truncated: bool, clip_tol: float) -> _LayerPlan:
    h = 1.0 / (n - 1)
    # layer k is smooth on scale t_{k+1}; a lattice at t_{k+1}/8 resolves it,
    # but the truncated kernel also has structure at the truncation radius
    target = 2.0 ** -(k + 4)
    if truncated:
        target = min(target, 1.0 / 128)
    if target <= h * (1 + 1e-12):
        points, spacing, margin, direct = n, h, 0, True
    else:
        cells = int(round(1.0 / target))
        points, spacing, margin, direct = cells + 1 + 2 * _MARGIN, target, _MARGIN, False
    span = points - 1
    for pad in _PADDINGS:
        m = fft.next_fast_len(max(pad * span, 2 * span))
        _, clipped = _layer_spectrum_on(points, spacing, m, k, truncated)
        if clipped <= clip_tol or m * m > 2**26:
            break
    return _LayerPlan(points, spacing, margin, m, direct)


def _layer_spectrum(n: int, k: int, truncated: bool, clip_tol: float = 1e-4):
    plan = _plan(n, k, truncated, clip_tol)
    root, clipped = _layer_spectrum_on(plan.points, plan.spacing, plan.torus, k, truncated)
    return plan, root, clipped


def layer_variance(n: int, k: int, truncated: bool = False) -> float:
    """Pointwise variance synthesised for layer ``k`` on the lattice (after clipping)."""
    _, root, _ = _layer_spectrum(n, k, truncated)
    return float((root**2).sum())


# --- samplers --------------------------------------------------------------


def _dyadic_depth(t_min: float) -> int:
    if not 0.0 < t_min <= 1.0:
        raise DomainError(f"t_min={t_min} must lie in (0, 1]")
    k = -math.log2(t_min)
    if abs(k - round(k)) > 1e-9:
        raise DomainError(f"t_min={t_min} is not a dyadic scale 2^-k")
    return int(round(k))


def _sample_pair(spec: GridSpec, t_min: float, seed, truncated: bool):
    # real and imaginary parts of one complex synthesis are independent draws
    depth = _dyadic_depth(t_min)
    n = spec.n
    if depth and spec.spacing > t_min / 4.0 + 1e-12:
        raise ResolutionError(
            f"spacing {spec.spacing:.4g} too coarse for t_min={t_min}; need n >= {int(4 / t_min) + 1}"
        )
    rng = as_rng(seed)
    layers = np.empty((2, depth, n, n))
    clipped = []
    for k in range(depth):
        plan, root, mass = _layer_spectrum(n, k, truncated)
        if mass > CLIP_WARN:
            log.warning("layer %d: clipped %.3g of negative circulant mass", k, mass)
        clipped.append(mass)
        m = plan.torus
        noise = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
        lattice = fft.fft2(root * noise)[: plan.points, : plan.points]
        for part, arr in enumerate((lattice.real, lattice.imag)):
            if plan.direct:
                layers[part, k] = arr
            else:
                idx = np.arange(n) * (spec.spacing / plan.spacing) + plan.margin
                layers[part, k] = ndimage.map_coordinates(
                    arr, np.meshgrid(idx, idx, indexing="ij"), order=3, mode="nearest"
                )
    scales = 2.0 ** -np.arange(depth + 1)
    return tuple(
        LayeredField(spec, scales, layers[p], truncated=truncated, clipped_mass=tuple(clipped))
        for p in range(2)
    )


def sample_layered(spec: GridSpec, t_min: float, seed) -> LayeredField:
    """Independent dyadic layers of the white-noise field down to scale ``t_min``."""
    return _sample_pair(spec, t_min, seed, truncated=False)[0]


def sample_layered_pair(spec: GridSpec, t_min: float, seed) -> tuple[LayeredField, LayeredField]:
    """Two independent samples for the price of one synthesis."""
    return _sample_pair(spec, t_min, seed, truncated=False)


def sample_truncated(spec: GridSpec, t_min: float, seed) -> LayeredField:
    """Layers of the truncated white-noise field (finite range 1/5)."""
    return _sample_pair(spec, t_min, seed, truncated=True)[0]


def sample_truncated_pair(spec: GridSpec, t_min: float, seed) -> tuple[LayeredField, LayeredField]:
    return _sample_pair(spec, t_min, seed, truncated=True)


def assemble(field: LayeredField, coarsest_scale_index: int) -> GridField:
    return field.assemble(coarsest_scale_index)


def _dgff_eigenvalues(m: int) -> np.ndarray:
    c = 2.0 - 2.0 * np.cos(np.pi * np.arange(1, m + 1) / (m + 1))
    return c[:, None] + c[None, :]


@functools.lru_cache(maxsize=8)
def dgff_variance(n: int) -> np.ndarray:
    """Exact site variances of the zero-boundary DGFF on an n x n lattice."""
    m = n - 2
    lam = _dgff_eigenvalues(m)
    j = np.arange(1, m + 1)
    basis_sq = (2.0 / (m + 1)) * np.sin(np.pi * np.outer(j, j) / (m + 1)) ** 2
    inner = basis_sq.T @ ((2.0 * math.pi) / lam) @ basis_sq
    out = np.zeros((n, n))
    out[1:-1, 1:-1] = inner
    out.setflags(write=False)
    return out


def sample_dgff(spec: GridSpec, seed, with_variance: bool = False) -> GridField:
    """Exact zero-boundary discrete GFF via the sine eigenbasis of the lattice Laplacian.

    Covariance is ``2 pi (-Delta)^{-1}`` so that variances grow like
    ``log(distance to boundary)``.
    """
    rng = as_rng(seed)
    n = spec.n
    m = n - 2
    coeff = np.sqrt((2.0 * math.pi) / _dgff_eigenvalues(m)) * rng.standard_normal((m, m))
    values = np.zeros((n, n))
    values[1:-1, 1:-1] = fft.dstn(coeff, type=1, norm="ortho")
    var = dgff_variance(n) if with_variance else None
    return GridField(spec, values, FieldKind.DGFF, variance=var)


# --- circle averages -------------------------------------------------------


def _circle_coords(spec: GridSpec, centers: np.ndarray, delta: float, points: int):
    theta = 2.0 * np.pi * np.arange(points) / points
    xs = centers[:, 0:1] + delta * np.cos(theta)[None, :]
    ys = centers[:, 1:2] + delta * np.sin(theta)[None, :]
    return (xs - spec.origin[0]) / spec.spacing, (ys - spec.origin[1]) / spec.spacing


def circle_averages(
    field: GridField, centers, delta: float, points: int = CIRCLE_POINTS, clamp: bool = False
) -> np.ndarray:
    """Circle averages of radius ``delta`` around many centers at once.

    Bilinear interpolation at ``points`` equispaced angles.  With ``clamp`` the
    sample points are projected onto the grid instead of raising.
    """
    spec = field.spec
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if delta < 2.0 * spec.spacing - 1e-12:
        raise ResolutionError(f"delta={delta} below two lattice spacings")
    ci, cj = _circle_coords(spec, centers, delta, points)
    hi = spec.n - 1
    if clamp:
        ci = np.clip(ci, 0, hi)
        cj = np.clip(cj, 0, hi)
    elif ci.min() < -1e-9 or cj.min() < -1e-9 or ci.max() > hi + 1e-9 or cj.max() > hi + 1e-9:
        raise DomainError("circle leaves the grid")
    vals = ndimage.map_coordinates(field.values, [ci.ravel(), cj.ravel()], order=1, mode="nearest")
    return vals.reshape(ci.shape).mean(axis=1)


def circle_average(field: GridField, center, delta: float, points: int = CIRCLE_POINTS) -> float:
    return float(circle_averages(field, [center], delta, points)[0])


# --- binary dump -----------------------------------------------------------

_MAGIC = b"LQGF"
_HEADER = struct.Struct("<4sIdB")


def dump_field(field: GridField, path) -> None:
    """Little-endian: magic, u32 n, f64 spacing, u8 kind, then n^2 f64 row-major."""
    header = _HEADER.pack(_MAGIC, field.spec.n, field.spec.spacing, _KIND_CODES[field.kind])
    Path(path).write_bytes(header + np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def load_field(path) -> GridField:
    raw = Path(path).read_bytes()
    magic, n, spacing, code = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    spec = GridSpec(n)
    if abs(spacing - spec.spacing) > 1e-15:
        raise ValueError(f"{path}: spacing {spacing} inconsistent with n={n}")
    kind = {v: k for k, v in _KIND_CODES.items()}[code]
    values = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size, count=n * n).reshape(n, n).copy()
    return GridField(spec, values, kind)
