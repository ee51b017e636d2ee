"""Liouville graph distance and LFPP distances on lattices.

Three models share one query/result shape:

* ``lgd``: ball-jump breadth-first search.  From site z one hop reaches every
  site within R_bar(z) of z; the distance is the number of balls used.
* ``lfpp_grid``: node-weighted Dijkstra over squares of side delta, square S
  costing ``delta * exp(xi * h_delta(center of S))``.
* ``lfpp_discrete``: node-weighted Dijkstra on the field lattice itself with
  weights ``exp(xi * h(x))``.

A path pays for every node it visits, both endpoints included.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np
from scipy import ndimage

from .errors import DomainError
from .field import GridField, GridSpec, circle_averages
from .measure import CriticalRadii, MassGrid

MODELS = ("lgd", "lfpp_grid", "lfpp_discrete")


@dataclass(frozen=True)
class MetricQuery:
    """Source/target point sets in physical coordinates, plus an optional domain mask.

    ``domain_mask`` is a boolean array over the field lattice; ``None`` means
    the whole square.
    """

    source: np.ndarray
    target: np.ndarray
    domain_mask: np.ndarray | None = None
    model: str = "lgd"
    connectivity: int = 4

    def __post_init__(self):
        src = np.atleast_2d(np.asarray(self.source, dtype=float))
        tgt = np.atleast_2d(np.asarray(self.target, dtype=float))
        if src.size == 0 or tgt.size == 0:
            raise DomainError("source and target sets must be nonempty")
        if self.model not in MODELS:
            raise DomainError(f"unknown model {self.model!r}")
        if self.connectivity not in (4, 8):
            raise DomainError("connectivity must be 4 or 8")
        object.__setattr__(self, "source", src)
        object.__setattr__(self, "target", tgt)


@dataclass(frozen=True)
class DistanceRun:
    query: MetricQuery
    eps_or_delta: float
    reachable: bool
    value: float | None  # None when the target is unreachable
    reached: int  # number of lattice nodes settled by the search
    path_length_cells: int
    seed: int | None = None


# --- search kernels --------------------------------------------------------


@numba.njit(cache=True, nogil=True)
def _isqrt(x):
    s = int(math.sqrt(x))
    while s * s > x:
        s -= 1
    while (s + 1) * (s + 1) <= x:
        s += 1
    return s


@numba.njit(cache=True, nogil=True)
def _find(nxt, i, j):
    # next unvisited column >= j in row i, with path halving
    while nxt[i, j] != j:
        nxt[i, j] = nxt[i, nxt[i, j]]
        j = nxt[i, j]
    return j


@numba.njit(cache=True, nogil=True)
def _ball_bfs(quarters, allowed, sources, is_target, stop_at_target):
    """Hop distances on the ball-jump graph (-1 = unreached).

    ``quarters[i, j]`` is the jump radius in quarter-lattice units.
    """
    n = quarters.shape[0]
    dist = np.full((n, n), -1, dtype=np.int64)
    # column n is a sentinel so _find never runs off the row
    nxt = np.empty((n, n + 1), dtype=np.int64)
    for i in range(n):
        for j in range(n + 1):
            nxt[i, j] = j
    queue = np.empty(n * n, dtype=np.int64)
    head = 0
    tail = 0
    hit = -1
    for s in range(sources.shape[0]):
        i, j = sources[s, 0], sources[s, 1]
        if dist[i, j] < 0:
            dist[i, j] = 0
            nxt[i, j] = j + 1
            queue[tail] = i * n + j
            tail += 1
            if is_target[i, j] and hit < 0:
                hit = i * n + j
    if stop_at_target and hit >= 0:
        return dist, hit, tail
    while head < tail:
        u = queue[head]
        head += 1
        ui = u // n
        uj = u % n
        if not allowed[ui, uj]:
            continue
        q = quarters[ui, uj]
        q2 = q * q
        dmax = q // 4
        du = dist[ui, uj] + 1
        for di in range(-dmax, dmax + 1):
            ii = ui + di
            if ii < 0 or ii >= n:
                continue
            w = _isqrt((q2 - 16 * di * di) // 16)
            lo = max(0, uj - w)
            hi = min(n - 1, uj + w)
            c = _find(nxt, ii, lo)
            while c <= hi:
                dist[ii, c] = du
                queue[tail] = ii * n + c
                tail += 1
                nxt[ii, c] = c + 1
                if is_target[ii, c] and hit < 0:
                    hit = ii * n + c
                    if stop_at_target:
                        return dist, hit, tail
                c = _find(nxt, ii, c + 1)
    return dist, hit, tail


@numba.njit(cache=True, nogil=True)
def _sift_up(heap, pos, key, k):
    node = heap[k]
    kk = key[node]
    while k > 0:
        parent = (k - 1) >> 1
        pn = heap[parent]
        if key[pn] <= kk:
            break
        heap[k] = pn
        pos[pn] = k
        k = parent
    heap[k] = node
    pos[node] = k


@numba.njit(cache=True, nogil=True)
def _sift_down(heap, pos, key, k, size):
    node = heap[k]
    kk = key[node]
    while True:
        c = 2 * k + 1
        if c >= size:
            break
        if c + 1 < size and key[heap[c + 1]] < key[heap[c]]:
            c += 1
        cn = heap[c]
        if key[cn] >= kk:
            break
        heap[k] = cn
        pos[cn] = k
        k = c
    heap[k] = node
    pos[node] = k


@numba.njit(cache=True, nogil=True)
def _node_dijkstra(weight, usable, sources, is_target, stop_at_target, eight):
    """Node-weighted shortest paths on a square lattice (inf = unreached).

    Returns (dist, hit node or -1, settled count, predecessor array).
    """
    n0, n1 = weight.shape
    total = n0 * n1
    dist = np.full(total, np.inf)
    pred = np.full(total, -1, dtype=np.int64)
    done = np.zeros(total, dtype=np.bool_)
    heap = np.empty(total, dtype=np.int64)
    pos = np.full(total, -1, dtype=np.int64)
    size = 0
    for s in range(sources.shape[0]):
        u = sources[s, 0] * n1 + sources[s, 1]
        if not usable[sources[s, 0], sources[s, 1]]:
            continue
        w = weight[sources[s, 0], sources[s, 1]]
        if w < dist[u]:
            dist[u] = w
            if pos[u] < 0:
                heap[size] = u
                pos[u] = size
                size += 1
            _sift_up(heap, pos, dist, pos[u])
    if eight:
        di_arr = np.array([-1, 1, 0, 0, -1, -1, 1, 1])
        dj_arr = np.array([0, 0, -1, 1, -1, 1, -1, 1])
    else:
        di_arr = np.array([-1, 1, 0, 0])
        dj_arr = np.array([0, 0, -1, 1])
    settled = 0
    hit = -1
    while size > 0:
        u = heap[0]
        size -= 1
        pos[u] = -1
        if size > 0:
            heap[0] = heap[size]
            pos[heap[0]] = 0
            _sift_down(heap, pos, dist, 0, size)
        done[u] = True
        settled += 1
        ui = u // n1
        uj = u % n1
        if is_target[ui, uj] and hit < 0:
            hit = u
            if stop_at_target:
                break
        du = dist[u]
        for e in range(di_arr.shape[0]):
            vi = ui + di_arr[e]
            vj = uj + dj_arr[e]
            if vi < 0 or vi >= n0 or vj < 0 or vj >= n1:
                continue
            if not usable[vi, vj]:
                continue
            v = vi * n1 + vj
            if done[v]:
                continue
            nd = du + weight[vi, vj]
            if nd < dist[v]:
                dist[v] = nd
                pred[v] = u
                if pos[v] < 0:
                    heap[size] = v
                    pos[v] = size
                    size += 1
                _sift_up(heap, pos, dist, pos[v])
    return dist, hit, settled, pred


def _path_nodes(pred: np.ndarray, hit: int) -> int:
    count = 0
    while hit >= 0:
        count += 1
        hit = pred[hit]
    return count


# --- helpers ---------------------------------------------------------------


def _site_indices(spec: GridSpec, points: np.ndarray) -> np.ndarray:
    return np.array([spec.to_index(p) for p in points], dtype=np.int64).reshape(-1, 2)


def _square_indices(m: int, delta: float, spec: GridSpec, points: np.ndarray) -> np.ndarray:
    rel = (points - np.asarray(spec.origin)) / delta
    idx = np.clip(np.floor(rel + 1e-12).astype(np.int64), 0, m - 1)
    return idx.reshape(-1, 2)


def _target_grid(shape, idx: np.ndarray) -> np.ndarray:
    out = np.zeros(shape, dtype=np.bool_)
    out[idx[:, 0], idx[:, 1]] = True
    return out


def jump_quarters(radii: CriticalRadii) -> np.ndarray:
    """Jump radii in quarter-lattice units, floored at one lattice spacing."""
    q = np.rint(radii.r_bar * 4.0 / radii.spec.spacing).astype(np.int64)
    return np.maximum(q, 4)


def _allowed_balls(quarters: np.ndarray, mask: np.ndarray | None) -> np.ndarray:
    if mask is None:
        return np.ones(quarters.shape, dtype=np.bool_)
    mask = np.asarray(mask, dtype=bool)
    # outside the lattice counts as outside the domain
    padded = np.pad(mask, 1, constant_values=False)
    clearance = ndimage.distance_transform_edt(padded)[1:-1, 1:-1]
    return mask & (16.0 * clearance**2 > quarters.astype(float) ** 2)


# --- public metrics --------------------------------------------------------


def lgd_bfs(radii: CriticalRadii, sources: np.ndarray, mask=None, targets=None):
    """Full hop-distance map from lattice ``sources`` (index pairs); -1 where unreached."""
    q = jump_quarters(radii)
    allowed = _allowed_balls(q, mask)
    tgt = np.zeros(q.shape, dtype=np.bool_) if targets is None else _target_grid(q.shape, targets)
    dist, _, _ = _ball_bfs(q, allowed, np.asarray(sources, dtype=np.int64), tgt, False)
    return dist


def lgd_distance(measure: MassGrid, radii: CriticalRadii, query: MetricQuery, seed=None) -> DistanceRun:
    """Number of balls of radius at most R_bar needed to link source to target."""
    spec = measure.spec
    src = _site_indices(spec, query.source)
    tgt = _site_indices(spec, query.target)
    q = jump_quarters(radii)
    if query.domain_mask is not None:
        mask = np.asarray(query.domain_mask, dtype=bool)
        if not (mask[src[:, 0], src[:, 1]].all() and mask[tgt[:, 0], tgt[:, 1]].all()):
            raise DomainError("query endpoints must lie inside the domain mask")
    allowed = _allowed_balls(q, query.domain_mask)
    is_target = _target_grid(q.shape, tgt)
    dist, hit, reached = _ball_bfs(q, allowed, src, is_target, True)
    if hit < 0:
        return DistanceRun(query, radii.eps, False, None, int(reached), 0, seed)
    hops = int(dist.flat[hit])
    return DistanceRun(query, radii.eps, True, float(hops), int(reached), hops, seed)


def lfpp_square_weights(field: GridField, gamma: float, d_hat: float, delta: float) -> np.ndarray:
    """Square costs ``delta * exp(xi * h_delta(center))`` with ``xi = gamma / d_hat``."""
    spec = field.spec
    m = int(round(1.0 / delta))
    if abs(m * delta - 1.0) > 1e-9:
        raise DomainError(f"delta={delta} must divide the unit square")
    if delta < 2.0 * spec.spacing - 1e-12:
        raise DomainError(f"delta={delta} below two lattice spacings")
    xi = gamma / d_hat
    c = (np.arange(m) + 0.5) * delta
    cx, cy = np.meshgrid(c + spec.origin[0], c + spec.origin[1], indexing="ij")
    centers = np.stack([cx.ravel(), cy.ravel()], axis=1)
    # circles near the boundary are clamped onto the grid
    avg = circle_averages(field, centers, delta, clamp=True).reshape(m, m)
    return delta * np.exp(xi * avg)


def _square_mask(field_mask: np.ndarray | None, spec: GridSpec, m: int, delta: float):
    if field_mask is None:
        return np.ones((m, m), dtype=np.bool_)
    field_mask = np.asarray(field_mask, dtype=bool)
    if field_mask.shape == (m, m):
        return field_mask
    c = (np.arange(m) + 0.5) * delta / spec.spacing
    idx = np.clip(np.rint(c).astype(np.int64), 0, spec.n - 1)
    return field_mask[np.ix_(idx, idx)]


def _dijkstra_run(weight, usable, src, tgt, query, scale, seed) -> DistanceRun:
    is_target = _target_grid(weight.shape, tgt)
    dist, hit, settled, pred = _node_dijkstra(
        weight, usable, src, is_target, True, query.connectivity == 8
    )
    if hit < 0:
        return DistanceRun(query, scale, False, None, int(settled), 0, seed)
    return DistanceRun(query, scale, True, float(dist[hit]), int(settled), _path_nodes(pred, hit), seed)


def lfpp_grid_distance(
    field: GridField, gamma: float, d_hat: float, delta: float, query: MetricQuery, seed=None
) -> DistanceRun:
    weight = lfpp_square_weights(field, gamma, d_hat, delta)
    m = weight.shape[0]
    src = _square_indices(m, delta, field.spec, query.source)
    tgt = _square_indices(m, delta, field.spec, query.target)
    usable = _square_mask(query.domain_mask, field.spec, m, delta)
    return _dijkstra_run(weight, usable, src, tgt, query, delta, seed)


def lfpp_weighted_distance(weight: np.ndarray, src, tgt, usable=None, connectivity: int = 4) -> float:
    """Node-weighted lattice distance between index sets; ``inf`` if unreachable."""
    weight = np.asarray(weight, dtype=float)
    if usable is None:
        usable = np.ones(weight.shape, dtype=np.bool_)
    src = np.asarray(src, dtype=np.int64).reshape(-1, 2)
    tgt = np.asarray(tgt, dtype=np.int64).reshape(-1, 2)
    dist, hit, _, _ = _node_dijkstra(
        weight, usable, src, _target_grid(weight.shape, tgt), True, connectivity == 8
    )
    return float(dist[hit]) if hit >= 0 else math.inf


def lfpp_discrete_distance(field: GridField, xi: float, query: MetricQuery, seed=None) -> DistanceRun:
    """Minimal sum of exp(xi h(x_j)) over nearest-neighbour lattice paths."""
    if xi < 0:
        raise DomainError(f"xi={xi} must be nonnegative")
    spec = field.spec
    weight = np.exp(xi * field.values)
    src = _site_indices(spec, query.source)
    tgt = _site_indices(spec, query.target)
    usable = (
        np.ones(weight.shape, dtype=np.bool_)
        if query.domain_mask is None
        else np.asarray(query.domain_mask, dtype=np.bool_)
    )
    return _dijkstra_run(weight, usable, src, tgt, query, 1.0, seed)


def lfpp_distance_map(weight: np.ndarray, src, usable=None, connectivity: int = 4) -> np.ndarray:
    """All node-weighted distances from ``src`` (index pairs)."""
    weight = np.asarray(weight, dtype=float)
    if usable is None:
        usable = np.ones(weight.shape, dtype=np.bool_)
    src = np.asarray(src, dtype=np.int64).reshape(-1, 2)
    dist, _, _, _ = _node_dijkstra(
        weight, usable, src, np.zeros(weight.shape, dtype=np.bool_), False, connectivity == 8
    )
    return dist.reshape(weight.shape)


# --- set distances and diameters -------------------------------------------


@dataclass(frozen=True)
class MetricConfig:
    """Everything a model needs besides the endpoints."""

    model: str
    measure: MassGrid | None = None
    radii: CriticalRadii | None = None
    field: GridField | None = None
    gamma: float | None = None
    d_hat: float | None = None
    delta: float | None = None
    xi: float | None = None
    connectivity: int = 4


def _run(cfg: MetricConfig, query: MetricQuery) -> DistanceRun:
    if cfg.model == "lgd":
        return lgd_distance(cfg.measure, cfg.radii, query)
    if cfg.model == "lfpp_grid":
        return lfpp_grid_distance(cfg.field, cfg.gamma, cfg.d_hat, cfg.delta, query)
    return lfpp_discrete_distance(cfg.field, cfg.xi, query)


def set_distance(cfg: MetricConfig, A: Sequence, B: Sequence, mask=None) -> DistanceRun:
    """min over a in A, b in B of the model distance, in one multi-source search."""
    query = MetricQuery(A, B, domain_mask=mask, model=cfg.model, connectivity=cfg.connectivity)
    return _run(cfg, query)


def _distance_map(cfg: MetricConfig, source_idx: np.ndarray, mask) -> np.ndarray:
    """Distances on the model's own lattice, inf where unreached."""
    if cfg.model == "lgd":
        d = lgd_bfs(cfg.radii, source_idx, mask).astype(float)
        d[d < 0] = np.inf
        return d
    if cfg.model == "lfpp_grid":
        weight = lfpp_square_weights(cfg.field, cfg.gamma, cfg.d_hat, cfg.delta)
        usable = _square_mask(mask, cfg.field.spec, weight.shape[0], cfg.delta)
        return lfpp_distance_map(weight, source_idx, usable, cfg.connectivity)
    weight = np.exp(cfg.xi * cfg.field.values)
    usable = None if mask is None else np.asarray(mask, dtype=np.bool_)
    return lfpp_distance_map(weight, source_idx, usable, cfg.connectivity)


def diameter(cfg: MetricConfig, K: Sequence, mask=None) -> DistanceRun:
    """max over distinct pairs in K of the model distance, one full sweep per point."""
    pts = np.atleast_2d(np.asarray(K, dtype=float))
    query = MetricQuery(pts, pts, domain_mask=mask, model=cfg.model, connectivity=cfg.connectivity)
    if cfg.model == "lfpp_grid":
        m = int(round(1.0 / cfg.delta))
        idx = _square_indices(m, cfg.delta, cfg.field.spec, pts)
        scale = cfg.delta
    else:
        spec = cfg.measure.spec if cfg.model == "lgd" else cfg.field.spec
        idx = _site_indices(spec, pts)
        scale = cfg.radii.eps if cfg.model == "lgd" else 1.0
    idx = np.unique(idx, axis=0)
    worst = 0.0
    for a, s in enumerate(idx):
        if len(idx) == 1:
            break
        d = _distance_map(cfg, s[None, :], mask)[idx[:, 0], idx[:, 1]]
        worst = max(worst, float(np.delete(d, a).max()))
    if math.isinf(worst):
        return DistanceRun(query, scale, False, None, len(idx), 0)
    return DistanceRun(query, scale, True, worst, len(idx), 0)
