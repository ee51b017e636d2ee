"""Mated-CRT maps from correlated Brownian walks, and graph-ball growth.

Cell ``i`` covers the unit time interval ``[i, i+1]``.  Two cells ``i < j`` are
joined when, for one of the coordinates, both cell minima are no larger than
the minimum over every cell strictly between them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .errors import DomainError, InsufficientDataError
from .estimate import ExponentFit, fit_loglog
from .formulas import _check_gamma
from .seeding import as_rng

_CHUNK_CELLS = 1 << 18


def correlation(gamma: float) -> float:
    """Correlation of the encoding walk: -cos(pi gamma^2 / 4)."""
    gamma = _check_gamma(gamma)
    return -math.cos(math.pi * gamma * gamma / 4.0)


@dataclass(frozen=True)
class BmTrace:
    n: int
    rho: float
    l_min: np.ndarray
    r_min: np.ndarray
    seed: object = None


@dataclass(frozen=True)
class CrtMap:
    n: int
    indptr: np.ndarray
    indices: np.ndarray
    window: tuple[int, int]
    # per undirected edge (u < v): which coordinates satisfy the adjacency test
    edges: np.ndarray  # shape (E, 2)
    coord: np.ndarray  # 1 = L only, 2 = R only, 3 = both

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])

    @property
    def double(self) -> np.ndarray:
        """Edges the planar map carries twice (both coordinates, not consecutive)."""
        return (self.coord == 3) & (self.edges[:, 1] - self.edges[:, 0] > 1)

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v] : self.indptr[v + 1]]


@dataclass(frozen=True)
class BallProfile:
    radii: np.ndarray
    volumes: np.ndarray
    center: int
    exhausted: bool = False


def sample_bm(gamma: float, n: int, substeps: int = 16, seed=None) -> BmTrace:
    """Per-cell minima of a correlated 2D Brownian motion sampled ``substeps`` times per cell."""
    if n < 2:
        raise DomainError("need at least 2 cells")
    if substeps < 1:
        raise DomainError("substeps must be >= 1")
    rho = correlation(gamma)
    rng = as_rng(seed)
    a = math.sqrt(1.0 / substeps)
    b = math.sqrt(max(0.0, 1.0 - rho * rho))
    l_min = np.empty(n)
    r_min = np.empty(n)
    l0 = r0 = 0.0
    for start in range(0, n, _CHUNK_CELLS):
        cells = min(_CHUNK_CELLS, n - start)
        z1 = rng.standard_normal((cells, substeps))
        z2 = rng.standard_normal((cells, substeps))
        dl = a * z1
        dr = a * (rho * z1 + b * z2)
        l0 = _cell_minima(dl, l0, l_min[start : start + cells])
        r0 = _cell_minima(dr, r0, r_min[start : start + cells])
    return BmTrace(n, rho, l_min, r_min, seed)


def _cell_minima(incr: np.ndarray, start: float, out: np.ndarray) -> float:
    path = np.cumsum(incr.ravel()).reshape(incr.shape) + start
    # each cell also contains its left endpoint, the previous cell's last value
    left = np.empty(incr.shape[0])
    left[0] = start
    left[1:] = path[:-1, -1]
    np.minimum(path.min(axis=1), left, out=out)
    return float(path[-1, -1])


@numba.njit(cache=True, nogil=True)
def _visibility_edges(m):
    """Pairs i < j with max(m_i, m_j) <= min(m_k : i < k < j), in O(n + E)."""
    n = m.shape[0]
    cap = 2 * n
    us = np.empty(cap, dtype=np.int64)
    vs = np.empty(cap, dtype=np.int64)
    count = 0
    stack = np.empty(n, dtype=np.int64)
    top = 0
    for j in range(n):
        mj = m[j]
        while top > 0 and m[stack[top - 1]] > mj:
            top -= 1
            if count == cap:
                cap *= 2
                us = _grow(us, cap)
                vs = _grow(vs, cap)
            us[count] = stack[top]
            vs[count] = j
            count += 1
        # the surviving top sees j; below it only through a run of values equal to m_j
        k = top - 1
        while k >= 0:
            if count == cap:
                cap *= 2
                us = _grow(us, cap)
                vs = _grow(vs, cap)
            us[count] = stack[k]
            vs[count] = j
            count += 1
            if m[stack[k]] < mj:
                break
            k -= 1
        stack[top] = j
        top += 1
    return us[:count], vs[:count]


@numba.njit(cache=True, nogil=True)
def _grow(a, cap):
    out = np.empty(cap, dtype=a.dtype)
    out[: a.shape[0]] = a
    return out


@numba.njit(cache=True, nogil=True)
def brute_force_edges(m):
    """O(n^2) reference for the adjacency test, one running minimum per row."""
    n = m.shape[0]
    us = []
    vs = []
    for i in range(n):
        run = np.inf
        for j in range(i + 1, n):
            if j > i + 1:
                run = min(run, m[j - 1])
            if max(m[i], m[j]) <= run:
                us.append(i)
                vs.append(j)
    return np.array(us, dtype=np.int64), np.array(vs, dtype=np.int64)


@numba.njit(cache=True, nogil=True)
def _csr(n, eu, ev):
    deg = np.zeros(n + 1, dtype=np.int64)
    for e in range(eu.shape[0]):
        deg[eu[e] + 1] += 1
        deg[ev[e] + 1] += 1
    for v in range(n):
        deg[v + 1] += deg[v]
    fill = deg[:-1].copy()
    idx = np.empty(deg[n], dtype=np.int64)
    for e in range(eu.shape[0]):
        idx[fill[eu[e]]] = ev[e]
        fill[eu[e]] += 1
        idx[fill[ev[e]]] = eu[e]
        fill[ev[e]] += 1
    for v in range(n):
        idx[deg[v] : deg[v + 1]].sort()
    return deg, idx


@numba.njit(cache=True, nogil=True)
def _sorted_by_right(us, vs):
    # the stack emits edges grouped by ascending v with u descending inside a group
    e = us.shape[0]
    start = 0
    while start < e:
        stop = start
        while stop + 1 < e and vs[stop + 1] == vs[start]:
            stop += 1
        us[start : stop + 1] = us[start : stop + 1][::-1].copy()
        start = stop + 1
    return us, vs


@numba.njit(cache=True, nogil=True)
def _merge(lu, lv, ru, rv):
    """Union of two (v, u)-sorted edge lists with a coordinate code per edge."""
    cap = lu.shape[0] + ru.shape[0]
    eu = np.empty(cap, dtype=np.int64)
    ev = np.empty(cap, dtype=np.int64)
    code = np.empty(cap, dtype=np.int8)
    a = 0
    b = 0
    k = 0
    while a < lu.shape[0] or b < ru.shape[0]:
        if b >= ru.shape[0] or (a < lu.shape[0] and (lv[a], lu[a]) < (rv[b], ru[b])):
            eu[k], ev[k], code[k] = lu[a], lv[a], 1
            a += 1
        elif a >= lu.shape[0] or (rv[b], ru[b]) < (lv[a], lu[a]):
            eu[k], ev[k], code[k] = ru[b], rv[b], 2
            b += 1
        else:
            eu[k], ev[k], code[k] = lu[a], lv[a], 3
            a += 1
            b += 1
        k += 1
    return eu[:k], ev[:k], code[:k]


def coordinate_edges(minima: np.ndarray) -> np.ndarray:
    """Adjacency pairs (i, j), i < j, for one coordinate, sorted by (j, i)."""
    u, v = _sorted_by_right(*_visibility_edges(np.ascontiguousarray(minima, dtype=float)))
    return np.stack([u, v], axis=1)


def build_map(trace: BmTrace) -> CrtMap:
    lu, lv = _sorted_by_right(*_visibility_edges(np.ascontiguousarray(trace.l_min, dtype=float)))
    ru, rv = _sorted_by_right(*_visibility_edges(np.ascontiguousarray(trace.r_min, dtype=float)))
    eu, ev, coord = _merge(lu, lv, ru, rv)
    del lu, lv, ru, rv
    indptr, indices = _csr(trace.n, eu, ev)
    return CrtMap(trace.n, indptr, indices, (0, trace.n - 1), np.stack([eu, ev], axis=1), coord)


@numba.njit(cache=True, nogil=True)
def _bfs_levels(indptr, indices, center, r_max, lo, hi, seen):
    """Vertices per BFS level up to r_max; stops at the first level touching lo/hi."""
    counts = np.zeros(r_max + 1, dtype=np.int64)
    frontier = np.empty(1, dtype=np.int64)
    frontier[0] = center
    seen[center] = True
    visited = [center]
    counts[0] = 1
    exhausted_at = -1
    if center <= lo or center >= hi:
        exhausted_at = 0
    r = 0
    while r < r_max and exhausted_at < 0:
        nxt = []
        for u in frontier:
            for p in range(indptr[u], indptr[u + 1]):
                w = indices[p]
                if not seen[w]:
                    seen[w] = True
                    nxt.append(w)
                    visited.append(w)
        r += 1
        counts[r] = len(nxt)
        if len(nxt) == 0:
            break
        frontier = np.array(nxt, dtype=np.int64)
        for w in frontier:
            if w <= lo or w >= hi:
                exhausted_at = r
                break
    for v in visited:
        seen[v] = False
    return counts, exhausted_at


def ball_profile(crt: CrtMap, center: int, r_max: int, _seen=None) -> BallProfile:
    """#B_r for r = 0..r_max, dropping radii whose ball reaches the window edge."""
    lo, hi = crt.window
    if not lo <= center <= hi:
        raise DomainError(f"center {center} outside window {crt.window}")
    seen = np.zeros(crt.n, dtype=np.bool_) if _seen is None else _seen
    counts, exhausted_at = _bfs_levels(crt.indptr, crt.indices, int(center), int(r_max), lo, hi, seen)
    volumes = np.cumsum(counts)
    last = r_max if exhausted_at < 0 else exhausted_at - 1
    radii = np.arange(last + 1)
    return BallProfile(radii, volumes[: last + 1], int(center), exhausted_at >= 0)


def bulk_centers(crt: CrtMap, count: int, seed=None) -> np.ndarray:
    """Ball centers drawn uniformly from the middle third of the window."""
    lo, hi = crt.window
    third = (hi - lo) // 3
    rng = as_rng(seed)
    return rng.integers(lo + third, hi - third + 1, size=count)


def growth_exponent(profiles, r_lo: int, r_hi: int) -> ExponentFit:
    """Pooled log-log regression of ball volume on radius over [r_lo, r_hi]."""
    profiles = list(profiles)
    if len(profiles) < 10:
        raise InsufficientDataError(f"need at least 10 profiles, got {len(profiles)}")
    if r_lo < 5 or r_hi <= r_lo:
        raise InsufficientDataError(f"bad fit range [{r_lo}, {r_hi}]; need 5 <= r_lo < r_hi")
    pts = []
    for p in profiles:
        radii = np.asarray(p.radii)
        sel = (radii >= r_lo) & (radii <= r_hi)
        pts.extend(zip(radii[sel].tolist(), np.asarray(p.volumes)[sel].tolist()))
    return fit_loglog(pts, n_replicates=len(profiles))


def export_edges(crt: CrtMap, path) -> None:
    """CSV edge list with header ``u,v,coord`` (coord in L, R, B)."""
    names = np.array(["", "L", "R", "B"])
    with open(path, "w", newline="") as fh:
        fh.write("u,v,coord\n")
        for (u, v), c in zip(crt.edges.tolist(), names[crt.coord].tolist()):
            fh.write(f"{u},{v},{c}\n")
