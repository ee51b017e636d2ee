"""Slow, obviously-correct reference implementations used to cross-check the fast paths."""
from __future__ import annotations

import math

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from .measure import MassGrid


def brute_ball_mass(measure: MassGrid, center, r: float) -> float:
    """Sum of every cell mass whose lattice point lies in the closed disk."""
    pts = measure.spec.coords()
    x = pts[:, None] * np.ones(measure.spec.n)[None, :]
    y = x.T
    inside = (x - center[0]) ** 2 + (y - center[1]) ** 2 <= r * r
    return float(measure.cell_mass[inside].sum())


def exhaustive_path_min(weight: np.ndarray, src, tgt, connectivity: int = 4) -> float:
    """Minimum node-weight sum over all simple lattice paths, by depth-first enumeration."""
    weight = np.asarray(weight, dtype=float)
    rows, cols = weight.shape
    steps = [(1, 0), (-1, 0), (0, 1), (0, -1)]
    if connectivity == 8:
        steps += [(1, 1), (1, -1), (-1, 1), (-1, -1)]
    src, tgt = tuple(src), tuple(tgt)
    best = math.inf
    on_path = np.zeros(weight.shape, dtype=bool)

    def walk(node, acc):
        nonlocal best
        if node == tgt:
            best = min(best, acc)
            return
        for di, dj in steps:
            nxt = (node[0] + di, node[1] + dj)
            if 0 <= nxt[0] < rows and 0 <= nxt[1] < cols and not on_path[nxt]:
                on_path[nxt] = True
                walk(nxt, acc + weight[nxt])
                on_path[nxt] = False

    on_path[src] = True
    walk(src, weight[src])
    return best


def jump_graph_distances(quarters: np.ndarray, allowed: np.ndarray, source) -> np.ndarray:
    """Hop distances in the explicit ball-jump graph, built pairwise in O(n^4).

    Site z may jump to w when the ball of radius quarters[z]/4 spacings around
    z is allowed and contains w.
    """
    n = quarters.shape[0]
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    flat_i, flat_j = ii.ravel(), jj.ravel()
    rows, cols = [], []
    for a in range(n * n):
        if not allowed.flat[a]:
            continue
        q = int(quarters.flat[a])
        d2 = 16 * ((flat_i - flat_i[a]) ** 2 + (flat_j - flat_j[a]) ** 2)
        hit = np.flatnonzero(d2 <= q * q)
        rows.extend([a] * hit.size)
        cols.extend(hit.tolist())
    graph = csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n * n, n * n))
    start = int(source[0]) * n + int(source[1])
    dist = shortest_path(graph, directed=True, unweighted=True, indices=start)
    return dist.reshape(n, n)
