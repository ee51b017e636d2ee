import math

import numpy as np
import pytest
from scipy import stats

from lqgdim.crt import (
    BallProfile,
    BmTrace,
    ball_profile,
    brute_force_edges,
    build_map,
    bulk_centers,
    coordinate_edges,
    correlation,
    export_edges,
    growth_exponent,
    sample_bm,
)
from lqgdim.errors import DomainError, InsufficientDataError


def _trace(l_min, r_min):
    l_min, r_min = np.asarray(l_min, float), np.asarray(r_min, float)
    return BmTrace(l_min.size, 0.0, l_min, r_min)


def _edge_set(arr):
    return {tuple(e) for e in np.asarray(arr).tolist()}


def test_correlation_values():
    assert correlation(math.sqrt(2)) == pytest.approx(0.0, abs=1e-15)
    assert correlation(math.sqrt(8 / 3)) == pytest.approx(0.5, abs=1e-14)
    assert abs(correlation(1.999)) < 1


def test_empirical_correlation_of_endpoints():
    # the sampler's increments are rebuilt from the same stream to read off L_n and R_n
    gamma, n, sub = math.sqrt(8 / 3), 20, 4
    rho = correlation(gamma)
    prods = []
    for k in range(1000):
        g = np.random.default_rng(k)
        z1 = g.standard_normal((n, sub))
        z2 = g.standard_normal((n, sub))
        dl = math.sqrt(1 / sub) * z1
        dr = math.sqrt(1 / sub) * (rho * z1 + math.sqrt(1 - rho * rho) * z2)
        tr = sample_bm(gamma, n, substeps=sub, seed=k)
        assert tr.l_min[-1] == pytest.approx(min(np.cumsum(dl)[-sub - 1 :].min(), np.cumsum(dl)[-sub - 1]), abs=1e-12)
        assert tr.r_min[-1] <= dr.sum() + 1e-12
        prods.append(dl.sum() * dr.sum() / n)
    prods = np.array(prods)
    assert abs(prods.mean() - rho) <= 3 * prods.std(ddof=1) / math.sqrt(prods.size)


def test_worked_example_edges():
    got = _edge_set(coordinate_edges([3, 1, 2, 5, 0]))
    one_indexed = {(1, 2), (2, 3), (3, 4), (4, 5), (2, 5), (3, 5)}
    assert got == {(u - 1, v - 1) for u, v in one_indexed}


def test_two_cells_single_edge():
    m = build_map(_trace([0.0, 1.0], [2.0, -1.0]))
    assert m.n_edges == 1 and _edge_set(m.edges) == {(0, 1)}
    assert m.coord.tolist() == [3]


def test_stack_matches_brute_force():
    for seed in range(100):
        tr = sample_bm(math.sqrt(8 / 3), 2000, substeps=4, seed=seed)
        for mins in (tr.l_min, tr.r_min):
            u, v = brute_force_edges(mins)
            assert _edge_set(coordinate_edges(mins)) == set(zip(u.tolist(), v.tolist()))


def test_stack_handles_ties_literally():
    mins = np.array([1.0, 2.0, 1.0, 1.0, 3.0, 1.0])
    u, v = brute_force_edges(mins)
    assert _edge_set(coordinate_edges(mins)) == set(zip(u.tolist(), v.tolist()))
    rng = np.random.default_rng(3)
    for _ in range(200):
        m = rng.integers(0, 4, size=30).astype(float)
        u, v = brute_force_edges(m)
        assert _edge_set(coordinate_edges(m)) == set(zip(u.tolist(), v.tolist()))


@pytest.fixture(scope="module")
def cmap():
    return build_map(sample_bm(math.sqrt(8 / 3), 20000, seed=11))


def test_adjacency_structure(cmap):
    n = cmap.n
    assert cmap.n_edges <= 3 * n - 6
    for v in range(0, n, 97):
        nb = cmap.neighbors(v)
        assert np.all(np.diff(nb) > 0)
        for w in nb:
            assert v in cmap.neighbors(int(w))
        if v + 1 < n:
            assert v + 1 in nb
    e = cmap.edges
    assert np.all(e[:, 0] < e[:, 1])
    assert len(_edge_set(e)) == cmap.n_edges
    assert cmap.indptr[-1] == 2 * cmap.n_edges


def test_both_coordinate_edges_flagged(cmap):
    tr = sample_bm(math.sqrt(8 / 3), 3000, seed=4)
    m = build_map(tr)
    L = _edge_set(coordinate_edges(tr.l_min))
    R = _edge_set(coordinate_edges(tr.r_min))
    codes = dict(zip(map(tuple, m.edges.tolist()), m.coord.tolist()))
    assert set(codes) == L | R
    assert all(codes[e] == (1 if e in L else 0) + (2 if e in R else 0) for e in codes)
    assert np.array_equal(m.double, np.array([codes[tuple(e)] == 3 and e[1] - e[0] > 1 for e in m.edges.tolist()]))


def test_ball_profile_on_path_graph():
    n = 101
    dec = -np.arange(n, dtype=float)
    m = build_map(_trace(dec, dec.copy()))
    assert m.n_edges == n - 1
    prof = ball_profile(m, 50, 30)
    assert prof.volumes.tolist() == [2 * r + 1 for r in range(31)]
    assert not prof.exhausted
    cut = ball_profile(m, 50, 80)
    assert cut.exhausted and cut.radii[-1] == 49 and cut.volumes[-1] == 99


def test_ball_profile_basic(cmap):
    prof = ball_profile(cmap, 10000, 25)
    assert prof.volumes[0] == 1
    assert prof.volumes[1] == 1 + cmap.neighbors(10000).size
    assert np.all(np.diff(prof.volumes) > 0)
    with pytest.raises(DomainError):
        ball_profile(cmap, cmap.n + 5, 3)


def test_bulk_centers(cmap):
    c = bulk_centers(cmap, 200, seed=0)
    third = (cmap.n - 1) // 3
    assert c.min() >= third and c.max() <= cmap.n - 1 - third


def test_growth_exponent_synthetic():
    r = np.arange(0, 41)
    exact = [BallProfile(r, r.astype(float) ** 4, 0) for _ in range(10)]
    fit = growth_exponent(exact, 10, 40)
    assert fit.slope == pytest.approx(4.0, abs=1e-12) and fit.stderr < 1e-12
    rng = np.random.default_rng(0)
    noisy = [BallProfile(r, 7.0 * r**2.5 * np.exp(rng.normal(0, 0.01, r.size)), 0) for _ in range(10)]
    assert abs(growth_exponent(noisy, 10, 40).slope - 2.5) < 0.05


def test_growth_exponent_errors():
    r = np.arange(0, 41)
    profs = [BallProfile(r, r**3 + 1, 0)] * 9
    with pytest.raises(InsufficientDataError):
        growth_exponent(profs, 10, 40)
    with pytest.raises(InsufficientDataError):
        growth_exponent(profs * 2, 4, 40)


def test_sample_bm_errors_and_determinism():
    with pytest.raises(DomainError):
        sample_bm(1.0, 1)
    with pytest.raises(DomainError):
        sample_bm(1.0, 10, substeps=0)
    a, b = sample_bm(1.2, 500, seed=9), sample_bm(1.2, 500, seed=9)
    assert np.array_equal(a.l_min, b.l_min) and np.array_equal(a.r_min, b.r_min)
    assert np.all(np.isfinite(a.l_min))


def test_degree_law_does_not_depend_on_substeps():
    gamma = math.sqrt(8 / 3)
    degs = {}
    for sub in (8, 16):
        d = []
        for s in range(4):
            m = build_map(sample_bm(gamma, 20000, substeps=sub, seed=(sub, s)))
            d.append(np.diff(m.indptr)[2000:-2000:10])
        degs[sub] = np.concatenate(d)
    assert stats.ks_2samp(degs[8], degs[16]).pvalue > 0.01


def test_export_edges(tmp_path, cmap):
    small = build_map(_trace([3, 1, 2, 5, 0], [0, 1, 2, 3, 4]))
    path = tmp_path / "edges.csv"
    export_edges(small, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "u,v,coord"
    rows = {tuple(l.split(",")) for l in lines[1:]}
    assert ("0", "1", "B") in rows and ("1", "4", "L") in rows
    assert len(rows) == small.n_edges
