import math
import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import fft

from lqgdim.errors import DomainError, ResolutionError
from lqgdim.field import (
    FieldKind,
    GridField,
    GridSpec,
    circle_average,
    circle_averages,
    dgff_variance,
    dump_field,
    layer_covariance,
    layer_covariance_quadrature,
    layer_variance,
    load_field,
    sample_dgff,
    sample_layered,
    sample_layered_pair,
    sample_truncated,
    sample_truncated_pair,
)

LOG2 = math.log(2.0)


def _white_noise_mesh_cov(r, t_min, s_nodes=600):
    """pi * int_{t^2}^1 int p(s/2; z, w) p(s/2; z', w) dw ds on an explicit space-time mesh.

    The spatial integral factorises over coordinates, so each slice is a
    product of two 1-D Riemann sums; no closed form for the convolution is used.
    """
    log_s = np.linspace(2 * math.log(t_min), 0.0, s_nodes)
    total = np.zeros_like(log_s)
    for k, ls in enumerate(log_s):
        var = math.exp(ls) / 2.0
        sd = math.sqrt(var)
        step = sd / 20.0
        x = np.arange(-r / 2 - 10 * sd, r / 2 + 10 * sd, step)
        g = lambda u: np.exp(-(u**2) / (2 * var)) / math.sqrt(2 * math.pi * var)
        ix = (g(x - r / 2) * g(x + r / 2)).sum() * step
        iy = (g(x) * g(x)).sum() * step
        total[k] = math.pi * ix * iy * math.exp(ls)  # ds = s d(log s)
    return float(np.trapezoid(total, log_s))


def _sampled_pairs(spec, t_min, pairs, seed, truncated=False):
    draw = sample_truncated_pair if truncated else sample_layered_pair
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(pairs):
        out.extend(draw(spec, t_min, rng))
    return out


# --- covariance formulas ----------------------------------------------------


def test_layer_covariance_at_zero_is_log_two():
    for k in range(6):
        assert layer_covariance(0.0, 2.0**-k, 2.0 ** -(k + 1)) == pytest.approx(LOG2, abs=1e-14)


def test_closed_form_matches_quadrature():
    r = np.linspace(0.0, 1.5, 61)
    for k in range(5):
        hi, lo = 2.0**-k, 2.0 ** -(k + 1)
        np.testing.assert_allclose(layer_covariance(r, hi, lo), layer_covariance_quadrature(r, hi, lo), rtol=1e-9, atol=1e-13)


def test_closed_form_matches_space_time_mesh():
    t_min = 1 / 8
    for r in (0.0, 2 * t_min, 0.4):
        exact = sum(layer_covariance(r, 2.0**-k, 2.0 ** -(k + 1)) for k in range(3))
        assert float(exact) == pytest.approx(_white_noise_mesh_cov(r, t_min), rel=2e-4, abs=1e-6)


@given(st.floats(0.0, 2.0), st.integers(0, 6))
def test_layer_covariance_scale_invariance(r, k):
    a = layer_covariance(r, 2.0**-k, 2.0 ** -(k + 1))
    b = layer_covariance(r / 2, 2.0 ** -(k + 1), 2.0 ** -(k + 2))
    assert float(a) == pytest.approx(float(b), rel=1e-12, abs=1e-15)


def test_spectral_layer_variances_are_log_two():
    for k in range(6):
        assert layer_variance(257, k) == pytest.approx(LOG2, abs=1e-4)


# --- white-noise sampler ----------------------------------------------------


def test_t_min_one_is_zero_field():
    f = sample_layered(GridSpec(9), 1.0, 0)
    assert f.depth == 0
    assert not f.assemble().values.any()
    assert not sample_truncated(GridSpec(9), 1.0, 0).assemble().values.any()


def test_assemble_partial_sums():
    lf = sample_layered(GridSpec(33), 1 / 8, 3)
    assert not lf.assemble(0).values.any()
    np.testing.assert_array_equal(lf.assemble(lf.depth).values, lf.layers.sum(axis=0))
    np.testing.assert_allclose(lf.assemble(2).values, lf.layers[0] + lf.layers[1])
    assert lf.assemble(2).t_min == 0.25
    with pytest.raises(IndexError):
        lf.assemble(lf.depth + 1)


def test_clipped_mass_is_negligible():
    lf = sample_layered(GridSpec(65), 1 / 16, 0)
    assert max(lf.clipped_mass) <= 1e-4


def test_determinism_and_seed_sensitivity():
    a = sample_layered(GridSpec(33), 1 / 8, 11).assemble().values
    b = sample_layered(GridSpec(33), 1 / 8, 11).assemble().values
    c = sample_layered(GridSpec(33), 1 / 8, 12).assemble().values
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_resolution_and_scale_errors():
    with pytest.raises(ResolutionError):
        sample_layered(GridSpec(17), 1 / 16, 0)
    with pytest.raises(DomainError):
        sample_layered(GridSpec(65), 0.3, 0)
    with pytest.raises(DomainError):
        sample_layered(GridSpec(65), 0.0, 0)


@pytest.fixture(scope="module")
def whitenoise_samples():
    return _sampled_pairs(GridSpec(33), 1 / 8, 1500, seed=2024)


def test_variance_law_and_last_increment(whitenoise_samples):
    mid = 16
    top = np.array([s.assemble().values[mid, mid] for s in whitenoise_samples])
    inc = np.array([s.layers[-1][mid, mid] for s in whitenoise_samples])
    for x, target in ((top, math.log(8)), (inc, LOG2)):
        var = x.var(ddof=1)
        se = math.sqrt((np.mean((x - x.mean()) ** 4) - var**2) / x.size)
        assert abs(var - target) <= 3 * se


def test_layers_uncorrelated(whitenoise_samples):
    vals = np.array([s.layers[:, 10, 20] for s in whitenoise_samples])
    corr = np.corrcoef(vals.T)
    bound = 3 / math.sqrt(vals.shape[0])
    assert np.all(np.abs(corr[np.triu_indices(3, 1)]) < bound)


def test_covariance_at_twice_t_min_matches_oracle(whitenoise_samples):
    # r = 2 t_min = 1/4 is eight lattice steps on the 33-point grid
    x = np.array([s.assemble().values[12, 16] for s in whitenoise_samples])
    y = np.array([s.assemble().values[20, 16] for s in whitenoise_samples])
    prod = (x - x.mean()) * (y - y.mean())
    target = _white_noise_mesh_cov(0.25, 1 / 8)
    assert abs(prod.mean() - target) <= 3 * prod.std(ddof=1) / math.sqrt(prod.size)


def test_empirical_scale_invariance(whitenoise_samples):
    # layer 0 at lag 8 steps vs layer 1 at lag 4 steps
    def cov(layer, lag):
        a = np.array([s.layers[layer][8, 16] for s in whitenoise_samples])
        b = np.array([s.layers[layer][8 + lag, 16] for s in whitenoise_samples])
        p = a * b
        return p.mean(), p.std(ddof=1) / math.sqrt(p.size)

    (c0, s0), (c1, s1) = cov(0, 8), cov(1, 4)
    assert abs(c0 - c1) <= 3 * math.hypot(s0, s1)


def test_max_bound_sanity():
    t_min = 1 / 64
    rng = np.random.default_rng(5)
    exceed = 0
    reps = 0
    for _ in range(15):
        for lf in sample_layered_pair(GridSpec(257), t_min, rng):
            exceed += np.abs(lf.assemble().values).max() > 2.5 * math.log(1 / t_min)
            reps += 1
    assert exceed / reps < 0.05


# --- truncated field --------------------------------------------------------


@pytest.fixture(scope="module")
def truncated_samples():
    return _sampled_pairs(GridSpec(65), 1 / 16, 1000, seed=7, truncated=True)


def test_truncated_variance_matches_its_spectrum(truncated_samples):
    exact = sum(layer_variance(65, k, truncated=True) for k in range(4))
    x = np.array([s.assemble().values[32, 32] for s in truncated_samples])
    var = x.var(ddof=1)
    se = math.sqrt((np.mean((x - x.mean()) ** 4) - var**2) / x.size)
    assert abs(var - exact) <= 3 * se


def test_truncated_field_has_finite_range(truncated_samples):
    # points 0.25 apart (> 1/5): covariance zero by construction
    x = np.array([s.assemble().values[16, 32] for s in truncated_samples])
    y = np.array([s.assemble().values[32, 32] for s in truncated_samples])
    p = x * y
    assert abs(p.mean()) <= 3 * p.std(ddof=1) / math.sqrt(p.size)


def test_truncation_removes_a_depth_independent_amount():
    gaps = []
    for depth in (4, 5, 6):
        n = 4 * 2**depth + 1
        full = sum(layer_variance(n, k) for k in range(depth))
        trunc = sum(layer_variance(n, k, truncated=True) for k in range(depth))
        gaps.append(full - trunc)
    assert max(gaps) - min(gaps) < 0.01


@pytest.mark.xfail(strict=True, reason="killed kernel loses an O(1) amount of variance (~2.24); see ledger")
def test_truncated_variance_close_to_log_inverse_scale():
    exact = sum(layer_variance(65, k, truncated=True) for k in range(4))
    assert abs(exact - math.log(16)) <= 0.15


# --- discrete GFF -----------------------------------------------------------


def _dense_dgff_cov(n):
    m = n - 2
    lap = np.zeros((m * m, m * m))
    for i in range(m):
        for j in range(m):
            a = i * m + j
            lap[a, a] = 4
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                if 0 <= i + di < m and 0 <= j + dj < m:
                    lap[a, (i + di) * m + j + dj] = -1
    return 2 * math.pi * np.linalg.inv(lap)


def test_dgff_boundary_is_zero():
    f = sample_dgff(GridSpec(20), 1)
    assert f.kind is FieldKind.DGFF
    for edge in (f.values[0], f.values[-1], f.values[:, 0], f.values[:, -1]):
        assert not edge.any()


def test_dgff_exact_variance_matches_dense_inverse():
    n = 9
    cov = _dense_dgff_cov(n)
    np.testing.assert_allclose(dgff_variance(n)[1:-1, 1:-1].ravel(), np.diag(cov), rtol=1e-12)


def test_dgff_sample_covariance_matches_dense_inverse():
    n = 7
    cov = _dense_dgff_cov(n)
    rng = np.random.default_rng(3)
    xs = np.array([sample_dgff(GridSpec(n), rng).values[1:-1, 1:-1].ravel() for _ in range(20000)])
    emp = np.cov(xs.T)
    se = np.sqrt((np.outer(np.diag(cov), np.diag(cov)) + cov**2) / xs.shape[0])
    assert np.all(np.abs(emp - cov) <= 4 * se)


def test_dgff_covariance_mirror_symmetry():
    rng = np.random.default_rng(8)
    n = 16
    xs = np.array([sample_dgff(GridSpec(n), rng).values for _ in range(4000)])
    a = xs[:, 4, 5] * xs[:, 7, 9]
    b = xs[:, n - 1 - 4, 5] * xs[:, n - 1 - 7, 9]
    assert abs(a.mean() - b.mean()) <= 3 * math.hypot(a.std(), b.std()) / math.sqrt(len(a))


def test_dgff_center_variance_grows_like_log():
    sizes = np.array([65, 129, 257, 513])
    var = np.array([dgff_variance(n)[n // 2, n // 2] for n in sizes])
    slope = np.polyfit(np.log(sizes), var, 1)[0]
    assert slope == pytest.approx(1.0, rel=0.1)


def test_dgff_monte_carlo_matches_exact_variance():
    n = 65
    rng = np.random.default_rng(9)
    x = np.array([sample_dgff(GridSpec(n), rng).values[32, 32] for _ in range(3000)])
    exact = dgff_variance(n)[32, 32]
    se = exact * math.sqrt(2 / (x.size - 1))
    assert abs(x.var(ddof=1) - exact) <= 3 * se


def _circle_weights(spec, center, delta, points=32):
    """Site weights of the bilinear circle average, so Var = w^T C w exactly."""
    w = np.zeros((spec.n, spec.n))
    theta = 2 * np.pi * np.arange(points) / points
    for a, b in zip(
        center[0] / spec.spacing + delta / spec.spacing * np.cos(theta),
        center[1] / spec.spacing + delta / spec.spacing * np.sin(theta),
    ):
        i0, j0 = int(a), int(b)
        fa, fb = a - i0, b - j0
        w[i0, j0] += (1 - fa) * (1 - fb) / points
        w[i0 + 1, j0] += fa * (1 - fb) / points
        w[i0, j0 + 1] += (1 - fa) * fb / points
        w[i0 + 1, j0 + 1] += fa * fb / points
    return w


def test_dgff_circle_average_variance_slope():
    n = 257
    spec = GridSpec(n)
    c = 2 - 2 * np.cos(np.pi * np.arange(1, n - 1) / (n - 1))
    lam = c[:, None] + c[None, :]
    probe = GridField(spec, np.random.default_rng(0).normal(size=(n, n)), FieldKind.DGFF)
    deltas = np.array([1 / 8, 1 / 16, 1 / 32, 1 / 64])
    var = []
    for d in deltas:
        w = _circle_weights(spec, (0.5, 0.5), d)
        assert circle_average(probe, (0.5, 0.5), d) == pytest.approx(float((w * probe.values).sum()), rel=1e-10)
        coef = fft.dstn(w[1:-1, 1:-1], type=1, norm="ortho")
        var.append(float((2 * math.pi / lam * coef**2).sum()))
    slope = np.polyfit(np.log(1 / deltas), var, 1)[0]
    assert slope == pytest.approx(1.0, rel=0.1)


# --- circle averages --------------------------------------------------------


def test_circle_average_of_constant_and_linear():
    spec = GridSpec(65)
    const = GridField(spec, np.full((65, 65), 2.5), FieldKind.WHITENOISE)
    x = spec.coords()
    lin = GridField(spec, 1.5 * x[:, None] - 0.7 * x[None, :], FieldKind.WHITENOISE)
    for delta in (2 / 64, 0.1, 0.3):
        assert circle_average(const, (0.5, 0.5), delta) == pytest.approx(2.5, abs=1e-12)
        assert circle_average(lin, (0.45, 0.55), delta) == pytest.approx(1.5 * 0.45 - 0.7 * 0.55, abs=1e-12)


def test_circle_average_errors_and_clamp():
    spec = GridSpec(33)
    f = GridField(spec, np.ones((33, 33)), FieldKind.WHITENOISE)
    with pytest.raises(ResolutionError):
        circle_average(f, (0.5, 0.5), 1 / 64)
    with pytest.raises(DomainError):
        circle_average(f, (0.05, 0.5), 0.1)
    assert circle_averages(f, [(0.05, 0.5)], 0.1, clamp=True)[0] == pytest.approx(1.0)


# --- grid spec and binary format ---------------------------------------------


def test_grid_spec():
    spec = GridSpec(5)
    assert spec.spacing == 0.25
    assert spec.to_index((0.26, 0.74)) == (1, 3)
    assert spec.to_point((1, 3)) == (0.25, 0.75)
    with pytest.raises(DomainError):
        spec.to_index((1.2, 0.5))
    with pytest.raises(DomainError):
        GridSpec(3)


def test_dump_load_roundtrip(tmp_path):
    f = sample_dgff(GridSpec(12), 4)
    path = tmp_path / "f.bin"
    dump_field(f, path)
    raw = path.read_bytes()
    magic, n, spacing, code = struct.unpack_from("<4sIdB", raw)
    assert (magic, n, spacing, code) == (b"LQGF", 12, 1 / 11, 2)
    assert len(raw) == struct.calcsize("<4sIdB") + 8 * 144
    g = load_field(path)
    assert g.kind is FieldKind.DGFF
    np.testing.assert_array_equal(g.values, f.values)


def test_load_rejects_bad_magic(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"XXXX" + bytes(13 + 8 * 16))
    with pytest.raises(ValueError):
        load_field(path)
