import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import brentq

from lqgdim import formulas as F
from lqgdim.errors import DomainError

S2 = math.sqrt(2.0)
PG = math.sqrt(8.0 / 3.0)
gammas = st.floats(0.001, 1.999)
dims = st.floats(2.001, 20.0)


@pytest.mark.parametrize(
    "fn, g, expected, tol",
    [
        (F.lower_bound, S2, 3.46410, 1e-5),
        (F.lower_bound, PG, 4.0, 1e-12),
        (F.lower_bound, 1.0, 2.44949, 1e-5),
        (F.upper_bound, S2, 3.63299, 1e-5),
        (F.upper_bound, PG, 4.0, 1e-12),
        (F.upper_bound, 1.0, 3.11963, 1e-5),
        (F.watabiki, PG, 4.0, 1e-12),
        (F.watabiki, S2, 3.56155, 1e-5),
        (F.watabiki, 2.0, 4.82843, 1e-5),
        (F.quad_guess, 0.0, 2.0, 0.0),
        (F.quad_guess, PG, 4.0, 1e-12),
        (F.quad_guess, 1.0, 2.90825, 1e-5),
    ],
)
def test_closed_form_values(fn, g, expected, tol):
    assert fn(g) == pytest.approx(expected, abs=tol)


def test_limits_near_two():
    assert F.lower_bound(1.9999) == pytest.approx(4.77485, abs=1e-3)
    assert F.upper_bound(1.9999) == pytest.approx(4.89898, abs=1e-3)
    # upper limit is 2 sqrt 6
    assert F.upper_bound(2 - 1e-12) == pytest.approx(2 * math.sqrt(6), abs=1e-9)


def test_lower_at_one_takes_linear_branch():
    assert F.lower_bound(1.0) == pytest.approx(math.sqrt(6), abs=1e-12)
    assert 2 / (5 - math.sqrt(17)) == pytest.approx(2.2808, abs=1e-4)


def test_unrationalised_lower_branch_agrees():
    # 2 g^2 / (4 + g^2 - sqrt(16 + g^4)) evaluated directly as an oracle
    for g in np.linspace(0.05, PG, 40):
        direct = 2 * g * g / (4 + g * g - math.sqrt(16 + g**4))
        assert max(math.sqrt(6) * g, direct) == pytest.approx(F.lower_bound(g), rel=1e-9)


def test_kinks_located_by_root_finding():
    lo_kink = brentq(lambda g: math.sqrt(6) * g - (4 + g * g + math.sqrt(16 + g**4)) / 4, 0.5, 1.2)
    hi_kink = brentq(
        lambda g: (4 + g * g + math.sqrt(16 + 2 * g * g + g**4)) / 3 - (2 + g * g / 2 + S2 * g), 0.1, 1.0
    )
    assert lo_kink == pytest.approx(0.909576, abs=1e-6)
    assert F.lower_bound(lo_kink) == pytest.approx(2.228, abs=1e-3)
    assert hi_kink == pytest.approx(0.460149, abs=1e-6)
    assert F.upper_bound(hi_kink) == pytest.approx(2.75662, abs=1e-5)


@pytest.mark.parametrize(
    "fn, args, expected",
    [
        (F.lfpp_xi, (PG, 4.0), 0.40825),
        (F.lfpp_xi, (S2, 3.5), 0.40406),
        (F.lfpp_lambda, (PG, 4.0), 1 / 6),
        (F.lfpp_lambda, (S2, 4.0), 0.25),
        (F.discrete_lfpp_exponent, (PG, 4.0), 5 / 6),
        (F.discrete_lfpp_exponent, (S2, 4.0), 0.75),
        (F.heat_kernel_exponent, (4.0,), 1 / 3),
        (F.heat_kernel_exponent, (3.0,), 0.5),
        (F.heat_kernel_exponent, (3.5,), 0.4),
    ],
)
def test_relation_values(fn, args, expected):
    assert fn(*args) == pytest.approx(expected, abs=1e-5)


@given(gammas, dims)
def test_xi_is_a_ratio(g, d):
    # xi(g, g) = 1 is outside the domain (d > 2 > g); check the ratio form instead
    assert F.lfpp_xi(g, d) * d == pytest.approx(g, rel=1e-15)


def test_lambda_degenerate_limit():
    assert F.lfpp_lambda(1e-9, 2.0 + 1e-12) == pytest.approx(0.0, abs=1e-9)


@given(gammas, dims)
def test_q_identity(g, d):
    lhs = (1 - F.lfpp_lambda(g, d)) / F.lfpp_xi(g, d)
    assert lhs == pytest.approx(F.lqg_q(g), rel=1e-12, abs=1e-12)


@given(gammas, dims)
def test_discrete_exponent_complements_lambda(g, d):
    assert F.discrete_lfpp_exponent(g, d) == pytest.approx(1 - F.lfpp_lambda(g, d), abs=1e-14)


@given(gammas)
def test_bounds_ordered(g):
    lo, hi = F.lower_bound(g), F.upper_bound(g)
    assert 2 < lo <= hi + 1e-9
    assert lo - 1e-9 <= F.watabiki(g) <= hi + 1e-9


def test_bounds_strict_except_pure_gravity():
    grid = np.linspace(0.01, 1.99, 199)
    gap = np.array([F.upper_bound(g) - F.lower_bound(g) for g in grid])
    near = np.abs(grid - PG) < 0.006
    assert np.all(gap[~near] > 1e-9)


def test_bounds_nondecreasing_on_grid():
    grid = np.linspace(0.01, 1.99, 199)
    for fn in (F.lower_bound, F.upper_bound):
        v = np.array([fn(g) for g in grid])
        assert np.all(np.diff(v) >= -1e-12)


LOWER_KINK = 0.9095758


def _ratio(fn, lo, hi):
    grid = np.linspace(lo, hi, 120)
    return grid / np.array([fn(g) for g in grid])


def test_gamma_over_upper_increasing_off_linear_piece():
    assert np.all(np.diff(_ratio(F.upper_bound, 0.01, PG - 1e-6)) > 0)
    assert np.allclose(_ratio(F.upper_bound, PG + 1e-6, 1.99), 1 / math.sqrt(6), rtol=1e-14)


def test_gamma_over_lower_increasing_off_linear_piece():
    for lo, hi in ((0.01, LOWER_KINK - 1e-6), (PG + 1e-6, 1.99)):
        assert np.all(np.diff(_ratio(F.lower_bound, lo, hi)) > 0)
    # on the sqrt(6) gamma piece the ratio is flat, not strictly increasing
    flat = _ratio(F.lower_bound, LOWER_KINK + 1e-6, PG - 1e-6)
    assert np.allclose(flat, 1 / math.sqrt(6), rtol=1e-14)


def test_branch_continuity_at_pure_gravity():
    for fn in (F.lower_bound, F.upper_bound):
        assert abs(fn(PG - 1e-12) - fn(PG + 1e-12)) < 1e-9


@pytest.mark.parametrize("bad", [0.0, -0.5, 2.0, 2.5, math.nan, math.inf])
def test_gamma_domain(bad):
    with pytest.raises(DomainError):
        F.lower_bound(bad)
    with pytest.raises(DomainError):
        F.upper_bound(bad)


def test_watabiki_accepts_two_only():
    assert F.watabiki(2.0) > 0
    with pytest.raises(DomainError):
        F.watabiki(2.0001)


@pytest.mark.parametrize("fn", [F.lfpp_xi, F.lfpp_lambda, F.discrete_lfpp_exponent])
def test_dimension_must_exceed_two(fn):
    with pytest.raises(DomainError):
        fn(1.0, 2.0)


def test_heat_kernel_domain():
    with pytest.raises(DomainError):
        F.heat_kernel_exponent(1.5)


def test_bounds_table_rows():
    (row,) = F.bounds_table([S2])
    assert (row.lower, row.upper, row.watabiki) == pytest.approx((3.46410, 3.63299, 3.56155), abs=1e-5)
    assert F.bounds_table([]) == []
    rows = F.bounds_table(np.linspace(0.01, 1.99, 199))
    assert len(rows) == 199 and all(r.lower <= r.upper for r in rows)


def test_bounds_table_propagates_domain_errors():
    with pytest.raises(DomainError):
        F.bounds_table([1.0, 2.0])
