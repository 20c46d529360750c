import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from spoofgeo.special import (
    chi2_cdf,
    chi2_quantile,
    chi2_sf,
    gammainc_pq,
    marcum_q,
    noncentral_chi2_cdf,
    noncentral_chi2_sf,
)

k_st = st.floats(0.5, 200.0)


@given(st.floats(0.1, 100.0), st.floats(0.0, 400.0))
def test_gammainc_pq_sums_to_one(a, x):
    p, q = gammainc_pq(a, x)
    assert 0.0 <= p <= 1.0 and 0.0 <= q <= 1.0
    assert p + q == pytest.approx(1.0, abs=1e-12)


@given(st.floats(0.01, 300.0), k_st)
def test_chi2_against_scipy(x, k):
    assert chi2_cdf(x, k) == pytest.approx(stats.chi2.cdf(x, k), abs=1e-12)
    sf = stats.chi2.sf(x, k)
    assert chi2_sf(x, k) == pytest.approx(sf, rel=1e-9, abs=1e-300)


@given(st.floats(1e-6, 1 - 1e-9), k_st)
def test_quantile_inverts_cdf(p, k):
    x = chi2_quantile(p, k)
    assert x == pytest.approx(stats.chi2.ppf(p, k), rel=1e-8, abs=1e-12)


def test_quantile_edges():
    assert chi2_quantile(0.0, 4) == 0.0
    assert chi2_quantile(0.95, 2) == pytest.approx(-2 * math.log(0.05))
    # 1 - 1e-15 needs the sf branch to stay accurate
    assert chi2_quantile(1 - 1e-12, 20) == pytest.approx(stats.chi2.isf(1e-12, 20), rel=1e-6)
    with pytest.raises(ValueError):
        chi2_quantile(1.0, 3)
    with pytest.raises(ValueError):
        chi2_cdf(1.0, 0.0)


@given(st.floats(0.01, 200.0), st.floats(1.0, 60.0), st.floats(0.01, 200.0))
def test_noncentral_against_scipy(x, k, lam):
    assert noncentral_chi2_cdf(x, k, lam) == pytest.approx(stats.ncx2.cdf(x, k, lam), abs=1e-9)
    assert noncentral_chi2_sf(x, k, lam) + noncentral_chi2_cdf(x, k, lam) == pytest.approx(1.0, abs=1e-12)


def test_noncentral_reduces_to_central():
    for x in np.linspace(0.1, 80, 40):
        for k in (1, 2, 5, 20, 40):
            assert abs(noncentral_chi2_cdf(x, k, 0.0) - chi2_cdf(x, k)) < 1e-9


@given(st.floats(0.5, 20.0), st.floats(0.0, 15.0), st.floats(0.0, 15.0))
def test_marcum_q_bounds_and_monotone(m, a, b):
    q = marcum_q(m, a, b)
    assert 0.0 <= q <= 1.0
    assert marcum_q(m, a + 0.5, b) >= q - 1e-12
    assert marcum_q(m, a, b + 0.5) <= q + 1e-12


def test_marcum_q_known_values():
    # Q_1(0, b) = exp(-b^2 / 2)
    for b in (0.5, 1.0, 3.0):
        assert marcum_q(1.0, 0.0, b) == pytest.approx(math.exp(-b * b / 2), rel=1e-12)
    assert marcum_q(2.0, 1.0, 0.0) == 1.0
    with pytest.raises(ValueError):
        marcum_q(0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        noncentral_chi2_cdf(1.0, 2.0, -1.0)


def test_subnormal_noncentrality_is_central():
    assert noncentral_chi2_cdf(3.0, 4, 5e-324) == pytest.approx(chi2_cdf(3.0, 4), abs=1e-15)
    assert marcum_q(2.0, 1e-170, 1.0) == pytest.approx(noncentral_chi2_sf(1.0, 4.0, 0.0))
