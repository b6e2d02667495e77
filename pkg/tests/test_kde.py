import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from driftgmm.errors import InsufficientDataError, RejectedInputError
from driftgmm.kde import BANDWIDTH_FLOOR, bandwidth, kde_eval, tv_divergence


def silverman_oracle(x):
    x = np.asarray(x, dtype=float)
    sd = np.std(x, ddof=1)
    iqr = stats.iqr(x)
    return 0.9 * min(sd, iqr / 1.34) * len(x) ** -0.2


def test_bandwidth_floor_on_identical_samples():
    assert bandwidth([3.0] * 10) == BANDWIDTH_FLOOR


def test_bandwidth_standard_normal_range_and_oracle():
    x = np.random.default_rng(0).standard_normal(100)
    h = bandwidth(x)
    assert 0.2 <= h <= 0.6
    assert h == pytest.approx(silverman_oracle(x), rel=1e-12)


def test_bandwidth_scale_equivariance():
    x = np.random.default_rng(1).standard_normal(57)
    assert bandwidth(x * 3.5) == pytest.approx(3.5 * bandwidth(x), rel=1e-12)


def test_bandwidth_needs_two_samples():
    with pytest.raises(InsufficientDataError):
        bandwidth([1.0])


def test_kde_single_sample_at_centre_and_tail():
    h = 0.7
    curve = kde_eval([2.0], h, [2.0, 2.0 + 10 * h])
    assert curve.values[0] == pytest.approx(1 / (h * math.sqrt(2 * math.pi)), rel=1e-14)
    assert curve.values[1] < 1e-10


def test_kde_two_sample_value():
    curve = kde_eval([-1.0, 1.0], 1.0, [0.0])
    oracle = 0.5 * 2 * stats.norm.pdf(1.0)
    assert curve.values[0] == pytest.approx(oracle, rel=1e-14)
    assert curve.values[0] == pytest.approx(0.24197, abs=1e-5)


def test_kde_matches_scipy_gaussian_kde():
    x = np.random.default_rng(5).normal(size=80)
    h = bandwidth(x)
    grid = np.linspace(-4, 4, 101)
    # gaussian_kde takes the bandwidth as a factor of the sample std
    ref = stats.gaussian_kde(x, bw_method=h / np.std(x, ddof=1))(grid)
    np.testing.assert_allclose(kde_eval(x, h, grid).values, ref, rtol=1e-10)


def test_kde_errors():
    with pytest.raises(InsufficientDataError):
        kde_eval([], 1.0, [0.0, 1.0])
    with pytest.raises(RejectedInputError):
        kde_eval([0.0], 0.0, [0.0, 1.0])
    with pytest.raises(RejectedInputError):
        kde_eval([0.0], 1.0, [0.0, 1.0, 3.0])
    with pytest.raises(RejectedInputError):
        kde_eval([0.0], 1.0, [1.0, 0.0])


def test_tv_examples():
    rng = np.random.default_rng(3)
    a = rng.normal(size=40)
    assert tv_divergence(a, a) == 0.0
    near0 = rng.normal(0, 0.1, 45)
    near100 = rng.normal(100, 0.1, 45)
    assert tv_divergence(near0, near100) >= 0.95
    b = rng.normal(0.5, 1.2, 30)
    assert tv_divergence(a, b) == tv_divergence(b, a)


def test_tv_against_quadrature_oracle():
    rng = np.random.default_rng(4)
    a, b = rng.normal(0, 1, 30), rng.normal(1, 1, 30)
    ha, hb = bandwidth(a), bandwidth(b)
    fa = stats.gaussian_kde(a, bw_method=ha / np.std(a, ddof=1))
    fb = stats.gaussian_kde(b, bw_method=hb / np.std(b, ddof=1))
    lo = min(a.min(), b.min()) - 3 * max(ha, hb)
    hi = max(a.max(), b.max()) + 3 * max(ha, hb)
    oracle, _ = integrate.quad(lambda t: abs(fa(t)[0] - fb(t)[0]), lo, hi, limit=500)
    # 256-point Riemann sum vs adaptive quadrature
    assert tv_divergence(a, b) == pytest.approx(0.5 * oracle, abs=5e-3)


def test_tv_needs_two_per_window():
    with pytest.raises(InsufficientDataError):
        tv_divergence([1.0], [1.0, 2.0])


windows = st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=2, max_size=60)


@settings(max_examples=100, deadline=None)
@given(a=windows, b=windows)
def test_tv_bounded_and_symmetric(a, b):
    d = tv_divergence(a, b)
    assert 0.0 <= d <= 1.0
    assert d == tv_divergence(b, a)
    assert tv_divergence(a, a) == 0.0


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), c=st.floats(-1e4, 1e4, allow_nan=False))
def test_tv_shift_invariance(seed, c):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(0, 1, 45), rng.normal(0.3, 1.5, 45)
    assert abs(tv_divergence(a + c, b + c) - tv_divergence(a, b)) < 1e-9


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), n=st.integers(2, 200), spread=st.floats(1e-3, 1e3))
def test_density_mass_on_construction_grid(seed, n, spread):
    x = np.random.default_rng(seed).normal(0, spread, n)
    h = bandwidth(x)
    grid = np.linspace(x.min() - 3 * h, x.max() + 3 * h, 256)
    assert 0.95 <= kde_eval(x, h, grid).mass <= 1.05
    assert np.all(kde_eval(x, h, grid).values >= 0)
