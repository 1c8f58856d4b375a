import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from laminar_persuasion import DomainError, StateDistribution

# knots of a CDF with a flat stretch on (0, 0.5)
GAPPY = [[-1.0, 0.0], [0.0, 0.5], [0.5, 0.5], [2.0, 1.0]]

# tail integrals of GAPPY from scipy.integrate.quad on a hand-written quantile
TAIL_GAPPY = {0.1: 0.185, 0.3: 0.465, 0.5: 0.625, 0.7: 0.585, 0.9: 0.465}


def test_uniform_basics():
    d = StateDistribution.uniform(2.0, 4.0)
    assert d.mean == pytest.approx(3.0, abs=1e-15)
    assert d.cdf(2.5) == pytest.approx(0.25)
    assert d.quantile(0.75) == pytest.approx(3.5)
    assert d.quantile(0.0) == 2.0 and d.quantile(1.0) == 4.0
    # int_{1-q}^1 F^{-1} for U[2, 4] is q * (4 - q)
    for q in (0.0, 0.2, 0.5, 1.0):
        assert d.tail_quantile_integral(q) == pytest.approx(q * (4 - q), abs=1e-14)


def test_vectorized_queries():
    d = StateDistribution.uniform()
    q = np.linspace(0, 1, 11)
    np.testing.assert_allclose(d.quantile(q), q)
    np.testing.assert_allclose(d.cdf(q), q)
    np.testing.assert_allclose(d.quantile_integral(q[:-1], q[1:]), (q[1:] ** 2 - q[:-1] ** 2) / 2)


def test_piecewise_linear_with_gap():
    d = StateDistribution.piecewise_linear(GAPPY)
    assert d.mean == pytest.approx(0.375, abs=1e-15)
    for q, val in TAIL_GAPPY.items():
        assert d.tail_quantile_integral(q) == pytest.approx(val, abs=1e-14)
    # left-continuous inverse jumps over the flat stretch
    assert d.quantile(0.5) == pytest.approx(0.0)
    assert d.quantile(0.5 + 1e-12) == pytest.approx(0.5, abs=1e-9)
    assert d.cdf(0.25) == pytest.approx(0.5)


def test_conditional_mean_and_interval_stats():
    d = StateDistribution.uniform()
    assert d.conditional_mean(0.5, 1.0) == pytest.approx(0.75)
    p, mm = d.interval_stats([(0.0, 0.2), (0.6, 1.0)])
    assert p == pytest.approx(0.6)
    assert mm == pytest.approx(0.02 + 0.32)
    with pytest.raises(DomainError):
        d.interval_stats([(0.0, 0.5), (0.4, 1.0)])
    with pytest.raises(DomainError):
        d.conditional_mean(0.5, 0.5)


def test_tail_slope_is_supergradient():
    d = StateDistribution.piecewise_linear(GAPPY)
    qs = np.linspace(0, 1, 41)
    phi = d.tail_quantile_integral(qs)
    for q0 in (0.1, 0.45, 0.5, 0.8):
        s = d.tail_slope(q0)
        assert np.all(phi <= d.tail_quantile_integral(q0) + s * (qs - q0) + 1e-12)


def test_roundtrip_dict():
    for d in (StateDistribution.uniform(-1, 3), StateDistribution.piecewise_linear(GAPPY)):
        assert StateDistribution.from_dict(d.to_dict()) == d


@pytest.mark.parametrize("knots", [
    [[0, 0]],                          # one knot
    [[0, 0], [1, 0.5]],                # does not reach 1
    [[0, 0.1], [1, 1]],                # does not start at 0
    [[0, 0], [1, 0.6], [0.5, 1]],      # states not increasing
    [[0, 0], [1, 0.6], [2, 0.4], [3, 1]],  # CDF decreasing
])
def test_invalid_knots(knots):
    with pytest.raises(DomainError):
        StateDistribution.piecewise_linear(knots)


def test_bad_probability():
    with pytest.raises(DomainError):
        StateDistribution.uniform().quantile(1.5)
    with pytest.raises(DomainError):
        StateDistribution.uniform(1.0, 1.0)


@st.composite
def pl_dists(draw):
    m = draw(st.integers(1, 5))
    xs = sorted(set(draw(st.lists(st.floats(-5, 5), min_size=m + 1, max_size=m + 1))))
    if len(xs) < 2 or min(np.diff(xs)) < 1e-3:
        xs = list(np.linspace(-1, 1, m + 1))
    w = draw(st.lists(st.floats(0, 1), min_size=len(xs) - 1, max_size=len(xs) - 1))
    w = np.array(w)
    if w.sum() < 1e-3:
        w = np.ones_like(w)
    F = np.concatenate([[0], np.cumsum(w) / w.sum()])
    F[-1] = 1.0
    return StateDistribution.piecewise_linear(np.column_stack([xs, F]))


@settings(max_examples=60, deadline=None)
@given(pl_dists(), st.floats(0, 1), st.floats(0, 1))
def test_properties(d, a, b):
    q0, q1 = min(a, b), max(a, b)
    # quantile is monotone and inverts the CDF on its range
    assert d.quantile(q0) <= d.quantile(q1) + 1e-12
    assert d.cdf(d.quantile(q1)) == pytest.approx(q1, abs=1e-9)
    # integrals are additive and bounded by the endpoint quantiles
    mid = (q0 + q1) / 2
    total = d.quantile_integral(q0, q1)
    assert total == pytest.approx(d.quantile_integral(q0, mid) + d.quantile_integral(mid, q1), abs=1e-12)
    assert d.quantile(q0) * (q1 - q0) - 1e-12 <= total <= d.quantile(q1) * (q1 - q0) + 1e-12
    # the tail bound is concave and hits the mean at 1
    assert d.tail_quantile_integral(1.0) == pytest.approx(d.mean, abs=1e-12)
    assert d.tail_quantile_integral(mid) >= (d.tail_quantile_integral(q0) + d.tail_quantile_integral(q1)) / 2 - 1e-12
