import math

import mpmath
import pytest
from hypothesis import given, settings, strategies as st

from reachrl.estimation import clamp_estimate, hoeffding_width, lower_estimate, split_budget
from reachrl.mdp import CountTable


def test_width_reference_value():
    mpmath.mp.dps = 40
    ref = mpmath.sqrt(mpmath.log(mpmath.mpf("0.025")) / -400)
    assert hoeffding_width(200, 0.05) == pytest.approx(float(ref), rel=1e-14)
    assert hoeffding_width(200, 0.05) == pytest.approx(0.09603, abs=5e-6)


def test_width_halves_with_four_times_the_samples():
    assert hoeffding_width(400, 0.01) == pytest.approx(hoeffding_width(100, 0.01) / 2, rel=1e-14)


def test_width_one():
    assert hoeffding_width(1, 2 / math.e**2) == pytest.approx(1.0, rel=1e-14)


def test_width_needs_samples():
    with pytest.raises(ValueError, match="no samples"):
        hoeffding_width(0, 0.1)


@settings(max_examples=100)
@given(st.integers(1, 10**6), st.floats(1e-12, 0.99))
def test_width_monotone(n, d):
    assert hoeffding_width(n + 1, d) < hoeffding_width(n, d)
    assert hoeffding_width(n, d / 2) > hoeffding_width(n, d)


@pytest.mark.parametrize("k,n,c,expected", [(60, 100, 0.1, 0.5), (5, 100, 0.1, 0.0), (100, 100, 0.02, 0.98)])
def test_clamp(k, n, c, expected):
    assert clamp_estimate(k, n, c) == pytest.approx(expected, abs=1e-15)


def test_lower_estimate_only_observed():
    counts = CountTable()
    counts.record(0, 0, 1, 60)
    counts.record(0, 0, 2, 40)
    est = lower_estimate(counts, 0.05)
    c = hoeffding_width(100, 0.05)
    assert est.widths[(0, 0)] == c
    assert est.get(0, 0, 1) == pytest.approx(0.6 - c)
    assert est.get(0, 0, 3) == 0.0 and (0, 1) not in est.lower


@settings(max_examples=100)
@given(st.lists(st.integers(1, 500), min_size=1, max_size=6), st.floats(1e-9, 0.5))
def test_lower_mass_at_most_one(ks, d):
    counts = CountTable()
    for t, k in enumerate(ks):
        counts.record(0, 0, t, k)
    assert lower_estimate(counts, d).mass(0, 0) <= 1.0


def test_split_budget_example():
    b = split_budget(0.3, 0.5, 10)
    for x in (b.delta_tp, b.delta_ec, b.delta_nk):
        assert x == pytest.approx(0.1)
    for x in (b.delta_p, b.delta_c, b.delta_n):
        assert x == pytest.approx(0.005)
    assert b.delta_tp + b.delta_ec + b.delta_nk == pytest.approx(0.3, abs=1e-17)


def test_split_budget_thirds_and_scaling():
    b = split_budget(1 / 8, 1 / 8, 1)
    assert b.delta_tp == pytest.approx(1 / 24)
    one, two = split_budget(0.25, 0.25, 7), split_budget(0.25, 0.25, 14)
    assert two.delta_p == pytest.approx(one.delta_p / 2)
    assert two.delta_c == pytest.approx(one.delta_c / 2)
    with pytest.raises(ValueError):
        split_budget(0.25, 0.25, 0)
