from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from bplink.distributions import (
    DIVISIBLE,
    NOT_DIVISIBLE,
    UNKNOWN,
    Bernoulli,
    Binomial,
    FiniteSupport,
    Geometric,
    NegativeBinomial,
    PointMass,
    Poisson,
    ScaledBernoulli,
    ZeroInflatedGeometric,
    ZeroInflatedPoisson,
    binomial,
    compound,
    consecutive_overlap,
    divide,
    iid_sum,
    moments,
)
from bplink.errors import SupportOverflow, ValidationError
from bplink.grammar import parse_distribution

from oracles import brute_force_sum, convolve_power

F = Fraction


def test_pmf_reference_values():
    assert Poisson(2).pmf(0) == pytest.approx(math.exp(-2), rel=1e-15)
    assert ZeroInflatedGeometric(F(3, 10), F(1, 2)).pmf(0) == pytest.approx(0.65, rel=1e-15)
    assert FiniteSupport((0, 2), (F(1, 2), F(1, 2))).pmf(1) == 0.0
    assert PointMass(3).pmf(3) == 1.0
    assert ScaledBernoulli(4, F(1, 4)).pmf(4) == pytest.approx(0.25)
    assert ScaledBernoulli(4, F(1, 4)).pmf(1) == 0.0


@pytest.mark.parametrize(
    "dist, ref",
    [
        (Poisson(F(7, 2)), stats.poisson(3.5)),
        (Binomial(7, F(1, 3)), stats.binom(7, 1 / 3)),
        (Geometric(F(2, 5)), stats.nbinom(1, 0.4)),
        (NegativeBinomial(F(5, 2), F(1, 3)), stats.nbinom(2.5, 1 / 3)),
    ],
)
def test_pmf_against_scipy(dist, ref):
    k = np.arange(60)
    np.testing.assert_allclose(dist.pmf(k), ref.pmf(k), rtol=1e-12, atol=1e-300)


def test_zero_inflated_poisson_pmf():
    d = ZeroInflatedPoisson(F(1, 3), 2)
    assert d.pmf(0) == pytest.approx(1 / 3 + 2 / 3 * math.exp(-2), rel=1e-14)
    assert d.pmf(3) == pytest.approx(2 / 3 * stats.poisson(2).pmf(3), rel=1e-14)


def test_exact_moments():
    assert (Poisson(3).mean, Poisson(3).variance) == (3, 3)
    zip_ = ZeroInflatedPoisson(F(2, 3), 3)
    assert (zip_.mean, zip_.variance) == (1, 3)
    nb = NegativeBinomial(F(3, 2), F(1, 4))
    assert nb.mean == F(9, 2) and nb.variance == F(18)
    assert Binomial(2, F(1, 2)).variance == F(1, 2)


def test_moments_report_truncation_and_validate_tolerance():
    m = moments(Poisson(5))
    assert m.truncated and m.tail_mass < 1e-12
    assert not moments(Binomial(4, F(1, 3))).truncated
    assert moments(PointMass(2)).rho3 == 0.0
    with pytest.raises(ValidationError):
        moments(Poisson(5), tail_tol=0.1)


def test_third_absolute_moment_matches_direct_sum():
    d = Binomial(3, F(1, 2))
    direct = sum(abs(k - 1.5) ** 3 * stats.binom(3, 0.5).pmf(k) for k in range(4))
    assert moments(d).rho3 == pytest.approx(direct, rel=1e-14)


def test_invalid_parameters_are_rejected():
    for bad in (lambda: Poisson(-1), lambda: Bernoulli(F(3, 2)), lambda: Geometric(0), lambda: FiniteSupport((0, 1), (0.5, 0.6))):
        with pytest.raises(ValidationError):
            bad()


def test_sampling_is_deterministic_per_seed():
    d = NegativeBinomial(F(3, 2), F(1, 3))
    a = d.sample(np.random.default_rng(5), 100)
    b = d.sample(np.random.default_rng(5), 100)
    assert np.array_equal(a, b)
    assert PointMass(5).sample(np.random.default_rng(0)) == 5


@pytest.mark.parametrize(
    "dist",
    [
        Binomial(2, F(1, 2)),
        Poisson(F(5, 2)),
        ZeroInflatedGeometric(F(1, 5), F(1, 3)),
        ZeroInflatedPoisson(F(1, 4), 3),
        ScaledBernoulli(3, F(2, 5)),
        FiniteSupport((0, 1, 4), (F(1, 4), F(1, 2), F(1, 4))),
        compound(Poisson(2), Bernoulli(F(1, 2))),
    ],
)
def test_sample_mean_within_clt_band(dist):
    n = 100_000
    x = dist.sample(np.random.default_rng(11), n)
    se = math.sqrt(float(dist.variance) / n)
    assert abs(x.mean() - float(dist.mean)) < 4 * se
    # and the empirical frequencies follow the pmf
    p = dist.pmf(np.arange(6))
    freq = np.bincount(x, minlength=6)[:6] / n
    assert np.all(np.abs(freq - p) < 5 * np.sqrt(p * (1 - p) / n) + 1e-9)


# --------------------------------------------------------------- sums ---


def test_iid_sum_closed_forms():
    assert iid_sum(Bernoulli(F(1, 2)), 2) == Binomial(2, F(1, 2))
    assert iid_sum(Poisson(2), 3) == Poisson(6)
    assert iid_sum(Binomial(3, F(1, 3)), 4) == Binomial(12, F(1, 3))
    assert iid_sum(NegativeBinomial(F(1, 2), F(1, 3)), 4) == NegativeBinomial(2, F(1, 3))
    assert iid_sum(PointMass(3), 4) == PointMass(12)
    assert iid_sum(Poisson(2), 0) == PointMass(0)
    with pytest.raises(ValidationError):
        iid_sum(Poisson(2), -1)


def test_iid_sum_of_finite_law_matches_enumeration():
    values, probs = (0, 1, 3), (F(1, 5), F(1, 2), F(3, 10))
    d = FiniteSupport(values, probs)
    exact = brute_force_sum(values, probs, 4)
    s = iid_sum(d, 4)
    for v, w in exact.items():
        assert s.pmf(v) == pytest.approx(float(w), abs=1e-15)
    assert s.pmf(13) == 0.0


@pytest.mark.parametrize("dist", [Poisson(F(3, 2)), Binomial(5, F(2, 7)), NegativeBinomial(2, F(1, 2)), Geometric(F(1, 3))])
def test_closed_form_sum_agrees_with_convolution(dist):
    m = 7
    closed = iid_sum(dist, m)
    n = closed.upper(1e-14) + 1
    ref = convolve_power(dist.pmf_table(1e-16), m, n)
    np.testing.assert_allclose(closed.pmf(np.arange(n)), ref, atol=1e-12)


def test_generic_convolution_respects_support_cap():
    d = FiniteSupport((0, 50), (F(1, 2), F(1, 2)))
    with pytest.raises(SupportOverflow):
        iid_sum(d, 100, cap=1000)


def test_compound_law():
    # Poisson(2) count of Bernoulli(1/2) summands is Poisson(1)
    c = compound(Poisson(2), Bernoulli(F(1, 2)))
    np.testing.assert_allclose(c.pmf(np.arange(25)), stats.poisson(1).pmf(np.arange(25)), rtol=0, atol=1e-12)
    assert c.mean == 1 and c.variance == 1


# --------------------------------------------------------- divisibility ---


def test_division_catalog():
    v = divide(Poisson(5), 5)
    assert v.outcome == DIVISIBLE and v.component == Poisson(1)
    assert divide(NegativeBinomial(3, F(1, 2)), 3).component == NegativeBinomial(1, F(1, 2))
    assert divide(Geometric(F(1, 3)), 4).component == NegativeBinomial(F(1, 4), F(1, 3))
    assert divide(Binomial(6, F(1, 3)), 3).component == Binomial(2, F(1, 3))
    assert divide(Binomial(5, F(1, 3)), 2).outcome == NOT_DIVISIBLE
    assert divide(Bernoulli(F(1, 2)), 2).outcome == NOT_DIVISIBLE
    assert divide(PointMass(6), 3).component == PointMass(2)
    assert divide(PointMass(7), 3).outcome == NOT_DIVISIBLE
    zig = divide(ZeroInflatedGeometric(F(1, 2), F(1, 3)), 2)
    assert zig.divisible and not zig.component_available
    assert divide(ScaledBernoulli(2, F(1, 2)), 2).outcome == UNKNOWN
    assert divide(FiniteSupport((0, 1), (F(1, 2), F(1, 2))), 2).outcome == UNKNOWN
    assert divide(Poisson(2), 1).component == Poisson(2)
    with pytest.raises(ValidationError):
        divide(Poisson(2), 0)


def test_consecutive_overlap():
    assert consecutive_overlap(PointMass(3)) == 0.0
    assert consecutive_overlap(Binomial(2, F(1, 2))) == pytest.approx(0.25)
    assert consecutive_overlap(FiniteSupport((0, 2), (F(1, 2), F(1, 2)))) == 0.0
    assert consecutive_overlap(Poisson(1)) == pytest.approx(math.exp(-1))


# ----------------------------------------------------------- properties ---

fractions01 = st.fractions(min_value=F(1, 50), max_value=F(49, 50), max_denominator=50)
rates = st.fractions(min_value=F(1, 10), max_value=F(20), max_denominator=20)

distributions = st.one_of(
    st.builds(binomial, st.integers(1, 30), fractions01),
    st.builds(Poisson, rates),
    st.builds(Geometric, fractions01),
    st.builds(NegativeBinomial, rates, fractions01),
    st.builds(ZeroInflatedPoisson, fractions01, rates),
    st.builds(ZeroInflatedGeometric, fractions01, fractions01),
    st.builds(ScaledBernoulli, st.integers(1, 9), fractions01),
)


@given(distributions)
def test_pmf_table_normalizes(d):
    t = d.pmf_table(1e-12)
    assert np.all(t >= 0)
    # tail below 1e-12, plus rounding in thousands of lgamma-based entries
    assert 1 - 2e-12 <= t.sum() <= 1 + 1e-12


@given(distributions)
def test_analytic_moments_match_pmf_table(d):
    t = d.pmf_table(1e-15)
    k = np.arange(len(t), dtype=float)
    mean = float((k * t).sum())
    var = float(((k - mean) ** 2 * t).sum())
    assert mean == pytest.approx(float(d.mean), rel=1e-8, abs=1e-10)
    assert var == pytest.approx(float(d.variance), rel=1e-7, abs=1e-10)


@given(distributions)
def test_text_round_trip(d):
    assert parse_distribution(d.to_text()) == d


@given(st.one_of(st.builds(Poisson, rates), st.builds(NegativeBinomial, rates, fractions01)), st.integers(1, 12))
def test_division_round_trip(d, n):
    v = divide(d, n)
    assert v.divisible
    assert iid_sum(v.component, n) == d


@given(distributions)
def test_consecutive_overlap_at_most_half(d):
    assert 0 <= consecutive_overlap(d) <= 0.5 + 1e-15
