from __future__ import annotations

import math
from fractions import Fraction

import pytest
import sympy as sp
from hypothesis import given, strategies as st

from bplink.bounds import (
    SWEEP_HEADER,
    RegularityCertificate,
    bound_sweep,
    certify_regularity,
    closed_form_bound,
    effective,
    j_bound,
    k_step_bound,
    one_step_bound,
)
from bplink.catalog import shift_gated_pair
from bplink.distributions import Binomial, PointMass
from bplink.errors import DegenerateRatio, ValidationError
from bplink.kernels import CBP, PSDBP, ConstantOffspring, Deterministic, Identity, MaxShift

F = Fraction


def cert(h=1, R=2.0, eta=0.1, m=1, s2=3):
    return RegularityCertificate(h, R, eta, m, s2, (1, 10), True)


def j_oracle(z, h, R, eta, s2):
    """The one-step bound evaluated symbolically to 30 digits."""
    z, h, R, eta, s2 = (sp.nsimplify(x) for x in (z, h, R, eta, s2))
    first = sp.sqrt(2) * (3 * R + 2 * (1 + h) * s2) / (s2 * sp.Min(h, 1) * sp.sqrt(sp.pi * eta * z))
    second = ((5 * sp.sqrt(2 * sp.pi) + sp.Rational(3, 2) * sp.pi) * (1 + h) * R + h * s2) / (
        s2 ** sp.Rational(3, 2) * sp.sqrt(2 * sp.pi * h**3 * z)
    )
    return float((first + second).evalf(30))


def k_oracle(z, k, alpha, h, R, eta, m, s2):
    r = sp.nsimplify(alpha) * sp.nsimplify(m) * sp.nsimplify(h)
    total = sum(sp.nsimplify(j_oracle(float(r**i * z), h, R, eta, s2)) for i in range(k))
    pref = sp.nsimplify(s2) / ((1 - sp.nsimplify(alpha)) ** 2 * sp.nsimplify(m) ** 2 * sp.nsimplify(h) * z)
    total += pref * sum(r ** (-i) for i in range(k - 1))
    return float(sp.N(total, 30))


def test_one_step_bound_against_symbolic_evaluation():
    for z in (1, 7, 100, 12345):
        assert j_bound(z, 1, 2, 0.1, 3) == pytest.approx(j_oracle(z, 1, 2, 0.1, 3), rel=1e-14)
    assert j_bound(50, 0.5, 4.25, 0.2, 2) == pytest.approx(j_oracle(50, 0.5, 4.25, 0.2, 2), rel=1e-14)


def test_one_step_bound_scales_like_inverse_root():
    c = cert()
    for z in (1, 3, 10, 1000):
        assert one_step_bound(4 * z, c) / one_step_bound(z, c) == pytest.approx(0.5, rel=1e-14)
    values = [one_step_bound(2**i, c) for i in range(20)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_k_step_bound_reduces_to_one_step():
    c = cert()
    for z in (1, 50, 1e4):
        assert k_step_bound(z, 1, 0.5, c) == one_step_bound(z, c)


def test_k_step_bound_against_symbolic_evaluation():
    psdbp, dcbp, _ = shift_gated_pair()
    c = certify_regularity(psdbp, dcbp, range(1, 201))
    got = k_step_bound(1e4, 3, 0.5, c)
    want = k_oracle(10**4, 3, F(1, 2), c.h, c.R, c.eta, c.m_tilde, c.sigma2_tilde)
    assert got == pytest.approx(want, rel=1e-12)


@pytest.mark.parametrize("alpha, m", [(0.5, 1), (0.5, 4), (0.25, 2), (0.9, 3)])
def test_closed_form_matches_k_step_sum(alpha, m):
    c = cert(m=m)
    for z in (1, 20, 1e3):
        for k in (1, 2, 5, 12):
            cf = closed_form_bound(z, k, alpha, c)
            assert cf.value == pytest.approx(k_step_bound(z, k, alpha, c), rel=1e-10)
            assert cf.b == one_step_bound(1.0, c)


def test_closed_form_limit():
    c = cert(m=4)
    cf = closed_form_bound(100, 400, 0.5, c)
    assert cf.limit is not None and cf.value == pytest.approx(cf.limit, rel=1e-12)
    assert closed_form_bound(100, 3, 0.5, cert(m=1)).limit is None


def test_degenerate_ratios():
    with pytest.raises(DegenerateRatio):
        closed_form_bound(10, 3, 0.5, cert(m=2))
    with pytest.raises(DegenerateRatio):
        k_step_bound(10, 2, 0.5, cert(m=0))


def test_argument_validation():
    c = cert()
    with pytest.raises(ValidationError):
        k_step_bound(10, 2, 1.0, c)
    with pytest.raises(ValidationError):
        k_step_bound(10, 0, 0.5, c)
    with pytest.raises(ValidationError):
        one_step_bound(0, c)
    with pytest.raises(ValidationError):
        one_step_bound(10, cert(eta=0.0))


def test_certificate_for_shift_gated_pair():
    psdbp, dcbp, _ = shift_gated_pair()
    c = certify_regularity(psdbp, dcbp, range(1, 201))
    assert c.valid and c.exact and c.h == 1
    assert (c.m_tilde, c.sigma2_tilde) == (1, 3)
    assert c.R > 0 and 0 < c.eta <= 0.25
    assert c.audited_range == (1, 200)


def test_certificate_violations():
    psdbp, _, _ = shift_gated_pair()
    shifted = CBP(Deterministic(MaxShift(1)), Binomial(2, F(1, 2)))
    c = certify_regularity(psdbp, shifted, range(1, 50))
    assert not c.valid and ("C1", 1) == c.violations[0][:2]
    flat = certify_regularity(PSDBP(ConstantOffspring(PointMass(1))), CBP(Deterministic(Identity()), PointMass(1)), range(1, 20))
    kinds = {v[0] for v in flat.violations}
    assert {"moments", "C3"} <= kinds
    with pytest.raises(ValidationError):
        certify_regularity(psdbp, shift_gated_pair()[2], range(1, 5))
    with pytest.raises(ValidationError):
        certify_regularity(psdbp, shifted, [0])


def test_bound_sweep_rows():
    c = cert(m=4)
    rows = bound_sweep(c, [1, 10, 100], [1, 3], 0.5)
    assert list(rows[0]) == SWEEP_HEADER.split(",")
    assert len(rows) == 6
    assert all(r["effective_bound"] == effective(r["k_step_bound"]) <= 1 for r in rows)
    assert math.isnan(bound_sweep(cert(m=2), [10], [2], 0.5)[0]["closed_form"])


@given(
    st.floats(1, 1e6),
    st.floats(1.01, 100),
    st.integers(1, 8),
    st.floats(0.05, 0.95),
    st.sampled_from([0.5, 1, 2]),
    st.floats(0.5, 5),
)
def test_k_step_monotone(z, factor, k, alpha, m, h):
    c = cert(h=h, m=m)
    base = k_step_bound(z, k, alpha, c)
    assert k_step_bound(z * factor, k, alpha, c) <= base * (1 + 1e-12)
    assert k_step_bound(z, k + 1, alpha, c) >= base
