"""Acceptance criteria 1-8, each at its stated tolerance and runtime budget."""

from __future__ import annotations

import hashlib
import math
import time
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp

from bplink.bounds import certify_regularity, closed_form_bound, j_bound, k_step_bound, one_step_bound
from bplink.catalog import capacity_pair, immigration_cbp, shift_gated_pair, three_point_psdbp
from bplink.distributions import Bernoulli, Binomial, Geometric, Poisson
from bplink.equivalence import NO, YES, construct_equivalent_psdbp, decide_equivalence
from bplink.estimator import ProcessPair, estimate_path_tvd, exact_path_tvd, sweep, sweep_csv
from bplink.kernels import (
    CBP,
    AffineFloor,
    BinomialControl,
    Deterministic,
    Identity,
    MaxShift,
    NegBinControl,
    ParityHalf,
    PoissonControl,
    ShiftGated,
    TransitionKernel,
    conditional_moments,
    simulate,
)
from bplink.matching import check_match, construct_offspring, match_psdbp_to_dcbp, min_variance

from oracles import convolve_power, two_point_min_variance

EQUIVALENT_DCBPS = {
    "parity-half, Bin(2,1/2)": CBP(Deterministic(ParityHalf()), Binomial(2, Fraction(1, 2))),
    "max-shift, Poisson(1)": CBP(Deterministic(MaxShift(1)), Poisson(1)),
    "max-shift, Poisson(3)": CBP(Deterministic(MaxShift(1)), Poisson(3)),
    "doubling, Ber(1/2)": CBP(Deterministic(AffineFloor(2, 0)), Bernoulli(Fraction(1, 2))),
}


# ------------------------------------------------------------------ 1 ---


@pytest.mark.acceptance(1, "constructed PSDBP kernels equal DCBP kernels (z <= 50, 1e-12)")
def test_kernel_equivalence_suite():
    start = time.perf_counter()
    worst = 0.0
    for label, dcbp in EQUIVALENT_DCBPS.items():
        psdbp = construct_equivalent_psdbp(dcbp, z0=2, cap=200)
        direct = TransitionKernel(dcbp)
        for z in range(1, 51):
            target = direct.row(z)
            # targets covering >= 1 - 1e-10 of the DCBP row
            n = int(np.searchsorted(np.cumsum(target), 1 - 1e-10)) + 1
            # independent z-fold convolution of the constructed offspring law
            offspring = psdbp.offspring.law(z).pmf_table(1e-16)
            built = convolve_power(offspring, z, n)
            gap = float(np.max(np.abs(built[:n] - target[:n])))
            worst = max(worst, gap)
            assert gap <= 1e-12, (label, z, gap)
    assert time.perf_counter() - start < 10
    print(f"max pointwise gap {worst:.2e}")


# ------------------------------------------------------------------ 2 ---


@pytest.mark.acceptance(2, "equivalence verdicts and rule ids")
def test_equivalence_verdict_suite():
    lam, M = 3, 2
    cases = [
        (immigration_cbp(), 1, NO, "immigration-at-zero", None),
        (CBP(BinomialControl(ShiftGated(M), Fraction(1, lam)), Poisson(lam)), 1, NO, "binomial-control-poisson-offspring", None),
        (CBP(PoissonControl(Identity()), Poisson(2)), 1, YES, "divisible-control", True),
        (CBP(PoissonControl(AffineFloor(3, 0)), Binomial(3, Fraction(1, 4))), 1, YES, "divisible-control", True),
        (CBP(NegBinControl(Identity(), Fraction(1, 3)), Poisson(1)), 1, YES, "divisible-control", True),
        (CBP(NegBinControl(AffineFloor(2, 0), Fraction(1, 2)), Geometric(Fraction(1, 2))), 1, YES, "divisible-control", True),
        (CBP(BinomialControl(ShiftGated(M), Fraction(1, 2)), Geometric(Fraction(1, 3))), 1, YES, "binomial-control-geometric-offspring", False),
    ]
    for cbp, z0, outcome, rule, available in cases:
        v = decide_equivalence(cbp, z0, cap=60)
        assert (v.outcome, v.rule) == (outcome, rule), (cbp, v)
        if available is not None:
            assert v.construction_available is available
        if available:
            assert v.audit_passed


# ------------------------------------------------------------------ 3 ---


@pytest.mark.acceptance(3, "matching: infeasible/feasible examples, three-point fixture, variance floor")
def test_matching_suite():
    start = time.perf_counter()
    half = Fraction(1, 2)
    bad = match_psdbp_to_dcbp(CBP(Deterministic(MaxShift(1)), Bernoulli(half)), z0=10, cap=200)
    assert bad.feasible is False and bad.witness == 2 and bad.failed_condition == "variance-floor"

    dcbp = CBP(Deterministic(MaxShift(1)), Binomial(2, half))
    good = match_psdbp_to_dcbp(dcbp, z0=1000, cap=1000)
    assert good.feasible is True
    fam = good.construction.offspring
    for z in range(2, 1001):
        law = fam.law(z)
        assert law.mean == Fraction(z - 1, z)
        assert law.variance == Fraction(z - 1, 2 * z)
    assert check_match(good.construction, dcbp, range(0, 1001)).ok

    fixture = three_point_psdbp()
    for z in range(2, 1001):
        law = fixture.offspring.law(z)
        assert (law.mean, law.variance) == (Fraction(z - 1, z), Fraction(z - 1, 2 * z))
    assert check_match(fixture, dcbp, range(0, 1001)).ok

    for i in range(1, 50):
        alpha = Fraction(i, 10)
        brute = two_point_min_variance(alpha, 10)
        assert abs(float(brute - min_variance(alpha))) <= 1e-12
        law = construct_offspring(alpha, min_variance(alpha))
        assert law.mean == alpha and abs(float(law.variance - brute)) <= 1e-12
    assert time.perf_counter() - start < 30


# ------------------------------------------------------------------ 4 ---


@pytest.mark.acceptance(4, "capacity-pair NB moments match the binomial-control CBP (z <= 500)")
def test_capacity_pair_moment_identity():
    for K in (10, 100):
        pair = capacity_pair(K, lam=3, M=2)
        worst = 0.0
        for z in range(0, 501):
            a = conditional_moments(pair.psdbp, z)
            b = conditional_moments(pair.cbp, z)
            for x, y in zip(a, b):
                assert isinstance(x, (int, Fraction)) and isinstance(y, (int, Fraction))
                if y != 0:
                    worst = max(worst, abs(float((x - y) / y)))
                else:
                    assert x == 0
        assert worst < 1e-10

    # symbolic: NB(r, q) with mean r(1-q)/q and variance r(1-q)/q^2, z parents
    z, K, lam, M = sp.symbols("z K lam M", positive=True)
    p = 2 * K**2 / (lam * (K + M) * (K + z))
    cbp_mean = (z + M) * p * lam
    cbp_var = (z + M) * p * lam + (z + M) * p * (1 - p) * lam**2
    e = lam * (K + M) * (K + z) - 2 * K**2
    d = (1 + lam) * (K + M) * (K + z) - 2 * K**2
    r = 2 * K**2 * (z + M) / (z * e)
    q = (z + K) * (K + M) / d
    assert sp.simplify(z * r * (1 - q) / q - cbp_mean) == 0
    assert sp.simplify(z * r * (1 - q) / q**2 - cbp_var) == 0


# ------------------------------------------------------------------ 5 ---


def _shift_gated_cert():
    psdbp, dcbp, _ = shift_gated_pair(3, 2)
    return psdbp, dcbp, certify_regularity(psdbp, dcbp, range(1, 501))


@pytest.mark.acceptance(5, "bounds: z^(-1/2) rate, closed form identity, dominance over estimates")
def test_bound_suite():
    start = time.perf_counter()
    psdbp, dcbp, cert = _shift_gated_cert()
    assert cert.valid and cert.h == 1
    b = j_bound(1.0, cert.h, cert.R, cert.eta, cert.sigma2_tilde)
    h, R, eta, s2 = cert.h, cert.R, cert.eta, cert.sigma2_tilde
    worst = max(abs(j_bound(float(z), h, R, eta, s2) * math.sqrt(z) / b - 1) for z in range(1, 2**20 + 1))
    assert worst <= 1e-12
    for e in range(21):
        z = 2.0**e
        assert abs(one_step_bound(z, cert) * math.sqrt(z) / b - 1) <= 1e-12

    for alpha in (0.25, 0.5, 0.75):
        for k in (2, 5, 10):
            for z in (10.0, 1e3, 1e5):
                ks = k_step_bound(z, k, alpha, cert)
                cf = closed_form_bound(z, k, alpha, cert).value
                assert abs(cf - ks) <= 1e-10 * ks

    pair = ProcessPair(psdbp, dcbp)
    for z in (50, 100, 200):
        est = estimate_path_tvd(pair, z, 1, 200_000, seed=z)
        assert est.value + 3 * est.stderr <= min(1.0, one_step_bound(z, cert))
    assert time.perf_counter() - start < 120


# ------------------------------------------------------------------ 6 ---


def _calibration_pair():
    return ProcessPair(three_point_psdbp(), CBP(Deterministic(MaxShift(1)), Binomial(2, Fraction(1, 2))))


@pytest.mark.acceptance(6, "estimator calibration, exact zeros, side symmetry")
def test_estimator_calibration():
    pair = _calibration_pair()
    z0, k = 3, 2
    exact = exact_path_tvd(pair, z0, k)
    values = np.array([estimate_path_tvd(pair, z0, k, 1000, seed=s).value for s in range(200)])
    se = values.std(ddof=1) / math.sqrt(len(values))
    assert abs(values.mean() - exact) <= 3 * se, (values.mean(), exact, se)

    for dcbp in EQUIVALENT_DCBPS.values():
        eq = ProcessPair(construct_equivalent_psdbp(dcbp, z0=2, cap=200), dcbp)
        for side in ("psdbp", "cbp"):
            est = estimate_path_tvd(eq, 20, 3, 5000, seed=1, side=side)
            assert est.value == 0.0 and est.stderr == 0.0

    cap_pair = capacity_pair(50)
    a = estimate_path_tvd(cap_pair, 50, 2, 100_000, seed=11, side="psdbp")
    b = estimate_path_tvd(cap_pair, 50, 2, 100_000, seed=12, side="cbp")
    assert abs(a.value - b.value) <= 4 * math.hypot(a.stderr, b.stderr)


# ------------------------------------------------------------------ 7 ---

FIG4_K = [10, 25, 50, 100, 200]
FIG4_k = [1, 2, 5]


def _sweep_rows(rule, workers=4, seed=2024):
    return sweep(capacity_pair, FIG4_K, FIG4_k, rule, 100_000, seed, workers=workers)


@pytest.mark.acceptance(7, "capacity-pair TVD trends in K and k (N = 1e5)")
def test_capacity_sweep_trends():
    start = time.perf_counter()
    cap_rows = {(r.K, r.k): r for r in _sweep_rows("capacity")}
    one_rows = {(r.K, r.k): r for r in _sweep_rows("one")}
    for k in FIG4_k:
        for K1, K2 in zip(FIG4_K, FIG4_K[1:]):
            a, b = cap_rows[K1, k], cap_rows[K2, k]
            assert a.tvd_estimate - b.tvd_estimate > 2 * math.hypot(a.stderr, b.stderr), (K1, K2, k)
    for K in FIG4_K:
        ests = [cap_rows[K, k].tvd_estimate for k in FIG4_k]
        assert ests == sorted(ests) and len(set(ests)) == len(ests), K
    for k in FIG4_k:
        a, b = one_rows[200, k], cap_rows[200, k]
        assert a.tvd_estimate - b.tvd_estimate > 2 * math.hypot(a.stderr, b.stderr), k
    assert time.perf_counter() - start < 600


# ------------------------------------------------------------------ 8 ---


def _digest(*parts) -> str:
    h = hashlib.sha256()
    for p in parts:
        h.update(p if isinstance(p, bytes) else repr(p).encode())
    return h.hexdigest()


def _stochastic_outputs(workers: int) -> str:
    psdbp, dcbp, _ = shift_gated_pair(3, 2)
    pair = ProcessPair(psdbp, dcbp)
    bound_estimates = [estimate_path_tvd(pair, z, 1, 50_000, seed=z, workers=workers) for z in (50, 100)]
    calib = [estimate_path_tvd(_calibration_pair(), 3, 2, 1000, seed=s, workers=workers) for s in range(20)]
    swept = sweep_csv(sweep(capacity_pair, [10, 50], [1, 5], "capacity", 30_000, 7, workers=workers))
    traj = simulate(three_point_psdbp(), 200, 50, 10, seed=3, workers=workers)
    return _digest(bound_estimates, calib, swept.encode(), traj.tobytes())


def _deterministic_outputs() -> str:
    rows = []
    for dcbp in EQUIVALENT_DCBPS.values():
        psdbp = construct_equivalent_psdbp(dcbp, z0=2, cap=200)
        rows.append(np.concatenate([psdbp.offspring.law(z).pmf_table(1e-16) for z in range(1, 30)]).tobytes())
    rows.append(repr(match_psdbp_to_dcbp(CBP(Deterministic(MaxShift(1)), Binomial(2, Fraction(1, 2))), 1000, 1000).to_dict()).encode())
    _, _, cert = _shift_gated_cert()
    rows.append(repr([k_step_bound(z, k, 0.5, cert) for z in (10, 1000) for k in (1, 3)]).encode())
    return _digest(*rows)


@pytest.mark.acceptance(8, "byte-identical outputs across runs and worker counts {1, 4}")
def test_determinism():
    assert _deterministic_outputs() == _deterministic_outputs()
    first = _stochastic_outputs(1)
    assert _stochastic_outputs(1) == first
    assert _stochastic_outputs(4) == first
    one = sweep_csv(_sweep_rows("capacity", workers=1, seed=99)[:3])
    four = sweep_csv(_sweep_rows("capacity", workers=4, seed=99)[:3])
    assert one == four
