"""Named processes used by the figures, the CLI presets and the test-suite."""

from __future__ import annotations

from fractions import Fraction

from .distributions import Binomial, Poisson, ZeroInflatedPoisson
from .kernels import (
    CBP,
    PSDBP,
    AffineFloor,
    BevertonHoltBinomial,
    BinomialControl,
    CapacityNegBin,
    CapacityRate,
    Deterministic,
    ExpGateRate,
    MaxShift,
    ScaledBernoulliControl,
    ShiftGated,
    ShiftNegBin,
    ThreePointMatch,
)
from .estimator import ProcessPair


def beverton_holt_psdbp(K=100) -> PSDBP:
    return PSDBP(BevertonHoltBinomial(K))


def immigration_cbp(scale=1000) -> CBP:
    """(z+1) * Ber(exp(-z/scale)) parents with Bin(5, 1/5) offspring: state 0 is not absorbing."""
    return CBP(ScaledBernoulliControl(AffineFloor(1, 1), ExpGateRate(scale)), Binomial(5, Fraction(1, 5)))


def shifted_binomial_dcbp() -> CBP:
    """max(z-1, 0) parents with Bin(2, 1/2) offspring."""
    return CBP(Deterministic(MaxShift(1)), Binomial(2, Fraction(1, 2)))


def three_point_psdbp() -> PSDBP:
    return PSDBP(ThreePointMatch())


def capacity_pair(K, lam=3, M=2) -> ProcessPair:
    """Binomial-control CBP with Poisson offspring and its moment-matched NB PSDBP; carrying capacity K."""
    cbp = CBP(BinomialControl(ShiftGated(M), CapacityRate(K, M, lam)), Poisson(lam))
    return ProcessPair(PSDBP(CapacityNegBin(lam, M, K)), cbp)


def shift_gated_pair(lam=3, M=2):
    """(psdbp, dcbp, random-control cbp) sharing conditional moments for a shift-gated control.

    The DCBP uses ZIP(1 - 1/lam, lam) offspring (mean 1, variance lam); the
    random CBP thins z + M parents with probability 1/lam and uses Poisson(lam)
    offspring. Both match the NB PSDBP in mean and variance at every z.
    """
    lam = Fraction(lam) if isinstance(lam, int) else lam
    psdbp = PSDBP(ShiftNegBin(lam, M))
    dcbp = CBP(Deterministic(ShiftGated(M)), ZeroInflatedPoisson(1 - 1 / lam, lam))
    random_cbp = CBP(BinomialControl(ShiftGated(M), 1 / lam), Poisson(lam))
    return psdbp, dcbp, random_cbp
