"""Moment matching between PSDBPs and DCBPs.

Matching means equal conditional mean and variance at every attainable
state. For a DCBP (control phi, offspring mean m~ and variance s~2) and a PSDBP
(offspring mean m(z), variance s2(z)) this reads

    z * m(z)  = m~  * phi(z)
    z * s2(z) = s~2 * phi(z)

The key fact used in both directions: a law on the non-negative integers with
mean alpha has variance at least d(1-d), d = alpha - floor(alpha), and every
variance at or above that floor is achieved by a small explicit law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import ClassVar

from ._numbers import div, format_number, is_exact, normalize, rational_gcd
from .distributions import Distribution, FiniteSupport, PointMass
from .errors import InfeasibleVariance, ValidationError
from .kernels import (
    CBP,
    PSDBP,
    ControlMap,
    Deterministic,
    OffspringFamily,
    attainable_set,
    conditional_moments,
)

DEFAULT_X_CAP = 10_000
REL_TOL = 1e-10


def _frac_part(x):
    return x - math.floor(x)


def min_variance(alpha):
    """Smallest variance of a law on the non-negative integers with mean alpha."""
    if alpha < 0:
        raise ValidationError("alpha must be >= 0", key="alpha")
    d = _frac_part(alpha)
    return normalize(d * (1 - d))


def _below(beta, floor_value) -> bool:
    if is_exact(beta, floor_value):
        return beta < floor_value
    return beta < floor_value - 1e-12 * max(1.0, abs(float(floor_value)))


def _merge(parts) -> FiniteSupport:
    table: dict[int, object] = {}
    for v, w in parts:
        if w != 0:
            table[v] = table.get(v, 0) + w
    return FiniteSupport.from_mapping(table)


def construct_offspring(alpha, beta) -> Distribution:
    """A small law on the non-negative integers with mean alpha and variance beta.

    At the variance floor this is the two-point law on floor(alpha) and
    floor(alpha)+1; above it, a mixture of that law with a wider two-point law
    of the same mean. Exact when alpha and beta are rational.
    """
    if alpha < 0 or beta < 0:
        raise ValidationError("alpha and beta must be >= 0")
    floor_var = min_variance(alpha)
    if _below(beta, floor_var):
        raise InfeasibleVariance(f"variance {beta} is below the floor {floor_var} for mean {alpha}")
    exact = is_exact(alpha, beta)
    if exact:
        alpha, beta = Fraction(alpha), Fraction(beta)
    n = math.floor(alpha)
    d = alpha - n
    if d == 0 and beta == 0:
        return PointMass(int(n))
    if d == 0 and n == 0:
        raise InfeasibleVariance("mean 0 forces variance 0")
    two_point = [(n, 1 - d), (n + 1, d)]
    if not _below(floor_var, beta):
        # beta sits on the floor (up to rounding for float inputs)
        return _merge(two_point)
    if d != 0:
        u = math.ceil(alpha + div(beta, d))
        wide = [(n, 1 - div(d, u - n)), (u, div(d, u - n))]
        wide_var = d * (u - alpha)
    else:
        u = int(n) + math.ceil(beta)
        b = div(1, u - n + 1)
        wide = [(n - 1, (u - n) * b), (u, b)]
        wide_var = u - n
    q = div(beta - floor_var, wide_var - floor_var)
    parts = [(v, q * w) for v, w in wide] + [(v, (1 - q) * w) for v, w in two_point]
    return _merge(parts)


def _close(a, b) -> bool:
    if is_exact(a, b):
        return a == b
    a, b = float(a), float(b)
    return abs(a - b) <= REL_TOL * max(abs(a), abs(b)) or a == b


def _rel(a, b) -> float:
    a, b = float(a), float(b)
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0 else abs(a - b) / scale


@dataclass
class MatchCheck:
    ok: bool
    residuals: list = field(default_factory=list)
    first_failure: int | None = None

    @property
    def max_residual(self) -> float:
        return max((max(r[1], r[2]) for r in self.residuals), default=0.0)


def check_match(a, b, z_range) -> MatchCheck:
    """Compare conditional means and variances of two processes on every z in z_range."""
    check = MatchCheck(True)
    for z in z_range:
        ma, va = conditional_moments(a, z)
        mb, vb = conditional_moments(b, z)
        check.residuals.append((z, _rel(ma, mb), _rel(va, vb)))
        if not (_close(ma, mb) and _close(va, vb)) and check.ok:
            check.ok = False
            check.first_failure = z
    return check


@dataclass
class MatchReport:
    feasible: bool | None
    witness: int | None = None
    failed_condition: str | None = None
    construction: PSDBP | CBP | None = None
    d_values: dict = field(default_factory=dict)
    truncated: bool = False
    details: dict = field(default_factory=dict)

    def to_dict(self, laws_upto: int = 20) -> dict:
        def num(x):
            return format_number(x) if isinstance(x, (int, Fraction, float)) else x

        out = {
            "feasible": self.feasible,
            "witness": self.witness,
            "failed_condition": self.failed_condition,
            "truncated": self.truncated,
            "d_values": {str(z): num(v) for z, v in self.d_values.items()},
            "details": {k: num(v) for k, v in self.details.items()},
        }
        c = self.construction
        if isinstance(c, PSDBP):
            out["construction"] = {
                "kind": "psdbp",
                "formula": "offspring(z) = construct_offspring(m~ phi(z)/z, s~2 phi(z)/z)",
                "laws": {str(z): c.offspring.law(z).to_text() for z in range(laws_upto + 1)},
            }
        elif isinstance(c, CBP):
            out["construction"] = {
                "kind": "dcbp",
                "formula": "phi(z) = z m(z) / h",
                "offspring": c.offspring.to_text(),
                "phi": {str(z): c.phi(z) for z in range(laws_upto + 1)},
            }
        return out


@dataclass(frozen=True)
class MatchedOffspring(OffspringFamily):
    """PSDBP offspring law matching a DCBP's conditional moments at each z."""

    dcbp: CBP
    name: ClassVar[str] = "matched"

    def law(self, z):
        z = int(z)
        if z == 0:
            return PointMass(0)
        phi = self.dcbp.phi(z)
        off = self.dcbp.offspring
        return construct_offspring(normalize(div(off.mean * phi, z)), normalize(div(off.variance * phi, z)))


def match_psdbp_to_dcbp(dcbp: CBP, z0: int, cap: int = 200) -> MatchReport:
    """Find a PSDBP with the DCBP's conditional moments, or the first state where none exists."""
    if not dcbp.is_dcbp:
        raise ValidationError("match_psdbp_to_dcbp needs a deterministic control")
    reach = attainable_set(dcbp, z0, cap)
    m, s2 = dcbp.offspring.mean, dcbp.offspring.variance
    report = MatchReport(None, truncated=reach.truncated)
    for z in reach.positive():
        phi = dcbp.phi(z)
        alpha = normalize(div(m * phi, z))
        beta = normalize(div(s2 * phi, z))
        d = normalize(_frac_part(alpha))
        report.d_values[z] = d
        if _below(beta, d * (1 - d)):
            report.feasible = False
            report.witness = z
            report.failed_condition = "variance-floor"
            return report
    report.feasible = True
    report.construction = PSDBP(MatchedOffspring(dcbp))
    return report


@dataclass(frozen=True)
class MeanRatioMap(ControlMap):
    """phi(z) = z * m(z) / unit for a PSDBP offspring family."""

    family: OffspringFamily
    unit: object
    name: ClassVar[str] = "mean_ratio"

    def __call__(self, z):
        z = int(z)
        if z == 0:
            return 0
        v = div(z * self.family.mean(z), self.unit)
        n = round(v)
        if not _close(v, n):
            raise ValidationError(f"z*m(z)/h is not an integer at z={z}")
        return int(n)

    def to_text(self):
        return f"mean_ratio(unit={self.unit})"


def _rational_unit(values) -> Fraction | None:
    """Largest h with every value in h*N_0; floats are snapped to nearby rationals first."""
    if all(is_exact(v) for v in values):
        return rational_gcd(values)
    snapped = [Fraction(float(v)).limit_denominator(10**6) for v in values]
    if not all(_close(float(s), v) for s, v in zip(snapped, values)):
        return None
    return rational_gcd(snapped)


UNIT_BASES = ("parent_total", "offspring_mean")


def match_dcbp_to_psdbp(
    psdbp: PSDBP, z0: int, cap: int = 200, x_cap: int = DEFAULT_X_CAP, unit_basis: str = "parent_total"
) -> MatchReport:
    """Find a DCBP with the PSDBP's conditional moments.

    Candidate offspring means m~ are h_max / x, where h_max is the largest h
    with every attainable z * m(z) in h * N_0 (``unit_basis="parent_total"``;
    this is exactly the set of m~ for which an integer phi exists).
    ``"offspring_mean"`` uses the m(z) themselves, a smaller candidate set
    that misses pairs such as phi(z) = z - 1.
    """
    if unit_basis not in UNIT_BASES:
        raise ValidationError(f"unit_basis must be one of {UNIT_BASES}", key="unit_basis")
    reach = attainable_set(psdbp, z0, cap)
    report = MatchReport(None, truncated=reach.truncated)
    fam = psdbp.offspring
    states = reach.positive()
    means = {z: fam.mean(z) for z in states}
    varis = {z: fam.variance(z) for z in states}

    if all(v == 0 for v in varis.values()):
        control = Deterministic(MeanRatioMap(fam, 1))
        report.feasible = True
        report.construction = CBP(control, PointMass(1))
        report.details = {"m_tilde": 1, "branch": "zero-variance"}
        return report

    ratio = None
    for z in states:
        m, v = means[z], varis[z]
        if m == 0:
            continue
        if v == 0:
            report.feasible, report.witness, report.failed_condition = False, z, "constant-ratio"
            return report
        k = normalize(div(m, v))
        if ratio is None:
            ratio = k
        elif not _close(ratio, k):
            report.feasible, report.witness, report.failed_condition = False, z, "constant-ratio"
            return report
    scale = (lambda z: z) if unit_basis == "parent_total" else (lambda z: 1)
    nonzero = [normalize(scale(z) * means[z]) for z in states if means[z] != 0]
    h_max = _rational_unit(nonzero)
    if h_max is None:
        report.feasible, report.failed_condition = False, "common-unit"
        return report
    report.details = {"k": ratio, "h_max": normalize(h_max)}
    for x in range(1, x_cap + 1):
        h = normalize(h_max / x)
        var = normalize(div(h, ratio)) if is_exact(ratio) else float(h) / float(ratio)
        if not _below(var, min_variance(h)):
            offspring = construct_offspring(h, var)
            report.feasible = True
            report.construction = CBP(Deterministic(MeanRatioMap(fam, h)), offspring)
            report.details.update({"h": h, "x": x, "m_tilde": h, "sigma2_tilde": var})
            return report
    report.failed_condition = "variance-floor"
    report.details["x_cap"] = x_cap
    return report
