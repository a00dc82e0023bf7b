"""Analytic total-variation bounds between a PSDBP and a moment-matched DCBP.

The bounds need three regularity constants:

* h   - a linear lower bound phi(x) >= h x on the control,
* R   - a bound on third absolute central moments of all offspring laws,
* eta - half the smallest "consecutive overlap" max_n min(P(n), P(n-1)).

``one_step_bound`` evaluates the one-step bound J(z), which decays like
z^(-1/2); ``k_step_bound`` chains it along k generations with a growth
ratio alpha * m~ * h, and ``closed_form_bound`` sums the two geometric series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ._numbers import div, normalize
from .distributions import DEFAULT_TAIL_TOL, consecutive_overlap, moments
from .errors import DegenerateRatio, ValidationError
from .kernels import CBP, PSDBP

_C_FIRST = math.sqrt(2.0)
_C_SECOND = 5.0 * math.sqrt(2.0 * math.pi) + 1.5 * math.pi


@dataclass
class RegularityCertificate:
    h: object
    R: float
    eta: float
    m_tilde: object
    sigma2_tilde: object
    audited_range: tuple
    exact: bool
    violations: list = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations and self.h > 0 and self.R > 0 and self.eta > 0

    def ratio(self, alpha: float) -> float:
        return float(alpha) * float(self.m_tilde) * float(self.h)


def certify_regularity(psdbp: PSDBP, dcbp: CBP, z_range, tail_tol: float = DEFAULT_TAIL_TOL) -> RegularityCertificate:
    """Constants (h, R, eta) over the states in z_range, with any violated condition and its witness."""
    if not dcbp.is_dcbp:
        raise ValidationError("certificate needs a deterministic control")
    xs = [int(x) for x in z_range if x >= 1]
    if not xs:
        raise ValidationError("z_range must contain a state >= 1")
    phi = dcbp.phi
    off = dcbp.offspring
    violations = []

    h = phi.min_ratio()
    exact = h is not None
    if h is None:
        h = min(normalize(div(phi(x), x)) for x in xs)
    if h <= 0:
        witness = next((x for x in xs if phi(x) == 0), xs[0])
        violations.append(("C1", witness, "phi(x) = 0, so no h > 0 bounds phi(x)/x"))

    tilde = moments(off, tail_tol)
    if tilde.variance == 0:
        violations.append(("moments", None, "DCBP offspring variance is 0"))
    R = tilde.rho3
    gamma_min = consecutive_overlap(off, tail_tol)
    gamma_at = None
    for x in xs:
        law = psdbp.offspring.law(x)
        R = max(R, moments(law, tail_tol).rho3)
        g = consecutive_overlap(law, tail_tol)
        if g < gamma_min:
            gamma_min, gamma_at = g, x
    if not math.isfinite(R):
        violations.append(("C2", None, "third absolute moment is not finite"))
    eta = 0.5 * gamma_min
    if eta <= 0:
        violations.append(("C3", gamma_at, "no two consecutive atoms carry positive mass"))
    # a psdbp scan is a range audit even when h is analytic
    return RegularityCertificate(h, float(R), float(eta), off.mean, off.variance, (min(xs), max(xs)), exact, violations)


def _check_cert(cert: RegularityCertificate) -> None:
    if not cert.valid:
        raise ValidationError(f"certificate is not valid: {cert.violations}")


def j_bound(z: float, h: float, R: float, eta: float, sigma2: float) -> float:
    """The one-step bound as a function of the raw constants."""
    s2 = float(sigma2)
    h = float(h)
    first = _C_FIRST * (3.0 * R + 2.0 * (1.0 + h) * s2) / (s2 * min(h, 1.0) * math.sqrt(math.pi * eta * z))
    second = (_C_SECOND * (1.0 + h) * R + h * s2) / (s2**1.5 * math.sqrt(2.0 * math.pi * h**3 * z))
    return first + second


def one_step_bound(z: float, cert: RegularityCertificate) -> float:
    _check_cert(cert)
    if z <= 0:
        raise ValidationError("z must be positive", key="z")
    return j_bound(float(z), cert.h, cert.R, cert.eta, cert.sigma2_tilde)


def k_step_bound(z: float, k: int, alpha: float, cert: RegularityCertificate) -> float:
    """Raw k-step bound (may exceed 1); see ``effective`` for the clamped value."""
    _check_cert(cert)
    if not 0 < alpha < 1:
        raise ValidationError("alpha must lie in (0, 1)", key="alpha")
    if k < 1:
        raise ValidationError("k must be >= 1", key="k")
    r = cert.ratio(alpha)
    if k >= 2 and r == 0:
        raise DegenerateRatio("alpha * m~ * h = 0")
    z = float(z)
    total = sum(one_step_bound(r**i * z, cert) for i in range(k))
    if k >= 2:
        m, s2 = float(cert.m_tilde), float(cert.sigma2_tilde)
        pref = s2 / ((1.0 - alpha) ** 2 * m * m * float(cert.h) * z)
        total += pref * sum(r ** (-i) for i in range(k - 1))
    return total


def effective(value: float) -> float:
    return min(1.0, value)


@dataclass(frozen=True)
class ClosedForm:
    b: float
    c1: float
    c2: float
    value: float
    limit: float | None


def closed_form_bound(z: float, k: int, alpha: float, cert: RegularityCertificate) -> ClosedForm:
    """Geometric-series form of the k-step bound; ``limit`` is its k -> infinity value when r > 1."""
    _check_cert(cert)
    r = cert.ratio(alpha)
    if r == 1:
        raise DegenerateRatio("alpha * m~ * h = 1")
    b = one_step_bound(1.0, cert)
    sr = math.sqrt(r)
    c1 = abs(b * sr / (sr - 1.0))
    m, s2 = float(cert.m_tilde), float(cert.sigma2_tilde)
    c2 = abs(alpha * s2 / ((1.0 - alpha) ** 2 * (r - 1.0) * m))
    z = float(z)
    value = c1 * abs(1.0 - r ** (-k / 2.0)) / math.sqrt(z) + c2 * abs(1.0 - r ** (-k + 1.0)) / z
    limit = c1 / math.sqrt(z) + c2 / z if r > 1 else None
    return ClosedForm(b, c1, c2, value, limit)


SWEEP_HEADER = "z,k,alpha,h,R,eta,j_bound,k_step_bound,closed_form,effective_bound"


def bound_sweep(cert: RegularityCertificate, z_values, k_values, alpha: float) -> list[dict]:
    rows = []
    for z in z_values:
        for k in k_values:
            ks = k_step_bound(z, k, alpha, cert)
            try:
                cf = closed_form_bound(z, k, alpha, cert).value
            except DegenerateRatio:
                cf = float("nan")
            rows.append(
                {
                    "z": z,
                    "k": k,
                    "alpha": alpha,
                    "h": float(cert.h),
                    "R": cert.R,
                    "eta": cert.eta,
                    "j_bound": one_step_bound(z, cert),
                    "k_step_bound": ks,
                    "closed_form": cf,
                    "effective_bound": effective(ks),
                }
            )
    return rows
