"""Deciding whether a CBP can be rewritten as a PSDBP, and building the PSDBP when it can.

Two processes are equivalent when their one-step kernels coincide on every
attainable state. A CBP whose control law at z splits into z iid parts (or,
for a deterministic control, whose offspring law splits into the right
number of parts) can be regrouped parent by parent into a PSDBP.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np

from .distributions import (
    DEFAULT_TAIL_TOL,
    DIVISIBLE,
    NOT_DIVISIBLE,
    UNKNOWN,
    Distribution,
    Geometric,
    PointMass,
    Poisson,
    compound,
    divide,
    iid_sum,
)
from .errors import ConstructionUnavailable, ValidationError
from .kernels import (
    CBP,
    PSDBP,
    AttainableSet,
    BinomialControl,
    OffspringFamily,
    TransitionKernel,
    attainable_set,
)

YES = "yes"
NO = "no"

DEFAULT_CAP = 200
AUDIT_STATES = 50


def _is_zero(d: Distribution) -> bool:
    return isinstance(d, PointMass) and d.c == 0 or d.pmf(0) == 1.0


@dataclass
class ControlDivisibility:
    outcome: str
    witness: int | None
    rationale: str
    truncated: bool
    components: dict = field(default_factory=dict)


def control_divisibility(cbp: CBP, z0: int, cap: int = DEFAULT_CAP, reach: AttainableSet | None = None) -> ControlDivisibility:
    """Is the control law at every attainable z >= 1 a sum of z iid parts, with no parents at 0?"""
    if not _is_zero(cbp.control.law(0)):
        return ControlDivisibility(NOT_DIVISIBLE, 0, "immigration-at-zero", False)
    reach = reach or attainable_set(cbp, z0, cap)
    components = {}
    unknown_at = None
    for z in reach.positive():
        v = divide(cbp.control.law(z), z)
        if v.outcome == NOT_DIVISIBLE:
            return ControlDivisibility(NOT_DIVISIBLE, z, v.rationale, reach.truncated, components)
        if v.outcome == UNKNOWN:
            if unknown_at is None:
                unknown_at = z
            continue
        components[z] = v.component
    if unknown_at is not None:
        return ControlDivisibility(UNKNOWN, unknown_at, "no-rule", reach.truncated, components)
    return ControlDivisibility(DIVISIBLE, None, "all-attainable-divisible", reach.truncated, components)


def y_set(dcbp: CBP, z0: int, cap: int = DEFAULT_CAP, reach: AttainableSet | None = None) -> tuple[list[int], bool]:
    """Sorted {z / gcd(phi(z), z) : z attainable, z >= 1} and the truncation flag."""
    if not dcbp.is_dcbp:
        raise ValidationError("y_set needs a deterministic control")
    reach = reach or attainable_set(dcbp, z0, cap)
    ys = {z // math.gcd(dcbp.phi(z), z) for z in reach.positive()}
    return sorted(ys), reach.truncated


@dataclass(frozen=True)
class DividedOffspring(OffspringFamily):
    """Offspring law of the PSDBP obtained by regrouping a CBP parent by parent.

    Deterministic control: with g = gcd(phi(z), z), each of the z parents
    carries phi(z)/g copies of the (z/g)-th root of the CBP offspring law.
    Random control: each parent carries a z-th root of the control law's
    worth of CBP offspring.
    """

    cbp: CBP
    tail_tol: float = DEFAULT_TAIL_TOL
    name: ClassVar[str] = "divided"

    def law(self, z):
        z = int(z)
        if z == 0:
            return PointMass(0)
        cbp = self.cbp
        if cbp.is_dcbp:
            phi = cbp.phi(z)
            g = math.gcd(phi, z)
            v = divide(cbp.offspring, z // g)
            if v.outcome != DIVISIBLE:
                raise ValidationError(f"offspring law is not {z // g}-divisible (needed at z={z})")
            if v.component is None:
                raise ConstructionUnavailable(f"{z // g}-th root of {cbp.offspring.to_text()} has no closed form")
            return iid_sum(v.component, phi // g, self.tail_tol)
        v = divide(cbp.control.law(z), z)
        if v.outcome != DIVISIBLE:
            raise ValidationError(f"control law at z={z} is not {z}-divisible")
        if v.component is None:
            raise ConstructionUnavailable(f"control law at z={z} has no closed-form {z}-th root")
        return compound(v.component, cbp.offspring, self.tail_tol)


@dataclass
class EquivalenceVerdict:
    outcome: str
    rule: str
    reason: str = ""
    witness: int | None = None
    construction: PSDBP | None = None
    construction_available: bool = False
    attainable_truncated: bool = False
    audited_states: tuple = ()
    audit_max_error: float | None = None

    @property
    def audit_passed(self) -> bool:
        return self.audit_max_error is not None and self.audit_max_error <= 1e-12

    def to_dict(self) -> dict:
        out = {
            "outcome": self.outcome,
            "rule": self.rule,
            "reason": self.reason,
            "witness": self.witness,
            "attainable_truncated": self.attainable_truncated,
            "construction_available": self.construction_available,
        }
        if self.construction is not None:
            laws = {}
            for z in self.audited_states:
                try:
                    laws[str(z)] = self.construction.offspring.law(z).to_text()
                except ConstructionUnavailable:  # pragma: no cover - guarded by construction_available
                    laws[str(z)] = None
            out["construction"] = {
                "family": self.construction.offspring.name,
                "laws": laws,
                "audit_max_error": self.audit_max_error,
            }
        return out


def kernel_gap(a: TransitionKernel, b: TransitionKernel, states) -> float:
    """max over the given source states and all targets of |P_a - P_b|."""
    worst = 0.0
    for z in states:
        ra, rb = a.row(z), b.row(z)
        n = max(len(ra), len(rb))
        diff = np.abs(np.pad(ra, (0, n - len(ra))) - np.pad(rb, (0, n - len(rb))))
        worst = max(worst, float(diff.max()) if n else 0.0)
    return worst


def _audit(verdict: EquivalenceVerdict, cbp: CBP, reach: AttainableSet, tail_tol: float) -> EquivalenceVerdict:
    states = tuple(reach.states[:AUDIT_STATES])
    verdict.audited_states = states
    try:
        gap = kernel_gap(TransitionKernel(cbp, tail_tol), TransitionKernel(verdict.construction, tail_tol), states)
    except ConstructionUnavailable as exc:
        verdict.construction = None
        verdict.construction_available = False
        verdict.reason += f"; {exc}"
        return verdict
    verdict.audit_max_error = gap
    return verdict


def decide_equivalence(
    cbp: CBP, z0: int, cap: int = DEFAULT_CAP, audit: bool = True, tail_tol: float = DEFAULT_TAIL_TOL
) -> EquivalenceVerdict:
    """Apply the rule chain; the first rule that fires decides."""
    if not _is_zero(cbp.control.law(0)):
        return EquivalenceVerdict(
            NO, "immigration-at-zero", "control can be positive at z=0, so 0 is not absorbing", witness=0
        )
    reach = attainable_set(cbp, z0, cap)
    trunc = reach.truncated
    control = control_divisibility(cbp, z0, cap, reach)

    def yes(rule, reason):
        v = EquivalenceVerdict(
            YES, rule, reason, construction=PSDBP(DividedOffspring(cbp, tail_tol)),
            construction_available=True, attainable_truncated=trunc,
        )
        return _audit(v, cbp, reach, tail_tol) if audit else v

    if control.outcome == DIVISIBLE:
        return yes("divisible-control", "control law at every attainable z splits into z iid parts")

    if cbp.is_dcbp:
        ys, _ = y_set(cbp, z0, cap, reach)
        unknown_y = None
        unavailable = None
        for y in ys:
            v = divide(cbp.offspring, y)
            if v.outcome == NOT_DIVISIBLE:
                z = next(z for z in reach.positive() if z // math.gcd(cbp.phi(z), z) == y)
                return EquivalenceVerdict(
                    NO, "dcbp-y-divisibility", f"offspring law is not {y}-divisible", witness=z,
                    attainable_truncated=trunc,
                )
            if v.outcome == UNKNOWN and unknown_y is None:
                unknown_y = y
            if v.outcome == DIVISIBLE and v.component is None and unavailable is None:
                unavailable = y
        if unknown_y is not None:
            return EquivalenceVerdict(
                UNKNOWN, "dcbp-y-divisibility", f"{unknown_y}-divisibility of the offspring law is undecided",
                attainable_truncated=trunc,
            )
        if unavailable is not None:
            return EquivalenceVerdict(
                YES, "dcbp-y-divisibility", f"offspring law is {unavailable}-divisible without a closed-form root",
                attainable_truncated=trunc,
            )
        return yes("dcbp-y-divisibility", "offspring law is y-divisible for every y in the y-set")

    ctrl = cbp.control
    if isinstance(ctrl, BinomialControl) and isinstance(cbp.offspring, Poisson) and control.outcome == NOT_DIVISIBLE:
        positive = reach.positive()
        if all(ctrl.psi(z) >= 1 and 0 < ctrl.rate(z) < 1 for z in positive):
            return EquivalenceVerdict(
                NO, "binomial-control-poisson-offspring",
                f"binomial control is not {control.witness}-divisible at z={control.witness}",
                witness=control.witness, attainable_truncated=trunc,
            )
    if isinstance(ctrl, BinomialControl) and isinstance(cbp.offspring, Geometric) and ctrl.psi(0) == 0:
        return EquivalenceVerdict(
            YES, "binomial-control-geometric-offspring",
            "regrouped offspring laws are zero-inflated geometric sums without closed-form roots",
            attainable_truncated=trunc,
        )
    return EquivalenceVerdict(UNKNOWN, "open", "no rule in the catalog decides this process", attainable_truncated=trunc)


def construct_equivalent_psdbp(cbp: CBP, z0: int, cap: int = DEFAULT_CAP, tail_tol: float = DEFAULT_TAIL_TOL) -> PSDBP:
    verdict = decide_equivalence(cbp, z0, cap, audit=True, tail_tol=tail_tol)
    if verdict.outcome != YES:
        raise ValidationError(f"no equivalent PSDBP: {verdict.outcome} by rule {verdict.rule}")
    if verdict.construction is None:
        raise ConstructionUnavailable(verdict.reason)
    return verdict.construction
