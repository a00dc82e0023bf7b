"""Process specifications and their one-step transition kernels.

A PSDBP draws ``z`` iid offspring from a law that depends on the current
size ``z``. A CBP first draws a (possibly random) number of parents
``phi(z)`` and then gives each of them an offspring count from one fixed law.
A CBP with a deterministic control is a DCBP.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, ClassVar, Mapping

import numpy as np

from ._numbers import div, format_number, is_exact, normalize
from .distributions import (
    DEFAULT_TAIL_TOL,
    Distribution,
    FiniteSupport,
    NegativeBinomial,
    PointMass,
    Poisson,
    ScaledBernoulli,
    binomial,
    compound,
    iid_sum,
)
from .errors import ValidationError
from .rng import stream

CACHE_SIZE = int(os.environ.get("BPLINK_CACHE_SIZE", 200_000))


def _floor(x) -> int:
    return math.floor(x) if is_exact(x) else int(math.floor(float(x)))


# ------------------------------------------------------------ control maps ---


class ControlMap:
    """Deterministic map z -> phi(z) on the non-negative integers."""

    name: ClassVar[str] = ""

    def __call__(self, z: int) -> int:  # pragma: no cover - abstract
        raise NotImplementedError

    def min_ratio(self):
        """inf over z >= 1 of phi(z)/z when known in closed form, else None."""
        return None

    def to_text(self) -> str:  # pragma: no cover - abstract
        raise NotImplementedError

    def __str__(self) -> str:
        return self.to_text()


@dataclass(frozen=True)
class Identity(ControlMap):
    name: ClassVar[str] = "identity"

    def __call__(self, z):
        return int(z)

    def min_ratio(self):
        return 1

    def to_text(self):
        return "identity"


@dataclass(frozen=True)
class AffineFloor(ControlMap):
    """phi(z) = max(floor(a*z + b), 0)."""

    a: object
    b: object = 0
    name: ClassVar[str] = "affine_floor"

    def __post_init__(self):
        if self.a <= 0:
            raise ValidationError("affine_floor needs a > 0", key="a")

    def __call__(self, z):
        return max(_floor(self.a * z + self.b), 0)

    def min_ratio(self):
        a_int = is_exact(self.a) and Fraction(self.a).denominator == 1
        if a_int and self.b >= 0:
            return normalize(Fraction(self.a))
        return None

    def to_text(self):
        return f"affine_floor(a={format_number(self.a)},b={format_number(self.b)})"


@dataclass(frozen=True)
class MaxShift(ControlMap):
    """phi(z) = max(z - c, 0)."""

    c: int
    name: ClassVar[str] = "max_shift"

    def __post_init__(self):
        if int(self.c) != self.c or self.c < 1:
            raise ValidationError("max_shift needs an integer c >= 1", key="c")

    def __call__(self, z):
        return max(int(z) - self.c, 0)

    def min_ratio(self):
        return 0

    def to_text(self):
        return f"max_shift(c={self.c})"


@dataclass(frozen=True)
class ShiftGated(ControlMap):
    """phi(z) = (z + M) for z > 0 and phi(0) = 0."""

    M: int
    name: ClassVar[str] = "shift_gated"

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 0:
            raise ValidationError("shift_gated needs an integer M >= 0", key="M")

    def __call__(self, z):
        return int(z) + self.M if z > 0 else 0

    def min_ratio(self):
        return 1

    def to_text(self):
        return f"shift_gated(M={self.M})"


@dataclass(frozen=True)
class ParityHalf(ControlMap):
    """phi(z) = z for odd z, z/2 for even z."""

    name: ClassVar[str] = "parity_half"

    def __call__(self, z):
        z = int(z)
        return z if z % 2 else z // 2

    def min_ratio(self):
        return Fraction(1, 2)

    def to_text(self):
        return "parity_half"


@dataclass(frozen=True)
class Table(ControlMap):
    """Explicit values at listed states, ``default`` elsewhere."""

    entries: tuple
    default: ControlMap = field(default_factory=Identity)
    name: ClassVar[str] = "table"

    def __post_init__(self):
        items = self.entries.items() if isinstance(self.entries, Mapping) else self.entries
        entries = tuple(sorted((int(k), int(v)) for k, v in items))
        if any(v < 0 or k < 0 for k, v in entries):
            raise ValidationError("table entries must be non-negative", key="table")
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "_lookup", dict(entries))

    def __call__(self, z):
        z = int(z)
        v = self._lookup.get(z)
        return self.default(z) if v is None else v

    def to_text(self):
        body = ",".join(f"{k}:{v}" for k, v in self.entries)
        return f"table{{{body};default={self.default.to_text()}}}"


# ------------------------------------------------------------------ rates ---


class Rate:
    """A probability that depends on the population size."""

    name: ClassVar[str] = ""

    def __call__(self, z: int):  # pragma: no cover - abstract
        raise NotImplementedError

    def to_text(self) -> str:  # pragma: no cover - abstract
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantRate(Rate):
    q: object
    name: ClassVar[str] = "const"

    def __post_init__(self):
        if not 0 <= self.q <= 1:
            raise ValidationError(f"probability {format_number(self.q)} outside [0, 1]", key="q")

    def __call__(self, z):
        return self.q

    def to_text(self):
        return format_number(self.q)


@dataclass(frozen=True)
class BevertonHoltRate(Rate):
    """K / (K + z)."""

    K: object
    name: ClassVar[str] = "bh"

    def __post_init__(self):
        if self.K <= 0:
            raise ValidationError("K must be > 0", key="K")

    def __call__(self, z):
        return normalize(div(self.K, self.K + z))

    def to_text(self):
        return f"rate_catalog:bh(K={format_number(self.K)})"


@dataclass(frozen=True)
class CapacityRate(Rate):
    """2K^2 / (lam (K+M) (z+K)): binomial control rate giving carrying capacity K."""

    K: object
    M: object
    lam: object
    name: ClassVar[str] = "capacity"

    def __post_init__(self):
        if self.K <= 0 or self.M < 0 or self.lam <= 0:
            raise ValidationError("capacity rate needs K > 0, M >= 0, lam > 0")
        if self(0) > 1:
            raise ValidationError("capacity rate exceeds 1 at z = 0; need lam*(K+M) >= 2K", key="lam")

    def __call__(self, z):
        K = self.K
        return normalize(div(2 * K * K, self.lam * (K + self.M) * (z + K)))

    def to_text(self):
        return (
            f"rate_catalog:capacity(K={format_number(self.K)},"
            f"M={format_number(self.M)},lam={format_number(self.lam)})"
        )


@dataclass(frozen=True)
class ExpGateRate(Rate):
    """exp(-z / scale)."""

    scale: object
    name: ClassVar[str] = "exp_gate"

    def __post_init__(self):
        if self.scale <= 0:
            raise ValidationError("scale must be > 0", key="scale")

    def __call__(self, z):
        if z == 0:
            return 1
        return math.exp(-float(z) / float(self.scale))

    def to_text(self):
        return f"rate_catalog:exp_gate(scale={format_number(self.scale)})"


def as_rate(x) -> Rate:
    return x if isinstance(x, Rate) else ConstantRate(x)


# --------------------------------------------------------- control specs ---


class ControlSpec:
    """Law of the number of reproducing parents given the population size."""

    kind: ClassVar[str] = ""
    deterministic: ClassVar[bool] = False

    def law(self, z: int) -> Distribution:  # pragma: no cover - abstract
        raise NotImplementedError

    def mean(self, z: int):
        return self.law(z).mean

    def variance(self, z: int):
        return self.law(z).variance


@dataclass(frozen=True)
class Deterministic(ControlSpec):
    map: ControlMap
    kind: ClassVar[str] = "deterministic"
    deterministic: ClassVar[bool] = True

    def law(self, z):
        return PointMass(self.map(z))

    def mean(self, z):
        return self.map(z)

    def variance(self, z):
        return 0


@dataclass(frozen=True)
class PoissonControl(ControlSpec):
    psi: ControlMap
    kind: ClassVar[str] = "poisson"

    def law(self, z):
        m = self.psi(z)
        return PointMass(0) if m == 0 else Poisson(m)


@dataclass(frozen=True)
class BinomialControl(ControlSpec):
    psi: ControlMap
    rate: Rate
    kind: ClassVar[str] = "binomial"

    def __post_init__(self):
        object.__setattr__(self, "rate", as_rate(self.rate))

    def law(self, z):
        return binomial(self.psi(z), self.rate(z))


@dataclass(frozen=True)
class NegBinControl(ControlSpec):
    psi: ControlMap
    q: Rate
    kind: ClassVar[str] = "negbin"

    def __post_init__(self):
        object.__setattr__(self, "q", as_rate(self.q))

    def law(self, z):
        r = self.psi(z)
        return PointMass(0) if r == 0 else NegativeBinomial(r, self.q(z))


@dataclass(frozen=True)
class ScaledBernoulliControl(ControlSpec):
    scale: ControlMap
    rate: Rate
    kind: ClassVar[str] = "scaled_bernoulli"

    def __post_init__(self):
        object.__setattr__(self, "rate", as_rate(self.rate))

    def law(self, z):
        s, p = self.scale(z), self.rate(z)
        if s == 0 or p == 0:
            return PointMass(0)
        if p == 1:
            return PointMass(s)
        return ScaledBernoulli(s, p)


# ------------------------------------------------------- offspring families ---


class OffspringFamily:
    """z -> offspring law of a PSDBP."""

    name: ClassVar[str] = ""

    def law(self, z: int) -> Distribution:  # pragma: no cover - abstract
        raise NotImplementedError

    def mean(self, z: int):
        return self.law(z).mean

    def variance(self, z: int):
        return self.law(z).variance

    def params(self) -> dict:
        """Config keys (other than ``family``) that rebuild this family."""
        return {}


@dataclass(frozen=True)
class BevertonHoltBinomial(OffspringFamily):
    """Bin(2, K/(K+z)): conditional mean 2Kz/(K+z)."""

    K: object
    name: ClassVar[str] = "binomial_bh"

    def __post_init__(self):
        if self.K <= 0:
            raise ValidationError("K must be > 0", key="K")

    def law(self, z):
        return binomial(2, BevertonHoltRate(self.K)(z))

    def params(self):
        return {"K": self.K}


@dataclass(frozen=True)
class PoissonScaled(OffspringFamily):
    """Poi((z-1) lam / z)."""

    lam: object
    name: ClassVar[str] = "poisson_scaled"

    def law(self, z):
        if z <= 1:
            return PointMass(0)
        return Poisson(normalize(div((z - 1) * self.lam, z)))

    def params(self):
        return {"lambda": self.lam}


def capacity_negbin_params(z: int, lam, M, K):
    """(r, q) of the NB offspring law matching the capacity-rate binomial CBP."""
    e = lam * (K + M) * (K + z) - 2 * K * K
    d = (1 + lam) * (K + M) * (K + z) - 2 * K * K
    r = div(2 * K * K * (z + M), z * e)
    q = div((z + K) * (K + M), d)
    return normalize(r), normalize(q)


@dataclass(frozen=True)
class CapacityNegBin(OffspringFamily):
    """NB offspring whose conditional moments match the capacity-rate binomial CBP with Poisson offspring."""

    lam: object
    M: object
    K: object
    name: ClassVar[str] = "nb_capacity"

    def __post_init__(self):
        if self.lam < 2 or self.K <= 0 or self.M < 0:
            raise ValidationError("nb_capacity needs lambda >= 2, K > 0, M >= 0")

    def law(self, z):
        if z == 0:
            return PointMass(0)
        return NegativeBinomial(*capacity_negbin_params(z, self.lam, self.M, self.K))

    def params(self):
        return {"lambda": self.lam, "M": self.M, "K": self.K}


@dataclass(frozen=True)
class ShiftNegBin(OffspringFamily):
    """NB((z+M)/(z(lam-1)), 1/lam): matches the shift-gated control with ZIP(1-1/lam, lam) offspring."""

    lam: object
    M: object
    name: ClassVar[str] = "nb_shift"

    def __post_init__(self):
        if self.lam <= 1 or self.M < 0:
            raise ValidationError("nb_shift needs lambda > 1 and M >= 0")

    def law(self, z):
        if z == 0:
            return PointMass(0)
        return NegativeBinomial(normalize(div(z + self.M, z * (self.lam - 1))), normalize(div(1, self.lam)))

    def params(self):
        return {"lambda": self.lam, "M": self.M}


@dataclass(frozen=True)
class ThreePointMatch(OffspringFamily):
    """Three-point law on {0,1,2} with mean (z-1)/z and variance (z-1)/(2z); zero for z <= 1."""

    name: ClassVar[str] = "three_point"

    def law(self, z):
        if z <= 1:
            return PointMass(0)
        zz = Fraction(z * z)
        return FiniteSupport(
            (0, 1, 2),
            ((z * z + z + 2) / (4 * zz), (z * z + z - 2) / (2 * zz), (z * z - 3 * z + 2) / (4 * zz)),
        )


@dataclass(frozen=True)
class RickerPoisson(OffspringFamily):
    """Poi(r^(1 - z/K)): Ricker-type mean model."""

    r: object
    K: object
    name: ClassVar[str] = "ricker_poisson"

    def __post_init__(self):
        if self.r <= 1 or self.K <= 0:
            raise ValidationError("ricker_poisson needs r > 1 and K > 0")

    def law(self, z):
        return Poisson(float(self.r) ** (1.0 - float(z) / float(self.K)))

    def params(self):
        return {"r": self.r, "K": self.K}


@dataclass(frozen=True)
class ConstantOffspring(OffspringFamily):
    """The same law at every population size (a Galton-Watson process)."""

    offspring: Distribution
    name: ClassVar[str] = "constant"

    def law(self, z):
        return self.offspring

    def params(self):
        return {"offspring": self.offspring}


@dataclass(frozen=True)
class Tabulated(OffspringFamily):
    """Explicit laws at listed states, ``default`` elsewhere."""

    entries: tuple
    default: OffspringFamily | None = None
    name: ClassVar[str] = "tabulated"

    def __post_init__(self):
        items = self.entries.items() if isinstance(self.entries, Mapping) else self.entries
        entries = tuple(sorted((int(k), v) for k, v in items))
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "_lookup", dict(entries))

    def law(self, z):
        d = self._lookup.get(int(z))
        if d is not None:
            return d
        if self.default is None:
            if z == 0:
                return PointMass(0)
            raise ValidationError(f"no tabulated offspring law at z={z}")
        return self.default.law(z)


# ------------------------------------------------------------ process specs ---


@dataclass(frozen=True)
class PSDBP:
    offspring: OffspringFamily
    kind: ClassVar[str] = "psdbp"


@dataclass(frozen=True)
class CBP:
    control: ControlSpec
    offspring: Distribution
    kind: ClassVar[str] = "cbp"

    @property
    def is_dcbp(self) -> bool:
        return self.control.deterministic

    @property
    def phi(self) -> ControlMap:
        if not self.is_dcbp:
            raise ValidationError("random control has no deterministic map")
        return self.control.map


ProcessSpec = PSDBP | CBP


def conditional_moments(spec: ProcessSpec, z: int):
    """(E[next | z], Var[next | z]) in exact arithmetic when the parameters are rational."""
    z = int(z)
    if isinstance(spec, PSDBP):
        if z == 0:
            return 0, 0
        law = spec.offspring.law(z)
        return normalize(z * law.mean), normalize(z * law.variance)
    m, s2 = spec.offspring.mean, spec.offspring.variance
    cm, cv = spec.control.mean(z), spec.control.variance(z)
    return normalize(cm * m), normalize(cm * s2 + cv * m * m)


# ----------------------------------------------------------------- kernel ---


def _sumset_power(vals: list[int], m: int, cap: int) -> list[int]:
    """{v_1 + ... + v_m} intersected with [0, cap]."""
    base = np.zeros(cap + 1, dtype=bool)
    base[[v for v in vals if v <= cap]] = True
    result = np.zeros(cap + 1, dtype=bool)
    result[0] = True
    while m:
        if m & 1:
            result = np.convolve(result.astype(np.int64), base.astype(np.int64))[: cap + 1] > 0
        m >>= 1
        if m:
            base = np.convolve(base.astype(np.int64), base.astype(np.int64))[: cap + 1] > 0
    return [int(i) for i in np.nonzero(result)[0]]


def sum_support(d: Distribution, m: int, cap: int) -> tuple[list[int], bool]:
    """Support of the m-fold iid sum of d within [0, cap], and whether it extends past cap."""
    if m == 0:
        return [0], False
    if d.covers_all():
        return list(range(cap + 1)), True
    if isinstance(d, FiniteSupport):
        vals, _ = d.support_upto(cap)
        top = max(v for v, w in zip(d.values, d.probs) if w > 0)
        return _sumset_power(vals, m, cap), m * top > cap
    return iid_sum(d, m).support_upto(cap)


def group_by_state(a: np.ndarray):
    """(state, positions) pairs in increasing state order; positions keep their original order."""
    order = np.argsort(a, kind="stable")
    sa = a[order]
    cuts = np.flatnonzero(np.diff(sa)) + 1
    starts = np.concatenate(([0], cuts))
    ends = np.concatenate((cuts, [len(sa)]))
    return [(int(sa[s]), order[s:e]) for s, e in zip(starts, ends)]


class TransitionKernel:
    """Exact one-step law P(next = b | current = a), cached per source state.

    The cache is a plain dict: concurrent writers may race, but they always
    store equal values, so last-write-wins is harmless.
    """

    def __init__(self, spec: ProcessSpec, tail_tol: float = DEFAULT_TAIL_TOL, cache: bool = True, cache_size: int = CACHE_SIZE):
        self.spec = spec
        self.tail_tol = float(tail_tol)
        self._use_cache = cache
        self._cache_size = int(cache_size)
        self._laws: dict[int, Distribution] = {}
        self._rows: dict[int, np.ndarray] = {}

    def _compute_law(self, a: int) -> Distribution:
        spec = self.spec
        if isinstance(spec, PSDBP):
            if a == 0:
                return PointMass(0)
            return iid_sum(spec.offspring.law(a), a, self.tail_tol)
        if spec.is_dcbp:
            return iid_sum(spec.offspring, spec.phi(a), self.tail_tol)
        return compound(spec.control.law(a), spec.offspring, self.tail_tol)

    def law(self, a: int) -> Distribution:
        a = int(a)
        if a < 0:
            raise ValidationError("states are non-negative")
        if not self._use_cache:
            return self._compute_law(a)
        d = self._laws.get(a)
        if d is None:
            d = self._compute_law(a)
            if len(self._laws) < self._cache_size:
                self._laws[a] = d
        return d

    def log_row(self, a: int) -> np.ndarray:
        """log P(a, b) for b = 0..upper."""
        a = int(a)
        if not self._use_cache:
            return self.law(a).logpmf(np.arange(self.law(a).upper(self.tail_tol) + 1))
        row = self._rows.get(a)
        if row is None:
            law = self.law(a)
            row = law.logpmf(np.arange(law.upper(self.tail_tol) + 1, dtype=np.int64))
            row.setflags(write=False)
            if len(self._rows) < self._cache_size:
                self._rows[a] = row
        return row

    def row(self, a: int) -> np.ndarray:
        return np.exp(self.log_row(a))

    def logpmf(self, a: int, b: int) -> float:
        return float(self.logpmf_pairs(np.array([a]), np.array([b]))[0])

    def pmf(self, a: int, b: int) -> float:
        return math.exp(self.logpmf(a, b))

    def logpmf_pairs(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        out = np.empty(a.shape, dtype=np.float64)
        for state, idx in group_by_state(a):
            row = self.log_row(state)
            bb = b[idx]
            inside = (bb >= 0) & (bb < len(row))
            vals = np.full(bb.shape, -np.inf)
            vals[inside] = row[bb[inside]]
            outside = ~inside & (bb >= 0)
            if outside.any():
                vals[outside] = self.law(state).logpmf(bb[outside])
            out[idx] = vals
        return out

    def sample_next(self, a: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """One transition from each entry of ``a``; draws are grouped by sorted source state."""
        a = np.asarray(a, dtype=np.int64)
        out = np.empty(a.shape, dtype=np.int64)
        for state, idx in group_by_state(a):
            out[idx] = self.law(state).sample(rng, len(idx))
        return out

    def support(self, a: int, cap: int) -> tuple[list[int], bool]:
        """States reachable in one step from a, within [0, cap]."""
        spec = self.spec
        a = int(a)
        if isinstance(spec, PSDBP):
            if a == 0:
                return [0], False
            return sum_support(spec.offspring.law(a), a, cap)
        if spec.is_dcbp:
            return sum_support(spec.offspring, spec.phi(a), cap)
        return compound(spec.control.law(a), spec.offspring, self.tail_tol).support_upto(cap)

    def exceeds(self, a: int, cap: int) -> bool:
        """Whether a one-step move from a can land above cap."""
        spec = self.spec
        a = int(a)
        if isinstance(spec, PSDBP):
            if a == 0:
                return False
            d, m = spec.offspring.law(a), a
        elif spec.is_dcbp:
            d, m = spec.offspring, spec.phi(a)
        else:
            return self.support(a, cap)[1]
        if m == 0:
            return False
        if d.covers_all():
            return True
        if d.is_finite:
            return d.upper() * m > cap
        return sum_support(d, m, cap)[1]


def transition_pmf(kernel: TransitionKernel, a: int, b: int) -> float:
    return kernel.pmf(a, b)


# ------------------------------------------------------------- simulation ---


def _simulate_path(kernel: TransitionKernel, z0: int, generations: int, seed: int, path: int) -> np.ndarray:
    rng = stream(seed, path)
    out = np.empty(generations + 1, dtype=np.int64)
    z = int(z0)
    out[0] = z
    for g in range(1, generations + 1):
        z = kernel.law(z).sample(rng)
        out[g] = z
    return out


def simulate(
    spec: ProcessSpec,
    z0: int,
    generations: int,
    paths: int = 1,
    seed: int = 0,
    workers: int = 1,
    kernel: TransitionKernel | None = None,
) -> np.ndarray:
    """Trajectories as an array of shape (paths, generations + 1); column 0 is z0.

    Path i uses the random stream (seed, i), so output does not depend on ``workers``.
    """
    if generations < 1 or paths < 1:
        raise ValidationError("generations and paths must be >= 1")
    kernel = kernel or TransitionKernel(spec)
    if workers <= 1:
        rows = [_simulate_path(kernel, z0, generations, seed, i) for i in range(paths)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda i: _simulate_path(kernel, z0, generations, seed, i), range(paths)))
    return np.vstack(rows)


def trajectories_csv(traj: np.ndarray, path_offset: int = 0) -> str:
    lines = ["path,generation,size"]
    for p, row in enumerate(traj):
        lines.extend(f"{p + path_offset},{g},{int(v)}" for g, v in enumerate(row))
    return "\n".join(lines) + "\n"


# ------------------------------------------------------- attainable states ---


@dataclass(frozen=True)
class AttainableSet:
    states: tuple
    truncated: bool
    cap: int

    def __contains__(self, z) -> bool:
        return int(z) in self._set

    def __iter__(self):
        return iter(self.states)

    def __len__(self):
        return len(self.states)

    @property
    def _set(self):
        return frozenset(self.states)

    def positive(self) -> list[int]:
        return [z for z in self.states if z >= 1]


def attainable_set(spec: ProcessSpec, z0: int, cap: int, kernel: TransitionKernel | None = None) -> AttainableSet:
    """Breadth-first closure of one-step supports from z0, restricted to [0, cap]."""
    if cap < z0:
        raise ValidationError("cap must be >= z0", key="cap")
    kernel = kernel or TransitionKernel(spec)
    seen = np.zeros(cap + 1, dtype=bool)
    seen[z0] = True
    frontier = [int(z0)]
    truncated = False
    while frontier:
        nxt = []
        for z in frontier:
            vals, exceeds = kernel.support(z, cap)
            truncated = truncated or exceeds
            for v in vals:
                if not seen[v]:
                    seen[v] = True
                    nxt.append(v)
            if seen.all():
                # everything in range is reached; only the truncation flag is still open
                done = set(frontier[: frontier.index(z) + 1])
                rest = [v for v in range(cap + 1) if v not in done]
                truncated = truncated or any(kernel.exceeds(v, cap) for v in rest)
                return AttainableSet(tuple(range(cap + 1)), truncated, cap)
        frontier = sorted(nxt)
    return AttainableSet(tuple(int(i) for i in np.nonzero(seen)[0]), truncated, cap)


# ------------------------------------------------------- carrying capacity ---


@dataclass
class CapacityAudit:
    K: object
    z_range: tuple
    violations: list = field(default_factory=list)
    no_drift: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def carrying_capacity_audit(spec: ProcessSpec, K, z_range) -> CapacityAudit:
    """Check E[next | z] > z below K and < z above K on every z of ``z_range``."""
    zs = list(z_range)
    audit = CapacityAudit(K, (min(zs), max(zs)) if zs else ())
    for z in zs:
        mean, _ = conditional_moments(spec, z)
        if mean == z:
            audit.no_drift.append(z)
        if z < K and not mean > z:
            audit.violations.append((z, mean, "expected growth below K"))
        elif z > K and not mean < z:
            audit.violations.append((z, mean, "expected decline above K"))
    return audit


FAMILIES: dict[str, Callable[..., OffspringFamily]] = {
    cls.name: cls
    for cls in (
        BevertonHoltBinomial,
        PoissonScaled,
        CapacityNegBin,
        ShiftNegBin,
        ThreePointMatch,
        RickerPoisson,
        ConstantOffspring,
    )
}
