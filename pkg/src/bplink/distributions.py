"""Discrete laws on the non-negative integers.

Every law is an immutable dataclass. Parameters given as ``int`` or
``Fraction`` stay exact, so means and variances of rational laws are exact
rationals; evaluation of the pmf always happens in float64 (log space).

Infinite supports are truncated where the omitted upper tail drops below a
tolerance (``DEFAULT_TAIL_TOL``). Finite laws are never truncated.
"""

from __future__ import annotations

import functools
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, ClassVar, Mapping

import numpy as np
from scipy import signal, stats
from scipy.special import logsumexp

from . import _kernels as kern
from ._numbers import check_finite, div, format_number, is_exact, is_integral, normalize
from .errors import NonFiniteMoment, SupportOverflow, ValidationError

DEFAULT_TAIL_TOL = 1e-12
SUPPORT_CAP = int(os.environ.get("BPLINK_SUPPORT_CAP", 2_000_000))
_NEG_INF = -np.inf


def _check_prob(name: str, p, *, open_low: bool = False, open_high: bool = False) -> None:
    check_finite(name, p)
    if p < 0 or p > 1 or (open_low and p == 0) or (open_high and p == 1):
        lo = "(" if open_low else "["
        hi = ")" if open_high else "]"
        raise ValidationError(f"{name}={p!r} is outside {lo}0, 1{hi}", key=name)


def _check_count(name: str, n, minimum: int) -> None:
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
        if isinstance(n, (Fraction, float)) and is_integral(n):
            return
        raise ValidationError(f"{name}={n!r} must be an integer", key=name)
    if n < minimum:
        raise ValidationError(f"{name}={n!r} must be >= {minimum}", key=name)


def _as_int(x) -> int:
    return int(x)


def _search_upper(sf: Callable[[int], float], tol: float, guess) -> int:
    """Smallest n >= 0 with sf(n) = P(X > n) < tol, starting near ``guess``."""
    n = 0 if guess is None or not math.isfinite(guess) else max(int(guess), 0)
    if sf(n) < tol:
        while n > 0 and sf(n - 1) < tol:
            n -= 1
        return n
    step = 1
    while sf(n + step) >= tol:
        step *= 2
    lo, hi = n + step // 2, n + step
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if sf(mid) < tol:
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class Moments:
    mean: object
    variance: object
    rho3: float
    tail_mass: float
    truncated: bool


class Distribution:
    """Common interface. Subclasses are frozen dataclasses."""

    family: ClassVar[str] = ""

    # -- evaluation -----------------------------------------------------
    def logpmf(self, k):
        arr = np.asarray(k)
        flat = arr.reshape(-1)
        if np.issubdtype(flat.dtype, np.integer):
            out = self._logpmf(np.ascontiguousarray(flat, dtype=np.int64))
        else:
            flat = flat.astype(np.float64)
            ok = np.isfinite(flat) & (flat == np.floor(flat))
            out = np.full(flat.shape, _NEG_INF)
            if ok.any():
                out[ok] = self._logpmf(flat[ok].astype(np.int64))
        if arr.ndim == 0:
            return float(out[0])
        return out.reshape(arr.shape)

    def pmf(self, k):
        lp = self.logpmf(k)
        return math.exp(lp) if isinstance(lp, float) else np.exp(lp)

    def logpmf_table(self, tail_tol: float = DEFAULT_TAIL_TOL) -> np.ndarray:
        """log P(X = n) for n = 0..upper(tail_tol); read-only, cached."""
        return _logpmf_table(self, float(tail_tol))

    def pmf_table(self, tail_tol: float = DEFAULT_TAIL_TOL) -> np.ndarray:
        return _pmf_table(self, float(tail_tol))

    def upper(self, tail_tol: float = DEFAULT_TAIL_TOL) -> int:
        """Smallest n with P(X > n) < tail_tol (the largest atom for finite laws)."""
        return _upper(self, float(tail_tol))

    # -- sampling -------------------------------------------------------
    def sample(self, rng: np.random.Generator, size=None):
        if size is None:
            return int(self._sample(rng, 1)[0])
        out = self._sample(rng, int(np.prod(size)))
        return out.reshape(size)

    # -- defaults -------------------------------------------------------
    @property
    def is_finite(self) -> bool:
        return False

    def covers_all(self) -> bool:
        """True when every non-negative integer has positive probability."""
        return False

    def __str__(self) -> str:
        return self.to_text()

    # subclass hooks
    def _logpmf(self, k: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def _upper(self, tail_tol: float) -> int:  # pragma: no cover - abstract
        raise NotImplementedError

    def _sample(self, rng: np.random.Generator, n: int) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def _sum_closed(self, m: int) -> "Distribution | None":
        return None

    @property
    def mean(self):  # pragma: no cover - abstract
        raise NotImplementedError

    @property
    def variance(self):  # pragma: no cover - abstract
        raise NotImplementedError

    def support_upto(self, cap: int) -> tuple[list[int], bool]:  # pragma: no cover - abstract
        raise NotImplementedError

    def to_text(self) -> str:  # pragma: no cover - abstract
        raise NotImplementedError


@functools.lru_cache(maxsize=8192)
def _upper(d: Distribution, tail_tol: float) -> int:
    return int(d._upper(tail_tol))


@functools.lru_cache(maxsize=4096)
def _logpmf_table(d: Distribution, tail_tol: float) -> np.ndarray:
    t = d.logpmf(np.arange(d.upper(tail_tol) + 1, dtype=np.int64))
    t.setflags(write=False)
    return t


@functools.lru_cache(maxsize=4096)
def _pmf_table(d: Distribution, tail_tol: float) -> np.ndarray:
    t = np.exp(d.logpmf_table(tail_tol))
    t.setflags(write=False)
    return t


def _fmt_args(**kw) -> str:
    return ",".join(f"{k}={format_number(v)}" for k, v in kw.items())


def _all_upto(cap: int) -> tuple[list[int], bool]:
    return list(range(cap + 1)), True


# --------------------------------------------------------------- families ---


@dataclass(frozen=True)
class PointMass(Distribution):
    c: int
    family: ClassVar[str] = "point"

    def __post_init__(self):
        _check_count("c", self.c, 0)
        object.__setattr__(self, "c", _as_int(self.c))

    def _logpmf(self, k):
        return np.where(k == self.c, 0.0, _NEG_INF)

    def _upper(self, tail_tol):
        return self.c

    @property
    def is_finite(self):
        return True

    @property
    def mean(self):
        return self.c

    @property
    def variance(self):
        return 0

    def support_upto(self, cap):
        return ([self.c], False) if self.c <= cap else ([], True)

    def _sample(self, rng, n):
        return np.full(n, self.c, dtype=np.int64)

    def _sum_closed(self, m):
        return PointMass(self.c * m)

    def to_text(self):
        return f"point(c={self.c})"


@dataclass(frozen=True)
class Bernoulli(Distribution):
    p: object
    family: ClassVar[str] = "bernoulli"

    def __post_init__(self):
        _check_prob("p", self.p)

    def _logpmf(self, k):
        p = float(self.p)
        with np.errstate(divide="ignore"):
            v0, v1 = math.log1p(-p) if p < 1 else _NEG_INF, math.log(p) if p > 0 else _NEG_INF
        return np.where(k == 0, v0, np.where(k == 1, v1, _NEG_INF))

    def _upper(self, tail_tol):
        return 1 if self.p > 0 else 0

    @property
    def is_finite(self):
        return True

    @property
    def mean(self):
        return self.p

    @property
    def variance(self):
        return self.p * (1 - self.p)

    def support_upto(self, cap):
        vals = [v for v, w in ((0, 1 - self.p), (1, self.p)) if w > 0 and v <= cap]
        return vals, self.p > 0 and cap < 1

    def _sample(self, rng, n):
        return (rng.random(n) < float(self.p)).astype(np.int64)

    def _sum_closed(self, m):
        return binomial(m, self.p)

    def to_text(self):
        return f"bernoulli({_fmt_args(p=self.p)})"


@dataclass(frozen=True)
class Binomial(Distribution):
    n: int
    p: object
    family: ClassVar[str] = "binomial"

    def __post_init__(self):
        _check_count("n", self.n, 1)
        object.__setattr__(self, "n", _as_int(self.n))
        _check_prob("p", self.p)

    def _logpmf(self, k):
        return kern.binom_logpmf(k, self.n, self.p)

    def _upper(self, tail_tol):
        if self.p == 0:
            return 0
        return self.n

    @property
    def is_finite(self):
        return True

    @property
    def mean(self):
        return self.n * self.p

    @property
    def variance(self):
        return self.n * self.p * (1 - self.p)

    def support_upto(self, cap):
        if self.p == 0:
            return [0], False
        if self.p == 1:
            return ([self.n], False) if self.n <= cap else ([], True)
        return list(range(min(self.n, cap) + 1)), self.n > cap

    def _sample(self, rng, n):
        return rng.binomial(self.n, float(self.p), size=n).astype(np.int64)

    def _sum_closed(self, m):
        return binomial(self.n * m, self.p)

    def to_text(self):
        return f"binomial({_fmt_args(n=self.n, p=self.p)})"


@dataclass(frozen=True)
class Poisson(Distribution):
    mu: object
    family: ClassVar[str] = "poisson"

    def __post_init__(self):
        check_finite("mu", self.mu)
        if self.mu < 0:
            raise ValidationError(f"mu={self.mu!r} must be >= 0", key="mu")

    def _logpmf(self, k):
        return kern.poisson_logpmf(k, self.mu)

    def _upper(self, tail_tol):
        mu = float(self.mu)
        if mu == 0:
            return 0
        return _search_upper(lambda n: stats.poisson.sf(n, mu), tail_tol, stats.poisson.isf(tail_tol, mu))

    @property
    def mean(self):
        return self.mu

    @property
    def variance(self):
        return self.mu

    def covers_all(self):
        return self.mu > 0

    def support_upto(self, cap):
        return ([0], False) if self.mu == 0 else _all_upto(cap)

    def _sample(self, rng, n):
        return rng.poisson(float(self.mu), size=n).astype(np.int64)

    def _sum_closed(self, m):
        return Poisson(normalize(self.mu * m))

    def to_text(self):
        return f"poisson({_fmt_args(mu=self.mu)})"


@dataclass(frozen=True)
class Geometric(Distribution):
    """Failures before the first success; P(k) = (1-q)^k q on k = 0, 1, ..."""

    q: object
    family: ClassVar[str] = "geometric"

    def __post_init__(self):
        _check_prob("q", self.q, open_low=True, open_high=True)

    def _logpmf(self, k):
        return kern.negbin_logpmf(k, 1.0, self.q)

    def _upper(self, tail_tol):
        q = float(self.q)
        return _search_upper(lambda n: stats.nbinom.sf(n, 1, q), tail_tol, stats.nbinom.isf(tail_tol, 1, q))

    @property
    def mean(self):
        return div(1 - self.q, self.q)

    @property
    def variance(self):
        return div(1 - self.q, self.q * self.q)

    def covers_all(self):
        return True

    def support_upto(self, cap):
        return _all_upto(cap)

    def _sample(self, rng, n):
        return (rng.geometric(float(self.q), size=n) - 1).astype(np.int64)

    def _sum_closed(self, m):
        return NegativeBinomial(m, self.q)

    def to_text(self):
        return f"geometric({_fmt_args(q=self.q)})"


@dataclass(frozen=True)
class NegativeBinomial(Distribution):
    """P(k) = Gamma(k+r)/(k! Gamma(r)) q^r (1-q)^k; mean r(1-q)/q."""

    r: object
    q: object
    family: ClassVar[str] = "nb"

    def __post_init__(self):
        check_finite("r", self.r)
        if self.r <= 0:
            raise ValidationError(f"r={self.r!r} must be > 0", key="r")
        _check_prob("q", self.q, open_low=True, open_high=True)

    def _logpmf(self, k):
        return kern.negbin_logpmf(k, self.r, self.q)

    def _upper(self, tail_tol):
        r, q = float(self.r), float(self.q)
        return _search_upper(lambda n: stats.nbinom.sf(n, r, q), tail_tol, stats.nbinom.isf(tail_tol, r, q))

    @property
    def mean(self):
        return div(self.r * (1 - self.q), self.q)

    @property
    def variance(self):
        return div(self.r * (1 - self.q), self.q * self.q)

    def covers_all(self):
        return True

    def support_upto(self, cap):
        return _all_upto(cap)

    def _sample(self, rng, n):
        return rng.negative_binomial(float(self.r), float(self.q), size=n).astype(np.int64)

    def _sum_closed(self, m):
        return NegativeBinomial(normalize(self.r * m), self.q)

    def to_text(self):
        return f"nb({_fmt_args(r=self.r, q=self.q)})"


@dataclass(frozen=True)
class ZeroInflatedPoisson(Distribution):
    """0 with probability pi0, otherwise Poisson(lam)."""

    pi0: object
    lam: object
    family: ClassVar[str] = "zip"

    def __post_init__(self):
        _check_prob("pi0", self.pi0)
        check_finite("lambda", self.lam)
        if self.lam <= 0:
            raise ValidationError(f"lambda={self.lam!r} must be > 0", key="lambda")

    def _logpmf(self, k):
        pi0, lam = float(self.pi0), float(self.lam)
        out = kern.poisson_logpmf(k, lam)
        with np.errstate(divide="ignore"):
            out = out + (math.log1p(-pi0) if pi0 < 1 else _NEG_INF)
            zero = math.log(pi0 + (1 - pi0) * math.exp(-lam))
        return np.where(k == 0, zero, out)

    def _upper(self, tail_tol):
        pi0, lam = float(self.pi0), float(self.lam)
        if pi0 == 1:
            return 0
        tol = tail_tol / (1 - pi0)
        if tol >= 1:
            return 0
        return _search_upper(lambda n: stats.poisson.sf(n, lam), tol, stats.poisson.isf(tol, lam))

    @property
    def mean(self):
        return (1 - self.pi0) * self.lam

    @property
    def variance(self):
        return (1 - self.pi0) * self.lam * (1 + self.pi0 * self.lam)

    def covers_all(self):
        return self.pi0 < 1

    def support_upto(self, cap):
        return ([0], False) if self.pi0 == 1 else _all_upto(cap)

    def _sample(self, rng, n):
        keep = rng.random(n) >= float(self.pi0)
        return np.where(keep, rng.poisson(float(self.lam), size=n), 0).astype(np.int64)

    def _sum_closed(self, m):
        if self.pi0 == 1:
            return PointMass(0)
        if self.pi0 == 0:
            return Poisson(normalize(self.lam * m))
        return Compound(binomial(m, 1 - self.pi0), Poisson(self.lam))

    def to_text(self):
        return f"zip(pi0={format_number(self.pi0)},lambda={format_number(self.lam)})"


@dataclass(frozen=True)
class ZeroInflatedGeometric(Distribution):
    """X = Y * G with Y ~ Bernoulli(1 - p) independent of G ~ Geometric(q)."""

    p: object
    q: object
    family: ClassVar[str] = "zig"

    def __post_init__(self):
        _check_prob("p", self.p)
        _check_prob("q", self.q, open_low=True, open_high=True)

    def _logpmf(self, k):
        p, q = float(self.p), float(self.q)
        with np.errstate(divide="ignore"):
            rest = (math.log1p(-p) if p < 1 else _NEG_INF) + kern.negbin_logpmf(k, 1.0, q)
            zero = math.log(p + (1 - p) * q)
        return np.where(k == 0, zero, rest)

    def _upper(self, tail_tol):
        p, q = float(self.p), float(self.q)
        if p == 1:
            return 0
        tol = tail_tol / (1 - p)
        if tol >= 1:
            return 0
        return _search_upper(lambda n: stats.nbinom.sf(n, 1, q), tol, stats.nbinom.isf(tol, 1, q))

    @property
    def mean(self):
        return div((1 - self.p) * (1 - self.q), self.q)

    @property
    def variance(self):
        second = div((1 - self.p) * (1 - self.q) * (2 - self.q), self.q * self.q)
        return second - self.mean * self.mean

    def covers_all(self):
        return self.p < 1

    def support_upto(self, cap):
        return ([0], False) if self.p == 1 else _all_upto(cap)

    def _sample(self, rng, n):
        keep = rng.random(n) >= float(self.p)
        return np.where(keep, rng.geometric(float(self.q), size=n) - 1, 0).astype(np.int64)

    def _sum_closed(self, m):
        if self.p == 1:
            return PointMass(0)
        if self.p == 0:
            return NegativeBinomial(m, self.q)
        return Compound(binomial(m, 1 - self.p), Geometric(self.q))

    def to_text(self):
        return f"zig({_fmt_args(p=self.p, q=self.q)})"


@dataclass(frozen=True)
class ScaledBernoulli(Distribution):
    """s with probability p, otherwise 0."""

    s: int
    p: object
    family: ClassVar[str] = "scaled_bernoulli"

    def __post_init__(self):
        _check_count("s", self.s, 1)
        object.__setattr__(self, "s", _as_int(self.s))
        _check_prob("p", self.p)

    def _logpmf(self, k):
        p = float(self.p)
        v0 = math.log1p(-p) if p < 1 else _NEG_INF
        vs = math.log(p) if p > 0 else _NEG_INF
        return np.where(k == 0, v0, np.where(k == self.s, vs, _NEG_INF))

    def _upper(self, tail_tol):
        return self.s if self.p > 0 else 0

    @property
    def is_finite(self):
        return True

    @property
    def mean(self):
        return self.s * self.p

    @property
    def variance(self):
        return self.s * self.s * self.p * (1 - self.p)

    def support_upto(self, cap):
        vals = [v for v, w in ((0, 1 - self.p), (self.s, self.p)) if w > 0 and v <= cap]
        return vals, self.p > 0 and self.s > cap

    def _sample(self, rng, n):
        return np.where(rng.random(n) < float(self.p), self.s, 0).astype(np.int64)

    def _sum_closed(self, m):
        return compound(binomial(m, self.p), PointMass(self.s))

    def to_text(self):
        return f"scaled_bernoulli({_fmt_args(s=self.s, p=self.p)})"


@dataclass(frozen=True)
class FiniteSupport(Distribution):
    """Explicit atoms. ``tail_mass`` records probability dropped by truncation."""

    values: tuple
    probs: tuple
    tail_mass: float = 0.0
    _arrays: tuple = field(init=False, repr=False, compare=False, hash=False, default=())
    family: ClassVar[str] = "finite"

    def __post_init__(self):
        vals = tuple(int(v) for v in self.values)
        probs = tuple(self.probs)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "probs", probs)
        if not vals:
            raise ValidationError("finite law needs at least one atom", key="values")
        if len(vals) != len(probs):
            raise ValidationError("values and probs differ in length", key="probs")
        if vals[0] < 0 or any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValidationError("values must be non-negative and strictly increasing", key="values")
        for w in probs:
            check_finite("prob", w)
            if w < 0:
                raise ValidationError(f"negative probability {w!r}", key="probs")
        check_finite("tail_mass", self.tail_mass)
        if not 0 <= self.tail_mass <= 1:
            raise ValidationError("tail_mass must lie in [0, 1]", key="tail_mass")
        total = float(sum(Fraction(w) if is_exact(w) else w for w in probs))
        if abs(total + float(self.tail_mass) - 1.0) > 1e-12:
            raise ValidationError(f"probabilities sum to {total!r}, not 1", key="probs")
        v = np.asarray(vals, dtype=np.int64)
        w = np.asarray([float(x) for x in probs], dtype=np.float64)
        with np.errstate(divide="ignore"):
            lw = np.log(w)
        v.setflags(write=False)
        w.setflags(write=False)
        lw.setflags(write=False)
        object.__setattr__(self, "_arrays", (v, w, lw))

    @classmethod
    def from_mapping(cls, table: Mapping[int, object]) -> "FiniteSupport":
        items = sorted(table.items())
        return cls(tuple(k for k, _ in items), tuple(w for _, w in items))

    @classmethod
    def from_table(cls, table, tail_mass: float | None = None) -> "FiniteSupport":
        """Atoms from a dense pmf array indexed from 0 (zero entries dropped)."""
        table = np.asarray(table, dtype=np.float64)
        nz = np.nonzero(table > 0)[0]
        if tail_mass is None:
            tail_mass = min(max(0.0, 1.0 - float(table[nz].sum())), 1.0)
        return cls(tuple(int(i) for i in nz), tuple(float(x) for x in table[nz]), float(tail_mass))

    @property
    def atoms(self) -> list[tuple[int, object]]:
        return list(zip(self.values, self.probs))

    def _logpmf(self, k):
        v, _, lw = self._arrays
        idx = np.searchsorted(v, k)
        idx_c = np.minimum(idx, len(v) - 1)
        hit = (idx < len(v)) & (v[idx_c] == k)
        return np.where(hit, lw[idx_c], _NEG_INF)

    def _upper(self, tail_tol):
        nz = [v for v, w in zip(self.values, self.probs) if w > 0]
        return nz[-1] if nz else 0

    @property
    def is_finite(self):
        return True

    @property
    def mean(self):
        return sum((v * w for v, w in zip(self.values, self.probs)), 0)

    @property
    def variance(self):
        m = self.mean
        return sum(((v - m) ** 2 * w for v, w in zip(self.values, self.probs)), 0)

    def support_upto(self, cap):
        vals = [v for v, w in zip(self.values, self.probs) if w > 0]
        return [v for v in vals if v <= cap], any(v > cap for v in vals)

    def _sample(self, rng, n):
        v, w, _ = self._arrays
        return rng.choice(v, size=n, p=w / w.sum()).astype(np.int64)

    def to_text(self):
        body = ",".join(f"{v}:{format_number(w)}" for v, w in zip(self.values, self.probs))
        return f"finite{{{body}}}"


@dataclass(frozen=True)
class Compound(Distribution):
    """Random sum S_1 + ... + S_J with J ~ count and iid S_i ~ summand."""

    count: Distribution
    summand: Distribution
    tail_tol: float = DEFAULT_TAIL_TOL
    _cache: dict = field(init=False, repr=False, compare=False, hash=False, default=None)
    family: ClassVar[str] = "compound"

    def __post_init__(self):
        if not isinstance(self.count, Distribution) or not isinstance(self.summand, Distribution):
            raise ValidationError("compound needs distributions for count and summand")
        object.__setattr__(self, "_cache", {})

    def _count_logw(self) -> np.ndarray:
        lw = self._cache.get("logw")
        if lw is None:
            lw = self.count.logpmf_table(self.tail_tol)
            self._cache["logw"] = lw
        return lw

    def _logpmf(self, k):
        s = self.summand
        logw = self._count_logw()
        if isinstance(s, Poisson):
            return kern.mix_poisson_logpmf(k, logw, s.mu)
        if isinstance(s, Bernoulli):
            return kern.mix_binom_logpmf(k, logw, 1, s.p)
        if isinstance(s, Binomial):
            return kern.mix_binom_logpmf(k, logw, s.n, s.p)
        if isinstance(s, NegativeBinomial):
            return kern.mix_negbin_logpmf(k, logw, s.r, s.q)
        if isinstance(s, Geometric):
            return kern.mix_negbin_logpmf(k, logw, 1.0, s.q)
        if isinstance(s, PointMass):
            if s.c == 0:
                return np.where(k == 0, logsumexp(logw), _NEG_INF)
            j = np.where(k % s.c == 0, k // s.c, -1)
            return np.where(k >= 0, self.count.logpmf(j), _NEG_INF)
        table = self._generic_table()
        with np.errstate(divide="ignore"):
            lt = np.log(table)
        inside = (k >= 0) & (k < len(table))
        return np.where(inside, lt[np.clip(k, 0, len(table) - 1)], _NEG_INF)

    def _generic_table(self) -> np.ndarray:
        t = self._cache.get("table")
        if t is not None:
            return t
        w = self.count.pmf_table(self.tail_tol / 2)
        base = np.asarray(self.summand.pmf_table(self.tail_tol / 2))
        budget = self.tail_tol / (2 * max(len(w), 1))
        acc = np.zeros(1)
        conv = np.ones(1)
        for j, wj in enumerate(w):
            if wj > 0:
                if len(conv) > len(acc):
                    acc = np.pad(acc, (0, len(conv) - len(acc)))
                acc[: len(conv)] += wj * conv
            if j + 1 < len(w):
                conv = _trim(_conv(conv, base), budget)
                if len(conv) > SUPPORT_CAP:
                    raise SupportOverflow(f"compound support exceeds {SUPPORT_CAP}")
        acc.setflags(write=False)
        self._cache["table"] = acc
        return acc

    def _upper(self, tail_tol):
        j_hi = self.count.upper(tail_tol / 2)
        if j_hi == 0:
            return 0
        return iid_sum(self.summand, j_hi, tail_tol / 2).upper(tail_tol / 2)

    @property
    def is_finite(self):
        return self.count.is_finite and self.summand.is_finite

    @property
    def mean(self):
        return self.count.mean * self.summand.mean

    @property
    def variance(self):
        ms = self.summand.mean
        return self.count.mean * self.summand.variance + self.count.variance * ms * ms

    def covers_all(self):
        if not self.summand.covers_all():
            return False
        vals, _ = self.count.support_upto(max(self.count.upper(self.tail_tol), 1))
        return any(v >= 1 for v in vals)

    def support_upto(self, cap):
        s_vals, s_exceeds = self.summand.support_upto(cap)
        if s_vals == [0] and not s_exceeds:
            return [0], False
        if self.covers_all():
            return _all_upto(cap)
        c_vals, c_exceeds = self.count.support_upto(cap)
        c_set = set(c_vals)
        s_mask = np.zeros(cap + 1, dtype=np.int64)
        s_mask[s_vals] = 1
        reach = np.zeros(cap + 1, dtype=bool)
        reach[0] = True
        hit = np.zeros(cap + 1, dtype=bool)
        for j in range(cap + 2):
            if j in c_set:
                hit |= reach
            if not (c_exceeds or any(v > j for v in c_vals)):
                break
            nxt = np.convolve(reach.astype(np.int64), s_mask)[: cap + 1] > 0
            if np.array_equal(nxt, reach):
                # stationary from here on, and a larger count is still possible
                hit |= reach
                break
            reach = nxt
            if not reach.any():
                break
        positive_count = c_exceeds or any(v >= 1 for v in c_vals)
        s_max = max(s_vals) if s_vals else 0
        exceeds = (
            (s_exceeds and positive_count)
            or (c_exceeds and (s_max > 0 or s_exceeds))
            or (bool(c_vals) and s_max * max(c_vals) > cap)
        )
        return [int(i) for i in np.nonzero(hit)[0]], bool(exceeds)

    def _sample(self, rng, n):
        counts = self.count._sample(rng, n)
        s = self.summand
        if isinstance(s, Poisson):
            return rng.poisson(float(s.mu) * counts).astype(np.int64)
        if isinstance(s, Bernoulli):
            return rng.binomial(counts, float(s.p)).astype(np.int64)
        if isinstance(s, Binomial):
            return rng.binomial(counts * s.n, float(s.p)).astype(np.int64)
        if isinstance(s, (NegativeBinomial, Geometric)):
            r = 1.0 if isinstance(s, Geometric) else float(s.r)
            out = np.zeros(n, dtype=np.int64)
            pos = counts > 0
            if pos.any():
                out[pos] = rng.negative_binomial(r * counts[pos], float(s.q))
            return out
        if isinstance(s, PointMass):
            return (counts * s.c).astype(np.int64)
        return np.array([s._sample(rng, int(c)).sum() if c > 0 else 0 for c in counts], dtype=np.int64)

    def _sum_closed(self, m):
        return compound(iid_sum(self.count, m, self.tail_tol), self.summand, self.tail_tol)

    def to_text(self):
        return f"compound(count={self.count.to_text()},summand={self.summand.to_text()})"


# -------------------------------------------------------------- factories ---


def binomial(n: int, p) -> Distribution:
    """Binomial(n, p) normalised: n = 0 is the point mass at 0, n = 1 is Bernoulli."""
    n = int(n)
    if n == 0 or p == 0:
        return PointMass(0)
    if n == 1:
        return Bernoulli(p)
    return Binomial(n, p)


def compound(count: Distribution, summand: Distribution, tail_tol: float = DEFAULT_TAIL_TOL) -> Distribution:
    """Random sum, collapsed to a simpler law when the count or summand is degenerate."""
    if isinstance(count, PointMass):
        return iid_sum(summand, count.c, tail_tol)
    if isinstance(summand, PointMass) and summand.c == 0:
        return PointMass(0)
    if isinstance(summand, PointMass) and summand.c == 1:
        return count
    if isinstance(summand, Poisson) and summand.mu == 0:
        return PointMass(0)
    return Compound(count, summand, tail_tol)


# ------------------------------------------------------------- operations ---


def pmf(d: Distribution, k):
    return d.pmf(k)


def sample(d: Distribution, rng: np.random.Generator, size=None):
    return d.sample(rng, size)


def moments(d: Distribution, tail_tol: float = DEFAULT_TAIL_TOL) -> Moments:
    """Analytic mean/variance plus the third absolute central moment from the pmf table."""
    if not 0 < tail_tol <= 1e-6:
        raise ValidationError("tail_tol must lie in (0, 1e-6]", key="tail_tol")
    mean, var = d.mean, d.variance
    if not (math.isfinite(float(mean)) and math.isfinite(float(var))):
        raise NonFiniteMoment(f"{d.to_text()} has non-finite moments")
    table = d.pmf_table(tail_tol)
    k = np.arange(len(table), dtype=np.float64)
    rho3 = float(np.sum(np.abs(k - float(mean)) ** 3 * table))
    if d.is_finite:
        omitted = float(getattr(d, "tail_mass", 0.0))
    else:
        omitted = max(0.0, 1.0 - float(table.sum()))
    return Moments(mean, var, rho3, omitted, omitted > 0 or not d.is_finite)


# above this many multiply-adds, FFT convolution beats the direct sum
_FFT_WORK = 2_000_000


def _conv(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Convolution of two pmf tables; FFT for large inputs, with rounding noise set to 0."""
    if len(a) * len(b) <= _FFT_WORK or min(len(a), len(b)) < 64:
        return np.convolve(a, b)
    out = signal.fftconvolve(a, b)
    # entries below the FFT rounding floor carry no information
    out[out < 64 * np.finfo(float).eps * out.max()] = 0.0
    return out


def _trim(table: np.ndarray, budget: float) -> np.ndarray:
    """Drop the upper tail of ``table`` whose mass is below ``budget``, and trailing zeros."""
    tail = np.cumsum(table[::-1])[::-1]
    keep = max(int(np.count_nonzero(tail >= budget)), 1)
    t = table[:keep]
    nz = np.nonzero(t > 0)[0]
    return t[: nz[-1] + 1] if len(nz) else t[:1]


def _convolve_power(d: Distribution, m: int, tail_tol: float, cap: int) -> FiniteSupport:
    # mass trimmed from a power that stands for 2^i copies is lost about m / 2^i times over
    steps = 2 * m.bit_length()
    budget = tail_tol / (2 * m + steps)
    power = np.asarray(d.pmf_table(budget), dtype=np.float64)
    result = None
    while m:
        if m & 1:
            result = power if result is None else _trim(_conv(result, power), budget)
        m >>= 1
        if m:
            power = _trim(_conv(power, power), budget)
        for t in (result, power):
            if t is not None and len(t) > cap + 1:
                raise SupportOverflow(f"iid sum support exceeds cap {cap}")
    return FiniteSupport.from_table(result)


def iid_sum(d: Distribution, m: int, tail_tol: float = DEFAULT_TAIL_TOL, cap: int | None = None) -> Distribution:
    """Law of the sum of m iid copies of d."""
    m = int(m)
    if m < 0:
        raise ValidationError("m must be >= 0", key="m")
    if m == 0:
        return PointMass(0)
    if m == 1:
        return d
    closed = d._sum_closed(m)
    if closed is not None:
        return closed
    return _convolve_power(d, m, tail_tol, SUPPORT_CAP if cap is None else cap)


def consecutive_overlap(d: Distribution, tail_tol: float = DEFAULT_TAIL_TOL) -> float:
    """max over n >= 1 of min(P(n), P(n-1))."""
    t = d.pmf_table(tail_tol)
    if len(t) < 2:
        return 0.0
    return float(np.max(np.minimum(t[1:], t[:-1])))


# ----------------------------------------------------------- divisibility ---

DIVISIBLE = "divisible"
NOT_DIVISIBLE = "not_divisible"
UNKNOWN = "unknown"


@dataclass(frozen=True)
class DivisibilityVerdict:
    """``component`` is None for a divisible law whose component has no closed form."""

    outcome: str
    component: Distribution | None = None
    rationale: str = ""

    @property
    def divisible(self) -> bool:
        return self.outcome == DIVISIBLE

    @property
    def component_available(self) -> bool:
        return self.component is not None


DivisionRule = Callable[[Distribution, int], "DivisibilityVerdict | None"]
_EXTRA_RULES: list[DivisionRule] = []


def register_division_rule(rule: DivisionRule) -> DivisionRule:
    """Add a special-case rule consulted before the catalog falls back to Unknown."""
    _EXTRA_RULES.append(rule)
    return rule


def unregister_division_rule(rule: DivisionRule) -> None:
    _EXTRA_RULES.remove(rule)


def _yes(component, rationale):
    return DivisibilityVerdict(DIVISIBLE, component, rationale)


def _catalog_division(d: Distribution, n: int) -> DivisibilityVerdict | None:
    if isinstance(d, PointMass):
        if d.c % n == 0:
            return _yes(PointMass(d.c // n), "point-mass-split")
        return DivisibilityVerdict(NOT_DIVISIBLE, None, "point-mass-indivisible")
    if isinstance(d, Poisson):
        return _yes(Poisson(div(d.mu, n)), "poisson-additive")
    if isinstance(d, NegativeBinomial):
        return _yes(NegativeBinomial(div(d.r, n), d.q), "negbin-shape-split")
    if isinstance(d, Geometric):
        return _yes(NegativeBinomial(Fraction(1, n), d.q), "geometric-negbin-split")
    if isinstance(d, Bernoulli):
        if d.p == 0:
            return _yes(PointMass(0), "point-mass-split")
        if d.p == 1:
            return DivisibilityVerdict(NOT_DIVISIBLE, None, "point-mass-indivisible")
        return DivisibilityVerdict(NOT_DIVISIBLE, None, "bernoulli-two-point")
    if isinstance(d, Binomial):
        if d.p == 0:
            return _yes(PointMass(0), "point-mass-split")
        if d.n % n == 0:
            comp = PointMass(d.n // n) if d.p == 1 else binomial(d.n // n, d.p)
            return _yes(comp, "binomial-trials-split")
        return DivisibilityVerdict(NOT_DIVISIBLE, None, "binomial-trials-indivisible")
    if isinstance(d, ZeroInflatedGeometric):
        if d.p == 1:
            return _yes(PointMass(0), "point-mass-split")
        if d.p == 0:
            return _yes(NegativeBinomial(Fraction(1, n), d.q), "geometric-negbin-split")
        return DivisibilityVerdict(DIVISIBLE, None, "zero-inflated-geometric")
    if isinstance(d, ZeroInflatedPoisson):
        if d.pi0 == 1:
            return _yes(PointMass(0), "point-mass-split")
        if d.pi0 == 0:
            return _yes(Poisson(div(d.lam, n)), "poisson-additive")
        return None
    if isinstance(d, Compound):
        inner = divide(d.count, n)
        if inner.divisible and inner.component is not None:
            return _yes(compound(inner.component, d.summand, d.tail_tol), "compound-count-split")
        return None
    return None


def divide(d: Distribution, n: int) -> DivisibilityVerdict:
    """Decide whether d is the law of a sum of n iid non-negative integer variables."""
    n = int(n)
    if n < 1:
        raise ValidationError("n must be >= 1", key="n")
    if n == 1:
        return _yes(d, "trivial")
    verdict = _catalog_division(d, n)
    if verdict is not None:
        return verdict
    for rule in list(_EXTRA_RULES):
        v = rule(d, n)
        if v is not None:
            return v
    return DivisibilityVerdict(UNKNOWN, None, "no-rule")
