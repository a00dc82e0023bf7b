"""Hot log-pmf kernels.

Every kernel exists twice: a loop version compiled with numba and a
vectorised numpy/scipy version. Both take an int64 array of evaluation points
and return float64 log-probabilities (``-inf`` outside the support).

The ``mix_*`` kernels evaluate random sums ``S_1 + ... + S_J`` where the count
``J`` has log-weights ``logw[j]`` and the sum of ``j`` summands has a closed
form (Poisson, binomial, negative binomial). They dominate the cost of the
importance-sampling estimator.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln, logsumexp, xlog1py, xlogy

from ._accel import USE_NUMBA, njit

_NEG_INF = -np.inf
# elements per block in the numpy mixtures
_BLOCK = 1 << 21


# ---------------------------------------------------------------- numba ---


@njit
def _nb_poisson_logpmf(k, mu):
    out = np.empty(k.shape[0])
    lmu = math.log(mu) if mu > 0.0 else 0.0
    for i in range(k.shape[0]):
        ki = k[i]
        if ki < 0:
            out[i] = -np.inf
        elif mu == 0.0:
            out[i] = 0.0 if ki == 0 else -np.inf
        else:
            out[i] = ki * lmu - mu - math.lgamma(ki + 1.0)
    return out


@njit
def _nb_binom_logpmf(k, n, p):
    out = np.empty(k.shape[0])
    lfn = math.lgamma(n + 1.0)
    for i in range(k.shape[0]):
        ki = k[i]
        if ki < 0 or ki > n:
            out[i] = -np.inf
        elif p == 0.0:
            out[i] = 0.0 if ki == 0 else -np.inf
        elif p == 1.0:
            out[i] = 0.0 if ki == n else -np.inf
        else:
            out[i] = (
                lfn
                - math.lgamma(ki + 1.0)
                - math.lgamma(n - ki + 1.0)
                + ki * math.log(p)
                + (n - ki) * math.log1p(-p)
            )
    return out


@njit
def _nb_negbin_logpmf(k, r, q):
    out = np.empty(k.shape[0])
    lgr = math.lgamma(r)
    rlq = r * math.log(q)
    l1q = math.log1p(-q)
    for i in range(k.shape[0]):
        ki = k[i]
        if ki < 0:
            out[i] = -np.inf
        else:
            out[i] = math.lgamma(ki + r) - lgr - math.lgamma(ki + 1.0) + rlq + ki * l1q
    return out


@njit
def _nb_logsumexp_row(terms, n):
    m = -np.inf
    for j in range(n):
        if terms[j] > m:
            m = terms[j]
    if m == -np.inf:
        return -np.inf
    s = 0.0
    for j in range(n):
        s += math.exp(terms[j] - m)
    return m + math.log(s)


@njit
def _nb_mix_poisson_logpmf(k, logw, lam):
    nj = logw.shape[0]
    out = np.empty(k.shape[0])
    terms = np.empty(nj)
    means = np.empty(nj)
    logmeans = np.empty(nj)
    for j in range(nj):
        means[j] = j * lam
        logmeans[j] = math.log(j * lam) if j > 0 and lam > 0.0 else 0.0
    for i in range(k.shape[0]):
        ki = k[i]
        if ki < 0:
            out[i] = -np.inf
            continue
        lf = math.lgamma(ki + 1.0)
        for j in range(nj):
            if logw[j] == -np.inf:
                terms[j] = -np.inf
            elif means[j] == 0.0:
                terms[j] = logw[j] if ki == 0 else -np.inf
            else:
                terms[j] = logw[j] + ki * logmeans[j] - means[j] - lf
        out[i] = _nb_logsumexp_row(terms, nj)
    return out


@njit
def _nb_mix_binom_logpmf(k, logw, n, p):
    nj = logw.shape[0]
    out = np.empty(k.shape[0])
    terms = np.empty(nj)
    lp = math.log(p) if p > 0.0 else 0.0
    l1p = math.log1p(-p) if p < 1.0 else 0.0
    for i in range(k.shape[0]):
        ki = k[i]
        if ki < 0:
            out[i] = -np.inf
            continue
        lfk = math.lgamma(ki + 1.0)
        for j in range(nj):
            nn = j * n
            if logw[j] == -np.inf or ki > nn:
                terms[j] = -np.inf
            elif p == 0.0:
                terms[j] = logw[j] if ki == 0 else -np.inf
            elif p == 1.0:
                terms[j] = logw[j] if ki == nn else -np.inf
            else:
                terms[j] = (
                    logw[j]
                    + math.lgamma(nn + 1.0)
                    - lfk
                    - math.lgamma(nn - ki + 1.0)
                    + ki * lp
                    + (nn - ki) * l1p
                )
        out[i] = _nb_logsumexp_row(terms, nj)
    return out


@njit
def _nb_mix_negbin_logpmf(k, logw, r, q):
    nj = logw.shape[0]
    out = np.empty(k.shape[0])
    terms = np.empty(nj)
    lq = math.log(q)
    l1q = math.log1p(-q)
    for i in range(k.shape[0]):
        ki = k[i]
        if ki < 0:
            out[i] = -np.inf
            continue
        lfk = math.lgamma(ki + 1.0)
        for j in range(nj):
            if logw[j] == -np.inf:
                terms[j] = -np.inf
            elif j == 0:
                terms[j] = logw[j] if ki == 0 else -np.inf
            else:
                rj = j * r
                terms[j] = logw[j] + math.lgamma(ki + rj) - math.lgamma(rj) - lfk + rj * lq + ki * l1q
        out[i] = _nb_logsumexp_row(terms, nj)
    return out


# ---------------------------------------------------------------- numpy ---


def _np_poisson_logpmf(k, mu):
    k = np.asarray(k, dtype=np.int64)
    with np.errstate(divide="ignore"):
        out = xlogy(k, mu) - mu - gammaln(k + 1.0)
    return np.where(k >= 0, out, _NEG_INF)


def _np_binom_logpmf(k, n, p):
    k = np.asarray(k, dtype=np.int64)
    inside = (k >= 0) & (k <= n)
    kc = np.clip(k, 0, n)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = gammaln(n + 1.0) - gammaln(kc + 1.0) - gammaln(n - kc + 1.0) + xlogy(kc, p) + xlog1py(n - kc, -p)
    return np.where(inside, out, _NEG_INF)


def _np_negbin_logpmf(k, r, q):
    k = np.asarray(k, dtype=np.int64)
    kc = np.maximum(k, 0)
    out = gammaln(kc + r) - gammaln(r) - gammaln(kc + 1.0) + r * math.log(q) + kc * math.log1p(-q)
    return np.where(k >= 0, out, _NEG_INF)


def _blocks(k, nj):
    step = max(1, _BLOCK // max(nj, 1))
    for start in range(0, k.shape[0], step):
        yield start, k[start : start + step]


def _np_mix(k, logw, component):
    k = np.asarray(k, dtype=np.int64)
    logw = np.asarray(logw, dtype=np.float64)
    out = np.empty(k.shape[0])
    j = np.arange(logw.shape[0])
    for start, kb in _blocks(k, j.shape[0]):
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = logw[None, :] + component(kb[:, None], j[None, :])
        terms = np.where(np.isnan(terms), _NEG_INF, terms)
        out[start : start + kb.shape[0]] = logsumexp(terms, axis=1)
    out[k < 0] = _NEG_INF
    return out


def _np_mix_poisson_logpmf(k, logw, lam):
    def component(kk, jj):
        mu = jj * lam
        return np.where(kk >= 0, xlogy(kk, mu) - mu - gammaln(np.maximum(kk, 0) + 1.0), _NEG_INF)

    return _np_mix(k, logw, component)


def _np_mix_binom_logpmf(k, logw, n, p):
    def component(kk, jj):
        nn = jj * n
        inside = (kk >= 0) & (kk <= nn)
        kc = np.clip(kk, 0, nn)
        val = gammaln(nn + 1.0) - gammaln(kc + 1.0) - gammaln(nn - kc + 1.0) + xlogy(kc, p) + xlog1py(nn - kc, -p)
        return np.where(inside, val, _NEG_INF)

    return _np_mix(k, logw, component)


def _np_mix_negbin_logpmf(k, logw, r, q):
    def component(kk, jj):
        kc = np.maximum(kk, 0)
        rj = np.maximum(jj * r, 1e-300)
        val = gammaln(kc + rj) - gammaln(rj) - gammaln(kc + 1.0) + rj * math.log(q) + kc * math.log1p(-q)
        val = np.where(jj == 0, np.where(kk == 0, 0.0, _NEG_INF), val)
        return np.where(kk >= 0, val, _NEG_INF)

    return _np_mix(k, logw, component)


# ------------------------------------------------------------- dispatch ---


def _nb_call(fn, cast):
    def call(k, *args):
        k = np.ascontiguousarray(k, dtype=np.int64).reshape(-1)
        return fn(k, *cast(*args))

    call.__name__ = fn.__name__
    return call


def _f(*a):
    return tuple(float(x) for x in a)


def _mix_args(logw, *a):
    return (np.ascontiguousarray(logw, dtype=np.float64),) + tuple(float(x) for x in a)


def _binom_args(n, p):
    return int(n), float(p)


def _mix_binom_args(logw, n, p):
    return np.ascontiguousarray(logw, dtype=np.float64), int(n), float(p)


IMPLEMENTATIONS = {
    "numba": {
        "poisson_logpmf": _nb_call(_nb_poisson_logpmf, _f),
        "binom_logpmf": _nb_call(_nb_binom_logpmf, _binom_args),
        "negbin_logpmf": _nb_call(_nb_negbin_logpmf, _f),
        "mix_poisson_logpmf": _nb_call(_nb_mix_poisson_logpmf, _mix_args),
        "mix_binom_logpmf": _nb_call(_nb_mix_binom_logpmf, _mix_binom_args),
        "mix_negbin_logpmf": _nb_call(_nb_mix_negbin_logpmf, _mix_args),
    },
    "numpy": {
        "poisson_logpmf": _nb_call(_np_poisson_logpmf, _f),
        "binom_logpmf": _nb_call(_np_binom_logpmf, _binom_args),
        "negbin_logpmf": _nb_call(_np_negbin_logpmf, _f),
        "mix_poisson_logpmf": _nb_call(_np_mix_poisson_logpmf, _mix_args),
        "mix_binom_logpmf": _nb_call(_np_mix_binom_logpmf, _mix_binom_args),
        "mix_negbin_logpmf": _nb_call(_np_mix_negbin_logpmf, _mix_args),
    },
}

_active = IMPLEMENTATIONS["numba" if USE_NUMBA else "numpy"]

poisson_logpmf = _active["poisson_logpmf"]
binom_logpmf = _active["binom_logpmf"]
negbin_logpmf = _active["negbin_logpmf"]
mix_poisson_logpmf = _active["mix_poisson_logpmf"]
mix_binom_logpmf = _active["mix_binom_logpmf"]
mix_negbin_logpmf = _active["mix_negbin_logpmf"]
