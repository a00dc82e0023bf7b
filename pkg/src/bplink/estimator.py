"""Total variation distance: exact for one-step laws, importance sampling for k-step paths.

For path laws P (sampled) and Q with Q << P,

    TVD(P, Q) = 1/2 E_P | 1 - Q(X)/P(X) |,

so averaging 1/2 |1 - exp(log Q - log P)| over paths drawn from P is unbiased.
Paths are drawn in fixed-size chunks; chunk c uses random stream (seed, c),
and per-path terms are concatenated in chunk order, so the estimate does not
depend on how many workers process the chunks.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .distributions import DEFAULT_TAIL_TOL, Distribution
from .errors import LikelihoodUnderflow, ValidationError
from .kernels import TransitionKernel
from .rng import derive_seed, stream

CHUNK_SIZE = 8192
SIDES = ("psdbp", "cbp")
Z0_RULES = {"one": 0, "capacity": 1}


def default_workers() -> int:
    return max(1, int(os.environ.get("BPLINK_WORKERS", "1")))


@dataclass
class ProcessPair:
    """Two processes compared path by path. ``psdbp`` and ``cbp`` name the two sides."""

    psdbp: object
    cbp: object
    tail_tol: float = DEFAULT_TAIL_TOL
    _kernels: dict = field(default_factory=dict, repr=False, compare=False)

    def kernel(self, side: str) -> TransitionKernel:
        if side not in SIDES:
            raise ValidationError(f"side must be one of {SIDES}", key="side")
        k = self._kernels.get(side)
        if k is None:
            k = TransitionKernel(getattr(self, side), self.tail_tol)
            self._kernels[side] = k
        return k


def exact_tvd(a: Distribution, b: Distribution, tail_tol: float = DEFAULT_TAIL_TOL) -> float:
    """1/2 sum |P_a(n) - P_b(n)| over the union of both truncated supports."""
    ta, tb = a.pmf_table(tail_tol), b.pmf_table(tail_tol)
    n = max(len(ta), len(tb))
    return 0.5 * float(np.abs(np.pad(ta, (0, n - len(ta))) - np.pad(tb, (0, n - len(tb)))).sum())


def exact_one_step_tvd(pair: ProcessPair, z: int, tail_tol: float | None = None) -> float:
    if tail_tol is None or tail_tol == pair.tail_tol:
        ra, rb = pair.kernel("psdbp").row(z), pair.kernel("cbp").row(z)
        n = max(len(ra), len(rb))
        return 0.5 * float(np.abs(np.pad(ra, (0, n - len(ra))) - np.pad(rb, (0, n - len(rb)))).sum())
    return exact_tvd(pair.kernel("psdbp").law(z), pair.kernel("cbp").law(z), tail_tol)


def exact_path_tvd(pair: ProcessPair, z0: int, k: int, min_prob: float = 0.0) -> float:
    """TVD between the laws of (Z_1, ..., Z_k) by enumerating every path; small supports only."""
    ka, kb = pair.kernel("psdbp"), pair.kernel("cbp")
    paths = {(int(z0),): (1.0, 1.0)}
    for _ in range(k):
        nxt = {}
        for path, (pa, pb) in paths.items():
            ra, rb = ka.row(path[-1]), kb.row(path[-1])
            for v in range(max(len(ra), len(rb))):
                qa = ra[v] if v < len(ra) else 0.0
                qb = rb[v] if v < len(rb) else 0.0
                if qa + qb > min_prob:
                    nxt[path + (v,)] = (pa * qa, pb * qb)
        paths = nxt
    return 0.5 * math.fsum(abs(pa - pb) for pa, pb in paths.values())


@dataclass(frozen=True)
class TvdEstimate:
    value: float
    stderr: float
    replicates: int
    seed: int
    sampled_side: str
    z0: int
    k: int

    def to_dict(self) -> dict:
        return asdict(self)


def path_terms(pair: ProcessPair, z0: int, k: int, n: int, rng: np.random.Generator, side: str = "psdbp") -> np.ndarray:
    """Per-path terms 1/2 |1 - L_other / L_self| for n paths drawn from ``side``."""
    own = pair.kernel(side)
    other = pair.kernel("cbp" if side == "psdbp" else "psdbp")
    z = np.full(n, int(z0), dtype=np.int64)
    ll_own = np.zeros(n)
    ll_other = np.zeros(n)
    for _ in range(k):
        nxt = own.sample_next(z, rng)
        ll_own += own.logpmf_pairs(z, nxt)
        ll_other += other.logpmf_pairs(z, nxt)
        z = nxt
    if not np.all(np.isfinite(ll_own)):
        raise LikelihoodUnderflow("a sampled path has zero likelihood under its own kernel; tighten tail_tol")
    with np.errstate(over="ignore"):
        return 0.5 * np.abs(np.expm1(ll_other - ll_own))


def _chunk_sizes(N: int, chunk_size: int) -> list[int]:
    full, rest = divmod(N, chunk_size)
    return [chunk_size] * full + ([rest] if rest else [])


def estimate_path_tvd(
    pair: ProcessPair,
    z0: int,
    k: int,
    N: int,
    seed: int,
    side: str = "psdbp",
    workers: int | None = None,
    chunk_size: int = CHUNK_SIZE,
) -> TvdEstimate:
    """Importance-sampling estimate of the TVD between the laws of k-step paths started at z0."""
    if N < 1 or k < 1:
        raise ValidationError("N and k must be >= 1")
    if side not in SIDES:
        raise ValidationError(f"side must be one of {SIDES}", key="side")
    workers = default_workers() if workers is None else max(1, int(workers))
    sizes = _chunk_sizes(int(N), int(chunk_size))

    def run(c: int) -> np.ndarray:
        return path_terms(pair, z0, k, sizes[c], stream(seed, c), side)

    if workers == 1 or len(sizes) == 1:
        parts = [run(c) for c in range(len(sizes))]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    terms = np.concatenate(parts)
    value = float(np.mean(terms))
    stderr = float(np.std(terms, ddof=1) / math.sqrt(len(terms))) if len(terms) > 1 else 0.0
    return TvdEstimate(value, stderr, int(N), int(seed), side, int(z0), int(k))


@dataclass(frozen=True)
class SweepRow:
    K: int
    k: int
    z0: int
    N: int
    seed: int
    tvd_estimate: float
    stderr: float


SWEEP_HEADER = "K,k,z0,N,seed,tvd_estimate,stderr"


def cell_seed(seed: int, K: int, k: int, z0_rule: str) -> int:
    return derive_seed(seed, int(K), int(k), Z0_RULES[z0_rule])


def sweep(
    pair_family: Callable[[int], ProcessPair],
    K_grid,
    k_grid,
    z0_rule: str,
    N: int,
    seed: int,
    side: str = "psdbp",
    workers: int | None = None,
    chunk_size: int = CHUNK_SIZE,
) -> list[SweepRow]:
    """One estimate per (K, k) cell, each with its own seed derived from the master seed."""
    if z0_rule not in Z0_RULES:
        raise ValidationError(f"z0 rule must be one of {sorted(Z0_RULES)}", key="z0_rule")
    K_grid, k_grid = sorted(set(K_grid)), sorted(set(k_grid))
    if not K_grid or not k_grid:
        raise ValidationError("grids must be non-empty")
    rows = []
    for K in K_grid:
        pair = pair_family(K)
        z0 = 1 if z0_rule == "one" else int(K)
        for k in k_grid:
            s = cell_seed(seed, K, k, z0_rule)
            est = estimate_path_tvd(pair, z0, k, N, s, side, workers, chunk_size)
            rows.append(SweepRow(int(K), int(k), z0, int(N), s, est.value, est.stderr))
    return rows


def sweep_csv(rows: list[SweepRow]) -> str:
    lines = [SWEEP_HEADER]
    for r in sorted(rows, key=lambda r: (r.K, r.k)):
        lines.append(f"{r.K},{r.k},{r.z0},{r.N},{r.seed},{r.tvd_estimate!r},{r.stderr!r}")
    return "\n".join(lines) + "\n"


def sweep_json(rows: list[SweepRow]) -> str:
    return json.dumps([asdict(r) for r in sorted(rows, key=lambda r: (r.K, r.k))], indent=2)

