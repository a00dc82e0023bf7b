"""Time the numba and numpy log-pmf kernels side by side, plus one end-to-end estimate per backend.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--skip-end-to-end]
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time

import numpy as np
from scipy import stats

from bplink import _kernels


def best_of(fn, repeat: int) -> float:
    fn()  # compile / warm caches
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases():
    k_small = np.arange(0, 2_000)
    k_large = np.arange(0, 200_000)
    logw = np.log(stats.binom(202, 0.5).pmf(np.arange(203)))
    yield "poisson_logpmf (2e5 points)", "poisson_logpmf", (k_large, 5000.0)
    yield "binom_logpmf (2e5 points)", "binom_logpmf", (k_large, 400_000, 0.3)
    yield "negbin_logpmf (2e5 points)", "negbin_logpmf", (k_large, 300.5, 0.01)
    yield "mix_poisson_logpmf (row, 203 weights)", "mix_poisson_logpmf", (k_small, logw, 3.0)
    yield "mix_binom_logpmf (row, 203 weights)", "mix_binom_logpmf", (k_small, logw, 5, 0.2)
    yield "mix_negbin_logpmf (row, 203 weights)", "mix_negbin_logpmf", (k_small, logw, 1.5, 0.4)


END_TO_END = """
import time
from bplink.catalog import capacity_pair
from bplink.estimator import estimate_path_tvd
t0 = time.perf_counter()
estimate_path_tvd(capacity_pair(100), 100, 5, 20000, 1)
print(time.perf_counter() - t0)
"""


def end_to_end(disable: bool) -> float:
    env = dict(os.environ, BPLINK_DISABLE_NUMBA="1" if disable else "0")
    env.pop("NUMBA_DISABLE_JIT", None)
    out = subprocess.run([sys.executable, "-c", END_TO_END], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--skip-end-to-end", action="store_true")
    args = ap.parse_args(argv)

    impl = _kernels.IMPLEMENTATIONS
    print(f"{'kernel':42s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s}")
    for label, name, call_args in cases():
        t_nb = best_of(lambda: impl["numba"][name](*call_args), args.repeat)
        t_np = best_of(lambda: impl["numpy"][name](*call_args), args.repeat)
        print(f"{label:42s} {1e3 * t_nb:10.2f} {1e3 * t_np:10.2f} {t_np / t_nb:8.1f}")
    if not args.skip_end_to_end:
        nb, npy = end_to_end(False), end_to_end(True)
        print(f"{'estimate K=100, k=5, N=2e4 (s, cold)':42s} {nb:10.2f} {npy:10.2f} {npy / nb:8.1f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
