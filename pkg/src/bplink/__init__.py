"""Population-size-dependent and controlled branching processes."""

from __future__ import annotations

from .config import RunConfig, format_config, parse_config
from .distributions import iid_sum, moments, pmf, sample
from .equivalence import construct_equivalent_psdbp, decide_equivalence
from .estimator import ProcessPair, estimate_path_tvd, exact_one_step_tvd, sweep
from .kernels import CBP, PSDBP, TransitionKernel, attainable_set, simulate
from .matching import check_match, construct_offspring, match_dcbp_to_psdbp, match_psdbp_to_dcbp

__version__ = "0.1.0"

__all__ = [
    "CBP",
    "PSDBP",
    "ProcessPair",
    "RunConfig",
    "TransitionKernel",
    "attainable_set",
    "check_match",
    "construct_equivalent_psdbp",
    "construct_offspring",
    "decide_equivalence",
    "estimate_path_tvd",
    "exact_one_step_tvd",
    "format_config",
    "iid_sum",
    "match_dcbp_to_psdbp",
    "match_psdbp_to_dcbp",
    "moments",
    "parse_config",
    "pmf",
    "sample",
    "simulate",
    "sweep",
]
