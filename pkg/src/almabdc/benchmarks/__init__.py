"""Benchmark oracles, replicate problems and design strategies."""

from .cases import CASES, GpConfig, Problem, make_problem
from .oracles import *  # noqa: F401,F403
from .oracles import __all__ as _oracle_names
from .strategies import DesignStrategy, StrategyKind, baseline_next, make_policy

__all__ = [
    "CASES",
    "GpConfig",
    "Problem",
    "make_problem",
    "DesignStrategy",
    "StrategyKind",
    "baseline_next",
    "make_policy",
    *_oracle_names,
]
