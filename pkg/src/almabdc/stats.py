"""Rank tests, multiplicity correction, bootstrap intervals and convergence summaries."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.stats import norm, rankdata

from .errors import InputError, NumericalError

__all__ = [
    "MannWhitneyResult",
    "ReplicateMatrix",
    "mann_whitney_u",
    "bonferroni",
    "bootstrap_ci",
    "fit_convergence_rate",
    "evaluations_to_threshold",
    "median_iqr",
]

EXACT_MAX_SMALL = 10


class MannWhitneyResult(NamedTuple):
    statistic: float
    pvalue: float
    method: str


def _exact_u_counts(doubled_ranks: np.ndarray, n_small: int) -> tuple[np.ndarray, int]:
    """Counts of every doubled rank-sum for subsets of size ``n_small``.

    Returns ``(counts, offset)`` where ``counts[s]`` is the number of subsets
    whose doubled rank sum equals ``s``.  Doubling keeps midranks integral.
    """
    total = int(doubled_ranks.sum())
    dp = np.zeros((n_small + 1, total + 1), dtype=float)
    dp[0, 0] = 1.0
    for r in doubled_ranks.astype(int):
        dp[1:, r:] += dp[:-1, : total + 1 - r].copy()
    return dp[n_small], 0


def mann_whitney_u(a: Sequence[float], b: Sequence[float], alternative: str = "two-sided",
                   method: str = "auto") -> MannWhitneyResult:
    """Mann-Whitney U test of ``a`` against ``b``.

    ``statistic`` is U for ``a``: the number of pairs with ``a > b`` plus half
    the ties.  ``alternative`` is ``"two-sided"``, ``"greater"`` (``a`` tends
    to be larger) or ``"less"``.  With ``method="auto"`` the exact
    permutation distribution (midranks, ties kept) is used when the smaller
    sample has at most 10 values, and the tie-corrected normal approximation
    with continuity correction otherwise.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise InputError("both samples must be non-empty")
    if alternative not in ("two-sided", "greater", "less"):
        raise InputError(f"unknown alternative {alternative!r}")
    if method not in ("auto", "exact", "asymptotic"):
        raise InputError(f"unknown method {method!r}")
    na, nb = a.size, b.size
    ranks = rankdata(np.concatenate([a, b]))
    u_a = float(ranks[:na].sum() - na * (na + 1) / 2)
    mean_u = na * nb / 2.0
    if method == "auto":
        method = "exact" if min(na, nb) <= EXACT_MAX_SMALL else "asymptotic"

    if method == "exact":
        doubled = np.rint(2 * ranks).astype(int)
        counts, _ = _exact_u_counts(doubled, na)
        total = counts.sum()
        sums = np.arange(counts.size)
        u_values = sums / 2.0 - na * (na + 1) / 2.0
        mask = counts > 0
        u_values, probs = u_values[mask], counts[mask] / total
        eps = 1e-9
        if alternative == "greater":
            p = probs[u_values >= u_a - eps].sum()
        elif alternative == "less":
            p = probs[u_values <= u_a + eps].sum()
        else:
            p = probs[np.abs(u_values - mean_u) >= abs(u_a - mean_u) - eps].sum()
        return MannWhitneyResult(u_a, float(min(1.0, p)), "exact")

    n = na + nb
    _, tie_counts = np.unique(ranks, return_counts=True)
    tie_term = float(np.sum(tie_counts**3 - tie_counts)) / (n * (n - 1))
    var_u = na * nb / 12.0 * ((n + 1) - tie_term)
    if var_u <= 0:
        return MannWhitneyResult(u_a, 1.0, "asymptotic")
    sd = math.sqrt(var_u)
    if alternative == "greater":
        p = norm.sf((u_a - mean_u - 0.5) / sd)
    elif alternative == "less":
        p = norm.cdf((u_a - mean_u + 0.5) / sd)
    else:
        p = 2.0 * norm.sf((abs(u_a - mean_u) - 0.5) / sd)
    return MannWhitneyResult(u_a, float(min(1.0, p)), "asymptotic")


def bonferroni(p_values: Sequence[float], m: int | None = None) -> np.ndarray:
    p = np.asarray(p_values, dtype=float)
    m = p.size if m is None else m
    if m < p.size:
        raise InputError(f"m={m} is smaller than the number of p-values ({p.size})")
    return np.minimum(1.0, p * m)


def bootstrap_ci(sample: Sequence[float], level: float = 0.95, n_boot: int = 2000,
                 rng: np.random.Generator | None = None) -> tuple[float, float]:
    """Percentile bootstrap interval for the mean."""
    x = np.asarray(sample, dtype=float).ravel()
    if x.size < 2:
        raise InputError("bootstrap needs at least two values")
    if not 0.0 < level < 1.0:
        raise InputError(f"level must lie in (0, 1), got {level}")
    if n_boot < 100:
        raise InputError("use at least 100 bootstrap resamples")
    rng = rng if rng is not None else np.random.default_rng()
    idx = rng.integers(0, x.size, size=(n_boot, x.size))
    means = x[idx].mean(axis=1)
    alpha = (1.0 - level) / 2.0
    lo, hi = np.quantile(means, [alpha, 1.0 - alpha])
    return float(lo), float(hi)


def fit_convergence_rate(trajectory: Sequence[float], asymptote: float) -> tuple[float, float]:
    """Fit ``A - f(t) = C exp(-lambda t)`` by least squares on ``log(A - f)``.

    ``t`` counts from 1.  Only points with a positive gap enter the fit.
    Returns ``(lambda, R^2)``; a flat gap gives ``(0, 1)``.
    """
    f = np.asarray(trajectory, dtype=float).ravel()
    gap = asymptote - f
    t = np.arange(1, f.size + 1, dtype=float)
    keep = gap > 0
    if keep.sum() < 3:
        raise NumericalError("need at least three points below the asymptote to fit a rate")
    t, y = t[keep], np.log(gap[keep])
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (intercept + slope * t)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    if ss_tot <= 1e-300:
        return 0.0, 1.0
    return float(-slope), 1.0 - ss_res / ss_tot


def evaluations_to_threshold(trajectory: Sequence[float], threshold: float) -> int | None:
    """1-based index of the first value at or above ``threshold``; ``None`` if never reached."""
    f = np.asarray(trajectory, dtype=float).ravel()
    hits = np.flatnonzero(f >= threshold)
    return int(hits[0]) + 1 if hits.size else None


def median_iqr(values: Sequence[float]) -> tuple[float, float, float]:
    q1, med, q3 = np.percentile(np.asarray(values, dtype=float), [25, 50, 75])
    return float(med), float(q1), float(q3)


@dataclass
class ReplicateMatrix:
    """Final metrics and best-so-far trajectories of one method, one row per replicate."""

    label: str
    finals: np.ndarray
    trajectories: np.ndarray
    maximize: bool = True

    def __post_init__(self) -> None:
        self.finals = np.asarray(self.finals, dtype=float)
        self.trajectories = np.atleast_2d(np.asarray(self.trajectories, dtype=float))
        if self.trajectories.shape[0] != self.finals.size:
            raise InputError("one trajectory per replicate is required")
        steps = np.diff(self.trajectories, axis=1)
        ok = np.all(steps >= -1e-12) if self.maximize else np.all(steps <= 1e-12)
        if not ok:
            raise InputError("best-so-far trajectories must be monotone")

    def mean_curve(self) -> np.ndarray:
        return self.trajectories.mean(axis=0)

    def median_curve(self) -> np.ndarray:
        return np.median(self.trajectories, axis=0)
