"""Acquisition scores and greedy sequential / batch selection over finite candidate sets."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .errors import InputError
from .surrogate import GpPosterior, PosteriorSummary, gp_condition_hallucinated, gp_predict_many

__all__ = [
    "AcquisitionKind",
    "AcquisitionSpec",
    "BatchSpec",
    "acq_score",
    "acq_scores",
    "select_next",
    "select_batch",
]


class AcquisitionKind(str, enum.Enum):
    UCB = "ucb"
    EXPECTED_IMPROVEMENT = "ei"
    MAX_VARIANCE = "max_variance"


@dataclass(frozen=True)
class AcquisitionSpec:
    kind: AcquisitionKind = AcquisitionKind.UCB
    beta: float = 2.0
    xi: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", AcquisitionKind(self.kind))
        if not (self.beta >= 0 and self.xi >= 0):
            raise InputError(f"beta and xi must be non-negative, got beta={self.beta}, xi={self.xi}")


@dataclass(frozen=True)
class BatchSpec:
    batch_size: int = 1
    diversity_weight: float = 0.5

    def __post_init__(self) -> None:
        if int(self.batch_size) != self.batch_size or self.batch_size < 1:
            raise InputError(f"batch_size must be a positive integer, got {self.batch_size}")
        if not self.diversity_weight >= 0:
            raise InputError(f"diversity_weight must be non-negative, got {self.diversity_weight}")


def acq_scores(spec: AcquisitionSpec, mean, variance, incumbent: float = 0.0) -> np.ndarray:
    """Vectorised acquisition over arrays of posterior means and variances."""
    mean = np.asarray(mean, dtype=float)
    variance = np.maximum(np.asarray(variance, dtype=float), 0.0)
    if spec.kind is AcquisitionKind.MAX_VARIANCE:
        return variance.copy()
    sigma = np.sqrt(variance)
    if spec.kind is AcquisitionKind.UCB:
        return mean + spec.beta * sigma
    improvement = mean - incumbent - spec.xi
    out = np.maximum(improvement, 0.0)
    pos = sigma > 0
    z = improvement[pos] / sigma[pos]
    out[pos] = improvement[pos] * norm.cdf(z) + sigma[pos] * norm.pdf(z)
    return out


def acq_score(spec: AcquisitionSpec, summary: PosteriorSummary, incumbent: float = 0.0) -> float:
    if summary.variance < 0:
        raise InputError("posterior variance must be non-negative")
    if spec.kind is AcquisitionKind.EXPECTED_IMPROVEMENT and not math.isfinite(incumbent):
        raise InputError("EI needs a finite incumbent")
    return float(acq_scores(spec, [summary.mean], [summary.variance], incumbent)[0])


def _incumbent(post: GpPosterior) -> float:
    obs = post.dataset.observations
    return float(obs.max()) if obs.size else post.prior_mean


def select_next(post: GpPosterior, candidates, spec: AcquisitionSpec) -> int:
    """Index of the highest-scoring candidate; ``np.argmax`` keeps the lowest index on ties."""
    candidates = np.asarray(candidates, dtype=float)
    if candidates.shape[0] == 0:
        raise InputError("select_next needs at least one candidate")
    mean, var = gp_predict_many(post, candidates)
    return int(np.argmax(acq_scores(spec, mean, var, _incumbent(post))))


def select_batch(
    post: GpPosterior, candidates, acq: AcquisitionSpec, batch: BatchSpec
) -> list[int]:
    """Greedy Kriging-believer batch with a correlation diversity penalty.

    Each pick maximises ``score - gamma * max_j corr(x, x_j)`` over the
    not-yet-chosen candidates, where ``corr`` is the kernel divided by the
    signal variance; the GP is then conditioned on its own mean at the pick.
    Scores use the incumbent of the real (non-hallucinated) data.
    """
    candidates = np.asarray(candidates, dtype=float)
    if candidates.ndim == 1:
        candidates = candidates[:, None]
    k = batch.batch_size
    if candidates.shape[0] < k:
        raise InputError(f"need at least {k} candidates for a batch of {k}, got {candidates.shape[0]}")
    incumbent = _incumbent(post)
    chosen: list[int] = []
    penalty = np.zeros(candidates.shape[0])
    current = post
    for step in range(k):
        mean, var = gp_predict_many(current, candidates)
        scores = acq_scores(acq, mean, var, incumbent) - batch.diversity_weight * penalty
        scores[chosen] = -np.inf
        pick = int(np.argmax(scores))
        chosen.append(pick)
        if step + 1 < k:
            corr = post.kernel.correlation(candidates, candidates[pick : pick + 1])[:, 0]
            penalty = np.maximum(penalty, corr)
            current = gp_condition_hallucinated(current, candidates[pick])
    return chosen
