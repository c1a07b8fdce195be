"""Gaussian-process regression with fixed hyperparameters.

Everything here works on dense float arrays: locations are ``(n, d)``
arrays, observations are ``(n,)``.  A :class:`GpPosterior` is immutable;
conditioning on a new point returns a fresh posterior built with a rank-1
Cholesky extension, which matches a full refit to round-off.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cholesky, solve_triangular
from scipy.spatial.distance import cdist

from .errors import InputError, NumericalError

__all__ = [
    "KernelKind",
    "KernelSpec",
    "GpDataset",
    "GpPosterior",
    "PosteriorSummary",
    "kernel_eval",
    "gp_fit",
    "gp_predict",
    "gp_predict_many",
    "gp_condition",
    "gp_condition_hallucinated",
    "integrated_posterior_variance",
]

_SQRT3 = math.sqrt(3.0)

# Tried after an unjittered attempt; relative to the signal variance, escalated x10.
JITTER_START = 1e-9
JITTER_MAX = 1e-5


class KernelKind(str, enum.Enum):
    SQUARED_EXPONENTIAL = "squared_exponential"
    MATERN32 = "matern32"


@dataclass(frozen=True)
class KernelSpec:
    """Stationary covariance ``k(s, s') = signal_variance * rho(|s - s'| / length_scale)``."""

    kind: KernelKind
    length_scale: float
    signal_variance: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", KernelKind(self.kind))
        for name in ("length_scale", "signal_variance"):
            value = float(getattr(self, name))
            if not (math.isfinite(value) and value > 0.0):
                raise InputError(f"{name} must be a positive finite number, got {value!r}")
            object.__setattr__(self, name, value)

    def from_distance(self, r: np.ndarray | float) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.kind is KernelKind.SQUARED_EXPONENTIAL:
            return self.signal_variance * np.exp(-0.5 * (r / self.length_scale) ** 2)
        z = _SQRT3 * r / self.length_scale
        return self.signal_variance * (1.0 + z) * np.exp(-z)

    def matrix(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Cross-covariance between the rows of ``a`` (m, d) and ``b`` (n, d)."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if a.shape[-1] != b.shape[-1]:
            raise InputError(f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}")
        return self.from_distance(cdist(a, b))

    def correlation(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return self.matrix(a, b) / self.signal_variance


def kernel_eval(spec: KernelSpec, s, s2) -> float:
    s = np.atleast_1d(np.asarray(s, dtype=float))
    s2 = np.atleast_1d(np.asarray(s2, dtype=float))
    if s.shape != s2.shape or s.ndim != 1:
        raise InputError(f"locations must be same-length vectors, got {s.shape} and {s2.shape}")
    return float(spec.from_distance(float(np.linalg.norm(s - s2))))


@dataclass(frozen=True)
class GpDataset:
    """Observed locations and values together with the observation noise std."""

    points: np.ndarray
    observations: np.ndarray
    noise_std: float = 0.0

    def __post_init__(self) -> None:
        points = np.asarray(self.points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        obs = np.asarray(self.observations, dtype=float).reshape(-1)
        if points.ndim != 2 or points.shape[0] != obs.shape[0]:
            raise InputError(
                f"need one observation per point, got {points.shape[0]} points and {obs.shape[0]} values"
            )
        if not (np.all(np.isfinite(points)) and np.all(np.isfinite(obs))):
            raise InputError("points and observations must be finite")
        noise = float(self.noise_std)
        if not (math.isfinite(noise) and noise >= 0.0):
            raise InputError(f"noise_std must be non-negative, got {noise!r}")
        points.setflags(write=False)
        obs.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "observations", obs)
        object.__setattr__(self, "noise_std", noise)

    @classmethod
    def empty(cls, dim: int, noise_std: float = 0.0) -> "GpDataset":
        return cls(np.empty((0, dim)), np.empty(0), noise_std)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    def appended(self, x: np.ndarray, y: float) -> "GpDataset":
        x = np.asarray(x, dtype=float).reshape(1, -1)
        return GpDataset(
            np.vstack([self.points, x]), np.append(self.observations, float(y)), self.noise_std
        )


@dataclass(frozen=True)
class PosteriorSummary:
    mean: float
    variance: float

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)


@dataclass(frozen=True, eq=False)
class GpPosterior:
    """A GP conditioned on a dataset.

    ``chol_factor`` is the lower Cholesky factor of
    ``K + (noise_std**2 + jitter) I`` and ``weights`` solves the system
    against the centred observations ``y - prior_mean``.
    """

    dataset: GpDataset
    kernel: KernelSpec
    chol_factor: np.ndarray
    weights: np.ndarray
    prior_mean: float = 0.0
    jitter: float = 0.0
    # L^{-1} (y - prior_mean); kept so rank-1 extensions cost O(n^2).
    whitened: np.ndarray | None = None

    @property
    def n(self) -> int:
        return len(self.dataset)

    @property
    def dim(self) -> int:
        return self.dataset.dim

    def predict(self, x) -> PosteriorSummary:
        return gp_predict(self, x)

    def predict_many(self, xs) -> tuple[np.ndarray, np.ndarray]:
        return gp_predict_many(self, xs)


def _jitter_levels(signal_variance: float):
    yield 0.0
    level = JITTER_START
    while level <= JITTER_MAX * (1 + 1e-9):
        yield level * signal_variance
        level *= 10.0


def gp_fit(data: GpDataset, kernel: KernelSpec, prior_mean: float = 0.0) -> GpPosterior:
    """Condition a GP prior with constant mean ``prior_mean`` on ``data``.

    With no data the returned posterior is the prior itself.  Raises
    :class:`NumericalError` if the Gram matrix cannot be factorized even with
    the largest jitter.
    """
    n = len(data)
    if n == 0:
        empty = np.empty((0, 0))
        return GpPosterior(data, kernel, empty, np.empty(0), float(prior_mean), 0.0, np.empty(0))

    gram = kernel.matrix(data.points, data.points)
    centred = data.observations - prior_mean
    noise_var = data.noise_std**2
    for jitter in _jitter_levels(kernel.signal_variance):
        try:
            chol = cholesky(gram + (noise_var + jitter) * np.eye(n), lower=True, check_finite=False)
        except LinAlgError:
            continue
        if np.all(np.diag(chol) > 0.0):
            break
    else:
        cond = np.linalg.cond(gram + noise_var * np.eye(n))
        raise NumericalError(
            f"Cholesky failed for {n} points after jitter escalation (condition number {cond:.3e})"
        )
    whitened = solve_triangular(chol, centred, lower=True, check_finite=False)
    weights = solve_triangular(chol.T, whitened, lower=False, check_finite=False)
    return GpPosterior(data, kernel, chol, weights, float(prior_mean), jitter, whitened)


def _as_rows(post: GpPosterior, xs) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    if xs.ndim == 1:
        xs = xs.reshape(1, -1) if xs.shape[0] == post.dim else xs[:, None]
    if xs.ndim != 2 or xs.shape[1] != post.dim:
        raise InputError(f"expected locations of dimension {post.dim}, got shape {xs.shape}")
    if not np.all(np.isfinite(xs)):
        raise InputError("prediction locations must be finite")
    return xs


def gp_predict_many(post: GpPosterior, xs, cross: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Posterior means and variances at the rows of ``xs``.

    ``cross`` may supply the precomputed ``kernel.matrix(xs, post.dataset.points)``.
    """
    xs = _as_rows(post, xs)
    m = xs.shape[0]
    if post.n == 0:
        return np.full(m, post.prior_mean), np.full(m, post.kernel.signal_variance)
    if cross is None:
        cross = post.kernel.matrix(xs, post.dataset.points)
    elif cross.shape != (m, post.n):
        raise InputError(f"cross-covariance must have shape {(m, post.n)}, got {cross.shape}")
    mean = post.prior_mean + cross @ post.weights
    v = solve_triangular(post.chol_factor, cross.T, lower=True, check_finite=False)
    var = post.kernel.signal_variance - np.einsum("ij,ij->j", v, v)
    return mean, np.maximum(var, 0.0)


def gp_predict(post: GpPosterior, x) -> PosteriorSummary:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1 or x.shape[0] != post.dim:
        raise InputError(f"expected a location of dimension {post.dim}, got shape {x.shape}")
    mean, var = gp_predict_many(post, x[None, :])
    return PosteriorSummary(float(mean[0]), float(var[0]))


def gp_condition(post: GpPosterior, x, y: float) -> GpPosterior:
    """Return ``post`` additionally conditioned on the observation ``(x, y)``.

    Uses a rank-1 extension of the Cholesky factor at the posterior's current
    jitter level and falls back to a full refit if the new pivot is not
    positive.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (post.dim,):
        raise InputError(f"expected a location of dimension {post.dim}, got shape {x.shape}")
    data = post.dataset.appended(x, y)
    kern = post.kernel
    noise_var = data.noise_std**2
    if post.n:
        jitter = post.jitter
    else:
        jitter = 0.0 if noise_var > 0 else JITTER_START * kern.signal_variance
    resid = float(y) - post.prior_mean

    if post.n == 0:
        pivot2 = kern.signal_variance + noise_var + jitter
        chol = np.array([[math.sqrt(pivot2)]])
        whitened = np.array([resid / chol[0, 0]])
        weights = whitened / chol[0, 0]
        return GpPosterior(data, kern, chol, weights, post.prior_mean, jitter, whitened)

    cross = kern.matrix(post.dataset.points, x[None, :])[:, 0]
    ell = solve_triangular(post.chol_factor, cross, lower=True, check_finite=False)
    pivot2 = kern.signal_variance + noise_var + jitter - float(ell @ ell)
    if not pivot2 > 1e-3 * max(jitter, noise_var):
        return gp_fit(data, kern, post.prior_mean)
    pivot = math.sqrt(pivot2)
    n = post.n
    chol = np.zeros((n + 1, n + 1))
    chol[:n, :n] = post.chol_factor
    chol[n, :n] = ell
    chol[n, n] = pivot
    whitened = np.append(post.whitened, (resid - float(ell @ post.whitened)) / pivot)
    weights = solve_triangular(chol.T, whitened, lower=False, check_finite=False)
    return GpPosterior(data, kern, chol, weights, post.prior_mean, jitter, whitened)


def gp_condition_hallucinated(post: GpPosterior, x) -> GpPosterior:
    """Kriging-believer step: condition on the current posterior mean at ``x``."""
    return gp_condition(post, x, gp_predict(post, x).mean)


def integrated_posterior_variance(post: GpPosterior, grid) -> float:
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise InputError("integrated posterior variance needs a non-empty grid")
    _, var = gp_predict_many(post, grid)
    return float(var.mean())
