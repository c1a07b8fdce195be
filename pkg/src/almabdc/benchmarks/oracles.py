"""Synthetic benchmark objectives.

Each oracle has a noise-free value function and a sampling function that
takes an explicit ``numpy.random.Generator``; given the same generator state
the draw is reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from ..errors import ConfigError, InputError, NumericalError
from ..surrogate import KernelKind, KernelSpec

__all__ = [
    "MixtureSpec",
    "DoseSpec",
    "SpatialSpec",
    "SaturationSpec",
    "DragSpec",
    "mixture_mean",
    "mixture_reward",
    "dose_utility",
    "dose_sample",
    "dose_reward",
    "spatial_grid",
    "spatial_field_draw",
    "spatial_observe",
    "saturation_value",
    "saturation_oracle",
    "drag_value",
    "drag_oracle",
]


def _floats(values) -> np.ndarray:
    return np.asarray(values, dtype=float)


@dataclass(frozen=True)
class MixtureSpec:
    """Weighted sum of unnormalised Gaussian bumps evaluated on a finite arm grid."""

    weights: np.ndarray
    means: np.ndarray  # (G, d)
    covariances: np.ndarray  # (G, d, d)
    noise_std: float
    arms: np.ndarray  # (A, d)

    def __post_init__(self) -> None:
        w = _floats(self.weights).reshape(-1)
        mu = _floats(self.means)
        if mu.ndim == 1:
            mu = mu[:, None]
        cov = _floats(self.covariances)
        if cov.ndim == 1:
            cov = cov[:, None, None]
        arms = _floats(self.arms)
        if arms.ndim == 1:
            arms = arms[:, None]
        if not (w.size == mu.shape[0] == cov.shape[0]) or cov.shape[1:] != (mu.shape[1],) * 2:
            raise ConfigError("mixture weights, means and covariances disagree in shape")
        if np.any(w < 0) or not np.isclose(w.sum(), 1.0):
            raise ConfigError(f"mixture weights must be non-negative and sum to 1, got {w}")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be non-negative")
        if arms.shape[1] != mu.shape[1]:
            raise ConfigError("arm grid dimension differs from the mixture dimension")
        try:
            prec = np.linalg.inv(cov)
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise ConfigError(f"mixture covariance is singular or not positive definite: {exc}") from exc
        for name, val in (("weights", w), ("means", mu), ("covariances", cov), ("arms", arms)):
            object.__setattr__(self, name, val)
        object.__setattr__(self, "_precisions", prec)

    @classmethod
    def isotropic_1d(cls, weights, centres, sds, noise_std, n_arms, low=0.0, high=1.0):
        sds = _floats(sds)
        return cls(weights, _floats(centres)[:, None], (sds**2)[:, None, None], noise_std,
                   np.linspace(low, high, n_arms)[:, None])

    def arm_means(self) -> np.ndarray:
        return mixture_mean(self, self.arms)


def mixture_mean(spec: MixtureSpec, x) -> np.ndarray | float:
    """Noise-free mixture value at one point, or at each row of an ``(n, d)`` array."""
    x = _floats(x)
    single = x.ndim < 2
    pts = x.reshape(-1, spec.means.shape[1])
    diff = pts[:, None, :] - spec.means[None, :, :]
    quad = np.einsum("agi,gij,agj->ag", diff, spec._precisions, diff)
    val = np.exp(-0.5 * quad) @ spec.weights
    return float(val[0]) if single else val


def mixture_reward(spec: MixtureSpec, x, rng: np.random.Generator) -> float:
    noise = spec.noise_std * rng.standard_normal() if spec.noise_std > 0 else 0.0
    return float(mixture_mean(spec, x)) + noise


@dataclass(frozen=True)
class DoseSpec:
    """Two logistic dose-response curves and a toxicity penalty.

    ``fixed_efficacy`` replaces the efficacy curve by a constant probability,
    which is useful for boundary tests.
    """

    doses: np.ndarray = field(default_factory=lambda: np.linspace(0.0, 8.0, 33))
    efficacy_coef: tuple[float, float] = (-1.5, 0.9)
    toxicity_coef: tuple[float, float] = (-5.0, 1.2)
    penalty: float = 0.5
    fixed_efficacy: float | None = None

    def __post_init__(self) -> None:
        doses = _floats(self.doses)
        if doses.ndim != 1 or doses.size == 0 or np.any(np.diff(doses) <= 0):
            raise ConfigError("dose grid must be a non-empty strictly increasing vector")
        if self.penalty < 0:
            raise ConfigError("toxicity penalty must be non-negative")
        object.__setattr__(self, "doses", doses)

    def dose_index(self, x: float) -> int:
        idx = int(np.argmin(np.abs(self.doses - x)))
        if not np.isclose(self.doses[idx], x, rtol=0.0, atol=1e-9):
            raise InputError(f"dose {x} is not on the grid")
        return idx

    def p_efficacy(self, x) -> np.ndarray:
        if self.fixed_efficacy is not None:
            return np.full_like(_floats(x), self.fixed_efficacy)
        a, b = self.efficacy_coef
        return expit(a + b * _floats(x))

    def p_toxicity(self, x) -> np.ndarray:
        a, b = self.toxicity_coef
        return expit(a + b * _floats(x))

    def utilities(self) -> np.ndarray:
        return self.p_efficacy(self.doses) - self.penalty * self.p_toxicity(self.doses)


def dose_utility(spec: DoseSpec, x: float) -> float:
    spec.dose_index(x)
    return float(spec.p_efficacy(x) - spec.penalty * spec.p_toxicity(x))


def dose_sample(spec: DoseSpec, x: float, rng: np.random.Generator) -> tuple[int, int]:
    spec.dose_index(x)
    u_eff, u_tox = rng.random(2)
    return int(u_eff < spec.p_efficacy(x)), int(u_tox < spec.p_toxicity(x))


def dose_reward(spec: DoseSpec, x: float, rng: np.random.Generator) -> float:
    eff, tox = dose_sample(spec, x, rng)
    return eff - spec.penalty * tox


@dataclass(frozen=True)
class SpatialSpec:
    """Square sensor grid over the unit square with a Matérn-3/2 field.

    With ``cell_centred`` the grid points sit at cell centres
    ``(i + 0.5) / n``; otherwise they include the boundary, ``i / (n - 1)``.
    """

    n_side: int = 8
    length_scale: float = 0.35
    signal_variance: float = 1.0
    noise_std: float = 0.2
    cell_centred: bool = True

    def __post_init__(self) -> None:
        if self.n_side < 2:
            raise ConfigError("spatial grid needs at least 2 points per side")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be non-negative")

    @property
    def kernel(self) -> KernelSpec:
        return KernelSpec(KernelKind.MATERN32, self.length_scale, self.signal_variance)

    @property
    def spacing(self) -> float:
        return 1.0 / self.n_side if self.cell_centred else 1.0 / (self.n_side - 1)

    def corner_indices(self) -> list[int]:
        n = self.n_side
        return [0, n - 1, n * (n - 1), n * n - 1]


def spatial_grid(spec: SpatialSpec) -> np.ndarray:
    """Grid locations in row-major order, shape ``(n_side**2, 2)``."""
    n = spec.n_side
    ticks = (np.arange(n) + 0.5) / n if spec.cell_centred else np.linspace(0.0, 1.0, n)
    xx, yy = np.meshgrid(ticks, ticks, indexing="ij")
    return np.column_stack([xx.ravel(), yy.ravel()])


def _field_factor(spec: SpatialSpec) -> np.ndarray:
    grid = spatial_grid(spec)
    gram = spec.kernel.matrix(grid, grid)
    jitter = 1e-9 * spec.signal_variance
    while jitter <= 1e-5 * spec.signal_variance:
        try:
            return np.linalg.cholesky(gram + jitter * np.eye(grid.shape[0]))
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise NumericalError("could not factorize the spatial covariance matrix")


def spatial_field_draw(spec: SpatialSpec, rng: np.random.Generator) -> np.ndarray:
    chol = _field_factor(spec)
    return chol @ rng.standard_normal(chol.shape[0])


def spatial_observe(spec: SpatialSpec, field_values: np.ndarray, cell: int, rng: np.random.Generator) -> float:
    return float(field_values[cell] + spec.noise_std * rng.standard_normal())


@dataclass(frozen=True)
class SaturationSpec:
    """``amplitude * (1 - exp(-q(x)))`` over a box, with a diagonal quadratic quality.

    ``q(x) = max(0, q_max - sum_i w_i u_i**2)`` where ``u`` is the offset of
    ``x`` from ``optimum`` after rescaling the box to the unit cube.
    """

    lower: np.ndarray
    upper: np.ndarray
    optimum: np.ndarray
    weights: np.ndarray
    amplitude: float
    q_max: float
    noise_std: float = 0.0

    def __post_init__(self) -> None:
        arrays = {n: _floats(getattr(self, n)).reshape(-1) for n in ("lower", "upper", "optimum", "weights")}
        d = arrays["lower"].size
        if any(a.size != d for a in arrays.values()):
            raise ConfigError("saturation spec vectors must share one dimension")
        if np.any(arrays["upper"] <= arrays["lower"]):
            raise ConfigError("box upper bounds must exceed lower bounds")
        if np.any(arrays["optimum"] < arrays["lower"]) or np.any(arrays["optimum"] > arrays["upper"]):
            raise ConfigError("optimum must lie in the box")
        if np.any(arrays["weights"] <= 0) or self.amplitude <= 0 or self.q_max <= 0:
            raise ConfigError("weights, amplitude and q_max must be positive")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be non-negative")
        for name, val in arrays.items():
            object.__setattr__(self, name, val)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def peak(self) -> float:
        return self.amplitude * (1.0 - np.exp(-self.q_max))

    @classmethod
    def with_peak(cls, lower, upper, optimum, weights, amplitude, peak, noise_std=0.0):
        """Build a spec whose noise-free maximum equals ``peak``."""
        if not 0 < peak < amplitude:
            raise ConfigError("peak must lie strictly between 0 and the amplitude")
        return cls(lower, upper, optimum, weights, amplitude, float(-np.log1p(-peak / amplitude)), noise_std)

    def to_unit(self, x) -> np.ndarray:
        return (_floats(x) - self.lower) / (self.upper - self.lower)

    def from_unit(self, u) -> np.ndarray:
        return self.lower + _floats(u) * (self.upper - self.lower)


def saturation_value(spec: SaturationSpec, x) -> np.ndarray | float:
    """Noise-free value; accepts one point or an ``(n, d)`` array."""
    x = _floats(x)
    pts = x.reshape(-1, spec.dim)
    if np.any(pts < spec.lower - 1e-12) or np.any(pts > spec.upper + 1e-12):
        raise InputError("point outside the search box")
    u = (pts - spec.optimum) / (spec.upper - spec.lower)
    q = np.maximum(0.0, spec.q_max - (u**2) @ spec.weights)
    val = spec.amplitude * -np.expm1(-q)
    return float(val[0]) if x.ndim == 1 else val


def saturation_oracle(spec: SaturationSpec, x, rng: np.random.Generator) -> float:
    noise = spec.noise_std * rng.standard_normal() if spec.noise_std > 0 else 0.0
    return float(saturation_value(spec, x)) + noise


@dataclass(frozen=True)
class DragSpec:
    """Separable quadratic drag bowl over (camber, thickness).

    Curvatures are per unit of the *normalised* coordinates, so
    ``C_D = minimum + sum_i c_i ((x_i - x*_i) / range_i)**2``.
    """

    camber_range: tuple[float, float] = (0.01, 0.10)
    thickness_range: tuple[float, float] = (0.05, 0.20)
    optimum: tuple[float, float] = (0.0505, 0.0875)
    minimum: float = 0.0587
    curvature: tuple[float, float] = (0.06, 0.45)
    noise_std: float = 0.0011

    def __post_init__(self) -> None:
        lo, hi = self.bounds
        opt = _floats(self.optimum)
        if np.any(hi <= lo) or np.any(opt < lo) or np.any(opt > hi):
            raise ConfigError("drag optimum must lie inside the design box")
        if np.any(_floats(self.curvature) <= 0) or self.noise_std < 0:
            raise ConfigError("curvatures must be positive and noise non-negative")

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return (np.array([self.camber_range[0], self.thickness_range[0]]),
                np.array([self.camber_range[1], self.thickness_range[1]]))


def drag_value(spec: DragSpec, camber, thickness) -> np.ndarray | float:
    c = _floats(camber)
    t = _floats(thickness)
    lo, hi = spec.bounds
    eps = 1e-12
    if np.any(c < lo[0] - eps) or np.any(c > hi[0] + eps) or np.any(t < lo[1] - eps) or np.any(t > hi[1] + eps):
        raise InputError("camber or thickness outside the design range")
    span = hi - lo
    uc = (c - spec.optimum[0]) / span[0]
    ut = (t - spec.optimum[1]) / span[1]
    val = spec.minimum + spec.curvature[0] * uc**2 + spec.curvature[1] * ut**2
    return float(val) if np.ndim(val) == 0 else val


def drag_oracle(spec: DragSpec, camber: float, thickness: float, rng: np.random.Generator) -> float:
    noise = spec.noise_std * rng.standard_normal() if spec.noise_std > 0 else 0.0
    return float(drag_value(spec, camber, thickness)) + noise
