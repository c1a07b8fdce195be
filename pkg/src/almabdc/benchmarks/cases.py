"""Benchmark problems as finite candidate sets with a noisy sampler.

A :class:`Problem` is what strategies and the harness see.  Values are
always oriented for maximisation; ``sense = -1`` marks problems whose
reported metric is the negated value (drag).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.stats import qmc

from ..errors import ConfigError
from ..surrogate import KernelKind, KernelSpec
from .oracles import (
    DoseSpec,
    DragSpec,
    MixtureSpec,
    SaturationSpec,
    SpatialSpec,
    drag_value,
    saturation_value,
    spatial_field_draw,
    spatial_grid,
)

__all__ = [
    "GpConfig",
    "Problem",
    "CaseSettings",
    "CASES",
    "lattice_points",
    "maximin_order",
    "make_problem",
    "case1_spec",
    "case2_spec",
    "case3_spec",
    "case4_spec",
    "case5_spec",
    "mixture_spec",
]


@dataclass(frozen=True)
class GpConfig:
    kernel: KernelSpec
    noise_std: float
    prior_mean: float = 0.0

    @property
    def signal_std(self) -> float:
        return math.sqrt(self.kernel.signal_variance)


Sampler = Callable[[int, np.random.Generator], float]


@dataclass
class Problem:
    """One replicate's view of a benchmark.

    ``pool`` lists candidate indices open to adaptive and random strategies,
    ``lattice`` the indices a grid search walks in order, ``start`` the
    indices every strategy observes before the first round and
    ``design_init`` extra indices GP strategies spend their first queries on.
    ``almab_params`` are case defaults for the ALMAB variants; explicit
    strategy parameters override them.
    """

    name: str
    candidates: np.ndarray
    truth: np.ndarray
    sampler: Sampler
    gp: GpConfig
    pool: np.ndarray
    lattice: np.ndarray
    start: list[int] = field(default_factory=list)
    design_init: list[int] = field(default_factory=list)
    sense: int = 1
    metric: str = "best_value"
    ipv_grid: np.ndarray | None = None
    dose_spec: DoseSpec | None = None
    domain: tuple[np.ndarray, np.ndarray] | None = None
    almab_params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.domain is None:
            d = self.candidates.shape[1]
            self.domain = (np.zeros(d), np.ones(d))

    @property
    def optimum(self) -> float:
        return float(self.truth.max())

    def sample(self, index: int, rng: np.random.Generator) -> float:
        return self.sampler(int(index), rng)

    def report(self, value: float) -> float:
        """Convert an internal (maximised) value to the reported metric scale."""
        return self.sense * value


def maximin_order(points: np.ndarray) -> np.ndarray:
    """Permutation that greedily maximises each point's distance to those already visited.

    Starts at the first point; ties go to the lower index.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    order = [0]
    dist = np.sqrt(((pts - pts[0]) ** 2).sum(axis=1))
    dist[0] = -np.inf
    for _ in range(pts.shape[0] - 1):
        i = int(np.argmax(dist))
        order.append(i)
        dist = np.minimum(dist, np.sqrt(((pts - pts[i]) ** 2).sum(axis=1)))
        dist[order] = -np.inf
    return np.array(order)


def lattice_points(dim: int, count: int) -> np.ndarray:
    """``count`` points of the cell-centred lattice with ``ceil(count**(1/dim))`` levels per axis.

    The full lattice is walked in maximin order from its lowest corner, so
    a budget smaller than the lattice still spreads over the whole box.
    """
    levels = max(2, math.ceil(count ** (1.0 / dim) - 1e-9))
    ticks = (np.arange(levels) + 0.5) / levels
    mesh = np.meshgrid(*([ticks] * dim), indexing="ij")
    pts = np.column_stack([m.ravel() for m in mesh])
    return pts[maximin_order(pts)[:count]]


def case1_spec(noise_std: float = 0.004) -> SaturationSpec:
    d = 5
    return SaturationSpec.with_peak(
        lower=np.zeros(d),
        upper=np.ones(d),
        optimum=[0.62, 0.35, 0.71, 0.44, 0.28],
        weights=[2.6, 2.2, 2.0, 1.8, 1.6],
        amplitude=0.95,
        peak=0.9342,
        noise_std=noise_std,
    )


def case2_spec(noise_std: float = 0.0011) -> DragSpec:
    return DragSpec(noise_std=noise_std)


def case3_spec(noise_std: float = 120.0) -> SaturationSpec:
    d = 6
    return SaturationSpec.with_peak(
        lower=np.zeros(d),
        upper=np.ones(d),
        optimum=[0.33, 0.58, 0.66, 0.81, 0.24, 0.47],
        weights=[2.56, 2.24, 2.08, 1.92, 1.6, 1.44],
        amplitude=9750.0,
        peak=9599.0,
        noise_std=noise_std,
    )


def case4_spec() -> DoseSpec:
    return DoseSpec()


def case5_spec() -> SpatialSpec:
    return SpatialSpec()


def mixture_spec(noise_std: float = 0.5, n_arms: int = 15) -> MixtureSpec:
    return MixtureSpec.isotropic_1d(
        weights=[0.5, 0.3, 0.2],
        centres=[0.7, 0.25, 0.95],
        sds=[0.08, 0.1, 0.05],
        noise_std=noise_std,
        n_arms=n_arms,
    )


@dataclass(frozen=True)
class CaseSettings:
    """Per-case defaults: budget, agent count grid and GP hyperparameters."""

    name: str
    budget: int
    gp: GpConfig
    pool_size: int = 0
    design_init: int = 0
    sense: int = 1
    metric: str = "best_value"
    rounds: int = 0
    almab_params: dict = field(default_factory=dict)


def _gp(kind, ell, sf2, noise, mu0=0.0) -> GpConfig:
    return GpConfig(KernelSpec(kind, ell, sf2), noise, mu0)


SE, M32 = KernelKind.SQUARED_EXPONENTIAL, KernelKind.MATERN32

CASES: dict[str, CaseSettings] = {
    "1": CaseSettings("1", 60, _gp(SE, 0.25, 0.05**2, 0.004, 0.88), pool_size=2048, design_init=5),
    "2": CaseSettings("2", 50, _gp(SE, 0.35, 0.1**2, 0.0011, -0.15), pool_size=512, design_init=5, sense=-1),
    "3": CaseSettings("3", 50, _gp(SE, 0.25, 500.0**2, 120.0, 9000.0), pool_size=2048, design_init=5),
    "4": CaseSettings("4", 10, _gp(SE, 1.5, 0.9, 0.18, 0.0), metric="simple_regret", rounds=10),
    "5": CaseSettings("5", 26, _gp(M32, 0.35, 1.0, 0.2, 0.0), metric="ipv",
                      almab_params={"acquisition": "max_variance", "shortlist": 1}),
    "mixture": CaseSettings("mixture", 150, _gp(SE, 0.1, 0.1, 0.5, 0.0), metric="bandit_regret"),
}


def _lhs_unit(dim: int, n: int, rng: np.random.Generator) -> np.ndarray:
    return qmc.LatinHypercube(d=dim, seed=rng).random(n)


def _continuous_problem(name, dim, values_fn, noise, extra_noise, settings, rng, budget, sense):
    """Candidates = random pool, then the lattice, then a small LHS start design."""
    pool = rng.random((settings.pool_size, dim))
    lattice = lattice_points(dim, budget)
    init = _lhs_unit(dim, settings.design_init, rng) if settings.design_init else np.empty((0, dim))
    cands = np.vstack([pool, lattice, init])
    truth = sense * np.asarray(values_fn(cands), dtype=float)
    sd = math.hypot(noise, extra_noise)

    def sampler(i: int, r: np.random.Generator) -> float:
        return float(truth[i] + sd * r.standard_normal()) if sd > 0 else float(truth[i])

    n_pool, n_lat = pool.shape[0], lattice.shape[0]
    gp = settings.gp
    gp = replace(gp, noise_std=math.hypot(gp.noise_std, extra_noise))
    return Problem(
        name,
        cands,
        truth,
        sampler,
        gp,
        pool=np.arange(n_pool),
        lattice=np.arange(n_pool, n_pool + n_lat),
        design_init=list(range(n_pool + n_lat, cands.shape[0])),
        sense=sense,
    )


def make_problem(
    case: str, rng: np.random.Generator, *, extra_noise: float = 0.0, budget: int | None = None
) -> Problem:
    """Build the replicate-specific problem for ``case`` from the oracle stream ``rng``.

    ``extra_noise`` adds i.i.d. Gaussian observation noise on top of the
    oracle's own noise and widens the GP noise accordingly.
    """
    case = str(case)
    if case not in CASES:
        raise ConfigError(f"unknown case {case!r}; choose from {sorted(CASES)}")
    settings = CASES[case]
    budget = budget or settings.budget
    if extra_noise < 0:
        raise ConfigError("extra observation noise must be non-negative")

    if case == "1":
        spec = case1_spec()
        return _continuous_problem("case1", spec.dim, lambda x: saturation_value(spec, spec.from_unit(x)),
                                   spec.noise_std, extra_noise, settings, rng, budget, 1)
    if case == "3":
        spec = case3_spec()
        return _continuous_problem("case3", spec.dim, lambda x: saturation_value(spec, spec.from_unit(x)),
                                   spec.noise_std, extra_noise, settings, rng, budget, 1)
    if case == "2":
        spec = case2_spec()
        lo, hi = spec.bounds

        def values(u):
            x = lo + u * (hi - lo)
            return drag_value(spec, x[:, 0], x[:, 1])

        return _continuous_problem("case2", 2, values, spec.noise_std, extra_noise, settings, rng, budget, -1)

    if case == "4":
        spec = case4_spec()
        truth = spec.utilities()
        doses = spec.doses
        lam = spec.penalty
        p_eff, p_tox = spec.p_efficacy(doses), spec.p_toxicity(doses)

        def sampler(i: int, r: np.random.Generator) -> float:
            u_eff, u_tox = r.random(2)
            y = float(u_eff < p_eff[i]) - lam * float(u_tox < p_tox[i])
            return y + extra_noise * r.standard_normal() if extra_noise > 0 else y

        start = [spec.dose_index(x) for x in (0.0, 2.0, 5.5, 8.0)]
        return Problem("case4", doses[:, None], truth, sampler, settings.gp, pool=np.arange(doses.size),
                       lattice=np.arange(doses.size), start=start, metric="simple_regret", dose_spec=spec,
                       domain=(doses[:1], doses[-1:]))

    if case == "5":
        spec = case5_spec()
        grid = spatial_grid(spec)
        field_values = spatial_field_draw(spec, rng)
        sd = math.hypot(spec.noise_std, extra_noise)

        def sampler(i: int, r: np.random.Generator) -> float:
            return float(field_values[i] + sd * r.standard_normal())

        gp = replace(settings.gp, noise_std=sd)
        return Problem("case5", grid, field_values, sampler, gp, pool=np.arange(grid.shape[0]),
                       lattice=np.arange(grid.shape[0]), start=spec.corner_indices(), metric="ipv",
                       ipv_grid=grid, almab_params=dict(settings.almab_params))

    spec = mixture_spec()
    means = spec.arm_means()
    sd = math.hypot(spec.noise_std, extra_noise)

    def sampler(i: int, r: np.random.Generator) -> float:
        return float(means[i] + sd * r.standard_normal())

    return Problem("mixture", spec.arms, means, sampler, settings.gp, pool=np.arange(means.size),
                   lattice=np.arange(means.size), metric="bandit_regret")
