"""Design strategies: classical baselines and the shortlist-plus-bandit policy.

Every strategy is a policy over candidate indices of a :class:`Problem`
with ``propose(n, pending, rng)`` / ``observe(index, value)``, so swapping
strategies never touches the oracle or the simulator.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np
from scipy.special import expit
from scipy.stats import qmc

from ..acquisition import AcquisitionKind, AcquisitionSpec, BatchSpec, acq_scores, select_batch
from ..bandit import BanditState, RewardMode, thompson_select, ucb1_select, update_arm
from ..errors import ConfigError, InputError
from ..surrogate import GpDataset, GpPosterior, gp_condition, gp_condition_hallucinated, gp_fit, gp_predict_many
from .cases import Problem, maximin_order

__all__ = [
    "StrategyKind",
    "DesignStrategy",
    "DesignPolicy",
    "make_policy",
    "baseline_next",
    "logistic_mle",
    "logistic_fim",
    "d_optimal_scores",
    "latin_hypercube",
]


class StrategyKind(str, enum.Enum):
    GRID = "grid"
    RANDOM = "random"
    LATIN_HYPERCUBE = "lhs"
    EQUAL_SPACING = "equal_spacing"
    D_OPTIMAL = "d_optimal"
    GREEDY_MAX_VARIANCE = "greedy_max_variance"
    PURE_BO = "pure_bo"
    ALMAB_UCB = "almab_ucb"
    ALMAB_TS = "almab_ts"
    ALMAB_NO_MAB = "almab_no_mab"
    ALMAB_NO_AL = "almab_no_al"
    BANDIT_UCB = "bandit_ucb"
    BANDIT_TS = "bandit_ts"


@dataclass(frozen=True)
class DesignStrategy:
    kind: StrategyKind
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        try:
            object.__setattr__(self, "kind", StrategyKind(self.kind))
        except ValueError as exc:
            raise ConfigError(f"unknown strategy {self.kind!r}") from exc
        object.__setattr__(self, "params", dict(self.params))

    @property
    def label(self) -> str:
        return self.kind.value

    def get(self, key: str, default: Any) -> Any:
        return self.params.get(key, default)


class DesignPolicy:
    """Shared bookkeeping: observation history, start-design queue, recommendation."""

    uses_gp = False

    def __init__(self, problem: Problem, strategy: DesignStrategy, budget: int):
        self.problem = problem
        self.strategy = strategy
        self.budget = budget
        self.history: list[tuple[int, float]] = []
        self._queue: list[int] = list(problem.design_init) if self.uses_gp else []
        self._sums: dict[int, float] = {}
        self._counts: dict[int, int] = {}

    def observe(self, arm: int, value: float) -> None:
        arm = int(arm)
        self.history.append((arm, float(value)))
        self._sums[arm] = self._sums.get(arm, 0.0) + value
        self._counts[arm] = self._counts.get(arm, 0) + 1
        self._on_observe(arm, float(value))

    def _on_observe(self, arm: int, value: float) -> None:
        pass

    def propose(self, n: int, pending: Sequence[int], rng: np.random.Generator) -> list[int]:
        out: list[int] = []
        while self._queue and len(out) < n:
            out.append(self._queue.pop(0))
        if len(out) < n:
            out.extend(int(i) for i in self._select(n - len(out), list(pending) + out, rng))
        return out

    def _select(self, n: int, pending: list[int], rng: np.random.Generator) -> list[int]:
        raise NotImplementedError

    def recommend(self) -> int:
        """Evaluated index with the highest average observed value (lowest index on ties)."""
        if not self._counts:
            raise InputError("nothing observed yet")
        arms = sorted(self._counts)
        means = [self._sums[a] / self._counts[a] for a in arms]
        return arms[int(np.argmax(means))]


class _GpMixin(DesignPolicy):
    uses_gp = True

    def __init__(self, problem: Problem, strategy: DesignStrategy, budget: int):
        super().__init__(problem, strategy, budget)
        gp = problem.gp
        data = GpDataset.empty(problem.candidates.shape[1], gp.noise_std)
        self.post: GpPosterior = gp_fit(data, gp.kernel, gp.prior_mean)
        self.pool_points = problem.candidates[problem.pool]
        self._pool_cross = np.empty((self.pool_points.shape[0], 0))

    def _on_observe(self, arm: int, value: float) -> None:
        x = self.problem.candidates[arm]
        self.post = gp_condition(self.post, x, value)
        col = self.post.kernel.matrix(self.pool_points, x[None, :])
        self._pool_cross = np.hstack([self._pool_cross, col])

    def pool_predict(self, post: GpPosterior) -> tuple[np.ndarray, np.ndarray]:
        """Predict over the pool for ``self.post`` or a believer extension of it."""
        cached = self._pool_cross.shape[1]
        extra = post.dataset.points[cached:]
        cross = self._pool_cross
        if extra.shape[0]:
            cross = np.hstack([cross, post.kernel.matrix(self.pool_points, extra)])
        return gp_predict_many(post, self.pool_points, cross=cross)

    def pool_argmax(self, post: GpPosterior, spec: AcquisitionSpec) -> int:
        """Pool index maximising the acquisition; same rule as ``select_next``."""
        mean, var = self.pool_predict(post)
        obs = post.dataset.observations
        incumbent = float(obs.max()) if obs.size else post.prior_mean
        return int(self.problem.pool[int(np.argmax(acq_scores(spec, mean, var, incumbent)))])

    def believer(self, pending: Sequence[int]) -> GpPosterior:
        post = self.post
        for idx in pending:
            post = gp_condition_hallucinated(post, self.problem.candidates[idx])
        return post

    def recommend(self) -> int:
        if not self._counts:
            raise InputError("nothing observed yet")
        arms = np.array(sorted(self._counts))
        mean, _ = gp_predict_many(self.post, self.problem.candidates[arms])
        return int(arms[np.argmax(mean)])


class GridPolicy(DesignPolicy):
    def __init__(self, problem, strategy, budget):
        super().__init__(problem, strategy, budget)
        self._next = 0

    def _select(self, n, pending, rng):
        lat = self.problem.lattice
        out = [int(lat[(self._next + j) % lat.size]) for j in range(n)]
        self._next += n
        return out


class EqualSpacingPolicy(DesignPolicy):
    """Cycles through the lattice in a fixed order.

    ``order="maximin"`` (default) sweeps the points so each new one is as far
    as possible from those already visited in the sweep.  ``order="stride"``
    walks ``start, start + stride, ...`` modulo the lattice length.
    """

    def __init__(self, problem, strategy, budget):
        super().__init__(problem, strategy, budget)
        lat = problem.lattice
        kind = strategy.get("order", "maximin")
        if kind == "maximin":
            if problem.candidates.shape[1] != 1:
                raise ConfigError("maximin equal spacing needs a one-dimensional lattice")
            self._sweep = lat[maximin_order(problem.candidates[lat, 0])]
        elif kind == "stride":
            stride = int(strategy.get("stride", 1))
            if stride < 1 or math.gcd(stride, lat.size) != 1:
                raise ConfigError("equal-spacing stride must be positive and coprime to the grid size")
            start = int(strategy.get("start", 0))
            self._sweep = lat[(start + np.arange(lat.size) * stride) % lat.size]
        else:
            raise ConfigError(f"unknown equal-spacing order {kind!r}")
        self._next = 0

    def _select(self, n, pending, rng):
        out = [int(self._sweep[(self._next + j) % self._sweep.size]) for j in range(n)]
        self._next += n
        return out


class RandomPolicy(DesignPolicy):
    def _select(self, n, pending, rng):
        return list(rng.choice(self.problem.pool, size=n, replace=True))


def latin_hypercube(dim: int, n: int, rng: np.random.Generator) -> np.ndarray:
    return qmc.LatinHypercube(d=dim, seed=rng).random(n)


def _snap(points: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    d2 = ((points[:, None, :] - candidates[None, :, :]) ** 2).sum(-1)
    return np.argmin(d2, axis=1)


class LatinHypercubePolicy(DesignPolicy):
    """LHS of the whole budget over the problem domain, each point snapped to the nearest pool candidate."""

    def __init__(self, problem, strategy, budget):
        super().__init__(problem, strategy, budget)
        self._plan: list[int] | None = None

    def _build(self, rng):
        lo, hi = self.problem.domain
        unit = latin_hypercube(self.problem.candidates.shape[1], self.budget, rng)
        pool_pts = self.problem.candidates[self.problem.pool]
        return [int(self.problem.pool[i]) for i in _snap(lo + unit * (hi - lo), pool_pts)]

    def _select(self, n, pending, rng):
        if self._plan is None:
            self._plan = self._build(rng)
        out = []
        for _ in range(n):
            out.append(self._plan.pop(0) if self._plan else int(rng.choice(self.problem.pool)))
        return out


class GreedyMaxVariancePolicy(_GpMixin):
    def _select(self, n, pending, rng):
        post = self.believer(pending)
        spec = AcquisitionSpec(AcquisitionKind.MAX_VARIANCE)
        if n == 1:
            return [self.pool_argmax(post, spec)]
        picks = select_batch(post, self.pool_points, spec, BatchSpec(n, 0.0))
        return [int(self.problem.pool[i]) for i in picks]


class PureBoPolicy(_GpMixin):
    def _select(self, n, pending, rng):
        post = self.believer(pending)
        spec = AcquisitionSpec(AcquisitionKind.UCB, beta=float(self.strategy.get("beta", 2.0)))
        if n == 1:
            return [self.pool_argmax(post, spec)]
        picks = select_batch(post, self.pool_points, spec, BatchSpec(n, 0.0))
        return [int(self.problem.pool[i]) for i in picks]


class AlmabPolicy(_GpMixin):
    """Acquisition shortlist plus a bandit over candidate arms.

    Each pick ranks the pool by (diversity-penalised) acquisition, keeps the
    top ``shortlist`` candidates and lets the bandit choose among them with
    UCB1 or Thompson sampling on rewards standardised by the GP prior mean
    and signal std.  Unpulled shortlisted arms go first, in rank order.

    ``bandit`` is ``"ucb"``, ``"ts"`` or ``"uniform"`` (no bandit: a
    uniformly random shortlisted arm).  ``active_learning=False`` replaces
    the ranked shortlist by a uniformly random one and turns the GP off.
    The GP believes its own mean at each pick before the next pick of a
    batch.
    """

    def __init__(self, problem, strategy, budget, *, bandit="ucb", active_learning=True):
        self.active_learning = active_learning
        self.uses_gp = active_learning
        if active_learning:
            super().__init__(problem, strategy, budget)
        else:
            DesignPolicy.__init__(self, problem, strategy, budget)
            self.pool_points = problem.candidates[problem.pool]
        gp = problem.gp
        self.bandit = bandit
        self.shortlist_size = int(strategy.get("shortlist", 4))
        self.ucb_c = float(strategy.get("ucb_c", math.sqrt(2.0)))
        self.gamma = float(strategy.get("diversity_weight", 0.5))
        kind = AcquisitionKind(strategy.get("acquisition", AcquisitionKind.UCB))
        self.acq = AcquisitionSpec(kind, beta=float(strategy.get("beta", 2.0)))
        noise_ratio = gp.noise_std / gp.signal_std
        self.arms = BanditState.new(problem.candidates.shape[0], RewardMode.GAUSSIAN,
                                    obs_variance=max(noise_ratio**2, 1e-6))
        if self.shortlist_size < 1:
            raise ConfigError("shortlist size must be at least 1")
        self._pool_position = {int(c): i for i, c in enumerate(problem.pool)}

    def _on_observe(self, arm, value):
        if self.active_learning:
            super()._on_observe(arm, value)
        gp = self.problem.gp
        update_arm(self.arms, arm, (value - gp.prior_mean) / gp.signal_std)

    def recommend(self) -> int:
        if self.active_learning:
            return super().recommend()
        return DesignPolicy.recommend(self)

    def _pick(self, shortlist: np.ndarray, rng) -> int:
        if self.bandit == "ucb":
            return ucb1_select(self.arms, self.ucb_c, shortlist)
        if self.bandit == "ts":
            return thompson_select(self.arms, rng, shortlist)
        return int(shortlist[rng.integers(shortlist.size)])

    def _select(self, n, pending, rng):
        pool = self.problem.pool
        m = min(self.shortlist_size, pool.size)
        chosen_pos: list[int] = []
        out: list[int] = []
        if not self.active_learning:
            for _ in range(n):
                shortlist = rng.choice(pool, size=m, replace=False)
                out.append(self._pick(shortlist, rng))
            return out

        post = self.believer(pending)
        obs = self.post.dataset.observations
        incumbent = float(obs.max()) if obs.size else self.post.prior_mean
        penalty = np.zeros(pool.size)
        position = self._pool_position
        for j in range(n):
            mean, var = self.pool_predict(post)
            scores = acq_scores(self.acq, mean, var, incumbent) - self.gamma * penalty
            scores[chosen_pos] = -np.inf
            order = np.argsort(-scores, kind="stable")[:m]
            arm = self._pick(pool[order], rng)
            out.append(arm)
            pos = position.get(arm)
            if pos is not None:
                chosen_pos.append(pos)
            if j + 1 < n:
                x = self.problem.candidates[arm : arm + 1]
                corr = post.kernel.correlation(self.pool_points, x)[:, 0]
                penalty = np.maximum(penalty, corr)
                post = gp_condition_hallucinated(post, self.problem.candidates[arm])
        return out


def logistic_mle(x, y, init, *, max_iter: int = 50, tol: float = 1e-8) -> tuple[np.ndarray, bool]:
    """Damped Newton fit of ``P(y = 1) = expit(a + b x)``.

    Returns ``(coef, converged)``; ``converged`` is False when the iteration
    limit is hit or the coefficients run off (complete separation).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    design = np.column_stack([np.ones_like(x), x])
    theta = np.asarray(init, dtype=float).copy()

    def loglik(t):
        z = design @ t
        return float(np.sum(y * z - np.logaddexp(0.0, z)))

    current = loglik(theta)
    for _ in range(max_iter):
        p = expit(design @ theta)
        grad = design.T @ (y - p)
        hess = design.T @ (design * (p * (1 - p))[:, None])
        try:
            step = np.linalg.solve(hess + 1e-10 * np.eye(2), grad)
        except np.linalg.LinAlgError:
            return theta, False
        scale = 1.0
        while scale > 1e-6:
            cand = theta + scale * step
            new = loglik(cand)
            if new >= current - 1e-12:
                break
            scale *= 0.5
        theta, current = cand, new
        if np.max(np.abs(theta)) > 50:
            return theta, False
        if np.max(np.abs(scale * step)) < tol:
            return theta, True
    return theta, False


def logistic_fim(coef, x) -> np.ndarray:
    """Fisher information of one Bernoulli trial at dose ``x`` for ``(a, b)``."""
    p = expit(coef[0] + coef[1] * x)
    v = np.array([1.0, x])
    return p * (1 - p) * np.outer(v, v)


def d_optimal_scores(eff_coef, tox_coef, observed_doses, candidates, ridge: float = 1e-6) -> np.ndarray:
    """Log-determinant gain of the block-diagonal 4x4 information for each candidate dose."""
    base = ridge * np.eye(4)
    for x in observed_doses:
        base[:2, :2] += logistic_fim(eff_coef, x)
        base[2:, 2:] += logistic_fim(tox_coef, x)
    _, logdet0 = np.linalg.slogdet(base)
    out = np.empty(len(candidates))
    for i, x in enumerate(candidates):
        m = base.copy()
        m[:2, :2] += logistic_fim(eff_coef, x)
        m[2:, 2:] += logistic_fim(tox_coef, x)
        out[i] = np.linalg.slogdet(m)[1] - logdet0
    return out


class DOptimalPolicy(DesignPolicy):
    """Sequential D-optimal dosing for separate efficacy and toxicity logistic curves.

    Binary outcomes are decoded from the scalar reward ``eff - penalty * tox``.
    Coefficients are refitted by maximum likelihood after each observation;
    when a fit does not converge the configured prior coefficients are used.
    """

    def __init__(self, problem, strategy, budget):
        super().__init__(problem, strategy, budget)
        spec = problem.dose_spec
        if spec is None:
            raise ConfigError("D-optimal design needs a dose-response problem")
        self.penalty = spec.penalty
        self.prior_eff = np.asarray(strategy.get("prior_efficacy", (-1.0, 0.5)), dtype=float)
        self.prior_tox = np.asarray(strategy.get("prior_toxicity", (-3.0, 0.5)), dtype=float)
        self.ridge = float(strategy.get("ridge", 1e-6))
        self.doses = problem.candidates[:, 0]
        self.eff: list[float] = []
        self.tox: list[float] = []
        self.x: list[float] = []

    def _on_observe(self, arm, value):
        tox = 1.0 if value in (-self.penalty, 1.0 - self.penalty) else 0.0
        eff = value + self.penalty * tox
        if eff not in (0.0, 1.0):
            raise InputError(f"cannot decode dose outcome from reward {value}")
        self.x.append(float(self.doses[arm]))
        self.eff.append(eff)
        self.tox.append(tox)

    def estimates(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.x:
            return self.prior_eff, self.prior_tox
        eff, ok_e = logistic_mle(self.x, self.eff, self.prior_eff)
        tox, ok_t = logistic_mle(self.x, self.tox, self.prior_tox)
        return (eff if ok_e else self.prior_eff), (tox if ok_t else self.prior_tox)

    def _select(self, n, pending, rng):
        eff, tox = self.estimates()
        used = list(self.x) + [float(self.doses[i]) for i in pending]
        pool = self.problem.pool
        out = []
        for _ in range(n):
            scores = d_optimal_scores(eff, tox, used, self.doses[pool], self.ridge)
            pick = int(pool[int(np.argmax(scores))])
            out.append(pick)
            used.append(float(self.doses[pick]))
        return out


class BanditArmPolicy(DesignPolicy):
    """Plain bandit over all candidates treated as arms, on raw rewards."""

    def __init__(self, problem, strategy, budget, *, thompson=False):
        super().__init__(problem, strategy, budget)
        self.thompson = thompson
        self.c = float(strategy.get("ucb_c", math.sqrt(2.0)))
        obs_var = float(strategy.get("obs_variance", problem.gp.noise_std**2 or 0.1))
        self.arms = BanditState.new(problem.candidates.shape[0], RewardMode.GAUSSIAN, obs_variance=obs_var)

    def _on_observe(self, arm, value):
        update_arm(self.arms, arm, value)

    def _select(self, n, pending, rng):
        pool = self.problem.pool
        if self.thompson:
            return [thompson_select(self.arms, rng, pool) for _ in range(n)]
        return [ucb1_select(self.arms, self.c, pool) for _ in range(n)]


_POLICIES = {
    StrategyKind.GRID: GridPolicy,
    StrategyKind.RANDOM: RandomPolicy,
    StrategyKind.LATIN_HYPERCUBE: LatinHypercubePolicy,
    StrategyKind.EQUAL_SPACING: EqualSpacingPolicy,
    StrategyKind.D_OPTIMAL: DOptimalPolicy,
    StrategyKind.GREEDY_MAX_VARIANCE: GreedyMaxVariancePolicy,
    StrategyKind.PURE_BO: PureBoPolicy,
}

_ALMAB = {
    StrategyKind.ALMAB_UCB: dict(bandit="ucb"),
    StrategyKind.ALMAB_TS: dict(bandit="ts"),
    StrategyKind.ALMAB_NO_MAB: dict(bandit="uniform"),
    StrategyKind.ALMAB_NO_AL: dict(bandit="ucb", active_learning=False),
}


def make_policy(strategy: DesignStrategy | str, problem: Problem, budget: int) -> DesignPolicy:
    if not isinstance(strategy, DesignStrategy):
        strategy = DesignStrategy(strategy)
    if strategy.kind in _ALMAB:
        strategy = DesignStrategy(strategy.kind, {**problem.almab_params, **strategy.params})
        return AlmabPolicy(problem, strategy, budget, **_ALMAB[strategy.kind])
    if strategy.kind in (StrategyKind.BANDIT_UCB, StrategyKind.BANDIT_TS):
        return BanditArmPolicy(problem, strategy, budget, thompson=strategy.kind is StrategyKind.BANDIT_TS)
    return _POLICIES[strategy.kind](problem, strategy, budget)


def baseline_next(strategy: DesignStrategy | str, history, problem: Problem, rng: np.random.Generator,
                  batch: int = 1) -> list[int]:
    """Replay ``history`` of ``(index, value)`` into a fresh policy and return its next picks."""
    if problem.candidates.shape[0] == 0 or problem.pool.size == 0:
        raise InputError("no candidates to choose from")
    policy = make_policy(strategy, problem, budget=max(1, len(history) + batch))
    policy._queue = []
    for idx, value in history:
        policy.observe(idx, value)
    return policy.propose(batch, [], rng)
