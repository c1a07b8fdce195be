"""Bandit policies, regret accounting, regret bounds and delayed feedback."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import InputError

__all__ = [
    "RewardMode",
    "BanditState",
    "ucb1_select",
    "thompson_select",
    "update_arm",
    "RegretLedger",
    "distributed_regret_step",
    "recompute_distributed_regret",
    "effective_regret",
    "comm_cost",
    "ucb_regret_bound",
    "DelayKind",
    "DelaySpec",
    "Delivery",
    "delayed_feedback_buffer",
    "BanditRun",
    "simulate_bandit",
    "Decomposition",
    "al_mab_decomposition",
]

DEFAULT_UCB_C = math.sqrt(2.0)


class RewardMode(str, enum.Enum):
    BERNOULLI = "bernoulli"
    GAUSSIAN = "gaussian"


@dataclass
class BanditState:
    """Per-arm pull counts and empirical means, plus Thompson-sampling posteriors.

    Bernoulli mode keeps Beta(alpha, beta) counts starting at the uniform
    prior.  Gaussian mode uses a flat prior with known ``obs_variance``, so
    the posterior of arm ``i`` is ``N(means[i], obs_variance / counts[i])``.
    The state is owned by one caller and mutated in place.
    """

    counts: np.ndarray
    means: np.ndarray
    mode: RewardMode = RewardMode.GAUSSIAN
    alpha: np.ndarray | None = None
    beta: np.ndarray | None = None
    obs_variance: float = 0.1

    @classmethod
    def new(cls, n_arms: int, mode: RewardMode | str = RewardMode.GAUSSIAN, obs_variance: float = 0.1):
        if n_arms < 1:
            raise InputError("a bandit needs at least one arm")
        if not obs_variance > 0:
            raise InputError(f"obs_variance must be positive, got {obs_variance}")
        return cls(
            counts=np.zeros(n_arms, dtype=np.int64),
            means=np.zeros(n_arms),
            mode=RewardMode(mode),
            alpha=np.ones(n_arms),
            beta=np.ones(n_arms),
            obs_variance=float(obs_variance),
        )

    @property
    def n_arms(self) -> int:
        return self.counts.shape[0]

    @property
    def total_pulls(self) -> int:
        return int(self.counts.sum())


def _arm_subset(state: BanditState, arms: Sequence[int] | None) -> np.ndarray:
    if state.n_arms == 0:
        raise InputError("no arms to select from")
    if arms is None:
        return np.arange(state.n_arms)
    arms = np.asarray(arms, dtype=np.int64)
    if arms.size == 0:
        raise InputError("no arms to select from")
    if arms.min() < 0 or arms.max() >= state.n_arms:
        raise InputError(f"arm index out of range for {state.n_arms} arms")
    return arms


def ucb1_select(state: BanditState, c: float = DEFAULT_UCB_C, arms: Sequence[int] | None = None) -> int:
    """UCB1 index policy.

    ``arms`` optionally restricts the choice to an ordered subset; forced
    exploration and tie-breaking then follow that order.
    """
    if not c > 0:
        raise InputError(f"exploration constant must be positive, got {c}")
    arms = _arm_subset(state, arms)
    counts = state.counts[arms]
    unpulled = np.flatnonzero(counts == 0)
    if unpulled.size:
        return int(arms[unpulled[0]])
    t = state.total_pulls
    index = state.means[arms] + c * np.sqrt(math.log(t) / counts)
    return int(arms[np.argmax(index)])


def thompson_select(state: BanditState, rng: np.random.Generator, arms: Sequence[int] | None = None) -> int:
    arms = _arm_subset(state, arms)
    if state.mode is RewardMode.BERNOULLI:
        draws = rng.beta(state.alpha[arms], state.beta[arms])
        return int(arms[np.argmax(draws)])
    counts = state.counts[arms]
    unpulled = np.flatnonzero(counts == 0)
    if unpulled.size:
        # flat prior is improper until an arm has one observation
        return int(arms[unpulled[0]])
    draws = rng.normal(state.means[arms], np.sqrt(state.obs_variance / counts))
    return int(arms[np.argmax(draws)])


def update_arm(state: BanditState, arm: int, reward: float) -> BanditState:
    if not 0 <= arm < state.n_arms:
        raise InputError(f"arm {arm} out of range for {state.n_arms} arms")
    reward = float(reward)
    if state.mode is RewardMode.BERNOULLI:
        if reward not in (0.0, 1.0):
            raise InputError(f"Bernoulli rewards must be 0 or 1, got {reward}")
        state.alpha[arm] += reward
        state.beta[arm] += 1.0 - reward
    n = state.counts[arm] + 1
    state.means[arm] += (reward - state.means[arm]) / n
    state.counts[arm] = n
    return state


@dataclass
class RegretLedger:
    """Regret bookkeeping for rounds in which K agents each pull one arm.

    ``distributed_regret`` sums the per-round gap of the agents' average
    arm mean.  ``cumulative_regret`` sums the gap of every individual pull,
    so the two coincide when K = 1.
    """

    true_means: np.ndarray
    comm_weight: float = 0.0
    rounds: list[tuple[int, ...]] = field(default_factory=list)
    comm_costs: list[float] = field(default_factory=list)
    distributed_regret: float = 0.0
    cumulative_regret: float = 0.0

    def __post_init__(self) -> None:
        self.true_means = np.asarray(self.true_means, dtype=float)
        if self.true_means.ndim != 1 or self.true_means.size == 0:
            raise InputError("true_means must be a non-empty vector")

    @property
    def optimal_mean(self) -> float:
        return float(self.true_means.max())

    @property
    def n_rounds(self) -> int:
        return len(self.rounds)


def distributed_regret_step(ledger: RegretLedger, arms_chosen: Sequence[int], comm: float = 0.0) -> RegretLedger:
    arms = tuple(int(a) for a in arms_chosen)
    if not arms:
        raise InputError("a round needs at least one agent")
    if min(arms) < 0 or max(arms) >= ledger.true_means.size:
        raise InputError(f"arm index out of range in {arms}")
    gaps = ledger.optimal_mean - ledger.true_means[list(arms)]
    ledger.distributed_regret += float(gaps.mean())
    ledger.cumulative_regret += float(gaps.sum())
    ledger.rounds.append(arms)
    ledger.comm_costs.append(float(comm))
    return ledger


def recompute_distributed_regret(ledger: RegretLedger) -> float:
    mu_star = ledger.optimal_mean
    return float(sum(mu_star - ledger.true_means[list(r)].mean() for r in ledger.rounds))


def effective_regret(ledger: RegretLedger) -> float:
    return ledger.distributed_regret + ledger.comm_weight * math.fsum(ledger.comm_costs)


def comm_cost(alpha: float, beta: float, k: int) -> float:
    """Per-round coordination cost ``alpha * K**beta``."""
    if k < 1:
        raise InputError(f"K must be at least 1, got {k}")
    return alpha * k**beta


def ucb_regret_bound(gaps: Sequence[float], horizon: int) -> float:
    """Classical UCB1 bound ``sum_i 8 ln T / gap_i + (1 + pi^2/3) gap_i``."""
    if horizon < 2:
        raise InputError(f"horizon must be at least 2, got {horizon}")
    gaps = np.asarray(gaps, dtype=float)
    if gaps.size and not np.all(gaps > 0):
        raise InputError("all gaps must be positive; drop optimal arms first")
    return float(np.sum(8.0 * math.log(horizon) / gaps + (1.0 + math.pi**2 / 3.0) * gaps))


class DelayKind(str, enum.Enum):
    ZERO = "zero"
    UNIFORM = "uniform"
    CONSTANT = "constant"


@dataclass(frozen=True)
class DelaySpec:
    kind: DelayKind = DelayKind.ZERO
    tau_max: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", DelayKind(self.kind))
        if int(self.tau_max) != self.tau_max or self.tau_max < 0:
            raise InputError(f"tau_max must be a non-negative integer, got {self.tau_max}")

    def sample(self, rng: np.random.Generator, size: int | None = None):
        if self.kind is DelayKind.ZERO or self.tau_max == 0:
            return 0 if size is None else np.zeros(size, dtype=np.int64)
        if self.kind is DelayKind.CONSTANT:
            return self.tau_max if size is None else np.full(size, self.tau_max, dtype=np.int64)
        draw = rng.integers(0, self.tau_max + 1, size=size)
        return int(draw) if size is None else draw


class Delivery(NamedTuple):
    deliver_round: int
    issue_round: int
    agent: int
    arm: int
    reward: float


def delayed_feedback_buffer(events, delay: DelaySpec, rng: np.random.Generator) -> list[Delivery]:
    """Attach a delivery round to each ``(issue_round, agent, arm, reward)`` event.

    One delay is drawn per event in input order.  The result is sorted by
    delivery round, then agent index, then issue round.
    """
    events = list(events)
    delays = delay.sample(rng, len(events))
    out = [
        Delivery(int(issue) + int(d), int(issue), int(agent), int(arm), float(reward))
        for (issue, agent, arm, reward), d in zip(events, delays)
    ]
    out.sort(key=lambda e: (e.deliver_round, e.agent, e.issue_round))
    return out


@dataclass
class BanditRun:
    ledger: RegretLedger
    regret_trajectory: np.ndarray
    rewards: np.ndarray


def simulate_bandit(
    true_means,
    horizon: int,
    rng: np.random.Generator,
    policy: str = "ucb",
    *,
    c: float = DEFAULT_UCB_C,
    mode: RewardMode | str = RewardMode.BERNOULLI,
    noise_std: float = 0.1,
    delay: DelaySpec | None = None,
    agents: int = 1,
) -> BanditRun:
    """Run a synchronous bandit for ``horizon`` rounds.

    Every round each of ``agents`` agents pulls an arm chosen from the shared
    state built only from rewards delivered so far.  A reward issued in round
    ``t`` with delay ``d`` is applied at the end of round ``t + d``.
    ``regret_trajectory[t]`` is the distributed (pseudo-)regret after round
    ``t + 1``.
    """
    true_means = np.asarray(true_means, dtype=float)
    mode = RewardMode(mode)
    delay = delay or DelaySpec()
    if policy not in ("ucb", "ts"):
        raise InputError(f"unknown bandit policy {policy!r}")
    state = BanditState.new(true_means.size, mode, obs_variance=noise_std**2 if noise_std > 0 else 0.1)
    ledger = RegretLedger(true_means)
    pending: dict[int, list[tuple[int, int, float]]] = {}
    trajectory = np.empty(horizon)
    rewards = np.empty((horizon, agents))
    for t in range(horizon):
        chosen = []
        for agent in range(agents):
            arm = ucb1_select(state, c) if policy == "ucb" else thompson_select(state, rng)
            if mode is RewardMode.BERNOULLI:
                reward = float(rng.random() < true_means[arm])
            else:
                reward = float(true_means[arm] + noise_std * rng.standard_normal())
            chosen.append(arm)
            rewards[t, agent] = reward
            pending.setdefault(t + int(delay.sample(rng)), []).append((agent, arm, reward))
        distributed_regret_step(ledger, chosen)
        trajectory[t] = ledger.distributed_regret
        for agent, arm, reward in sorted(pending.pop(t, []), key=lambda e: e[0]):
            update_arm(state, arm, reward)
    return BanditRun(ledger, trajectory, rewards)


class Decomposition(NamedTuple):
    total_regret: float
    bandit_regret: float
    approximation_excess: float
    shortlist: tuple[int, ...]


def al_mab_decomposition(
    true_means,
    surrogate_means,
    shortlist_size: int,
    horizon: int,
    rng: np.random.Generator,
    *,
    c: float = DEFAULT_UCB_C,
    mode: RewardMode | str = RewardMode.BERNOULLI,
    noise_std: float = 0.1,
) -> Decomposition:
    """Split the regret of a shortlist-then-bandit run into two parts.

    The shortlist holds the ``shortlist_size`` arms with the highest
    surrogate means.  UCB1 runs on the shortlist only.  ``bandit_regret`` is
    measured against the best shortlisted arm and ``approximation_excess`` is
    the extra regret from the shortlist missing better arms, so the two add
    up to ``total_regret``.
    """
    true_means = np.asarray(true_means, dtype=float)
    surrogate_means = np.asarray(surrogate_means, dtype=float)
    if surrogate_means.shape != true_means.shape:
        raise InputError("surrogate and true means must have the same length")
    if not 1 <= shortlist_size <= true_means.size:
        raise InputError(f"shortlist size must be in [1, {true_means.size}]")
    order = np.argsort(-surrogate_means, kind="stable")[:shortlist_size]
    shortlist = tuple(int(i) for i in order)
    run = simulate_bandit(true_means[list(shortlist)], horizon, rng, "ucb", c=c, mode=mode, noise_std=noise_std)
    bandit = run.ledger.distributed_regret
    excess = horizon * (true_means.max() - true_means[list(shortlist)].max())
    return Decomposition(bandit + excess, bandit, float(excess), shortlist)
