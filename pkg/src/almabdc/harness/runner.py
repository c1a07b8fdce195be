"""Replicate execution and per-cell aggregation."""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from ..bandit import DelaySpec
from ..benchmarks.cases import CASES, Problem, make_problem
from ..benchmarks.strategies import DesignStrategy, make_policy
from ..distsim.simulator import DispatchMode, TaskDurationModel, simulate_async_run
from ..errors import ConfigError
from ..stats import evaluations_to_threshold
from ..surrogate import GpDataset, gp_condition, gp_fit, gp_predict_many, integrated_posterior_variance
from .seeding import noise_entropy, oracle_rng, policy_rng, query_rng

__all__ = [
    "Cell",
    "RunOptions",
    "ReplicateResult",
    "ResultRecord",
    "evaluation_budget",
    "run_replicate",
    "run_cell",
]


@dataclass(frozen=True)
class Cell:
    case: str
    strategy: DesignStrategy
    k: int = 1
    extra_noise: float = 0.0
    budget: int | None = None

    @property
    def label(self) -> str:
        return self.strategy.label


@dataclass(frozen=True)
class RunOptions:
    base_seed: int = 0
    replicates: int = 200
    durations: TaskDurationModel = field(default_factory=TaskDurationModel)
    delay: DelaySpec = field(default_factory=DelaySpec)
    update_cost: float = 0.0
    jobs: int = 1
    keep_traces: bool = False


@dataclass
class ReplicateResult:
    """Outcome of one replicate.

    ``trajectory`` is per evaluation for Cases 1-3 and per round for Cases
    4-5 and the mixture demo.  For Cases 1-3 ``values`` holds the true value
    of the current recommendation after each evaluation, ``trajectory`` its
    running best and ``final`` the last entry of ``values`` (reported scale).
    """

    replicate: int
    final: float
    trajectory: np.ndarray
    cumulative_regret: float
    wall_clock: float
    speedup: float
    queries: list[int]
    regret: np.ndarray | None = None
    mean_reward: float = float("nan")
    values: np.ndarray | None = None
    trace: str | None = None


@dataclass
class ResultRecord:
    case: str
    strategy: str
    k: int
    extra_noise: float
    replicates: list[ReplicateResult]
    budget: int | None = None

    @property
    def finals(self) -> np.ndarray:
        return np.array([r.final for r in self.replicates])

    def trajectories(self) -> np.ndarray:
        return np.vstack([r.trajectory for r in self.replicates])

    def median(self) -> float:
        return float(np.median(self.finals))

    def iqr(self) -> tuple[float, float]:
        q1, q3 = np.percentile(self.finals, [25, 75])
        return float(q1), float(q3)

    def summary(self) -> dict:
        f = self.finals
        q1, q3 = self.iqr()
        return {
            "case": self.case,
            "strategy": self.strategy,
            "k": self.k,
            "extra_noise": self.extra_noise,
            "n": int(f.size),
            "median": float(np.median(f)),
            "q1": q1,
            "q3": q3,
            "mean": float(f.mean()),
            "std": float(f.std(ddof=1)) if f.size > 1 else 0.0,
            "median_wall_clock": float(np.median([r.wall_clock for r in self.replicates])),
        }


def evaluation_budget(case: str, k: int, budget: int | None = None) -> int:
    """Evaluations the simulator runs for one replicate (start observations excluded)."""
    settings = CASES[str(case)]
    if case == "4":
        return (budget or settings.budget) * k
    if case == "5":
        return ((budget or settings.budget) // k) * k
    if case == "mixture":
        return (budget or settings.budget) * k
    return budget or settings.budget


def _gp_recommendations(problem: Problem, observed) -> list[int]:
    gp = problem.gp
    post = gp_fit(GpDataset.empty(problem.candidates.shape[1], gp.noise_std), gp.kernel, gp.prior_mean)
    seen: list[int] = []
    recs = []
    for arm, value in observed:
        post = gp_condition(post, problem.candidates[arm], value)
        if arm not in seen:
            seen.append(arm)
        arms = np.array(sorted(seen))
        mean, _ = gp_predict_many(post, problem.candidates[arms])
        recs.append(int(arms[np.argmax(mean)]))
    return recs


def _empirical_recommendations(observed) -> list[int]:
    sums: dict[int, float] = {}
    counts: dict[int, int] = {}
    recs = []
    for arm, value in observed:
        sums[arm] = sums.get(arm, 0.0) + value
        counts[arm] = counts.get(arm, 0) + 1
        arms = sorted(counts)
        means = [sums[a] / counts[a] for a in arms]
        recs.append(arms[int(np.argmax(means))])
    return recs


def _round_ends(queries) -> list[int]:
    """Number of completed queries at the end of each round."""
    by_round: dict[int, int] = {}
    for i, rec in enumerate(queries):
        by_round[rec.round] = i + 1
    return [by_round[r] for r in sorted(by_round)]


def run_replicate(cell: Cell, replicate: int, options: RunOptions) -> ReplicateResult:
    case = str(cell.case)
    problem = make_problem(case, oracle_rng(options.base_seed, case, replicate),
                           extra_noise=cell.extra_noise, budget=cell.budget if case in ("1", "2", "3") else None)
    n_eval = evaluation_budget(case, cell.k, cell.budget)
    if case == "mixture":
        # the policy sees the mean of K replicate rewards
        problem.gp = replace(problem.gp, noise_std=problem.gp.noise_std / math.sqrt(cell.k))
    policy = make_policy(cell.strategy, problem, n_eval)
    entropy = noise_entropy(options.base_seed, case, replicate)

    start_obs = []
    for q, idx in enumerate(problem.start):
        y = problem.sample(idx, query_rng(entropy, q))
        policy.observe(idx, y)
        start_obs.append((idx, y))
    offset = len(problem.start)

    def oracle(arm: int, q: int) -> float:
        return problem.sample(arm, query_rng(entropy, q + offset))

    rng = policy_rng(options.base_seed, case, cell.label, cell.k, replicate)
    mode = DispatchMode.AVERAGING if case == "mixture" else DispatchMode.BATCH
    sim = simulate_async_run(oracle, policy, cell.k, n_eval, options.durations, options.delay, rng,
                             mode=mode, update_cost=options.update_cost)
    queries = [q.arm for q in sim.queries]
    truth = problem.truth
    f_star = problem.optimum
    cum_regret = float(np.sum(f_star - truth[queries]))

    if problem.metric == "best_value":
        observed = sim.observed
        recs = _gp_recommendations(problem, observed) if policy.uses_gp else _empirical_recommendations(observed)
        rec_values = truth[recs]
        traj = problem.report(np.maximum.accumulate(rec_values))
        values = problem.report(rec_values)
        gap = f_star - np.maximum.accumulate(rec_values)
        return _attach_trace(ReplicateResult(replicate, float(values[-1]), traj, abs(cum_regret), sim.wall_clock,
                                             sim.speedup, queries, regret=gap, values=values), sim, cell, options)

    ends = _round_ends(sim.queries)
    if problem.metric == "simple_regret":
        start_best = max(truth[i] for i in problem.start) if problem.start else -np.inf
        best = np.maximum.accumulate(truth[queries])
        traj = np.array([f_star - max(start_best, best[e - 1]) for e in ends])
        return _attach_trace(ReplicateResult(replicate, float(traj[-1]), traj, cum_regret, sim.wall_clock,
                                             sim.speedup, queries), sim, cell, options)

    if problem.metric == "ipv":
        gp = problem.gp
        post = gp_fit(GpDataset.empty(2, gp.noise_std), gp.kernel, gp.prior_mean)
        for idx, y in start_obs:
            post = gp_condition(post, problem.candidates[idx], y)
        traj = []
        done = 0
        for e in ends:
            for rec in sim.queries[done:e]:
                post = gp_condition(post, problem.candidates[rec.arm], rec.value)
            done = e
            traj.append(integrated_posterior_variance(post, problem.ipv_grid))
        traj = np.array(traj)
        return _attach_trace(ReplicateResult(replicate, float(traj[-1]), traj, cum_regret, sim.wall_clock,
                                             sim.speedup, queries), sim, cell, options)

    # bandit demo: one arm per round, the policy sees the agents' average reward
    arms = np.array([a for a, _ in sim.observed])
    rewards = np.array([v for _, v in sim.observed])
    regret = np.cumsum(f_star - truth[arms])
    return _attach_trace(ReplicateResult(replicate, float(regret[-1]), regret, float(regret[-1]), sim.wall_clock,
                                         sim.speedup, queries, regret=regret, mean_reward=float(rewards.mean())),
                         sim, cell, options)


def _attach_trace(result: ReplicateResult, sim, cell: Cell, options: RunOptions) -> ReplicateResult:
    """Keep the event log plus a closing summary line that ``scaling`` reads back."""
    if options.keep_traces:
        summary = {
            "kind": "summary",
            "k": cell.k,
            "wall_clock": sim.wall_clock,
            "task_time": sim.total_task_time,
            "update_time": sim.total_update_time,
        }
        result.trace = sim.trace.to_jsonl() + json.dumps(summary) + "\n"
    return result


def _run_one(args):
    cell, r, options = args
    return run_replicate(cell, r, options)


def run_cell(cell: Cell, options: RunOptions) -> ResultRecord:
    """Run ``options.replicates`` replicates; results are in replicate order whatever ``jobs`` is."""
    if str(cell.case) not in CASES:
        raise ConfigError(f"unknown case {cell.case!r}")
    if cell.k < 1:
        raise ConfigError("K must be at least 1")
    tasks = [(cell, r, options) for r in range(options.replicates)]
    if options.jobs > 1:
        with ProcessPoolExecutor(max_workers=options.jobs) as pool:
            results = list(pool.map(_run_one, tasks, chunksize=max(1, len(tasks) // (4 * options.jobs))))
    else:
        results = [_run_one(t) for t in tasks]
    return ResultRecord(str(cell.case), cell.label, cell.k, cell.extra_noise, results, cell.budget)


def rounds_to_threshold(trajectory: Sequence[float], threshold: float) -> int | None:
    """First 1-based round whose value is at or below ``threshold`` (minimised metrics)."""
    return evaluations_to_threshold(-np.asarray(trajectory, dtype=float), -threshold)

