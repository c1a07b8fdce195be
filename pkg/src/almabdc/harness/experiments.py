"""Sweeps built from cells: plain grids, noise robustness, ablation, budget and scaling."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ..benchmarks.strategies import DesignStrategy
from ..distsim.scaling import ScalingParams, amdahl_speedup, fit_serial_fraction
from ..distsim.simulator import TaskDurationModel, simulate_async_run
from ..errors import ConfigError
from .config import ABLATION_STRATEGIES, ExperimentConfig
from .outputs import _csv_text, _write, dumps, emit_outputs, maximizes
from .runner import Cell, ResultRecord, RunOptions, run_cell

__all__ = [
    "options_for",
    "run_cells",
    "run_noise_sweep",
    "run_ablation",
    "run_budget_sweep",
    "run_experiment",
    "ScalingPoint",
    "scaling_experiment",
    "speedups_from_traces",
]


def options_for(config: ExperimentConfig, keep_traces: bool = False) -> RunOptions:
    return RunOptions(
        base_seed=config.base_seed,
        replicates=config.replicates,
        durations=config.durations,
        delay=config.delay,
        update_cost=config.update_cost,
        jobs=config.jobs,
        keep_traces=keep_traces,
    )


def run_cells(config: ExperimentConfig, *, extra_noise: float = 0.0, budget: int | None = None,
              strategies: Sequence[DesignStrategy] | None = None, keep_traces: bool = False) -> list[ResultRecord]:
    """Every strategy at every K, in config order."""
    opts = options_for(config, keep_traces)
    budget = budget if budget is not None else config.budget
    records = []
    for strategy in strategies or config.strategies:
        for k in config.k:
            cell = Cell(config.case, strategy, k, extra_noise=extra_noise, budget=budget)
            records.append(run_cell(cell, opts))
    return records


def _direction(case: str) -> float:
    return 1.0 if maximizes(case) else -1.0


def _medians(records: Sequence[ResultRecord]) -> dict[tuple[str, int], tuple[float, float]]:
    return {(r.strategy, r.k): (float(np.median(r.finals)), float(r.finals.mean())) for r in records}


def run_noise_sweep(config: ExperimentConfig, sigmas: Sequence[float] | None = None
                    ) -> tuple[dict[float, list[ResultRecord]], list[dict]]:
    """Repeat the cells at each extra noise level and tabulate degradation.

    Degradation is the loss relative to the noise-free run of the same
    strategy (positive means worse), for both medians and means.  When
    PureBO is among the strategies the table also carries each strategy's
    advantage over it at the same level.
    """
    levels = [float(s) for s in (sigmas if sigmas is not None else config.noise_levels)]
    if 0.0 not in levels:
        levels.insert(0, 0.0)
    levels = sorted(set(levels))
    by_level = {s: run_cells(config, extra_noise=s) for s in levels}
    sign = _direction(config.case)
    base = _medians(by_level[0.0])
    table = []
    for s in levels:
        stats = _medians(by_level[s])
        for (strategy, k), (med, mean) in stats.items():
            row = {
                "strategy": strategy,
                "k": k,
                "sigma": s,
                "median": med,
                "mean": mean,
                "degradation_median": sign * (base[(strategy, k)][0] - med),
                "degradation_mean": sign * (base[(strategy, k)][1] - mean),
            }
            ref = stats.get(("pure_bo", k))
            if ref is not None:
                row["advantage_vs_pure_bo_median"] = sign * (med - ref[0])
                row["advantage_vs_pure_bo_mean"] = sign * (mean - ref[1])
            table.append(row)
    return by_level, table


def run_ablation(config: ExperimentConfig) -> tuple[list[ResultRecord], list[dict]]:
    """Full / no-MAB / no-AL / PureBO on the same seeds (config strategies if given)."""
    strategies = config.strategies or tuple(DesignStrategy(s) for s in ABLATION_STRATEGIES)
    records = run_cells(config, strategies=strategies)
    table = []
    for rec in records:
        med, mean = float(np.median(rec.finals)), float(rec.finals.mean())
        q1, q3 = rec.iqr()
        table.append({"strategy": rec.strategy, "k": rec.k, "median": med, "q1": q1, "q3": q3, "mean": mean})
    return records, table


def run_budget_sweep(config: ExperimentConfig) -> tuple[dict[int, list[ResultRecord]], list[dict]]:
    if not config.budgets:
        raise ConfigError("a budget sweep needs a non-empty 'budgets' list")
    by_budget = {b: run_cells(config, budget=b) for b in config.budgets}
    table = []
    for b, records in by_budget.items():
        for rec in records:
            q1, q3 = rec.iqr()
            table.append({"budget": b, "strategy": rec.strategy, "k": rec.k,
                          "median": rec.median(), "q1": q1, "q3": q3})
    return by_budget, table


def _level_dir(prefix: str, value) -> str:
    return f"{prefix}_{value:g}" if isinstance(value, float) else f"{prefix}_{value}"


def run_experiment(config: ExperimentConfig, out: str | Path | None = None, fmt: str = "csv",
                   keep_traces: bool = False) -> dict:
    """Run the config's sweep and write its output tree; returns the top-level summary."""
    out = Path(out if out is not None else config.out)
    manifest = config.to_mapping()
    kwargs = dict(reference=config.reference, threshold=config.threshold, fmt_=fmt)

    if config.sweep == "cells":
        records = run_cells(config, keep_traces=keep_traces)
        return emit_outputs(records, out, manifest=manifest, **kwargs)

    if config.sweep == "ablation":
        records, table = run_ablation(config)
        agg = emit_outputs(records, out, manifest=manifest, extra={"ablation": table}, **kwargs)
        return agg

    if config.sweep == "noise":
        by_level, table = run_noise_sweep(config)
        for s, records in by_level.items():
            emit_outputs(records, out / _level_dir("sigma", s), **kwargs)
        summary = {"config": manifest, "noise": table}
        _write(out / "summary.json", dumps(summary) + "\n")
        _write(out / "config.json", dumps(manifest) + "\n")
        cols = ["strategy", "k", "sigma", "median", "mean", "degradation_median", "degradation_mean"]
        _write(out / "plots" / "noise.csv", _csv_text(cols, ([row[c] for c in cols] for row in table)))
        return summary

    by_budget, table = run_budget_sweep(config)
    for b, records in by_budget.items():
        emit_outputs(records, out / _level_dir("budget", b), **kwargs)
    summary = {"config": manifest, "budget": table}
    _write(out / "summary.json", dumps(summary) + "\n")
    _write(out / "config.json", dumps(manifest) + "\n")
    cols = ["budget", "strategy", "k", "median", "q1", "q3"]
    _write(out / "plots" / "budget.csv", _csv_text(cols, ([row[c] for c in cols] for row in table)))
    return summary


@dataclass(frozen=True)
class ScalingPoint:
    k: int
    speedup: float
    amdahl: float
    trace: str


class _FixedArm:
    """Workload-only policy: the scaling experiment measures the scheduler, not the search."""

    def propose(self, n, pending, rng):
        return [0] * n

    def observe(self, arm, value):
        pass


def scaling_experiment(ks: Sequence[int], n_tasks: int, update_cost: float,
                       durations: TaskDurationModel | None = None) -> tuple[list[ScalingPoint], float]:
    """Simulated speedup at each K against the Amdahl curve of the implied serial fraction.

    With unit-mean tasks and a stop-the-world update after each one, the
    serial fraction is ``update_cost / (mean task + update_cost)``.  Returns
    the points and the serial fraction fitted back from the speedups.
    """
    durations = durations or TaskDurationModel()
    if any(k < 1 for k in ks):
        raise ConfigError("every K must be at least 1")
    points = []
    for k in ks:
        if n_tasks < k:
            raise ConfigError(f"need at least K={k} tasks")
        sim = simulate_async_run(lambda arm, q: 0.0, _FixedArm(), k, n_tasks, durations,
                                 rng=np.random.default_rng(0), update_cost=update_cost)
        p = sim.total_update_time / (sim.total_task_time + sim.total_update_time)
        summary = {"kind": "summary", "k": k, "wall_clock": sim.wall_clock, "task_time": sim.total_task_time,
                   "update_time": sim.total_update_time}
        trace = sim.trace.to_jsonl() + json.dumps(summary) + "\n"
        points.append(ScalingPoint(k, sim.speedup, amdahl_speedup(ScalingParams(serial_fraction=p), k), trace))
    fitted = fit_serial_fraction([(pt.k, pt.speedup) for pt in points]) if len(points) > 1 else float("nan")
    return points, fitted


def speedups_from_traces(paths: Sequence[str | Path]) -> list[tuple[int, float]]:
    """Median speedup per K from trace files, read from each file's closing summary line."""
    by_k: dict[int, list[float]] = {}
    for path in paths:
        lines = Path(path).read_text().splitlines()
        if not lines:
            raise ConfigError(f"{path}: empty trace")
        try:
            summary = json.loads(lines[-1])
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: last line is not JSON") from exc
        if summary.get("kind") != "summary":
            raise ConfigError(f"{path}: trace has no summary line")
        work = float(summary["task_time"]) + float(summary["update_time"])
        by_k.setdefault(int(summary["k"]), []).append(work / float(summary["wall_clock"]))
    return [(k, float(np.median(v))) for k, v in sorted(by_k.items())]
