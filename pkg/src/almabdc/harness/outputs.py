"""Result files: per-replicate rows, aggregate JSON and long-format plot tables.

Every float is written with 17 significant digits so values round-trip
exactly, and nothing time- or host-dependent enters a file, so the same
config and seed give the same bytes.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ..benchmarks.cases import CASES
from ..distsim.scaling import ScalingParams, amdahl_speedup, fit_serial_fraction
from ..errors import InputError, NumericalError
from ..stats import bonferroni, fit_convergence_rate, mann_whitney_u, median_iqr
from .runner import ResultRecord

__all__ = [
    "REPLICATE_COLUMNS",
    "fmt",
    "dumps",
    "maximizes",
    "replicate_rows",
    "aggregate",
    "emit_outputs",
]

REPLICATE_COLUMNS = ("case", "strategy", "K", "replicate", "round", "metric", "best_so_far", "regret")


def fmt(value) -> str:
    """17-significant-digit text for floats, blank for missing values."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    x = float(value)
    if math.isnan(x):
        return ""
    return format(x, ".17g")


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON text with floats at 17 significant digits; NaN and inf become null."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return "null" if not math.isfinite(x) else format(x, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in seq) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in seq) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def maximizes(case: str) -> bool:
    """Whether a larger final metric is better for this case."""
    settings = CASES[str(case)]
    return settings.metric == "best_value" and settings.sense > 0


def replicate_rows(record: ResultRecord) -> Iterable[tuple]:
    """One row per replicate and round.

    Cases 1-3: ``metric`` is the true value of the current recommendation,
    ``best_so_far`` its running best and ``regret`` the gap of that best to
    the optimum.  Case 4: all three columns hold the simple regret.  Case 5:
    IPV and its running minimum, no regret.  Mixture: cumulative regret.
    """
    kind = CASES[record.case].metric
    for rep in record.replicates:
        traj = np.asarray(rep.trajectory, dtype=float)
        for t in range(traj.size):
            if kind == "best_value":
                metric, best, regret = rep.values[t], traj[t], rep.regret[t]
            elif kind == "simple_regret":
                metric = best = regret = traj[t]
            elif kind == "ipv":
                metric, best, regret = traj[t], float(np.min(traj[: t + 1])), None
            else:
                metric, best, regret = traj[t], None, traj[t]
            yield (record.case, record.strategy, record.k, rep.replicate, t + 1, metric, best, regret)


def _csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    return buf.getvalue()


def _gap_curve(record: ResultRecord) -> np.ndarray | None:
    """Median distance-to-target curve used for the convergence-rate fit."""
    kind = CASES[record.case].metric
    if kind == "best_value":
        return np.median(np.vstack([r.regret for r in record.replicates]), axis=0)
    if kind in ("simple_regret", "ipv"):
        return np.median(record.trajectories(), axis=0)
    return None


def _rate_fit(record: ResultRecord) -> dict:
    gap = _gap_curve(record)
    if gap is None:
        return {"lambda": None, "r2": None}
    try:
        lam, r2 = fit_convergence_rate(-gap, 0.0)
    except NumericalError:
        return {"lambda": None, "r2": None}
    return {"lambda": lam, "r2": r2}


def _threshold_hits(record: ResultRecord, threshold: float) -> dict:
    up = maximizes(record.case)
    hits = []
    for rep in record.replicates:
        traj = np.asarray(rep.trajectory, dtype=float)
        ok = np.flatnonzero(traj >= threshold if up else traj <= threshold)
        hits.append(float(ok[0] + 1) if ok.size else math.inf)
    med = float(np.median(hits))
    return {
        "threshold": threshold,
        "median_steps": med if math.isfinite(med) else None,
        "not_reached": int(sum(1 for h in hits if not math.isfinite(h))),
    }


def _cell_summary(record: ResultRecord, threshold: float | None) -> dict:
    out = record.summary()
    out["budget"] = record.budget
    out["median_speedup"] = float(np.median([r.speedup for r in record.replicates]))
    if CASES[record.case].metric == "bandit_regret":
        out["median_mean_reward"] = float(np.median([r.mean_reward for r in record.replicates]))
    out.update(_rate_fit(record))
    if threshold is not None:
        out["to_threshold"] = _threshold_hits(record, threshold)
    return out


def _group_key(record: ResultRecord) -> tuple:
    return (record.case, record.extra_noise, record.budget, record.k)


def aggregate(records: Sequence[ResultRecord], reference: str = "almab_ucb",
              threshold: float | None = None) -> dict:
    """Medians, IQRs, rate fits and reference-vs-rest rank tests.

    Cells are grouped by (case, noise, budget, K).  Within a group every
    other strategy is tested against ``reference`` with a one-sided
    Mann-Whitney test in the direction of "reference is better", and the
    p-values are Bonferroni-adjusted with m = the number of such tests.
    Groups without the reference get no tests.  When one strategy was run
    at several K, the serial fraction is fitted to its median speedups.
    """
    groups: dict[tuple, list[ResultRecord]] = {}
    for rec in records:
        groups.setdefault(_group_key(rec), []).append(rec)

    out_groups = []
    for (case, noise, budget, k), recs in groups.items():
        ref = next((r for r in recs if r.strategy == reference), None)
        others = [r for r in recs if r is not ref]
        tests = []
        if ref is not None and others:
            alt = "greater" if maximizes(case) else "less"
            raw = [mann_whitney_u(ref.finals, o.finals, alternative=alt) for o in others]
            adj = bonferroni([t.pvalue for t in raw])
            for o, t, p_adj in zip(others, raw, adj):
                tests.append({
                    "strategy": o.strategy,
                    "alternative": alt,
                    "u": t.statistic,
                    "p": t.pvalue,
                    "p_adjusted": float(p_adj),
                    "method": t.method,
                })
        out_groups.append({
            "case": case,
            "extra_noise": noise,
            "budget": budget,
            "k": k,
            "reference": reference if ref is not None else None,
            "bonferroni_m": len(tests),
            "cells": [_cell_summary(r, threshold) for r in recs],
            "tests": tests,
        })

    return {"groups": out_groups, "scaling": _scaling_fits(records)}


def _scaling_fits(records: Sequence[ResultRecord]) -> list[dict]:
    by_strategy: dict[tuple, dict[int, float]] = {}
    for rec in records:
        key = (rec.case, rec.strategy, rec.extra_noise, rec.budget)
        by_strategy.setdefault(key, {})[rec.k] = float(np.median([r.speedup for r in rec.replicates]))
    fits = []
    for (case, strategy, noise, budget), table in by_strategy.items():
        pairs = sorted(table.items())
        if len(pairs) < 2 or all(k == 1 for k, _ in pairs):
            continue
        try:
            p = fit_serial_fraction(pairs)
        except InputError:
            continue
        fits.append({
            "case": case,
            "strategy": strategy,
            "extra_noise": noise,
            "budget": budget,
            "serial_fraction": p,
            "speedups": [[k, s] for k, s in pairs],
        })
    return fits


def _curve_rows(records: Sequence[ResultRecord]):
    for rec in records:
        traj = rec.trajectories()
        q1, med, q3 = np.percentile(traj, [25, 50, 75], axis=0)
        mean = traj.mean(axis=0)
        for t in range(traj.shape[1]):
            yield (rec.case, rec.strategy, rec.k, rec.extra_noise, t + 1, med[t], q1[t], q3[t], mean[t])


def _final_rows(records: Sequence[ResultRecord]):
    for rec in records:
        for rep in rec.replicates:
            yield (rec.case, rec.strategy, rec.k, rec.extra_noise, rep.replicate, rep.final,
                   rep.wall_clock, rep.speedup)


def _scaling_rows(fits: list[dict]):
    for fit in fits:
        params = ScalingParams(serial_fraction=fit["serial_fraction"])
        for k, s in fit["speedups"]:
            yield (fit["case"], fit["strategy"], k, s, amdahl_speedup(params, int(k)))


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def emit_outputs(records: Sequence[ResultRecord], out_dir: str | Path, *, reference: str = "almab_ucb",
                 threshold: float | None = None, manifest: dict | None = None, fmt_: str = "csv",
                 extra: dict | None = None) -> dict:
    """Write the output tree and return the aggregate mapping.

    Layout: ``replicates.csv`` (or ``replicates.json``), ``aggregate.json``,
    ``plots/curves.csv``, ``plots/finals.csv``, ``plots/scaling.csv`` and,
    when given, ``config.json`` and any traces kept by the runner.
    OSError propagates; the CLI maps it to exit code 4.
    """
    if fmt_ not in ("csv", "json"):
        raise InputError(f"unknown format {fmt_!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = (row for rec in records for row in replicate_rows(rec))
    if fmt_ == "csv":
        _write(out / "replicates.csv", _csv_text(REPLICATE_COLUMNS, rows))
    else:
        payload = [dict(zip(REPLICATE_COLUMNS, row)) for row in rows]
        _write(out / "replicates.json", dumps(payload) + "\n")

    agg = aggregate(records, reference=reference, threshold=threshold)
    if extra:
        agg.update(extra)
    document = {"config": manifest, **agg} if manifest is not None else agg
    _write(out / "aggregate.json", dumps(document) + "\n")
    if manifest is not None:
        _write(out / "config.json", dumps(manifest) + "\n")

    plots = out / "plots"
    _write(plots / "curves.csv", _csv_text(
        ("case", "strategy", "K", "extra_noise", "round", "median", "q1", "q3", "mean"), _curve_rows(records)))
    _write(plots / "finals.csv", _csv_text(
        ("case", "strategy", "K", "extra_noise", "replicate", "final", "wall_clock", "speedup"),
        _final_rows(records)))
    _write(plots / "scaling.csv", _csv_text(
        ("case", "strategy", "K", "median_speedup", "amdahl_fit"), _scaling_rows(agg["scaling"])))

    for rec in records:
        for rep in rec.replicates:
            if rep.trace is not None:
                name = f"{rec.case}_{rec.strategy}_K{rec.k}_r{rep.replicate}.jsonl"
                _write(out / "traces" / name, rep.trace)
    return agg


def read_replicate_csv(path: str | Path) -> dict[tuple, dict[int, float]]:
    """Final metric per (case, strategy, K) and replicate, read from the last round."""
    finals: dict[tuple, dict[int, tuple[int, float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != REPLICATE_COLUMNS:
            raise InputError(f"{path}: expected columns {','.join(REPLICATE_COLUMNS)}")
        for row in reader:
            key = (row["case"], row["strategy"], int(row["K"]))
            rep, rnd = int(row["replicate"]), int(row["round"])
            value = float(row["metric"])
            cur = finals.setdefault(key, {}).get(rep)
            if cur is None or rnd >= cur[0]:
                finals[key][rep] = (rnd, value)
    return {key: {rep: v for rep, (_, v) in reps.items()} for key, reps in finals.items()}


def analyze_finals(finals: dict[tuple, dict[int, float]], reference: str = "almab_ucb") -> dict:
    """Medians, IQRs and reference tests recomputed from per-replicate rows."""
    groups: dict[tuple, dict[str, np.ndarray]] = {}
    for (case, strategy, k), reps in finals.items():
        groups.setdefault((case, k), {})[strategy] = np.array([reps[r] for r in sorted(reps)])
    out = []
    for (case, k), cells in groups.items():
        summary = []
        for strategy, values in cells.items():
            med, q1, q3 = median_iqr(values)
            summary.append({"strategy": strategy, "n": int(values.size), "median": med, "q1": q1, "q3": q3,
                            "mean": float(values.mean())})
        tests = []
        if reference in cells:
            alt = "greater" if maximizes(case) else "less"
            names = [s for s in cells if s != reference]
            raw = [mann_whitney_u(cells[reference], cells[s], alternative=alt) for s in names]
            adj = bonferroni([t.pvalue for t in raw]) if raw else []
            tests = [{"strategy": s, "alternative": alt, "u": t.statistic, "p": t.pvalue,
                      "p_adjusted": float(a), "method": t.method} for s, t, a in zip(names, raw, adj)]
        out.append({"case": case, "k": k, "reference": reference if reference in cells else None,
                    "bonferroni_m": len(tests), "cells": summary, "tests": tests})
    return {"groups": out}
