"""Command-line entry point.

Exit codes: 0 success, 2 bad configuration or arguments, 3 numerical
failure, 4 file-system error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

from ..distsim.scaling import fit_serial_fraction
from ..errors import ConfigError, InputError, NumericalError
from .config import SWEEPS, ExperimentConfig, load_config, load_preset, parse_strategy, preset_names
from .experiments import run_experiment, scaling_experiment, speedups_from_traces
from .outputs import _csv_text, _write, analyze_finals, dumps, fmt, read_replicate_csv

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4


def _list(text: str | None, cast=str) -> list | None:
    if text is None:
        return None
    try:
        return [cast(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse list {text!r}") from exc


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, help="base seed (unsigned 64-bit)")
    p.add_argument("--replicates", type=int, help="replicates per cell")
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", choices=("csv", "json"), default="csv", help="per-replicate file format")
    p.add_argument("--jobs", type=int, help="worker processes for replicates")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="almabdc", description="Sequential design benchmarks on a simulated cluster.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one cell or sweep from a config file or flags")
    run.add_argument("--config", help="YAML or JSON experiment file")
    run.add_argument("--case", help="case id: 1-5 or mixture")
    run.add_argument("--strategy", help="comma-separated strategy kinds")
    run.add_argument("--k", help="comma-separated agent counts")
    run.add_argument("--budget", type=int, help="evaluation budget (rounds for case 4)")
    run.add_argument("--sweep", choices=SWEEPS, help="sweep layout")
    run.add_argument("--traces", action="store_true", help="also write per-replicate event traces")
    _common(run)

    rep = sub.add_parser("reproduce", help="run a bundled preset")
    rep.add_argument("preset", nargs="?", help="preset name; omit with --list")
    rep.add_argument("--list", action="store_true", help="list presets and exit")
    _common(rep)

    ana = sub.add_parser("analyze", help="recompute summaries and tests from a per-replicate CSV")
    ana.add_argument("csv", help="replicates.csv written by run or reproduce")
    ana.add_argument("--reference", default="almab_ucb", help="strategy the others are tested against")
    ana.add_argument("--out", help="write the analysis as JSON here")

    sca = sub.add_parser("scaling", help="Amdahl fit from trace files, or from a fresh simulated sweep")
    sca.add_argument("traces", nargs="*", help="trace files (.jsonl) with closing summary lines")
    sca.add_argument("--k", default="1,2,4,8,16", help="agent counts for the simulated sweep")
    sca.add_argument("--tasks", type=int, default=400, help="tasks per simulated run")
    sca.add_argument("--update-cost", type=float, default=0.08696,
                     help="serial update time per task, in units of the mean task time")
    sca.add_argument("--out", help="directory for scaling.csv and the traces")
    return parser


def _config_from_args(args) -> ExperimentConfig:
    if args.config:
        config = load_config(args.config)
    elif args.case:
        strategies = _list(args.strategy) or ["almab_ucb"]
        config = ExperimentConfig(name=f"case{args.case}", case=str(args.case),
                                  strategies=tuple(parse_strategy(s) for s in strategies))
    else:
        raise ConfigError("run needs --config or --case")
    changes = dict(
        base_seed=args.seed,
        replicates=args.replicates,
        out=args.out,
        jobs=args.jobs,
        budget=args.budget,
        sweep=args.sweep,
    )
    if args.config and args.case:
        changes["case"] = str(args.case)
    if args.k:
        changes["k"] = tuple(_list(args.k, int))
    if args.config and args.strategy:
        changes["strategies"] = tuple(parse_strategy(s) for s in _list(args.strategy))
    return config.with_overrides(**changes)


def _print_groups(agg: dict) -> None:
    for group in agg.get("groups", []):
        head = f"case {group['case']}  K={group['k']}"
        if group.get("extra_noise"):
            head += f"  noise={group['extra_noise']:g}"
        if group.get("budget"):
            head += f"  budget={group['budget']}"
        print(head)
        for cell in group["cells"]:
            print(f"  {cell['strategy']:<22} median {cell['median']:.6g}  IQR [{cell['q1']:.6g}, {cell['q3']:.6g}]")
        for test in group["tests"]:
            print(f"  {group['reference']} vs {test['strategy']:<14} p={test['p']:.3g}  "
                  f"bonferroni(m={group['bonferroni_m']}) p={test['p_adjusted']:.3g}")


def _cmd_run(config: ExperimentConfig, args, keep_traces: bool = False) -> int:
    out = Path(args.out or config.out)
    result = run_experiment(config, out=out, fmt=args.format, keep_traces=keep_traces)
    _print_groups(result)
    for row in result.get("noise", []):
        print(f"  noise {row['sigma']:g} {row['strategy']:<22} median {row['median']:.6g} "
              f"degradation {row['degradation_median']:.3g}")
    for row in result.get("budget", []):
        print(f"  budget {row['budget']} {row['strategy']:<22} median {row['median']:.6g}")
    print(f"wrote {out}")
    return EXIT_OK


def _cmd_reproduce(args) -> int:
    if args.list or not args.preset:
        for name in preset_names():
            print(name)
        return EXIT_OK if args.list else EXIT_CONFIG
    config = load_preset(args.preset)
    config = config.with_overrides(base_seed=args.seed, replicates=args.replicates, jobs=args.jobs)
    if args.out is None:
        args.out = str(Path(config.out) / args.preset)
    return _cmd_run(config, args)


def _cmd_analyze(args) -> int:
    result = analyze_finals(read_replicate_csv(args.csv), reference=args.reference)
    _print_groups(result)
    if args.out:
        _write(Path(args.out) / "analysis.json", dumps(result) + "\n")
    return EXIT_OK


def _cmd_scaling(args) -> int:
    if args.traces:
        pairs = speedups_from_traces(args.traces)
        p = fit_serial_fraction(pairs)
        rows = [(k, s, None) for k, s in pairs]
        traces = []
    else:
        points, p = scaling_experiment(_list(args.k, int), args.tasks, args.update_cost)
        rows = [(pt.k, pt.speedup, pt.amdahl) for pt in points]
        traces = [(pt.k, pt.trace) for pt in points]
    print(f"fitted serial fraction p = {fmt(p)}")
    for k, s, a in rows:
        extra = f"  amdahl {a:.4f}" if a is not None else ""
        print(f"  K={k:<3} speedup {s:.4f}{extra}")
    if args.out:
        out = Path(args.out)
        _write(out / "scaling.csv", _csv_text(("K", "speedup", "amdahl"), rows))
        _write(out / "fit.json", dumps({"serial_fraction": p, "points": [list(r) for r in rows]}) + "\n")
        for k, text in traces:
            _write(out / "traces" / f"scaling_K{k}.jsonl", text)
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(_config_from_args(args), args, keep_traces=args.traces)
        if args.command == "reproduce":
            return _cmd_reproduce(args)
        if args.command == "analyze":
            return _cmd_analyze(args)
        return _cmd_scaling(args)
    except (ConfigError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
