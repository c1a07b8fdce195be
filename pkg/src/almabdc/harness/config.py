"""Experiment manifests: one YAML (or JSON) file describes a sweep of cells."""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from ..bandit import DelayKind, DelaySpec
from ..benchmarks.cases import CASES
from ..benchmarks.strategies import DesignStrategy, StrategyKind
from ..distsim.simulator import DurationKind, TaskDurationModel
from ..errors import ConfigError, InputError

__all__ = ["ExperimentConfig", "SWEEPS", "load_config", "load_preset", "preset_names", "parse_strategy"]

SWEEPS = ("cells", "noise", "ablation", "budget")
ABLATION_STRATEGIES = ("almab_ucb", "almab_no_mab", "almab_no_al", "pure_bo")
DEFAULT_NOISE_LEVELS = (0.0, 0.01, 0.02, 0.04)


def parse_strategy(entry: Any) -> DesignStrategy:
    """``"random"`` or ``{"kind": "almab_ucb", "params": {...}}``."""
    if isinstance(entry, str):
        return DesignStrategy(entry)
    if isinstance(entry, dict):
        unknown = set(entry) - {"kind", "params"}
        if unknown or "kind" not in entry:
            raise ConfigError(f"strategy entries need 'kind' and optional 'params', got {sorted(entry)}")
        params = entry.get("params") or {}
        if not isinstance(params, dict):
            raise ConfigError("strategy params must be a mapping")
        return DesignStrategy(entry["kind"], params)
    raise ConfigError(f"cannot read strategy entry {entry!r}")


def _int_list(value, name) -> tuple[int, ...]:
    items = value if isinstance(value, (list, tuple)) else [value]
    try:
        out = tuple(int(v) for v in items)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be integers") from exc
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    """A sweep of (case, strategy, K) cells sharing one seed and simulation setup.

    ``sweep`` picks the layout: ``cells`` runs every strategy at every K,
    ``noise`` repeats the cells at each extra observation-noise level,
    ``ablation`` runs the full / no-MAB / no-AL / PureBO variants and
    ``budget`` repeats the cells at each budget in ``budgets``.
    """

    name: str
    case: str
    strategies: tuple[DesignStrategy, ...]
    k: tuple[int, ...] = (1,)
    budget: int | None = None
    replicates: int = 200
    base_seed: int = 0
    reference: str = "almab_ucb"
    sweep: str = "cells"
    noise_levels: tuple[float, ...] = DEFAULT_NOISE_LEVELS
    budgets: tuple[int, ...] = ()
    durations: TaskDurationModel = field(default_factory=TaskDurationModel)
    delay: DelaySpec = field(default_factory=DelaySpec)
    update_cost: float = 0.0
    threshold: float | None = None
    jobs: int = 1
    out: str = "results"

    def __post_init__(self) -> None:
        if self.case not in CASES:
            raise ConfigError(f"unknown case {self.case!r}; choose from {sorted(CASES)}")
        if self.sweep not in SWEEPS:
            raise ConfigError(f"unknown sweep {self.sweep!r}; choose from {SWEEPS}")
        if not self.strategies:
            raise ConfigError("at least one strategy is required")
        labels = [s.label for s in self.strategies]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"strategies must be distinct, got {labels}")
        if self.replicates < 1:
            raise ConfigError("replicates must be at least 1")
        if any(k < 1 for k in self.k):
            raise ConfigError("every K must be at least 1")
        if self.budget is not None and self.budget < 1:
            raise ConfigError("budget must be positive")
        if any(s < 0 for s in self.noise_levels):
            raise ConfigError("noise levels must be non-negative")
        if self.sweep == "budget" and not self.budgets:
            raise ConfigError("a budget sweep needs a non-empty 'budgets' list")
        if self.update_cost < 0:
            raise ConfigError("update_cost must be non-negative")
        if self.jobs < 1:
            raise ConfigError("jobs must be at least 1")
        if not 0 <= self.base_seed < 2**64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")

    @classmethod
    def from_mapping(cls, raw: dict, name: str = "experiment") -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("the config file must hold a mapping at the top level")
        known = {
            "name", "case", "strategies", "k", "budget", "replicates", "seed", "reference", "sweep",
            "noise_levels", "budgets", "simulation", "threshold", "jobs", "out",
        }
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "case" not in raw:
            raise ConfigError("config needs a 'case'")
        sweep = str(raw.get("sweep", "cells"))
        entries = raw.get("strategies")
        if entries is None:
            entries = list(ABLATION_STRATEGIES) if sweep == "ablation" else []
        sim = raw.get("simulation") or {}
        try:
            durations = TaskDurationModel(**(sim.get("durations") or {}))
            delay = DelaySpec(**(sim.get("delay") or {}))
        except (TypeError, ValueError, InputError) as exc:
            raise ConfigError(f"bad simulation section: {exc}") from exc
        try:
            return cls(
                name=str(raw.get("name", name)),
                case=str(raw["case"]),
                strategies=tuple(parse_strategy(e) for e in entries),
                k=_int_list(raw.get("k", [1]), "k"),
                budget=None if raw.get("budget") is None else int(raw["budget"]),
                replicates=int(raw.get("replicates", 200)),
                base_seed=int(raw.get("seed", 0)),
                reference=str(raw.get("reference", "almab_ucb")),
                sweep=sweep,
                noise_levels=tuple(float(s) for s in raw.get("noise_levels", DEFAULT_NOISE_LEVELS)),
                budgets=_int_list(raw.get("budgets", []), "budgets") if raw.get("budgets") else (),
                durations=durations,
                delay=delay,
                update_cost=float(sim.get("update_cost", 0.0)),
                threshold=None if raw.get("threshold") is None else float(raw["threshold"]),
                jobs=int(raw.get("jobs", 1)),
                out=str(raw.get("out", "results")),
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad config value: {exc}") from exc

    def with_overrides(self, **changes) -> "ExperimentConfig":
        data = {f: getattr(self, f) for f in self.__dataclass_fields__}
        data.update({k: v for k, v in changes.items() if v is not None})
        return ExperimentConfig(**data)

    def to_mapping(self) -> dict:
        """Plain-data form, written next to the results as the run manifest."""
        return {
            "name": self.name,
            "case": self.case,
            "strategies": [{"kind": s.kind.value, "params": dict(s.params)} for s in self.strategies],
            "k": list(self.k),
            "budget": self.budget,
            "replicates": self.replicates,
            "seed": self.base_seed,
            "reference": self.reference,
            "sweep": self.sweep,
            "noise_levels": list(self.noise_levels),
            "budgets": list(self.budgets),
            "simulation": {
                "durations": {
                    "kind": self.durations.kind.value,
                    "scale": self.durations.scale,
                    "sigma_log": self.durations.sigma_log,
                    "seed": self.durations.seed,
                },
                "delay": {"kind": self.delay.kind.value, "tau_max": self.delay.tau_max},
                "update_cost": self.update_cost,
            },
            "threshold": self.threshold,
        }


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError:
        raise
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML/JSON: {exc}") from exc
    return ExperimentConfig.from_mapping(raw, name=path.stem)


def preset_names() -> list[str]:
    folder = resources.files(__package__).joinpath("presets")
    return sorted(p.name[: -len(".yaml")] for p in folder.iterdir() if p.name.endswith(".yaml"))


def load_preset(name: str) -> ExperimentConfig:
    names = preset_names()
    if name not in names:
        raise ConfigError(f"unknown preset {name!r}; choose from {names}")
    text = resources.files(__package__).joinpath("presets", f"{name}.yaml").read_text()
    return ExperimentConfig.from_mapping(yaml.safe_load(text), name=name)


# keep the enums importable from here for config authors
_ = (DelayKind, DurationKind, StrategyKind)
