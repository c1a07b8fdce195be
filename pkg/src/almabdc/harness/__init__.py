"""Experiment configuration, replicate execution, output files and the CLI."""

from .config import ExperimentConfig, load_config, load_preset, preset_names
from .experiments import (
    run_ablation,
    run_budget_sweep,
    run_cells,
    run_experiment,
    run_noise_sweep,
    scaling_experiment,
)
from .outputs import aggregate, emit_outputs
from .runner import Cell, ReplicateResult, ResultRecord, RunOptions, run_cell, run_replicate
from .seeding import derive_seed

__all__ = [
    "ExperimentConfig",
    "load_config",
    "load_preset",
    "preset_names",
    "run_ablation",
    "run_budget_sweep",
    "run_cells",
    "run_experiment",
    "run_noise_sweep",
    "scaling_experiment",
    "aggregate",
    "emit_outputs",
    "Cell",
    "ReplicateResult",
    "ResultRecord",
    "RunOptions",
    "run_cell",
    "run_replicate",
    "derive_seed",
]
