"""Virtual-clock simulation of asynchronous agents and analytic scaling laws."""

from .scaling import (
    ScalingParams,
    amdahl_speedup,
    amdahl_time,
    fit_serial_fraction,
    gustafson_speedup,
    optimal_agents,
    parallel_efficiency,
)
from .simulator import (
    DispatchMode,
    DurationKind,
    EventKind,
    Policy,
    QueryRecord,
    SimResult,
    SimTrace,
    TaskDurationModel,
    TraceEvent,
    simulate_async_run,
)

__all__ = [
    "ScalingParams",
    "amdahl_speedup",
    "amdahl_time",
    "fit_serial_fraction",
    "gustafson_speedup",
    "optimal_agents",
    "parallel_efficiency",
    "DispatchMode",
    "DurationKind",
    "EventKind",
    "Policy",
    "QueryRecord",
    "SimResult",
    "SimTrace",
    "TaskDurationModel",
    "TraceEvent",
    "simulate_async_run",
]
