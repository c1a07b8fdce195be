"""Closed-form parallel scaling laws and the serial-fraction fit."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from ..errors import InputError

__all__ = [
    "ScalingParams",
    "amdahl_time",
    "amdahl_speedup",
    "gustafson_speedup",
    "parallel_efficiency",
    "optimal_agents",
    "fit_serial_fraction",
]


@dataclass(frozen=True)
class ScalingParams:
    serial_fraction: float = 0.08
    base_efficiency: float = 1.0
    comm_alpha: float = 0.0
    comm_beta: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.serial_fraction <= 1.0:
            raise InputError(f"serial fraction must lie in [0, 1], got {self.serial_fraction}")
        if not 0.0 < self.base_efficiency <= 1.0:
            raise InputError(f"efficiency must lie in (0, 1], got {self.base_efficiency}")
        if not self.comm_alpha >= 0.0:
            raise InputError(f"comm_alpha must be non-negative, got {self.comm_alpha}")
        if not 0.5 <= self.comm_beta <= 1.0:
            raise InputError(f"comm_beta must lie in [0.5, 1], got {self.comm_beta}")


def _check_k(k: int) -> None:
    if k < 1:
        raise InputError(f"K must be at least 1, got {k}")


def amdahl_time(params: ScalingParams, k: int, total_cost: float) -> float:
    _check_k(k)
    if total_cost < 0:
        raise InputError("total cost must be non-negative")
    p = params.serial_fraction
    return (1.0 - p) * total_cost / (params.base_efficiency * k) + p * total_cost


def amdahl_speedup(params: ScalingParams, k: int) -> float:
    _check_k(k)
    p = params.serial_fraction
    return 1.0 / (p + (1.0 - p) / (params.base_efficiency * k))


def gustafson_speedup(p: float, k: int) -> float:
    _check_k(k)
    if not 0.0 <= p <= 1.0:
        raise InputError(f"p must lie in [0, 1], got {p}")
    return p + (1.0 - p) * k


def parallel_efficiency(alpha: float, beta: float, k: int) -> float:
    """``1 / (1 + alpha * K**beta)``: efficiency lost to coordination overhead."""
    _check_k(k)
    if alpha < 0 or not 0.5 <= beta <= 1.0:
        raise InputError(f"need alpha >= 0 and beta in [0.5, 1], got {alpha}, {beta}")
    return 1.0 / (1.0 + alpha * k**beta)


def optimal_agents(params: ScalingParams) -> float:
    """Agent count balancing serial work against coordination overhead."""
    p, a, b = params.serial_fraction, params.comm_alpha, params.comm_beta
    if not 0.0 < p < 1.0 or a <= 0.0:
        raise InputError("no interior optimum unless 0 < p < 1 and comm_alpha > 0")
    return ((1.0 - p) / (a * b * p)) ** (1.0 / (1.0 + b))


def fit_serial_fraction(speedups: Iterable[tuple[int, float]]) -> float:
    """Least-squares ``p`` in ``1/S = p + (1 - p)/K`` with unit efficiency.

    Rewritten as ``1/S - 1/K = p (1 - 1/K)``, this is a regression through
    the origin; the estimate is clipped to [0, 1].
    """
    pts = np.asarray(list(speedups), dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
        raise InputError("need at least two (K, speedup) pairs")
    k, s = pts[:, 0], pts[:, 1]
    if np.any(k < 1) or np.any(s <= 0):
        raise InputError("K must be >= 1 and speedups positive")
    a = 1.0 - 1.0 / k
    b = 1.0 / s - 1.0 / k
    denom = float(a @ a)
    if denom == 0.0:
        raise InputError("all points have K = 1; serial fraction is not identifiable")
    return float(min(1.0, max(0.0, (a @ b) / denom)))

