"""Discrete-event simulation of K asynchronous agents on a virtual clock.

Queries are candidate indices.  A policy proposes indices for idle agents,
the oracle evaluates ``oracle(index, query_number)`` and results reach the
policy, possibly late, through :meth:`Policy.observe`.

Surrogate updates run on one logical resource: applying a delivered result
costs ``update_cost`` of virtual time during which every in-flight task is
paused.  With constant task cost ``c`` this makes a run of ``N`` queries take
``N * update_cost + N * c / K``, i.e. Amdahl's law with serial fraction
``update_cost / (update_cost + c)``.
"""

from __future__ import annotations

import enum
import heapq
import json
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Protocol, Sequence

import numpy as np

from ..bandit import DelaySpec
from ..errors import InputError

__all__ = [
    "EventKind",
    "TraceEvent",
    "SimTrace",
    "DurationKind",
    "TaskDurationModel",
    "Policy",
    "QueryRecord",
    "SimResult",
    "DispatchMode",
    "simulate_async_run",
]


class EventKind(enum.IntEnum):
    # order doubles as the tie-break within (time, agent)
    COMPLETE = 0
    POSTERIOR_UPDATE = 1
    DISPATCH = 2


class TraceEvent(NamedTuple):
    time: float
    agent: int
    kind: EventKind
    query: int
    arm: int
    reward: float | None = None

    def to_json(self) -> str:
        return json.dumps(
            {
                "time": self.time,
                "agent": self.agent,
                "kind": self.kind.name.lower(),
                "query": self.query,
                "arm": self.arm,
                "reward": self.reward,
            }
        )


@dataclass
class SimTrace:
    events: list[TraceEvent]
    wall_clock: float
    busy_time: np.ndarray

    def count(self, kind: EventKind) -> int:
        return sum(1 for e in self.events if e.kind is kind)

    def to_jsonl(self) -> str:
        return "".join(e.to_json() + "\n" for e in self.events)


class DurationKind(str, enum.Enum):
    CONSTANT = "constant"
    LOGNORMAL = "lognormal"


@dataclass(frozen=True)
class TaskDurationModel:
    """Per-query task cost.

    Durations depend only on ``(seed, query number)`` so runs with different
    K face the same workload.  The log-normal model is parameterised by its
    median ``scale`` and log-space spread ``sigma_log``.
    """

    kind: DurationKind = DurationKind.CONSTANT
    scale: float = 1.0
    sigma_log: float = 0.3
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", DurationKind(self.kind))
        if not self.scale > 0 or not self.sigma_log >= 0:
            raise InputError("duration scale must be positive and sigma_log non-negative")

    def duration(self, query: int) -> float:
        if self.kind is DurationKind.CONSTANT:
            return self.scale
        z = np.random.default_rng((self.seed, query)).standard_normal()
        return self.scale * math.exp(self.sigma_log * z)


class Policy(Protocol):
    def propose(self, n: int, pending: Sequence[int], rng: np.random.Generator) -> list[int]:
        """Return ``n`` indices; ``pending`` holds dispatched but not yet observed ones."""

    def observe(self, arm: int, value: float) -> None: ...


class DispatchMode(str, enum.Enum):
    BATCH = "batch"
    AVERAGING = "averaging"


class QueryRecord(NamedTuple):
    query: int
    round: int
    agent: int
    arm: int
    value: float


@dataclass
class SimResult:
    trace: SimTrace
    queries: list[QueryRecord]
    # (arm, value) pairs in the order the policy observed them
    observed: list[tuple[int, float]] = field(default_factory=list)
    total_task_time: float = 0.0
    total_update_time: float = 0.0

    @property
    def wall_clock(self) -> float:
        return self.trace.wall_clock

    @property
    def speedup(self) -> float:
        """Time one agent would need for the same tasks and updates, over wall-clock."""
        return (self.total_task_time + self.total_update_time) / self.wall_clock


Oracle = Callable[[int, int], float]


def simulate_async_run(
    oracle: Oracle,
    policy: Policy,
    k: int,
    budget: int,
    durations: TaskDurationModel | None = None,
    delay: DelaySpec | None = None,
    rng: np.random.Generator | None = None,
    *,
    mode: DispatchMode | str = DispatchMode.BATCH,
    update_cost: float = 0.0,
) -> SimResult:
    """Run ``budget`` oracle evaluations with ``k`` agents.

    In batch mode every idle agent gets its own index; agents that become
    idle together are served by one ``propose`` call (one round).  In
    averaging mode all ``k`` agents evaluate the same index each round and
    the policy observes the mean, so ``budget`` must be a multiple of ``k``.
    Delays count completed evaluations (batch) or rounds (averaging).
    """
    if k < 1:
        raise InputError(f"need at least one agent, got {k}")
    if budget < k:
        raise InputError(f"budget {budget} is smaller than the number of agents {k}")
    if update_cost < 0:
        raise InputError("update cost must be non-negative")
    durations = durations or TaskDurationModel()
    delay = delay or DelaySpec()
    rng = rng if rng is not None else np.random.default_rng(0)
    if DispatchMode(mode) is DispatchMode.AVERAGING:
        if budget % k:
            raise InputError(f"averaging mode needs budget divisible by K, got {budget} and {k}")
        return _run_averaging(oracle, policy, k, budget // k, durations, delay, rng, update_cost)
    return _run_batch(oracle, policy, k, budget, durations, delay, rng, update_cost)


def _finish(events, busy, queries, observed, task_time, update_time) -> SimResult:
    events.sort(key=lambda e: (e.time, e.agent, e.kind))
    wall = max((e.time for e in events if e.kind is EventKind.COMPLETE), default=0.0)
    return SimResult(SimTrace(events, wall, busy), queries, observed, task_time, update_time)


def _run_batch(oracle, policy, k, budget, durations, delay, rng, update_cost) -> SimResult:
    events: list[TraceEvent] = []
    queries: list[QueryRecord] = []
    observed: list[tuple[int, float]] = []
    busy_time = np.zeros(k)
    # agent -> [finish, start, query, arm, round]
    running: dict[int, list] = {}
    undelivered: list[tuple[int, int, int, int, float]] = []  # (due, seq, agent, arm, value)
    idle = list(range(k))
    clock = 0.0
    issued = completed = rounds = 0
    task_time = update_time = 0.0

    def deliver(ready):
        nonlocal clock, update_time
        for _, _, agent, arm, value in ready:
            events.append(TraceEvent(clock, agent, EventKind.POSTERIOR_UPDATE, -1, arm, value))
            if update_cost:
                clock += update_cost
                update_time += update_cost
                for task in running.values():
                    task[0] += update_cost
            policy.observe(arm, value)
            observed.append((arm, value))

    while completed < budget:
        n = min(len(idle), budget - issued)
        if n:
            pending = [t[3] for t in running.values()] + [u[3] for u in undelivered]
            arms = list(policy.propose(n, pending, rng))
            if len(arms) != n:
                raise InputError(f"policy returned {len(arms)} indices for {n} idle agents")
            idle.sort()
            for agent, arm in zip(idle[:n], arms):
                d = durations.duration(issued)
                task_time += d
                events.append(TraceEvent(clock, agent, EventKind.DISPATCH, issued, int(arm)))
                running[agent] = [clock + d, clock, issued, int(arm), rounds]
                issued += 1
            idle = idle[n:]
            rounds += 1

        t_next = min(task[0] for task in running.values())
        finishing = sorted(a for a, task in running.items() if task[0] == t_next)
        clock = t_next
        for agent in finishing:
            _, start, q, arm, rnd = running.pop(agent)
            value = float(oracle(arm, q))
            events.append(TraceEvent(clock, agent, EventKind.COMPLETE, q, arm, value))
            busy_time[agent] += clock - start
            queries.append(QueryRecord(q, rnd, agent, arm, value))
            completed += 1
            undelivered.append((completed + int(delay.sample(rng)), q, agent, arm, value))
        undelivered.sort(key=lambda u: (u[0], u[2], u[1]))
        cut = 0
        while cut < len(undelivered) and undelivered[cut][0] <= completed:
            cut += 1
        ready, undelivered = undelivered[:cut], undelivered[cut:]
        deliver(ready)
        idle.extend(finishing)

    deliver(undelivered)
    return _finish(events, busy_time, queries, observed, task_time, update_time)


def _run_averaging(oracle, policy, k, n_rounds, durations, delay, rng, update_cost) -> SimResult:
    events: list[TraceEvent] = []
    queries: list[QueryRecord] = []
    observed: list[tuple[int, float]] = []
    busy_time = np.zeros(k)
    clock = 0.0
    q = 0
    task_time = update_time = 0.0
    due_heap: list = []  # (due round, issue round, arm, mean)
    for rnd in range(n_rounds):
        pending = [u[2] for u in due_heap]
        (arm,) = policy.propose(1, pending, rng)
        arm = int(arm)
        finish = []
        for agent in range(k):
            d = durations.duration(q)
            task_time += d
            events.append(TraceEvent(clock, agent, EventKind.DISPATCH, q, arm))
            finish.append((clock + d, agent, q))
            q += 1
        values = []
        for t_done, agent, qi in finish:
            value = float(oracle(arm, qi))
            values.append(value)
            events.append(TraceEvent(t_done, agent, EventKind.COMPLETE, qi, arm, value))
            busy_time[agent] += t_done - clock
            queries.append(QueryRecord(qi, rnd, agent, arm, value))
        clock = max(f[0] for f in finish)
        heapq.heappush(due_heap, (rnd + int(delay.sample(rng)), rnd, arm, sum(values) / k))
        while due_heap and due_heap[0][0] <= rnd:
            _, _, a, mean = heapq.heappop(due_heap)
            events.append(TraceEvent(clock, 0, EventKind.POSTERIOR_UPDATE, -1, a, mean))
            clock += update_cost
            update_time += update_cost
            policy.observe(a, mean)
            observed.append((a, mean))
    while due_heap:
        _, _, a, mean = heapq.heappop(due_heap)
        events.append(TraceEvent(clock, 0, EventKind.POSTERIOR_UPDATE, -1, a, mean))
        update_time += update_cost
        policy.observe(a, mean)
        observed.append((a, mean))
    return _finish(events, busy_time, queries, observed, task_time, update_time)
