"""Discrete-event simulation of the two parareal task-distribution plans.

Tasks are coarse propagations G, fine propagations F and zero-cost Delta
subtractions D.  Durations are integers in units of R_G, so a fine task
lasts Q_ratio quanta.  The simulator is a list scheduler: at each event time
ready tasks are dispatched in (ready time, task id) order onto a free unit of
their pool; a pool with capacity ``None`` grows on demand.
"""

from __future__ import annotations

import heapq
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional

from . import cost


class SchedulePlanError(ValueError):
    pass


@dataclass
class Task:
    tid: int
    name: str
    kind: str
    duration: int
    deps: list
    pool: Optional[str]


@dataclass
class Event:
    task: str
    unit: str
    start: int
    end: int


@dataclass
class ScheduleResult:
    plan: str
    params: cost.ScheduleParams
    makespan: int
    units_used: int
    units_by_pool: dict
    units_allocated: dict
    utilization: float
    event_log: list
    closed_form_makespan: float
    sequential_time: float

    @property
    def makespan_time(self):
        return self.makespan * self.params.R_G

    @property
    def speedup(self):
        return self.sequential_time / self.makespan_time

    @property
    def g_iteration_units(self):
        return sum(v for k, v in self.units_allocated.items() if k.startswith("G") and k != "G-init")

    @property
    def f_units(self):
        return sum(v for k, v in self.units_allocated.items() if k.startswith("F"))


class TaskGraph:
    def __init__(self):
        self.tasks = []
        self.by_name = {}

    def add(self, name, kind, duration, deps=(), pool=None):
        t = Task(len(self.tasks), name, kind, int(duration),
                 [self.by_name[d].tid if isinstance(d, str) else d for d in deps if d is not None],
                 pool)
        self.tasks.append(t)
        self.by_name[name] = t
        return t.tid


def run_list_schedule(graph, capacities):
    """Simulate ``graph``; ``capacities`` maps pool -> unit count or None.

    Returns (makespan, event_log, units_by_pool).
    """
    tasks = graph.tasks
    remaining = [len(t.deps) for t in tasks]
    children = defaultdict(list)
    for t in tasks:
        for d in t.deps:
            children[d].append(t.tid)

    free = {p: list(range(c)) if c is not None else [] for p, c in capacities.items()}
    for p in free:
        heapq.heapify(free[p])
    created = {p: (c if c is not None else 0) for p, c in capacities.items()}
    used = defaultdict(set)

    ready = []  # (ready_time, tid)
    for t in tasks:
        if remaining[t.tid] == 0:
            heapq.heappush(ready, (0, t.tid))
    running = []  # (end, tid, pool, unit)
    log = [None] * len(tasks)
    now = 0
    finished = 0

    while finished < len(tasks):
        waiting = []
        while ready:
            rt, tid = heapq.heappop(ready)
            task = tasks[tid]
            if task.pool is None:
                unit = None
            elif free[task.pool]:
                unit = heapq.heappop(free[task.pool])
            elif capacities[task.pool] is None:
                unit = created[task.pool]
                created[task.pool] += 1
            else:
                waiting.append((rt, tid))
                continue
            if unit is not None:
                used[task.pool].add(unit)
            log[tid] = Event(task.name, "-" if unit is None else f"{task.pool}:{unit}",
                             now, now + task.duration)
            heapq.heappush(running, (now + task.duration, tid, task.pool, unit))
        for item in waiting:
            heapq.heappush(ready, item)
        if not running:
            raise RuntimeError("schedule deadlock: tasks waiting with nothing running")
        now = running[0][0]
        while running and running[0][0] == now:
            _, tid, pool, unit = heapq.heappop(running)
            finished += 1
            if unit is not None:
                heapq.heappush(free[pool], unit)
            for c in children[tid]:
                remaining[c] -= 1
                if remaining[c] == 0:
                    heapq.heappush(ready, (now, c))
    makespan = max(e.end for e in log)
    return makespan, log, {p: len(u) for p, u in used.items()}


def check_event_log(graph, log):
    """Raise AssertionError unless every task starts after its dependencies end
    and no unit runs two tasks at once."""
    for t in graph.tasks:
        for d in t.deps:
            if log[d].end > log[t.tid].start:
                raise AssertionError(f"{t.name} starts before {graph.tasks[d].name} ends")
    per_unit = defaultdict(list)
    for e in log:
        if e.unit != "-" and e.end > e.start:
            per_unit[e.unit].append((e.start, e.end, e.task))
    for unit, spans in per_unit.items():
        spans.sort()
        for (s0, e0, n0), (s1, e1, n1) in zip(spans, spans[1:]):
            if s1 < e0:
                raise AssertionError(f"unit {unit} runs {n0} and {n1} concurrently")
    return True


def build_plan1(params):
    """Per window: one unit runs the coarse sweep over all T_W points, then
    T_W = Q units run the fine propagations together; the next window's
    coarse sweep waits for the corrections."""
    if params.T_W != params.Q_ratio:
        raise SchedulePlanError("plan 1 requires T_W == Q_ratio")
    Q = params.Q_ratio
    g = TaskGraph()
    barrier = []
    for w in range(params.W):
        prev = None
        for n in range(1, params.T_W + 1):
            deps = [prev] if prev is not None else list(barrier)
            prev = g.add(f"G(w={w},n={n})", "G", 1, deps, pool="G")
        g_done = prev
        barrier = []
        for n in range(1, params.T_W + 1):
            f = g.add(f"F(w={w},n={n})", "F", Q, [g_done], pool="F")
            barrier.append(g.add(f"D(w={w},n={n})", "D", 0,
                                 [f, f"G(w={w},n={n})"]))
    return g, {"G": 1, "F": Q}


def build_plan2(params):
    """Eager plan: one coarse unit per iteration row plus one for the
    initial sweep, Q fine units per row; a fine task starts as soon as its
    input state exists and a corrected coarse step as soon as its Delta does.

    Rows follow the parareal recursion with lambda_0 = v: initial row -1,
    fine rows -1..K-2, corrected rows 0..K-1.  Windows run back to back.

    The makespan equals W (T_W/Q + K) R_F when T_W >= K.  For shorter
    windows the longest dependency chain holds only T_W fine propagations
    and the simulation finishes earlier than the closed form.
    """
    Q, K, T = params.Q_ratio, params.K, params.T_W
    g = TaskGraph()
    caps = {"G-init": 1}
    for k in range(K):
        caps[f"G{k}"] = 1
    for k in range(-1, K - 1):
        caps[f"F{k}"] = Q
    start = None
    for w in range(params.W):
        def G(n, k):
            return f"G(w={w},n={n},k={k})"

        for n in range(1, T + 1):
            g.add(G(n, -1), "G", 1, [G(n - 1, -1) if n > 1 else start], pool="G-init")
        for k in range(-1, K - 1):
            for n in range(1, T + 1):
                src = G(n - 1, k) if n > 1 else start
                f = g.add(f"F(w={w},n={n},k={k})", "F", Q, [src], pool=f"F{k}")
                g.add(f"D(w={w},n={n},k={k})", "D", 0, [f, G(n, k)])
            for n in range(1, T + 1):
                deps = [G(n - 1, k + 1) if n > 1 else start, f"D(w={w},n={n},k={k})"]
                g.add(G(n, k + 1), "G", 1, deps, pool=f"G{k + 1}")
        start = G(T, K - 1)
    return g, caps


def simulate_schedule(plan, params, validate=True):
    if plan in ("plan1", 1, "1"):
        graph, caps = build_plan1(params)
        name = "plan1"
        closed = cost.plan1_makespan(params.T_total, params.Q_ratio, params.R_F) / params.R_G
    elif plan in ("plan2", 2, "2"):
        graph, caps = build_plan2(params)
        name = "plan2"
        closed = params.W * cost.plan2_makespan(params.T_W, params.Q_ratio, params.K,
                                                params.R_F) / params.R_G
    else:
        raise SchedulePlanError(f"unknown plan {plan!r}")
    makespan, log, used = run_list_schedule(graph, caps)
    if validate:
        check_event_log(graph, log)
    busy = sum(e.end - e.start for e in log if e.unit != "-")
    n_used = sum(used.values())
    util = busy / (n_used * makespan) if makespan and n_used else 0.0
    return ScheduleResult(name, params, makespan, n_used, dict(used), caps, util, log,
                          closed, params.T_total * params.R_F)
