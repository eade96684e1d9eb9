"""Parareal iteration over a sliding computational window.

Notation follows the usual parareal recursion.  ``lam[k][n]`` is the state
at window point n after iteration k, with row k = -1 holding the coarse
initialization.  For every row, point 0 is the window's initial condition.

    f_n^k = F(lam_{n-1}^k)            (independent over n)
    Delta_n^k = f_n^k - g_n^k
    g_n^{k+1} = G(lam_{n-1}^{k+1})    (sequential over n)
    lam_n^{k+1} = g_n^{k+1} + Delta_n^k

States are added and subtracted on positions and velocities only.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dynamics import PropagatorSpec, propagate


class NonConvergenceError(RuntimeError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class PararealConfig:
    fine: PropagatorSpec
    coarse: PropagatorSpec
    window_T_W: int = 8
    max_iter_K: int = 5
    tol: float = 1e-6
    skip_threshold: Optional[float] = None
    short_circuit: bool = True

    def __post_init__(self):
        if self.window_T_W < 1:
            raise ValueError("window_T_W must be >= 1")
        if self.max_iter_K < 1:
            raise ValueError("max_iter_K must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.skip_threshold is not None and self.skip_threshold < 0:
            raise ValueError("skip_threshold must be >= 0")
        tf, tg = self.fine.slice_time, self.coarse.slice_time
        if abs(tf - tg) > 1e-12 * max(abs(tf), abs(tg)):
            raise ValueError(f"fine and coarse slices differ: {tf} vs {tg}")


@dataclass(frozen=True)
class StateDelta:
    dpos: np.ndarray
    dvel: np.ndarray

    @property
    def rms_pos(self):
        return float(np.sqrt(np.mean(self.dpos * self.dpos)))

    @property
    def max_pos(self):
        return float(np.max(np.abs(self.dpos))) if self.dpos.size else 0.0


def state_diff(a, b):
    return StateDelta(a.positions - b.positions, a.velocities - b.velocities)


def state_add(system, delta):
    return system.replace(positions=system.positions + delta.dpos,
                          velocities=system.velocities + delta.dvel)


def rms_position_difference(a, b):
    d = a.positions - b.positions
    return float(np.sqrt(np.mean(d * d)))


class SequentialExecutor:
    """Reference executor: plain in-order ``map``."""

    def map(self, fn, items):
        return [fn(x) for x in items]

    def shutdown(self):
        pass


class ThreadExecutor:
    def __init__(self, threads):
        self._pool = ThreadPoolExecutor(max_workers=threads)

    def map(self, fn, items):
        return list(self._pool.map(fn, items))

    def shutdown(self):
        self._pool.shutdown()


def make_executor(threads=1):
    if threads is None or threads <= 1:
        return SequentialExecutor()
    return ThreadExecutor(threads)


@dataclass
class PararealWindow:
    """Lattice of states for one window.  Rows are indexed by k + 1."""

    v: object
    T_W: int
    lam: list = field(default_factory=list)
    f_vals: list = field(default_factory=list)
    g_vals: list = field(default_factory=list)
    delta_vals: list = field(default_factory=list)
    converged_through: int = 0
    skipped: list = field(default_factory=list)
    n_f: int = 0
    n_g: int = 0
    delta_history: list = field(default_factory=list)

    @property
    def k(self):
        """Highest populated iteration index (-1 after initialization)."""
        return len(self.lam) - 2

    def row(self, k):
        return self.lam[k + 1]

    def point_change(self, k, n):
        return rms_position_difference(self.lam[k + 1][n], self.lam[k][n])


def parareal_init(v, config, T_W=None):
    T_W = config.window_T_W if T_W is None else T_W
    w = PararealWindow(v, T_W)
    row = [v]
    for _ in range(T_W):
        row.append(propagate(config.coarse, row[-1]))
        w.n_g += 1
    w.lam.append(row)
    w.g_vals.append(list(row))
    return w


def metastable_skip(window, config):
    """Points n whose fine propagation this iteration can be skipped.

    Experimental: f_n^k is skipped when its input lam_{n-1}^k moved less than
    the threshold since the previous iteration; Delta_n^{k-1} is then reused.
    Strict inequality, so a threshold of 0 never skips.
    """
    thr = config.skip_threshold
    k = window.k
    if thr is None or k < 0 or len(window.delta_vals) < k + 1:
        return set()
    out = set()
    for n in range(1, window.T_W + 1):
        if rms_position_difference(window.lam[k + 1][n - 1], window.lam[k][n - 1]) < thr:
            out.add(n)
    return out


def parareal_iterate(window, config, executor=None):
    """Compute iteration k+1 from the populated iteration k, in place."""
    executor = executor or SequentialExecutor()
    k = window.k
    lam_k = window.lam[k + 1]
    g_k = window.g_vals[k + 1]
    skip = metastable_skip(window, config)
    todo = [n for n in range(1, window.T_W + 1) if n not in skip]
    results = executor.map(lambda n: propagate(config.fine, lam_k[n - 1]), todo)
    f_row = [None] * (window.T_W + 1)
    for n, s in zip(todo, results):
        f_row[n] = s
    window.n_f += len(todo)
    delta = [None] * (window.T_W + 1)
    for n in range(1, window.T_W + 1):
        if n in skip:
            delta[n] = window.delta_vals[k][n]
        else:
            delta[n] = state_diff(f_row[n], g_k[n])
    if skip:
        window.skipped.extend((k, n) for n in sorted(skip))
    window.f_vals.append(f_row)
    window.delta_vals.append(delta)
    window.delta_history.append(max(d.rms_pos for d in delta[1:]))

    new_lam = [window.v]
    new_g = [window.v]
    for n in range(1, window.T_W + 1):
        g = propagate(config.coarse, new_lam[-1])
        window.n_g += 1
        new_g.append(g)
        new_lam.append(state_add(g, delta[n]))
    window.lam.append(new_lam)
    window.g_vals.append(new_g)
    return window


REPORT_FIELDS = ["window", "point", "iteration", "delta_rms", "converged"]
COUNT_FIELDS = ["window", "start_point", "points", "iterations", "accepted",
                "f_evaluations", "g_evaluations", "skipped"]


@dataclass
class ConvergenceReport:
    rows: list = field(default_factory=list)
    windows: list = field(default_factory=list)
    point_iterations: dict = field(default_factory=dict)

    @property
    def n_f(self):
        return sum(w["f_evaluations"] for w in self.windows)

    @property
    def n_g(self):
        return sum(w["g_evaluations"] for w in self.windows)

    @property
    def n_skipped(self):
        return sum(w["skipped"] for w in self.windows)

    @property
    def max_iterations(self):
        return max((w["iterations"] for w in self.windows), default=0)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(REPORT_FIELDS)
            for r in self.rows:
                wr.writerow([r[0], r[1], r[2], repr(r[3]), int(r[4])])

    def write_counts_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.DictWriter(fh, fieldnames=COUNT_FIELDS)
            wr.writeheader()
            for w in self.windows:
                wr.writerow(w)


@dataclass
class PararealResult:
    trajectory: list
    report: ConvergenceReport


def _converged_prefix(window, k, tol):
    m = 0
    for n in range(1, window.T_W + 1):
        if window.point_change(k, n) <= tol:
            m = n
        else:
            break
    return m


def parareal_run(v, total_points, config, executor=None):
    """Parareal over ``total_points`` slices; returns states at T_1..T_total.

    Each window iterates until all its points converge (or K iterations
    when short-circuiting is off), then slides by its converged prefix.
    """
    if total_points < 1:
        raise ValueError("total_points must be >= 1")
    executor = executor or SequentialExecutor()
    report = ConvergenceReport()
    trajectory = []
    state = v
    widx = 0
    while len(trajectory) < total_points:
        start = len(trajectory)
        T_W = min(config.window_T_W, total_points - start)
        window = parareal_init(state, config, T_W)
        prefix = 0
        iters = 0
        for _ in range(config.max_iter_K):
            parareal_iterate(window, config, executor)
            iters += 1
            k = window.k
            for n in range(1, T_W + 1):
                change = window.point_change(k, n)
                if not math.isfinite(change):
                    raise NonConvergenceError(
                        f"window {widx}: non-finite state at point {start + n}", report)
                report.rows.append((widx, start + n, k, change, change <= config.tol))
            prefix = _converged_prefix(window, k, config.tol)
            window.converged_through = prefix
            if config.short_circuit and prefix == T_W:
                break
        report.windows.append({
            "window": widx, "start_point": start + 1, "points": T_W,
            "iterations": iters, "accepted": prefix,
            "f_evaluations": window.n_f, "g_evaluations": window.n_g,
            "skipped": len(window.skipped)})
        if prefix == 0:
            raise NonConvergenceError(
                f"window {widx} (points {start + 1}..{start + T_W}) made no converged "
                f"progress in {iters} iterations (tol {config.tol})", report)
        final = window.row(window.k)
        for n in range(1, prefix + 1):
            report.point_iterations[start + n] = iters
            trajectory.append(final[n])
        state = final[prefix]
        widx += 1
    return PararealResult(trajectory, report)


def sequential_reference(v, spec, points):
    """Plain sequential propagation: states at T_1..T_points."""
    out = []
    s = v
    for _ in range(points):
        s = propagate(spec, s)
        out.append(s)
    return out
