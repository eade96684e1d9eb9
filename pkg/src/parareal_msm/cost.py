"""Floating-point cost model for MSM and parareal speedup formulas."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

# flops per particle per step for the simple-cutoff coarse propagator (cited constant)
Q_G_SIMPLE_CUTOFF = 301.0
# flops per particle per step for MSM, a = 12 A, h = 2 A (cited constant)
Q_F_MSM_A12 = 136813.0


@dataclass(frozen=True)
class FlopParams:
    N: float
    L: float
    a: float
    h: float
    h_star: Optional[float] = None
    m: int = 2
    p: int = 3

    def __post_init__(self):
        for name in ("N", "L", "a", "h"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.h_star is not None and not self.h_star > 0:
            raise ValueError("h_star must be positive")
        if self.m < 1 or self.p < 1:
            raise ValueError("m and p must be positive")

    @property
    def nn_distance(self):
        """h*, the mean nearest-neighbour distance N^(-1/3) L unless overridden."""
        if self.h_star is not None:
            return self.h_star
        return self.N ** (-1.0 / 3.0) * self.L


def msm_flops_terms(params):
    """Short-range, interpolation and grid terms of the MSM flop count."""
    N, a, h, m, p = params.N, params.a, params.h, params.m, params.p
    hs = params.nn_distance
    short_coef = 4.0 * math.pi * m / 3.0 + 32.0 * math.pi / 3.0 + 81.0 / 2.0
    return {
        "short_range": short_coef * (a / hs) ** 3 * N,
        "interpolation": (6 * p ** 3 + 31 * p ** 2 + 36 * p + 17) * N,
        "grid": ((4.0 * a / h) ** 3 + 14 * (p + 2)) * (8.0 / 7.0) * (hs / h) ** 3 * N,
    }


def msm_flops_general(params):
    return math.fsum(msm_flops_terms(params).values())


def msm_flops_simplified_terms(a, h, N):
    """The four-term form for h* = 1 A, m = 2, p = 3."""
    return {
        "short_range": 77.7 * a ** 3 * N,
        "interpolation": 566.0 * N,
        "grid_cutoff": 73.0 * a ** 3 / h ** 6 * N,
        "grid_other": 80.0 / h ** 3 * N,
    }


def msm_flops_simplified(a, h, N):
    if a < 0 or not h > 0 or not N > 0:
        raise ValueError("need a >= 0, h > 0, N > 0")
    return math.fsum(msm_flops_simplified_terms(a, h, N).values())


def direct_flops(n, per_pair=20.0):
    """Rough count for the O(N^2) oracle; only used to label cost columns."""
    return per_pair * n * (n - 1) / 2.0


def q_ratio(Q_F, Q_G):
    if not Q_G > 0:
        raise ZeroDivisionError("Q_G must be positive")
    return Q_F / Q_G


def speedup_plan1(Q_ratio):
    """Alternating coarse phase on one unit and fine phase on Q units: Q/2."""
    if not Q_ratio > 0:
        raise ValueError("Q_ratio must be positive")
    return Q_ratio / 2.0


def speedup_plan2(Q_ratio, T, K):
    """Plan-2 speedup in its published closed form Q / (1 + K/(T Q))."""
    if not (Q_ratio > 0 and T > 0 and K > 0):
        raise ValueError("Q_ratio, T and K must be positive")
    return Q_ratio / (1.0 + K / (T * Q_ratio))


def speedup_plan2_makespan(Q_ratio, T, K):
    """Plan-2 speedup T R_F / ((T/Q + K) R_F) evaluated directly.

    Algebraically this is Q / (1 + K Q / T), which differs from the
    published simplification; both are reported side by side.
    """
    if not (Q_ratio > 0 and T > 0 and K > 0):
        raise ValueError("Q_ratio, T and K must be positive")
    return T / (T / Q_ratio + K)


def plan1_makespan(T_total, Q_ratio, R_F):
    return 2.0 * (T_total / Q_ratio) * R_F


def plan2_makespan(T, Q_ratio, K, R_F):
    return (T / Q_ratio + K) * R_F


@dataclass(frozen=True)
class ScheduleParams:
    """Window and timing parameters; durations are in units of the G time R_G."""

    T_W: int
    W: int = 1
    K: int = 1
    Q_ratio: int = 1
    R_G: float = 1.0
    R_F: Optional[float] = None
    P_G: int = 1
    P_F: int = 1
    ratio_tolerance: float = 1e-9
    T_total: int = field(default=0)

    def __post_init__(self):
        if self.T_W < 1 or self.W < 1 or self.K < 1:
            raise ValueError("T_W, W and K must be >= 1")
        if int(self.Q_ratio) != self.Q_ratio or self.Q_ratio < 1:
            raise ValueError("Q_ratio must be a positive integer (time quantum is R_G)")
        if not self.R_G > 0:
            raise ValueError("R_G must be positive")
        r_f = self.R_F if self.R_F is not None else self.Q_ratio * self.R_G
        if abs(r_f / self.R_G - self.Q_ratio) > self.ratio_tolerance * self.Q_ratio:
            raise ValueError(f"R_F/R_G = {r_f / self.R_G} inconsistent with Q_ratio {self.Q_ratio}")
        object.__setattr__(self, "R_F", r_f)
        total = self.W * self.T_W
        if self.T_total and self.T_total != total:
            raise ValueError(f"T_total {self.T_total} != W * T_W = {total}")
        object.__setattr__(self, "T_total", total)
