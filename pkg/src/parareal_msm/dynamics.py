"""Velocity-Verlet integration and the fine/coarse propagators built on it."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import cost
from .core import REDUCED, format_xyz, kinetic_energy
from .electrostatics import (CutoffParams, PotentialResult, direct_coulomb,
                             pair_geometry, simple_cutoff, wolf_summation)
from .msm import MsmConfig, msm_potential


class ForceField:
    """Electrostatic force field, optionally with a short-range repulsion.

    Subclasses implement ``_electrostatics``.  ``evaluate`` depends on
    positions and charges only.
    """

    name = "base"

    def __init__(self, units=REDUCED, repulsion=None):
        self.units = units
        self.repulsion = repulsion

    def _electrostatics(self, system) -> PotentialResult:
        raise NotImplementedError

    def cost_flops_per_step(self, n):
        raise NotImplementedError

    def evaluate(self, system):
        res = self._electrostatics(system)
        if self.repulsion is None:
            return res
        e_rep, f_rep = self.repulsion.evaluate(system)
        return PotentialResult(res.per_particle_potential, res.per_particle_force + f_rep,
                               res.total_energy + e_rep, res.short_part, res.long_part)

    def __repr__(self):
        return f"{type(self).__name__}({self.describe()})"

    def describe(self):
        return ""


@dataclass(frozen=True)
class PairRepulsion:
    """U = sum_{i<j} eps (sigma/r)^12.  Test-dynamics plumbing, off by default."""

    epsilon: float = 0.1
    sigma: float = 1.0

    def evaluate(self, system):
        d, r, off = pair_geometry(system.positions)
        safe = np.where(off, r, 1.0)
        sr12 = np.where(off, (self.sigma / safe) ** 12, 0.0)
        energy = 0.5 * math.fsum((self.epsilon * sr12).ravel())
        # -dU/dr = 12 eps sigma^12 / r^13, along r_i - r_j
        coef = 12.0 * self.epsilon * sr12 / (safe * safe)
        return energy, np.einsum("ij,ijk->ik", coef, d)


class ZeroField(ForceField):
    name = "zero"

    def _electrostatics(self, system):
        n = system.n
        return PotentialResult(np.zeros(n), np.zeros((n, 3)), 0.0)

    def cost_flops_per_step(self, n):
        return 0.0


class DirectField(ForceField):
    name = "direct"

    def _electrostatics(self, system):
        return direct_coulomb(system, self.units)

    def cost_flops_per_step(self, n):
        return cost.direct_flops(n)


class CutoffField(ForceField):
    name = "simple-cutoff"

    def __init__(self, cutoff, units=REDUCED, repulsion=None, flops_per_particle=cost.Q_G_SIMPLE_CUTOFF):
        super().__init__(units, repulsion)
        self.params = CutoffParams(cutoff)
        self.flops_per_particle = flops_per_particle

    def _electrostatics(self, system):
        return simple_cutoff(system, self.params, self.units)

    def cost_flops_per_step(self, n):
        return self.flops_per_particle * n

    def describe(self):
        return f"cutoff={self.params.cutoff}"


class WolfField(ForceField):
    name = "wolf"

    def __init__(self, cutoff, alpha, units=REDUCED, repulsion=None, variant="dsf",
                 flops_per_particle=cost.Q_G_SIMPLE_CUTOFF):
        super().__init__(units, repulsion)
        self.params = CutoffParams(cutoff, alpha)
        self.variant = variant
        self.flops_per_particle = flops_per_particle

    def _electrostatics(self, system):
        return wolf_summation(system, self.params, self.units, self.variant)

    def cost_flops_per_step(self, n):
        return self.flops_per_particle * n

    def describe(self):
        return f"cutoff={self.params.cutoff}, alpha={self.params.wolf_alpha}"


class MsmField(ForceField):
    name = "msm"

    def __init__(self, config: MsmConfig, units=REDUCED, repulsion=None, self_correction="grid"):
        super().__init__(units, repulsion)
        self.config = config
        self.self_correction = self_correction

    def _electrostatics(self, system):
        return msm_potential(system, self.config, self.units,
                             self_correction=self.self_correction)

    def cost_flops_per_step(self, n, box_length=None):
        c = self.config
        length = box_length if box_length is not None else n ** (1 / 3)
        return cost.msm_flops_general(cost.FlopParams(
            n, length, c.cutoff_a, c.spacing_h, m=c.smoothing_m, p=c.interp_order_p))

    def describe(self):
        c = self.config
        return f"a={c.cutoff_a}, h={c.spacing_h}, l={c.levels_l}"


@dataclass(frozen=True)
class PropagatorSpec:
    force_field: ForceField
    dt: float
    steps_per_slice: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.steps_per_slice < 1:
            raise ValueError("steps_per_slice must be >= 1")

    @property
    def slice_time(self):
        return self.dt * self.steps_per_slice


def _check_finite(system):
    if not (np.all(np.isfinite(system.positions)) and np.all(np.isfinite(system.velocities))):
        raise FloatingPointError("non-finite positions or velocities")


def _verlet(system, force_field, dt, units, forces):
    inv_m = units.accel_factor / system.masses[:, None]
    v_half = system.velocities + 0.5 * dt * forces * inv_m
    pos = system.positions + dt * v_half
    moved = system.replace(positions=pos, velocities=v_half)
    new_forces = force_field.evaluate(moved).per_particle_force
    vel = v_half + 0.5 * dt * new_forces * inv_m
    return moved.replace(velocities=vel), new_forces


def verlet_step(system, force_field, dt, units=None):
    """One velocity-Verlet step; ``units`` defaults to the force field's."""
    units = units or force_field.units
    if not dt > 0:
        raise ValueError("dt must be positive")
    forces = force_field.evaluate(system).per_particle_force
    out, _ = _verlet(system, force_field, dt, units, forces)
    return out


def propagate(spec, system, units=None):
    """Advance one slice of ``spec.steps_per_slice`` Verlet steps."""
    units = units or spec.force_field.units
    forces = spec.force_field.evaluate(system).per_particle_force
    for _ in range(spec.steps_per_slice):
        system, forces = _verlet(system, spec.force_field, spec.dt, units, forces)
    _check_finite(system)
    return system


def energy_report(system, force_field, units=None):
    units = units or force_field.units
    ke = kinetic_energy(system, units)
    pe = force_field.evaluate(system).total_energy
    return {"kinetic": ke, "potential": pe, "total": ke + pe}


def run_md(system, force_field, dt, steps, units=None):
    """Sequential MD; yields (step, system, energy dict) for steps 0..steps."""
    units = units or force_field.units
    res = force_field.evaluate(system)
    forces = res.per_particle_force
    ke = kinetic_energy(system, units)
    yield 0, system, {"kinetic": ke, "potential": res.total_energy, "total": ke + res.total_energy}
    for step in range(1, steps + 1):
        inv_m = units.accel_factor / system.masses[:, None]
        v_half = system.velocities + 0.5 * dt * forces * inv_m
        moved = system.replace(positions=system.positions + dt * v_half, velocities=v_half)
        res = force_field.evaluate(moved)
        forces = res.per_particle_force
        system = moved.replace(velocities=v_half + 0.5 * dt * forces * inv_m)
        _check_finite(system)
        ke = kinetic_energy(system, units)
        yield step, system, {"kinetic": ke, "potential": res.total_energy,
                             "total": ke + res.total_energy}


ENERGY_FIELDS = ["step", "time_fs", "kinetic", "potential", "total"]


class TrajectoryWriter:
    """Writes extended-XYZ frames and the ``step,time_fs,...`` energy log."""

    def __init__(self, xyz_path, energy_path: Optional[str] = None):
        self._xyz = open(xyz_path, "w")
        self._energy = open(energy_path, "w", newline="") if energy_path else None
        self._csv = None
        if self._energy:
            self._csv = csv.writer(self._energy)
            self._csv.writerow(ENERGY_FIELDS)

    def write(self, step, time_fs, system, energies=None, frame=True):
        if frame:
            self._xyz.write(format_xyz(system, f"step={step} time_fs={time_fs!r}"))
        if self._csv is not None and energies is not None:
            self._csv.writerow([step, repr(float(time_fs)), repr(energies["kinetic"]),
                                repr(energies["potential"]), repr(energies["total"])])

    def close(self):
        self._xyz.close()
        if self._energy:
            self._energy.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
