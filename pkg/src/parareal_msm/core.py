"""Particle systems, unit conventions, fixture generation and extended-XYZ I/O.

Units: positions in Angstrom, time in fs, mass in amu, charge in e.  Energies
are in whatever unit ``UnitsConfig.coulomb_constant`` implies (kcal/mol for the
physical preset, 1 for the reduced preset).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class ParticleFileError(ValueError):
    """Malformed particle file; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class PlacementError(RuntimeError):
    pass


class CoincidentParticlesError(ValueError):
    def __init__(self, i, j):
        self.pair = (int(i), int(j))
        super().__init__(f"particles {i} and {j} are coincident")


def _frozen(a):
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class UnitsConfig:
    """Unit conventions.

    ``coulomb_constant`` is 1/(4 pi eps0) in energy*A/e^2.  ``accel_factor``
    converts force/mass (energy/(A*amu)) into A/fs^2; kinetic energy is
    ``sum(m v^2) / (2 * accel_factor)`` so that it is in the same energy unit
    as the potential.
    """

    coulomb_constant: float = 332.0636
    accel_factor: float = 4.184e-4

    def __post_init__(self):
        if not self.coulomb_constant > 0:
            raise ValueError("coulomb_constant must be positive")
        if not self.accel_factor > 0:
            raise ValueError("accel_factor must be positive")


PHYSICAL = UnitsConfig()
REDUCED = UnitsConfig(coulomb_constant=1.0, accel_factor=1.0)


@dataclass(frozen=True, eq=False)
class ParticleSystem:
    """Immutable snapshot of N point charges.

    Arrays are stored read-only: ``positions`` and ``velocities`` have shape
    (N, 3), ``charges`` and ``masses`` shape (N,), ``box`` shape (3,).
    """

    positions: np.ndarray
    velocities: np.ndarray
    charges: np.ndarray
    masses: np.ndarray
    box: np.ndarray
    elements: tuple = field(default=())

    def __post_init__(self):
        pos = _frozen(self.positions)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ValueError(f"positions must have shape (N, 3), got {pos.shape}")
        n = pos.shape[0]
        vel = _frozen(self.velocities)
        q = _frozen(self.charges)
        m = _frozen(self.masses)
        box = _frozen(self.box)
        if n < 1:
            raise ValueError("a system needs at least one particle")
        if vel.shape != (n, 3) or q.shape != (n,) or m.shape != (n,):
            raise ValueError(
                "length mismatch: positions %d, velocities %d, charges %d, masses %d"
                % (n, vel.shape[0] if vel.ndim else 0, q.size, m.size))
        if box.shape != (3,) or not np.all(box > 0):
            raise ValueError("box must be three positive extents")
        for name, arr in (("positions", pos), ("velocities", vel),
                          ("charges", q), ("masses", m), ("box", box)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite value in {name}")
        if not np.all(m > 0):
            raise ValueError("masses must be strictly positive")
        elements = tuple(self.elements) if self.elements else ("X",) * n
        if len(elements) != n:
            raise ValueError("length mismatch: elements")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "velocities", vel)
        object.__setattr__(self, "charges", q)
        object.__setattr__(self, "masses", m)
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "elements", elements)

    @property
    def n(self):
        return self.positions.shape[0]

    def replace(self, positions=None, velocities=None):
        """New system with positions and/or velocities swapped out."""
        return ParticleSystem(
            self.positions if positions is None else positions,
            self.velocities if velocities is None else velocities,
            self.charges, self.masses, self.box, self.elements)

    def inside_box(self):
        return bool(np.all(self.positions >= 0) and np.all(self.positions <= self.box))


def generate_random_system(n, box, charge_scheme="random_neutral",
                           min_separation=0.0, seed=0, mass=1.0):
    """Place ``n`` particles uniformly in ``[0, box]`` by rejection sampling.

    Charge schemes: ``all_plus_one``; ``alternating`` (+1, -1, +1, ...);
    ``random_neutral`` (a shuffled alternating set, so neutral for even n).
    Velocities are zero.  Raises PlacementError after 10000*n rejected draws.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if min_separation < 0:
        raise ValueError("min_separation must be >= 0")
    box = np.asarray(box, dtype=float)
    rng = np.random.default_rng(seed)

    budget = 10_000 * n
    attempts = 0
    pos = np.empty((n, 3))
    placed = 0
    sep2 = min_separation * min_separation
    while placed < n:
        if attempts >= budget:
            raise PlacementError(
                f"placed {placed} of {n} particles after {attempts} attempts")
        attempts += 1
        trial = rng.random(3) * box
        if placed and sep2 > 0:
            d = pos[:placed] - trial
            if np.min(np.einsum("ij,ij->i", d, d)) < sep2:
                continue
        pos[placed] = trial
        placed += 1

    if charge_scheme == "all_plus_one":
        q = np.ones(n)
    elif charge_scheme == "alternating":
        q = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    elif charge_scheme == "random_neutral":
        q = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
        rng.shuffle(q)
    else:
        raise ValueError(f"unknown charge scheme {charge_scheme!r}")

    masses = np.full(n, float(mass))
    return ParticleSystem(pos, np.zeros((n, 3)), q, masses, box)


def total_charge(system):
    return math.fsum(system.charges)


def center_of_mass(system):
    m = system.masses
    return np.array([math.fsum(m * system.positions[:, a]) for a in range(3)]) / math.fsum(m)


def kinetic_energy(system, units=None):
    """Sum of m v^2 / 2, divided by ``units.accel_factor`` when units are given."""
    v2 = np.einsum("ij,ij->i", system.velocities, system.velocities)
    ke = math.fsum(0.5 * system.masses * v2)
    if units is not None:
        ke /= units.accel_factor
    return ke


# -- extended XYZ ----------------------------------------------------------

def _fmt(x):
    return format(float(x), ".17g")


def format_xyz(system, comment=""):
    lines = [str(system.n), comment.replace("\n", " ")]
    for i in range(system.n):
        x, y, z = system.positions[i]
        vx, vy, vz = system.velocities[i]
        lines.append(" ".join([system.elements[i]] + [_fmt(v) for v in (
            x, y, z, system.charges[i], vx, vy, vz, system.masses[i])]))
    return "\n".join(lines) + "\n"


def save_system(system, path, comment=None):
    if comment is None:
        comment = "box=%s %s %s" % tuple(_fmt(b) for b in system.box)
    Path(path).write_text(format_xyz(system, comment))


def _parse_box(comment):
    if "box=" not in comment:
        return None
    vals = comment.split("box=", 1)[1].split()[:3]
    try:
        box = [float(v) for v in vals]
    except ValueError:
        return None
    return box if len(box) == 3 else None


def parse_xyz(text, box=None):
    lines = text.splitlines()
    if not lines:
        raise ParticleFileError("empty file", 1)
    try:
        n = int(lines[0].split()[0])
    except (ValueError, IndexError):
        raise ParticleFileError("first line must hold the particle count", 1)
    if n < 1:
        raise ParticleFileError("particle count must be >= 1", 1)
    comment = lines[1] if len(lines) > 1 else ""

    rows = []
    for k in range(n):
        lineno = k + 3
        if lineno - 1 >= len(lines) or not lines[lineno - 1].strip():
            raise ParticleFileError(
                f"header declares {n} particles but row {k + 1} is missing", lineno)
        parts = lines[lineno - 1].split()
        if len(parts) != 9:
            raise ParticleFileError(f"expected 9 fields, found {len(parts)}", lineno)
        try:
            vals = [float(p) for p in parts[1:]]
        except ValueError as exc:
            raise ParticleFileError(str(exc), lineno)
        if not all(math.isfinite(v) for v in vals):
            raise ParticleFileError("non-finite value", lineno)
        rows.append((parts[0], vals))
    extra = [ln for ln in lines[n + 2:] if ln.strip()]
    if extra:
        raise ParticleFileError(
            f"header declares {n} particles but more rows follow", n + 3)

    data = np.array([r[1] for r in rows])
    pos = data[:, 0:3]
    if box is None:
        box = _parse_box(comment)
    if box is None:
        box = np.maximum(pos.max(axis=0), 1.0)
    return ParticleSystem(pos, data[:, 4:7], data[:, 3], data[:, 7], box,
                          tuple(r[0] for r in rows))


def load_system(path, box=None):
    """Read an extended-XYZ file (``element x y z q vx vy vz mass`` rows).

    The box is taken from a ``box=Lx Ly Lz`` token in the comment line when
    present, otherwise from ``box`` or the positions' upper bound.
    """
    return parse_xyz(Path(path).read_text(), box=box)
