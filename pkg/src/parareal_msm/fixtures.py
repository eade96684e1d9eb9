"""Standard fixtures shared by the test suite and the ``gen`` command.

Every fixture is a pure function of its arguments, so a given seed always
reproduces the same system.
"""

import itertools

import numpy as np

from .core import PHYSICAL, REDUCED, ParticleSystem, generate_random_system
from .dynamics import CutoffField, MsmField, PropagatorSpec
from .msm import MsmConfig


def msm_accuracy_system(seed=42):
    """500 atoms, random neutral charges, 40 A box, 1.5 A minimum separation."""
    return generate_random_system(500, (40.0, 40.0, 40.0), "random_neutral",
                                  min_separation=1.5, seed=seed)


# 10-particle parareal fixture, reduced units.  dt and the slice length were
# pinned by hand: F is stable and the particles move ~0.25 A over 16 slices.
PARAREAL_BOX = 12.0
PARAREAL_DT = 0.01
PARAREAL_STEPS_PER_SLICE = 20


def parareal_system(seed=7):
    return generate_random_system(10, (PARAREAL_BOX,) * 3, "random_neutral",
                                  min_separation=2.0, seed=seed, mass=1.0)


def parareal_propagators(coarse_cutoff=6.0, a=8.0, h=2.0, levels=3,
                         dt=PARAREAL_DT, steps=PARAREAL_STEPS_PER_SLICE):
    """(fine, coarse) specs: MSM for F, simple cutoff for G."""
    fine = PropagatorSpec(MsmField(MsmConfig(a, h, levels), REDUCED), dt, steps)
    coarse = PropagatorSpec(CutoffField(coarse_cutoff, REDUCED), dt, steps)
    return fine, coarse


# NVE fixture, physical units.  Heavy masses keep the repulsive cloud from
# expanding much in 500 fs; every pair stays far inside NVE_CUTOFF.
NVE_BOX = 20.0
NVE_MASS = 1000.0
NVE_CUTOFF = 40.0


def nve_system(seed=3):
    return generate_random_system(32, (NVE_BOX,) * 3, "all_plus_one",
                                  min_separation=3.0, seed=seed, mass=NVE_MASS)


def near_equilibrium_system(side=4.0, offset=4.0, mass=1.0e6):
    """Rock-salt cube of eight alternating charges at rest.

    The cube is symmetric, so each particle only feels a small inward pull;
    with a large mass it barely moves over a few slices.
    """
    pos, q = [], []
    for i, j, k in itertools.product((0, 1), repeat=3):
        pos.append((offset + i * side, offset + j * side, offset + k * side))
        q.append(1.0 if (i + j + k) % 2 == 0 else -1.0)
    n = len(pos)
    box = (2 * offset + side,) * 3
    return ParticleSystem(np.array(pos), np.zeros((n, 3)), np.array(q),
                          np.full(n, mass), box)


FIXTURES = {
    "msm500": msm_accuracy_system,
    "parareal10": parareal_system,
    "nve32": nve_system,
    "rocksalt8": near_equilibrium_system,
}
