"""Direct Coulomb summation and the cheap cutoff force fields.

All fields return per-particle potentials per unit charge, so that
``total_energy = 0.5 * k_C * sum(q_i * phi_i)``.  Forces include ``k_C``.
The pair loops are dense O(N^2) on purpose: these are the oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import erfc

from .core import REDUCED, CoincidentParticlesError


@dataclass(frozen=True)
class PotentialResult:
    per_particle_potential: np.ndarray
    per_particle_force: np.ndarray
    total_energy: float
    short_part: Optional[np.ndarray] = None
    long_part: Optional[np.ndarray] = None


@dataclass(frozen=True)
class CutoffParams:
    cutoff: float
    wolf_alpha: Optional[float] = None

    def __post_init__(self):
        if not self.cutoff > 0:
            raise ValueError("cutoff must be positive")
        if self.wolf_alpha is not None and self.wolf_alpha < 0:
            raise ValueError("wolf_alpha must be >= 0")


def pair_geometry(positions):
    """Displacements r_i - r_j, distances, and the strict upper-triangle mask.

    Raises CoincidentParticlesError for the first pair at zero distance.
    """
    d = positions[:, None, :] - positions[None, :, :]
    r = np.sqrt(np.einsum("ijk,ijk->ij", d, d))
    n = len(positions)
    off = ~np.eye(n, dtype=bool)
    bad = np.argwhere((r == 0) & off)
    if len(bad):
        i, j = sorted(bad[0])
        raise CoincidentParticlesError(i, j)
    return d, r, off


def energy_from_potentials(charges, potentials, units):
    # index-order exact sum keeps totals reproducible
    return 0.5 * units.coulomb_constant * math.fsum(charges * potentials)


def _assemble(system, units, kernel, dkernel_dr, mask, d, r, self_term=None):
    """Sum a radial pair kernel g(r) into potentials and forces.

    ``dkernel_dr`` is dg/dr; force on i is -k q_i sum_j q_j g'(r) (r_i-r_j)/r.
    """
    q = system.charges
    safe_r = np.where(mask, r, 1.0)
    g = np.where(mask, kernel(safe_r), 0.0)
    phi = g @ q
    if self_term is not None:
        phi = phi + self_term
    dg = np.where(mask, dkernel_dr(safe_r), 0.0)
    coef = dg / safe_r * q[None, :]
    force = -units.coulomb_constant * q[:, None] * np.einsum("ij,ijk->ik", coef, d)
    return PotentialResult(phi, force, energy_from_potentials(q, phi, units))


def direct_coulomb(system, units=REDUCED):
    d, r, off = pair_geometry(system.positions)
    return _assemble(system, units, lambda x: 1.0 / x, lambda x: -1.0 / (x * x),
                     off, d, r)


def simple_cutoff(system, params, units=REDUCED):
    """Coulomb restricted to pairs with r < cutoff; exactly zero beyond."""
    d, r, off = pair_geometry(system.positions)
    mask = off & (r < params.cutoff)
    return _assemble(system, units, lambda x: 1.0 / x, lambda x: -1.0 / (x * x),
                     mask, d, r)


def wolf_pair_terms(r, alpha, cutoff, variant="dsf"):
    """Wolf pair kernel and its radial derivative for r < cutoff.

    ``dsp`` is the damped shifted potential erfc(ar)/r - erfc(a rc)/rc.
    ``dsf`` adds the linear force-shift so the force also vanishes at rc.
    """
    r = np.asarray(r, dtype=float)
    rc = cutoff
    sq = 2.0 * alpha / math.sqrt(math.pi)
    erfc_rc = math.erfc(alpha * rc)
    v = erfc(alpha * r) / r - erfc_rc / rc
    dv = -erfc(alpha * r) / (r * r) - sq * np.exp(-(alpha * r) ** 2) / r
    if variant == "dsp":
        return v, dv
    if variant != "dsf":
        raise ValueError(f"unknown Wolf variant {variant!r}")
    # -dv at the cutoff
    f_rc = erfc_rc / (rc * rc) + sq * math.exp(-(alpha * rc) ** 2) / rc
    return v + f_rc * (r - rc), dv + f_rc


def wolf_self_potential(charges, alpha, cutoff):
    """Per-unit-charge self term; 0.5*q*phi gives -q^2 (erfc(a rc)/(2rc) + a/sqrt(pi))."""
    return -charges * (math.erfc(alpha * cutoff) / cutoff + 2.0 * alpha / math.sqrt(math.pi))


def wolf_summation(system, params, units=REDUCED, variant="dsf"):
    if params.wolf_alpha is None:
        raise ValueError("wolf_summation needs params.wolf_alpha")
    alpha, rc = params.wolf_alpha, params.cutoff
    d, r, off = pair_geometry(system.positions)
    mask = off & (r < rc)
    return _assemble(
        system, units,
        lambda x: wolf_pair_terms(x, alpha, rc, variant)[0],
        lambda x: wolf_pair_terms(x, alpha, rc, variant)[1],
        mask, d, r, self_term=wolf_self_potential(system.charges, alpha, rc))


def _rms(x):
    return float(np.sqrt(np.mean(np.square(x))))


def compare_results(reference, approx):
    """Aggregate relative errors of ``approx`` against ``reference``.

    Potential and force errors are RMS over particles (and components),
    normalised by the RMS of the reference.
    """
    dphi = approx.per_particle_potential - reference.per_particle_potential
    dforce = approx.per_particle_force - reference.per_particle_force
    ref_phi = _rms(reference.per_particle_potential)
    ref_force = _rms(reference.per_particle_force)
    e_ref = reference.total_energy
    return {
        "energy_reference": e_ref,
        "energy_approx": approx.total_energy,
        "energy_rel_error": abs(approx.total_energy - e_ref) / abs(e_ref) if e_ref else float("nan"),
        "potential_rms_rel_error": _rms(dphi) / ref_phi if ref_phi else float("nan"),
        "force_rms_rel_error": _rms(dforce) / ref_force if ref_force else float("nan"),
    }
