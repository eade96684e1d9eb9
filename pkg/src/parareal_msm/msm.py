"""Multilevel summation of Coulomb potentials on a hierarchy of nested grids.

The 1/r kernel is split into a short-range part ``g*`` summed over particle
pairs inside the cutoff ``a`` and smooth parts ``g^k`` that live on grids of
spacing ``2^k h``.  Charges are spread to the finest grid (anterpolation),
restricted level by level, convolved with each level's kernel stencil, summed
densely on the top level, prolongated back and finally interpolated to the
particles.

Grids are vertex-centred on an infinite lattice anchored at the box origin;
each level stores the index window ``lo .. lo + dims - 1`` it actually needs.
Coarse points sit on every second fine point, so the transfer weights along
one axis take only the values Phi(0), Phi(+-1/2), Phi(+-1), Phi(+-3/2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy.signal import fftconvolve

from .core import REDUCED
from .electrostatics import PotentialResult, energy_from_potentials, pair_geometry

GAMMA_AT_ZERO = 15.0 / 8.0
MARGIN = 2


class UnsupportedOrderError(ValueError):
    pass


class GridCoverageError(ValueError):
    pass


class HierarchyError(ValueError):
    pass


def _check_m(m):
    if m != 2:
        raise UnsupportedOrderError(f"smoothing order m={m} not supported (only 2)")


def _check_p(p):
    if p != 3:
        raise UnsupportedOrderError(f"interpolation order p={p} not supported (only 3)")


# -- kernels ---------------------------------------------------------------

def gamma(rho, m=2):
    """C2 Taylor smoothing of 1/rho: 15/8 - 5/4 rho^2 + 3/8 rho^4 below 1."""
    _check_m(m)
    rho = np.asarray(rho, dtype=float)
    inner = 1.875 + rho * rho * (-1.25 + 0.375 * rho * rho)
    with np.errstate(divide="ignore"):
        outer = 1.0 / rho
    out = np.where(rho < 1.0, inner, outer)
    return out[()] if out.ndim == 0 else out


def gamma_prime(rho, m=2):
    _check_m(m)
    rho = np.asarray(rho, dtype=float)
    inner = rho * (-2.5 + 1.5 * rho * rho)
    with np.errstate(divide="ignore"):
        outer = -1.0 / (rho * rho)
    out = np.where(rho < 1.0, inner, outer)
    return out[()] if out.ndim == 0 else out


def kernel_g_star(r, a, m=2):
    """Short-range remainder 1/r - gamma(r/a)/a; identically zero for r >= a."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("kernel_g_star needs r > 0")
    out = np.where(r < a, 1.0 / r - gamma(r / a, m) / a, 0.0)
    return out[()] if out.ndim == 0 else out


def kernel_g_star_prime(r, a, m=2):
    r = np.asarray(r, dtype=float)
    out = np.where(r < a, -1.0 / (r * r) - gamma_prime(r / a, m) / (a * a), 0.0)
    return out[()] if out.ndim == 0 else out


def kernel_g_level(r, a, k, l, m=2):
    """Level-k kernel; the top level ``k = l-1`` keeps only its smooth term."""
    if not 0 <= k <= l - 1:
        raise IndexError(f"level {k} outside 0..{l - 1}")
    r = np.asarray(r, dtype=float)
    ak = (2 ** k) * a
    out = gamma(r / ak, m) / ak
    if k < l - 1:
        out = out - gamma(r / (2 * ak), m) / (2 * ak)
        # both terms are 1/r beyond 2^(k+1) a; force the exact cancellation
        out = np.where(r >= 2 * ak, 0.0, out)
    return out[()] if np.ndim(out) == 0 else out


# -- nodal basis -----------------------------------------------------------

def basis_phi(xi, p=3):
    """C1 cubic interpolating basis with support |xi| < 2."""
    _check_p(p)
    t = np.abs(np.asarray(xi, dtype=float))
    inner = (1.0 - t) * (1.0 + t - 1.5 * t * t)
    outer = -0.5 * (t - 1.0) * (2.0 - t) ** 2
    out = np.where(t <= 1.0, inner, np.where(t <= 2.0, outer, 0.0))
    return out[()] if out.ndim == 0 else out


def basis_dphi(xi, p=3):
    _check_p(p)
    xi = np.asarray(xi, dtype=float)
    t = np.abs(xi)
    inner = t * (-5.0 + 4.5 * t)
    outer = -1.5 * t * t + 5.0 * t - 4.0
    out = np.sign(xi) * np.where(t <= 1.0, inner, np.where(t <= 2.0, outer, 0.0))
    return out[()] if out.ndim == 0 else out


# -- configuration and grids -----------------------------------------------

@dataclass(frozen=True)
class MsmConfig:
    cutoff_a: float
    spacing_h: float
    levels_l: int = 3
    interp_order_p: int = 3
    smoothing_m: int = 2

    def __post_init__(self):
        if not self.cutoff_a > 0 or not self.spacing_h > 0:
            raise ValueError("cutoff_a and spacing_h must be positive")
        if self.levels_l < 1:
            raise ValueError("levels_l must be >= 1")
        if self.cutoff_a / self.spacing_h < 1:
            raise ValueError("cutoff_a / spacing_h must be >= 1")
        _check_p(self.interp_order_p)
        _check_m(self.smoothing_m)

    @property
    def stencil_radius(self):
        """Lattice-cutoff stencil half-width in grid points (same on every level)."""
        return int(math.ceil(2.0 * self.cutoff_a / self.spacing_h - 1e-12))


@dataclass(frozen=True, eq=False)
class MsmGridLevel:
    level_k: int
    spacing: float
    anchor: np.ndarray
    lo: tuple
    dims: tuple
    charge: np.ndarray
    potential: np.ndarray

    @property
    def origin(self):
        return self.anchor + np.asarray(self.lo) * self.spacing

    def points(self, axis):
        """Physical coordinates of the grid planes along ``axis``."""
        return self.anchor[axis] + (self.lo[axis] + np.arange(self.dims[axis])) * self.spacing


def _ceil_half(x):
    return -((-x) // 2)


def build_grid_hierarchy(system, config):
    """Empty (zero) lattices for levels 0..l-1.

    Level 0 covers the box plus ``MARGIN`` points on each side and is widened
    when particles have left the box; widening only adds zero-charge points
    so results do not depend on it.  Each coarser window covers the support
    of every finer point.
    """
    h = config.spacing_h
    anchor = np.zeros(3)
    pos = system.positions
    lo = np.minimum(-MARGIN, np.floor(pos.min(axis=0) / h).astype(int) - MARGIN)
    hi = np.maximum(np.ceil(system.box / h - 1e-12).astype(int) + MARGIN,
                    np.floor(pos.max(axis=0) / h).astype(int) + MARGIN + 1)
    levels = []
    for k in range(config.levels_l):
        dims = tuple(int(d) for d in hi - lo + 1)
        if min(dims) < 2:
            raise ValueError(f"level {k} would have fewer than 2 points per axis")
        levels.append(MsmGridLevel(
            k, h * 2 ** k, anchor, tuple(int(v) for v in lo), dims,
            np.zeros(dims), np.zeros(dims)))
        lo = np.array([_ceil_half(v - 3) for v in lo])
        hi = (hi + 3) // 2
    return levels


# -- particle <-> grid -----------------------------------------------------

def _stencil_weights(system, level0, derivative=False):
    """Per-particle 4-point index windows and 1-D weights along each axis.

    Returns (idx, w, dw): idx (N, 3, 4) local lattice indices, w the Phi
    weights and dw the d/dx weights (already divided by the spacing).
    """
    h = level0.spacing
    s = (system.positions - level0.anchor) / h
    base = np.floor(s).astype(int)
    offsets = np.arange(-1, 3)
    glob = base[:, :, None] + offsets[None, None, :]
    xi = s[:, :, None] - glob
    lo = np.asarray(level0.lo)[None, :, None]
    idx = glob - lo
    dims = np.asarray(level0.dims)[None, :, None]
    bad = np.any((idx < 0) | (idx >= dims), axis=(1, 2))
    if np.any(bad):
        i = int(np.argmax(bad))
        raise GridCoverageError(f"particle {i} at {system.positions[i]} is outside the grid")
    w = basis_phi(xi)
    dw = basis_dphi(xi) / h if derivative else None
    return idx, w, dw


def _outer3(wx, wy, wz):
    return wx[:, :, None, None] * wy[:, None, :, None] * wz[:, None, None, :]


def _flat_index(idx, dims):
    ix = idx[:, 0, :, None, None]
    iy = idx[:, 1, None, :, None]
    iz = idx[:, 2, None, None, :]
    return (ix * dims[1] + iy) * dims[2] + iz


def anterpolate(system, level0):
    """Spread particle charges onto the finest grid with the Phi weights."""
    idx, w, _ = _stencil_weights(system, level0)
    weights = _outer3(w[:, 0], w[:, 1], w[:, 2]) * system.charges[:, None, None, None]
    flat = np.zeros(int(np.prod(level0.dims)))
    np.add.at(flat, _flat_index(idx, level0.dims).ravel(), weights.ravel())
    return replace(level0, charge=flat.reshape(level0.dims))


def interpolate_to_atoms(level0, system, with_gradient=False):
    """Potential per unit charge at each particle, optionally with its gradient."""
    idx, w, dw = _stencil_weights(system, level0, derivative=with_gradient)
    u = level0.potential.ravel()[_flat_index(idx, level0.dims)]
    wx, wy, wz = w[:, 0], w[:, 1], w[:, 2]
    phi = np.einsum("nabc,nabc->n", _outer3(wx, wy, wz), u)
    if not with_gradient:
        return phi
    grad = np.stack([
        np.einsum("nabc,nabc->n", _outer3(dw[:, 0], wy, wz), u),
        np.einsum("nabc,nabc->n", _outer3(wx, dw[:, 1], wz), u),
        np.einsum("nabc,nabc->n", _outer3(wx, wy, dw[:, 2]), u),
    ], axis=1)
    return phi, grad


# -- grid <-> grid ---------------------------------------------------------

def transfer_matrix(fine_lo, fine_n, coarse_lo, coarse_n):
    """1-D restriction weights R[J, i] = Phi((i - 2J) / 2) in global indices."""
    i = fine_lo + np.arange(fine_n)
    J = coarse_lo + np.arange(coarse_n)
    return basis_phi((i[None, :] - 2 * J[:, None]) / 2.0)


def _transfer_matrices(fine, coarse):
    if coarse.level_k != fine.level_k + 1:
        raise HierarchyError(
            f"levels {fine.level_k} -> {coarse.level_k} are not adjacent")
    mats = [transfer_matrix(fine.lo[a], fine.dims[a], coarse.lo[a], coarse.dims[a])
            for a in range(3)]
    # every fine point with nonzero weight must map inside the coarse window
    for a in range(3):
        lo_need = _ceil_half(fine.lo[a] - 3)
        hi_need = (fine.lo[a] + fine.dims[a] - 1 + 3) // 2
        if lo_need < coarse.lo[a] or hi_need > coarse.lo[a] + coarse.dims[a] - 1:
            raise HierarchyError("coarse grid does not cover the fine grid support")
    return mats


def _apply_separable(mats, arr):
    out = np.tensordot(mats[0], arr, axes=(1, 0))
    out = np.tensordot(mats[1], out, axes=(1, 1)).transpose(1, 0, 2)
    out = np.tensordot(mats[2], out, axes=(1, 2)).transpose(1, 2, 0)
    return out


def restrict(level_k, level_k1):
    """Coarse charges q^{k+1}_J = sum_i Phi_J(r_i) q^k_i."""
    mats = _transfer_matrices(level_k, level_k1)
    return replace(level_k1, charge=_apply_separable(mats, level_k.charge))


def prolongate(level_k1, level_k):
    """Add the coarse potential, interpolated with the transposed restriction
    weights, to the fine level's (lattice-cutoff) potential."""
    mats = _transfer_matrices(level_k, level_k1)
    add = _apply_separable([m.T for m in mats], level_k1.potential)
    return replace(level_k, potential=level_k.potential + add)


@lru_cache(maxsize=64)
def _level_stencil(a, h, k, l, radius):
    spacing = h * 2 ** k
    off = np.arange(-radius, radius + 1) * spacing
    r = np.sqrt(off[:, None, None] ** 2 + off[None, :, None] ** 2 + off[None, None, :] ** 2)
    st = kernel_g_level(r, a, k, l)
    st.setflags(write=False)
    return st


def _convolve_same(q, stencil, radius):
    full = fftconvolve(q, stencil, mode="full")
    n = q.shape
    return full[radius:radius + n[0], radius:radius + n[1], radius:radius + n[2]]


def lattice_cutoff(level_k, config):
    """Grid potential from the level-k kernel, which vanishes beyond 2^{k+1} a."""
    l = config.levels_l
    if level_k.level_k > l - 2:
        raise HierarchyError("lattice_cutoff is for levels 0..l-2; use top_level")
    radius = config.stencil_radius
    st = _level_stencil(config.cutoff_a, config.spacing_h, level_k.level_k, l, radius)
    return _convolve_same(level_k.charge, st, radius)


def top_level(level_top, config):
    """Dense all-pairs sum of the top-level kernel over the coarsest grid."""
    l = config.levels_l
    if level_top.level_k != l - 1:
        raise HierarchyError(f"top level is {l - 1}, got {level_top.level_k}")
    radius = max(level_top.dims) - 1
    st = _level_stencil(config.cutoff_a, config.spacing_h, l - 1, l, radius)
    return replace(level_top, potential=_convolve_same(level_top.charge, st, radius))


def grid_potentials(system, config):
    """Run the grid part of the method; returns levels with final potentials."""
    levels = build_grid_hierarchy(system, config)
    levels[0] = anterpolate(system, levels[0])
    l = config.levels_l
    cutoff_parts = []
    for k in range(l - 1):
        levels[k + 1] = restrict(levels[k], levels[k + 1])
        cutoff_parts.append(lattice_cutoff(levels[k], config))
    levels[-1] = top_level(levels[-1], config)
    for k in range(l - 2, -1, -1):
        levels[k] = prolongate(levels[k + 1], replace(levels[k], potential=cutoff_parts[k]))
    return levels


# -- particle-level pieces -------------------------------------------------

def short_range(system, config, units=REDUCED):
    """Pairwise g* potentials (per unit charge) and the matching forces."""
    a = config.cutoff_a
    q = system.charges
    d, r, off = pair_geometry(system.positions)
    mask = off & (r < a)
    safe_r = np.where(mask, r, 1.0)
    g = np.where(mask, kernel_g_star(safe_r, a), 0.0)
    phi = g @ q
    dg = np.where(mask, kernel_g_star_prime(safe_r, a), 0.0)
    coef = dg / safe_r * q[None, :]
    force = -units.coulomb_constant * q[:, None] * np.einsum("ij,ijk->ik", coef, d)
    return phi, force


def self_potential(charges, config):
    """Each particle's own smooth contribution, sum_k g^k(0) q_i = gamma(0) q_i / a."""
    return charges * GAMMA_AT_ZERO / config.cutoff_a


def _block_range(lo, hi):
    return _ceil_half(lo - 3), (hi + 3) // 2


def _kernel_block(lo, hi, spacing, a, k, l):
    ax = [np.arange(lo[d], hi[d] + 1) * spacing for d in range(3)]
    pts = np.stack(np.meshgrid(*ax, indexing="ij"), axis=-1).reshape(-1, 3)
    diff = pts[:, None, :] - pts[None, :, :]
    return kernel_g_level(np.sqrt(np.einsum("ijk,ijk->ij", diff, diff)), a, k, l)


@lru_cache(maxsize=4096)
def _self_block(a, h, l, phase):
    """Level-0 grid operator restricted to the 4x4x4 points around a particle.

    The full operator sum_k R^T..K_k..R is invariant under shifts by the
    coarsest spacing, so the block depends only on the particle's base
    index modulo 2^(l-1).
    """
    lo = [phase[d] - 1 for d in range(3)]
    hi = [phase[d] + 2 for d in range(3)]
    ranges = [(lo, hi)]
    for _ in range(l - 1):
        nxt = [_block_range(lo[d], hi[d]) for d in range(3)]
        lo, hi = [v[0] for v in nxt], [v[1] for v in nxt]
        ranges.append((lo, hi))
    lo, hi = ranges[-1]
    A = _kernel_block(lo, hi, h * 2 ** (l - 1), a, l - 1, l)
    for k in range(l - 2, -1, -1):
        (flo, fhi), (clo, chi) = ranges[k], ranges[k + 1]
        R = np.ones((1, 1))
        for d in range(3):
            R = np.kron(R, transfer_matrix(flo[d], fhi[d] - flo[d] + 1,
                                           clo[d], chi[d] - clo[d] + 1))
        A = _kernel_block(flo, fhi, h * 2 ** k, a, k, l) + R.T @ A @ R
    A.setflags(write=False)
    return A


def grid_self_interaction(system, config):
    """Exact grid self-interaction S_i = w_i^T A w_i of a unit charge and its gradient.

    ``w_i`` are the particle's 64 interpolation weights and ``A`` the full
    multilevel grid operator on their support, so subtracting ``q_i S_i``
    removes the i = i term from the interpolated potential exactly.
    """
    h = config.spacing_h
    l = config.levels_l
    s = system.positions / h
    base = np.floor(s).astype(int)
    xi = s[:, :, None] - (base[:, :, None] + np.arange(-1, 3)[None, None, :])
    w = basis_phi(xi)
    dw = basis_dphi(xi) / h
    period = 2 ** (l - 1)
    phases = base % period
    S = np.empty(system.n)
    grad = np.empty((system.n, 3))
    for key in {tuple(p) for p in phases.tolist()}:
        sel = np.flatnonzero(np.all(phases == key, axis=1))
        A = _self_block(config.cutoff_a, h, l, key)
        wx, wy, wz = w[sel, 0], w[sel, 1], w[sel, 2]
        W = _outer3(wx, wy, wz).reshape(len(sel), -1)
        AW = W @ A
        S[sel] = np.einsum("nj,nj->n", AW, W)
        for d in range(3):
            parts = [wx, wy, wz]
            parts[d] = dw[sel, d]
            dW = _outer3(*parts).reshape(len(sel), -1)
            grad[sel, d] = 2.0 * np.einsum("nj,nj->n", AW, dW)
    return S, grad


def msm_potential(system, config, units=REDUCED, return_levels=False,
                  self_correction="grid"):
    """Potentials, forces and energy by multilevel summation.

    The long-range part is the interpolated grid potential minus each
    particle's interaction with itself.  ``self_correction="grid"`` removes
    the self term as the grid actually represents it; ``"analytic"`` uses the
    unsmoothed limit gamma(0)/a, which leaves a small position-dependent bias.

    Long-range forces differentiate the interpolation only; restriction and
    prolongation are transposes and every level kernel is symmetric, so this
    is the exact gradient of the returned energy.
    """
    k_c = units.coulomb_constant
    q = system.charges
    u_short, f_short = short_range(system, config, units)
    levels = grid_potentials(system, config)
    u_grid, grad = interpolate_to_atoms(levels[0], system, with_gradient=True)
    f_long = -k_c * q[:, None] * grad
    if self_correction == "grid":
        S, dS = grid_self_interaction(system, config)
        u_long = u_grid - q * S
        f_long = f_long + 0.5 * k_c * (q * q)[:, None] * dS
    elif self_correction == "analytic":
        u_long = u_grid - self_potential(q, config)
    else:
        raise ValueError(f"unknown self_correction {self_correction!r}")
    phi = u_short + u_long
    res = PotentialResult(phi, f_short + f_long,
                          energy_from_potentials(system.charges, phi, units),
                          short_part=u_short, long_part=u_long)
    if return_levels:
        return res, levels
    return res
