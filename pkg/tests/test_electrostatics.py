import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from parareal_msm.core import PHYSICAL, REDUCED, CoincidentParticlesError, generate_random_system
from parareal_msm.electrostatics import (CutoffParams, compare_results, direct_coulomb,
                                         simple_cutoff, wolf_pair_terms, wolf_summation)

from conftest import make_system


def fd_forces(energy_fn, system, step=1e-5):
    """Central finite differences of the total energy."""
    out = np.zeros((system.n, 3))
    for i in range(system.n):
        for d in range(3):
            p = system.positions.copy()
            p[i, d] += step
            ep = energy_fn(system.replace(positions=p))
            p[i, d] -= 2 * step
            em = energy_fn(system.replace(positions=p))
            out[i, d] = -(ep - em) / (2 * step)
    return out


def rel_err(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def test_unit_pair():
    s = make_system([[0, 0, 0], [1, 0, 0]])
    res = direct_coulomb(s, REDUCED)
    assert res.total_energy == 1.0
    assert res.per_particle_force.tolist() == [[-1.0, 0, 0], [1.0, 0, 0]]
    assert res.per_particle_potential.tolist() == [1.0, 1.0]


def test_single_particle():
    res = direct_coulomb(make_system([[1, 1, 1]]))
    assert res.total_energy == 0.0
    assert np.all(res.per_particle_force == 0)


def test_three_charges():
    s = make_system([[0, 0, 0], [1, 0, 0], [0, 1, 0]], charges=[1, 1, -1])
    assert direct_coulomb(s).total_energy == pytest.approx(1 - 1 - 1 / math.sqrt(2), abs=1e-14)
    assert simple_cutoff(s, CutoffParams(1.2)).total_energy == pytest.approx(0.0, abs=1e-15)


def test_physical_units_scale():
    s = make_system([[0, 0, 0], [2, 0, 0]], charges=[1, -1])
    assert direct_coulomb(s, PHYSICAL).total_energy == pytest.approx(-332.0636 / 2)


def test_coincident_pair_named():
    s = make_system([[0, 0, 0], [1, 0, 0], [0, 0, 0]])
    with pytest.raises(CoincidentParticlesError) as exc:
        direct_coulomb(s)
    assert exc.value.pair == (0, 2)
    for fn in (lambda x: simple_cutoff(x, CutoffParams(5)),
               lambda x: wolf_summation(x, CutoffParams(5, 0.2))):
        with pytest.raises(CoincidentParticlesError):
            fn(s)


def test_cutoff_excludes_far_pair():
    s = make_system([[0, 0, 0], [13, 0, 0]])
    res = simple_cutoff(s, CutoffParams(12.0))
    assert res.total_energy == 0.0
    assert np.all(res.per_particle_force == 0)


def test_cutoff_beyond_diameter_is_direct(small_system):
    a = direct_coulomb(small_system)
    b = simple_cutoff(small_system, CutoffParams(100.0))
    assert a.total_energy == b.total_energy
    assert a.per_particle_force.tobytes() == b.per_particle_force.tobytes()


def test_wolf_shifted_potential_example():
    # alpha = 0 reduces the shifted-potential form to 1/r - 1/a
    v, _ = wolf_pair_terms(np.array([1.0]), 0.0, 2.0, variant="dsp")
    assert v[0] == 0.5
    # the default force-shifted form adds (r - a) * 1/a^2
    v, _ = wolf_pair_terms(np.array([1.0]), 0.0, 2.0)
    assert v[0] == pytest.approx(0.25)


def test_wolf_pair_vanishes_beyond_cutoff():
    s = make_system([[0, 0, 0], [3, 0, 0]])
    res = wolf_summation(s, CutoffParams(2.0, 0.3))
    assert np.all(res.per_particle_force == 0)
    # only the self terms remain
    self_only = wolf_summation(make_system([[0, 0, 0]]), CutoffParams(2.0, 0.3)).total_energy
    assert res.total_energy == pytest.approx(2 * self_only)


def test_wolf_large_alpha():
    v, _ = wolf_pair_terms(np.array([0.5, 1.0, 1.5]), 50.0, 2.0)
    assert np.all(np.abs(v) < 1e-12)


def test_wolf_force_continuous_at_cutoff():
    rc = 5.0
    _, dv = wolf_pair_terms(np.array([rc - 1e-9]), 0.2, rc)
    assert abs(dv[0]) < 1e-9
    v, _ = wolf_pair_terms(np.array([rc - 1e-9]), 0.2, rc)
    assert abs(v[0]) < 1e-9


def test_wolf_requires_alpha(small_system):
    with pytest.raises(ValueError):
        wolf_summation(small_system, CutoffParams(5.0))
    with pytest.raises(ValueError):
        wolf_pair_terms(np.array([1.0]), 0.1, 2.0, variant="bogus")
    with pytest.raises(ValueError):
        CutoffParams(0.0)
    with pytest.raises(ValueError):
        CutoffParams(1.0, -0.1)


@pytest.mark.parametrize("field", [
    lambda s: direct_coulomb(s),
    lambda s: simple_cutoff(s, CutoffParams(6.0)),
    lambda s: wolf_summation(s, CutoffParams(6.0, 0.25)),
    lambda s: wolf_summation(s, CutoffParams(6.0, 0.0)),
], ids=["direct", "cutoff", "wolf", "wolf-alpha0"])
def test_forces_match_finite_differences(field):
    s = generate_random_system(20, (8, 8, 8), "random_neutral", 1.0, seed=4)
    analytic = field(s).per_particle_force
    numeric = fd_forces(lambda x: field(x).total_energy, s)
    assert rel_err(analytic, numeric) < 1e-6


def test_newton_third_law(small_system):
    for res in (direct_coulomb(small_system), simple_cutoff(small_system, CutoffParams(4.0))):
        assert np.all(np.abs(res.per_particle_force.sum(axis=0)) < 1e-10)


@settings(max_examples=25, deadline=None)
@given(st.tuples(*[st.floats(-50, 50)] * 3), st.integers(0, 1000))
def test_translation_invariance(shift, seed):
    s = generate_random_system(12, (6, 6, 6), "random_neutral", 0.8, seed=seed)
    t = s.replace(positions=s.positions + np.array(shift))
    for fn in (direct_coulomb, lambda x: simple_cutoff(x, CutoffParams(3.0)),
               lambda x: wolf_summation(x, CutoffParams(3.0, 0.3))):
        a, b = fn(s), fn(t)
        assert np.allclose(a.per_particle_potential, b.per_particle_potential, rtol=0, atol=1e-10)
        assert np.allclose(a.per_particle_force, b.per_particle_force, rtol=0, atol=1e-10)


def test_energy_is_index_order_sum(small_system):
    res = direct_coulomb(small_system)
    expected = 0.5 * math.fsum(small_system.charges * res.per_particle_potential)
    assert res.total_energy == expected


def test_compare_results_zero_for_identical(small_system):
    ref = direct_coulomb(small_system)
    agg = compare_results(ref, simple_cutoff(small_system, CutoffParams(1e3)))
    assert agg["energy_rel_error"] == 0.0
    assert agg["potential_rms_rel_error"] == 0.0
    assert agg["force_rms_rel_error"] == 0.0


def test_frozen_direct_energy(msm500_direct):
    assert msm500_direct.total_energy == pytest.approx(-10.729738619476704, rel=1e-13)
