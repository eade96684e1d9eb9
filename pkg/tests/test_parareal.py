import numpy as np
import pytest

from parareal_msm import fixtures
from parareal_msm.core import REDUCED
from parareal_msm.dynamics import CutoffField, PropagatorSpec, ZeroField, propagate
from parareal_msm.parareal import (NonConvergenceError, PararealConfig, ThreadExecutor,
                                   metastable_skip, parareal_init, parareal_iterate,
                                   parareal_run, rms_position_difference,
                                   sequential_reference, state_diff)

from conftest import make_system

TOL = 1e-6


@pytest.fixture(scope="module")
def specs():
    return fixtures.parareal_propagators()


@pytest.fixture(scope="module")
def system():
    return fixtures.parareal_system()


@pytest.fixture(scope="module")
def fine_reference(system, specs):
    return sequential_reference(system, specs[0], 16)


def config(specs, **kw):
    fine, coarse = specs
    kw.setdefault("window_T_W", 8)
    kw.setdefault("max_iter_K", 5)
    kw.setdefault("tol", TOL)
    return PararealConfig(fine, coarse, **kw)


def test_config_validation(specs):
    fine, coarse = specs
    with pytest.raises(ValueError):
        PararealConfig(fine, coarse, max_iter_K=0)
    with pytest.raises(ValueError):
        PararealConfig(fine, coarse, window_T_W=0)
    with pytest.raises(ValueError):
        PararealConfig(fine, coarse, tol=0.0)
    other = PropagatorSpec(coarse.force_field, coarse.dt, coarse.steps_per_slice + 1)
    with pytest.raises(ValueError, match="slices differ"):
        PararealConfig(fine, other)


def test_init_single_slice(system, specs):
    w = parareal_init(system, config(specs, window_T_W=1))
    assert len(w.row(-1)) == 2
    assert w.row(-1)[1].positions.tobytes() == propagate(specs[1], system).positions.tobytes()


def test_init_free_flight():
    s = make_system([[1, 1, 1], [3, 3, 3]], velocities=[[0.1, 0, 0], [0, 0.2, 0]])
    spec = PropagatorSpec(ZeroField(), 0.5, 4)
    w = parareal_init(s, PararealConfig(spec, spec, window_T_W=3))
    for n in range(4):
        assert np.allclose(w.row(-1)[n].positions, s.positions + n * 2.0 * s.velocities,
                           rtol=0, atol=1e-14)


def test_init_matches_sequential_coarse(system, specs):
    w = parareal_init(system, config(specs, window_T_W=4))
    seq = sequential_reference(system, specs[1], 4)
    for n in range(1, 5):
        assert w.row(-1)[n].positions.tobytes() == seq[n - 1].positions.tobytes()
        assert w.row(-1)[n].velocities.tobytes() == seq[n - 1].velocities.tobytes()
    assert w.n_g == 4


def test_state_algebra_invariants(system, specs):
    cfg = config(specs, window_T_W=4)
    w = parareal_init(system, cfg)
    parareal_iterate(w, cfg)
    parareal_iterate(w, cfg)
    for k in (-1, 0, 1):
        assert w.row(k)[0] is system
    for k in (-1, 0):
        for n in range(1, 5):
            d = w.delta_vals[k + 1][n]
            ref = state_diff(w.f_vals[k + 1][n], w.g_vals[k + 1][n])
            assert d.dpos.tobytes() == ref.dpos.tobytes()
            assert d.dvel.tobytes() == ref.dvel.tobytes()
            assert 0 <= d.rms_pos <= d.max_pos


def test_g_equals_f_reproduces_fine(system, specs):
    fine = specs[0]
    cfg = PararealConfig(fine, fine, window_T_W=4, max_iter_K=3, tol=TOL)
    w = parareal_init(system, cfg)
    parareal_iterate(w, cfg)
    seq = sequential_reference(system, fine, 4)
    for n in range(1, 5):
        assert rms_position_difference(w.row(0)[n], seq[n - 1]) <= 1e-12
    res = parareal_run(system, 8, cfg)
    assert res.report.n_f == 8
    assert all(v == 1 for v in res.report.point_iterations.values())


def test_exactness_front(system, specs, fine_reference):
    cfg = config(specs, max_iter_K=4, short_circuit=False)
    w = parareal_init(system, cfg)
    for k in range(4):
        parareal_iterate(w, cfg)
        for n in range(1, k + 2):
            assert rms_position_difference(w.row(k)[n], fine_reference[n - 1]) <= 1e-10


def test_error_decreases_with_iterations(system, specs, fine_reference):
    cfg = config(specs, window_T_W=5, max_iter_K=3)
    w = parareal_init(system, cfg)
    errs = []
    for _ in range(3):
        parareal_iterate(w, cfg)
        errs.append(max(rms_position_difference(w.row(w.k)[n], fine_reference[n - 1])
                        for n in range(1, 6)))
    assert errs[0] > errs[1] > errs[2]


def test_delta_decay(system, specs):
    cfg = config(specs, max_iter_K=4, short_circuit=False)
    w = parareal_init(system, cfg)
    for _ in range(4):
        parareal_iterate(w, cfg)
    # the correction itself tends to F(lam*) - G(lam*), its change tends to zero
    steps = []
    for j in range(1, 4):
        steps.append(max(np.max(np.abs(w.delta_vals[j][n].dpos - w.delta_vals[j - 1][n].dpos))
                         for n in range(1, 9)))
    assert steps[0] > steps[1] > steps[2]
    assert len(w.delta_history) == 4


def test_huge_tolerance_converges_immediately(system, specs):
    res = parareal_run(system, 8, config(specs, tol=1e9))
    assert res.report.max_iterations == 1
    assert res.report.n_f == 8 and res.report.n_g == 16


def test_fixture_converges_and_matches_fine(system, specs, fine_reference):
    res = parareal_run(system, 16, config(specs))
    assert res.report.max_iterations <= 5
    assert len(res.trajectory) == 16
    for a, b in zip(res.trajectory, fine_reference):
        assert rms_position_difference(a, b) <= TOL


def test_window_slides_over_uneven_total(system, specs, fine_reference):
    res = parareal_run(system, 10, config(specs, window_T_W=4))
    assert len(res.trajectory) == 10
    assert sorted(res.report.point_iterations) == list(range(1, 11))
    assert [w["start_point"] for w in res.report.windows][0] == 1
    assert rms_position_difference(res.trajectory[-1], fine_reference[9]) <= TOL


@pytest.mark.parametrize("T_W,K", [(4, 2), (6, 3), (3, 2)])
def test_natural_evaluation_counts(system, specs, T_W, K):
    res = parareal_run(system, 2 * T_W, config(specs, window_T_W=T_W, max_iter_K=K,
                                               short_circuit=False))
    for w in res.report.windows:
        assert w["f_evaluations"] == w["points"] * K
        assert w["g_evaluations"] == w["points"] * (K + 1)


def test_short_circuit_counts_are_bounded(system, specs):
    T_W, K = 8, 5
    res = parareal_run(system, T_W, config(specs, window_T_W=T_W, max_iter_K=K))
    assert res.report.n_f <= T_W * K
    assert res.report.n_g <= T_W * (K + 1)


def test_non_convergence_raises_with_report(system, specs):
    fine = specs[0]
    poor = PropagatorSpec(ZeroField(REDUCED), fine.dt, fine.steps_per_slice)
    cfg = PararealConfig(fine, poor, window_T_W=4, max_iter_K=1, tol=1e-12)
    with pytest.raises(NonConvergenceError) as exc:
        parareal_run(system, 4, cfg)
    rep = exc.value.report
    assert rep is not None and rep.windows[0]["accepted"] == 0
    assert len(rep.rows) == 4


def test_threaded_executor_is_bitwise_identical(system, specs):
    cfg = config(specs, window_T_W=4)
    a = parareal_run(system, 4, cfg)
    pool = ThreadExecutor(4)
    try:
        b = parareal_run(system, 4, cfg, executor=pool)
    finally:
        pool.shutdown()
    for x, y in zip(a.trajectory, b.trajectory):
        assert x.positions.tobytes() == y.positions.tobytes()


def test_skip_threshold_zero_is_identical(system, specs):
    base = parareal_run(system, 8, config(specs, short_circuit=False, max_iter_K=3))
    zero = parareal_run(system, 8, config(specs, short_circuit=False, max_iter_K=3,
                                          skip_threshold=0.0))
    assert zero.report.n_skipped == 0
    for x, y in zip(base.trajectory, zero.trajectory):
        assert x.positions.tobytes() == y.positions.tobytes()


def test_skip_threshold_infinite(system, specs):
    res = parareal_run(system, 8, config(specs, short_circuit=False, max_iter_K=3,
                                         skip_threshold=float("inf")))
    assert res.report.n_f == 8


def test_metastable_skip_near_equilibrium(specs):
    s = fixtures.near_equilibrium_system()
    cfg = config(specs, short_circuit=False, max_iter_K=4, skip_threshold=1e-8)
    res = parareal_run(s, 8, cfg)
    candidates = 8 * (cfg.max_iter_K - 1)
    assert res.report.n_skipped / candidates >= 0.5
    ref = sequential_reference(s, specs[0], 8)
    err = max(rms_position_difference(a, b) for a, b in zip(res.trajectory, ref))
    assert err < 10 * TOL


def test_metastable_skip_reports_indices(specs):
    s = fixtures.near_equilibrium_system()
    cfg = config(specs, window_T_W=3, skip_threshold=1.0)
    w = parareal_init(s, cfg)
    assert metastable_skip(w, cfg) == set()
    parareal_iterate(w, cfg)
    assert metastable_skip(w, cfg) == {1, 2, 3}
    parareal_iterate(w, cfg)
    assert w.skipped == [(0, 1), (0, 2), (0, 3)]


def test_report_csv(tmp_path, system, specs):
    res = parareal_run(system, 8, config(specs))
    path = tmp_path / "conv.csv"
    res.report.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "window,point,iteration,delta_rms,converged"
    assert len(lines) == 1 + len(res.report.rows)
    res.report.write_counts_csv(tmp_path / "counts.csv")
    assert (tmp_path / "counts.csv").read_text().startswith("window,start_point")


def test_wolf_coarse_also_converges(system, specs):
    fine = specs[0]
    from parareal_msm.dynamics import WolfField
    wolf = PropagatorSpec(WolfField(6.0, 0.1, REDUCED), fine.dt, fine.steps_per_slice)
    res = parareal_run(system, 8, PararealConfig(fine, wolf, 8, 5, TOL))
    assert res.report.max_iterations <= 5


def test_cutoff_coarse_with_zero_force_system():
    s = make_system([[1, 1, 1], [4, 4, 4]], charges=[0, 0], velocities=[[0.1, 0, 0], [0, 0, 0]])
    spec_f = PropagatorSpec(CutoffField(10.0), 0.1, 2)
    spec_g = PropagatorSpec(CutoffField(1.0), 0.1, 2)
    res = parareal_run(s, 4, PararealConfig(spec_f, spec_g, 4, 2, 1e-9))
    assert res.report.max_iterations == 1
