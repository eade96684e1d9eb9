"""End-to-end acceptance checks, one test per criterion.

A PASS/FAIL line per criterion is printed in the terminal summary (see conftest).
"""
import hashlib
import time

import numpy as np
import pytest

from parareal_msm import cost, fixtures
from parareal_msm.cli import main
from parareal_msm.core import PHYSICAL, ParticleSystem, generate_random_system
from parareal_msm.dynamics import CutoffField, DirectField, MsmField, WolfField, run_md
from parareal_msm.electrostatics import (CutoffParams, direct_coulomb, simple_cutoff,
                                         wolf_summation)
from parareal_msm.msm import (MsmConfig, anterpolate, build_grid_hierarchy, kernel_g_level,
                              kernel_g_star, msm_potential, restrict)
from parareal_msm.parareal import (NonConvergenceError, PararealConfig, parareal_init, parareal_iterate,
                                   parareal_run, rms_position_difference,
                                   sequential_reference)
from parareal_msm.schedule import simulate_schedule

from test_electrostatics import fd_forces, rel_err


def test_criterion_01_msm_accuracy(msm500):
    t0 = time.perf_counter()
    u_direct = direct_coulomb(msm500).total_energy
    cfg = MsmConfig(8.0, 2.0, 3, interp_order_p=3, smoothing_m=2)
    u_msm = msm_potential(msm500, cfg).total_energy
    elapsed = time.perf_counter() - t0
    assert abs(u_msm - u_direct) / abs(u_direct) < 0.01
    assert elapsed < 10.0


def test_criterion_02_telescoping():
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        l = int(rng.integers(1, 6))
        a = float(rng.uniform(0.5, 12.0))
        r = float(rng.uniform(1e-3, 2 ** l * a))
        total = kernel_g_star(r, a) + sum(kernel_g_level(r, a, k, l) for k in range(l))
        worst = max(worst, abs(total - 1 / r) * r)
    assert worst <= 1e-12
    assert time.perf_counter() - t0 < 1.0


def test_criterion_03_charge_conservation():
    cfg = MsmConfig(5.0, 1.5, 4)
    for seed in range(100):
        s = generate_random_system(25, (10, 10, 10), "alternating", 0.5, seed=1000 + seed)
        s = ParticleSystem(s.positions, s.velocities, s.charges * np.linspace(0.5, 1.5, s.n),
                           s.masses, s.box)
        q = s.charges.sum()
        lev = build_grid_hierarchy(s, cfg)
        lev[0] = anterpolate(s, lev[0])
        assert abs(lev[0].charge.sum() - q) <= 1e-12 * max(abs(q), 1.0)
        for k in range(cfg.levels_l - 1):
            lev[k + 1] = restrict(lev[k], lev[k + 1])
            assert abs(lev[k + 1].charge.sum() - q) <= 1e-12 * max(abs(q), 1.0)


def test_criterion_04_force_consistency():
    s = generate_random_system(30, (10, 10, 10), "random_neutral", 1.0, seed=21)
    reference = {
        "direct": lambda x: direct_coulomb(x),
        "simple-cutoff": lambda x: simple_cutoff(x, CutoffParams(5.0)),
        "wolf": lambda x: wolf_summation(x, CutoffParams(5.0, 0.3)),
    }
    for fn in reference.values():
        assert rel_err(fn(s).per_particle_force,
                       fd_forces(lambda x: fn(x).total_energy, s)) < 1e-6
    cfg = MsmConfig(4.0, 1.0, 3)
    analytic = msm_potential(s, cfg).per_particle_force
    numeric = fd_forces(lambda x: msm_potential(x, cfg).total_energy, s, step=1e-4)
    assert rel_err(analytic, numeric) < 1e-5


def test_criterion_05_flop_model():
    simplified = cost.msm_flops_simplified(12, 2, 1) / 1
    assert 136812 <= simplified <= 136814
    general = cost.msm_flops_general(cost.FlopParams(1, 1.0, 12, 2, h_star=1.0))
    assert abs(general / simplified - 1) < 0.10


def test_criterion_06_parareal_exactness():
    system = fixtures.parareal_system()
    fine, coarse = fixtures.parareal_propagators()
    ref = sequential_reference(system, fine, 8)
    cfg = PararealConfig(fine, coarse, window_T_W=8, max_iter_K=4, short_circuit=False)
    w = parareal_init(system, cfg)
    for k in range(4):
        parareal_iterate(w, cfg)
        for n in range(1, k + 2):
            assert rms_position_difference(w.row(k)[n], ref[n - 1]) <= 1e-10


def test_criterion_07_parareal_convergence(tmp_path):
    t0 = time.perf_counter()
    code = main(["parareal", "--out", str(tmp_path), "--window", "8", "--tol", "1e-6",
                 "--max-iter", "5", "--coarse", "simple-cutoff", "--cutoff", "6",
                 "--fine", "msm", "--a", "8", "--verify", "--no-figures"])
    assert code == 0
    rows = (tmp_path / "parareal_counts.csv").read_text().splitlines()[1:]
    iterations = [int(r.split(",")[3]) for r in rows]
    assert max(iterations) <= 5
    devs = [float(r.split(",")[1]) for r in (tmp_path / "verify.csv").read_text().splitlines()[1:]]
    assert max(devs) <= 1e-6
    assert time.perf_counter() - t0 < 60.0


@pytest.mark.parametrize("T_W,K", [(4, 2), (6, 3)])
def test_criterion_08_evaluation_counts(T_W, K):
    # The printed G formula is one below what a full K-iteration window evaluates;
    # asserted literally, so this criterion is expected to fail by exactly one.
    system = fixtures.parareal_system()
    fine, coarse = fixtures.parareal_propagators()
    cfg = PararealConfig(fine, coarse, window_T_W=T_W, max_iter_K=K, short_circuit=False)
    try:
        report = parareal_run(system, T_W, cfg).report
    except NonConvergenceError as exc:
        report = exc.report
    first = report.windows[0]
    assert first["f_evaluations"] == T_W * K
    assert first["g_evaluations"] == T_W * (K + 1) - 1


def test_criterion_09_scheduler():
    for q in (2, 4, 8, 453):
        res = simulate_schedule("plan1", cost.ScheduleParams(T_W=q, W=2, K=2, Q_ratio=q))
        assert res.speedup == q / 2
    for q in (2, 4, 453):
        for t in (4, 8, 906):
            for k in (1, 2, 3):
                p = cost.ScheduleParams(T_W=t, K=k, Q_ratio=q)
                res = simulate_schedule("plan2", p)
                assert abs(res.makespan - cost.plan2_makespan(t, q, k, p.R_F)) <= p.R_G
                assert res.g_iteration_units == k
                assert res.f_units == k * q


@pytest.mark.parametrize("name", ["direct", "simple-cutoff", "wolf", "msm"])
def test_criterion_10_nve_drift(name):
    s = fixtures.nve_system()
    ff = {"direct": DirectField(PHYSICAL),
          "simple-cutoff": CutoffField(fixtures.NVE_CUTOFF, PHYSICAL),
          "wolf": WolfField(fixtures.NVE_CUTOFF, 0.2, PHYSICAL),
          "msm": MsmField(MsmConfig(8.0, 2.0, 3), PHYSICAL)}[name]
    energies = [e["total"] for _, _, e in run_md(s, ff, 0.5, 1000)]
    assert abs(energies[-1] - energies[0]) / abs(energies[0]) < 1e-3


def test_criterion_11_determinism(tmp_path):
    def digest(d):
        return {p.name: hashlib.sha256(p.read_bytes()).hexdigest()
                for p in sorted(d.glob("*.csv"))}

    for name in ("a", "b"):
        d = tmp_path / name
        d.mkdir()
        common = ["--out", str(d), "--threads", "1", "--seed", "9", "--no-figures"]
        assert main(["simulate", "--steps", "25", "--force-field", "msm", *common]) == 0
        assert main(["parareal", "--points", "8", "--verify", *common]) == 0
        assert main(["compare", "--fixture", "parareal10", "--units", "reduced", *common]) == 0
        assert main(["schedule", "--q-ratio", "3", "--t", "6", "--k", "2", *common]) == 0
        assert main(["cost", *common]) == 0
    a, b = digest(tmp_path / "a"), digest(tmp_path / "b")
    assert len(a) >= 10
    assert a == b
