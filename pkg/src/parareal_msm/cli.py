"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 runtime error,
4 parareal non-convergence (or a failed ``--verify``).

Options may also come from a ``key = value`` file given with ``--config``;
keys are option names with or without leading dashes, and flags on the
command line win over the file.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys

import numpy as np

from . import cost, fixtures, schedule
from .core import (PHYSICAL, REDUCED, ParticleFileError, generate_random_system,
                   load_system, save_system, format_xyz)
from .dynamics import (CutoffField, DirectField, MsmField, PropagatorSpec, TrajectoryWriter,
                       WolfField, run_md)
from .electrostatics import compare_results, direct_coulomb
from .msm import MsmConfig, msm_potential
from .parareal import (NonConvergenceError, PararealConfig, make_executor,
                       parareal_run, rms_position_difference, sequential_reference)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_NONCONVERGED = 0, 2, 3, 4

FIELD_NAMES = ["direct", "simple-cutoff", "wolf", "msm"]


class ConfigError(ValueError):
    pass


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {text}")
    return v


def _nonneg_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected an integer >= 0, got {text}")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0 or not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


# ----------------------------------------------------------------------------
# parser


def _common(p, units_default_doc):
    g = p.add_argument_group("common")
    g.add_argument("--config", help="key = value file; command-line flags win")
    g.add_argument("--seed", type=int, default=None, help="seed for generated systems")
    g.add_argument("--threads", type=_positive_int, default=1,
                   help="worker threads for parareal fine propagations (1 = reference mode)")
    g.add_argument("--out", default=".", help="output directory")
    g.add_argument("--no-figures", dest="figures", action="store_false",
                   help="skip the PNG figures")
    g.add_argument("--units", choices=["physical", "reduced"], default=None,
                   help=f"unit system (default {units_default_doc})")


def _input_args(p, default_fixture):
    p.add_argument("--input", help="extended-XYZ particle file")
    p.add_argument("--fixture", choices=sorted(fixtures.FIXTURES), default=default_fixture,
                   help=f"built-in system used when --input is absent (default {default_fixture})")


def _field_args(p, cutoff_default=12.0):
    p.add_argument("--cutoff", type=_positive_float, default=cutoff_default,
                   help="cutoff radius for simple-cutoff and Wolf (A)")
    p.add_argument("--alpha", type=float, default=0.2, help="Wolf damping parameter (1/A)")
    p.add_argument("--a", type=_positive_float, default=8.0, help="MSM cutoff a (A)")
    p.add_argument("--h", type=_positive_float, default=2.0, help="MSM grid spacing h (A)")
    p.add_argument("--levels", type=_positive_int, default=3, help="MSM levels l")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="parareal-msm",
        description="MD with multilevel summation, parareal and cost models")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="sequential MD with one force field")
    _common(p, "physical")
    _input_args(p, "nve32")
    p.add_argument("--force-field", choices=FIELD_NAMES, default="direct")
    p.add_argument("--steps", type=_nonneg_int, default=100)
    p.add_argument("--dt", type=_positive_float, default=0.5, help="time step (fs)")
    p.add_argument("--frame-every", type=_positive_int, default=10,
                   help="write a trajectory frame every N steps")
    p.add_argument("--dump-levels", action="store_true",
                   help="write the MSM lattices of the initial state to msm_levels.csv")
    _field_args(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="approximate fields against the direct sum")
    _common(p, "physical")
    _input_args(p, "msm500")
    p.add_argument("--fields", default="msm,simple-cutoff,wolf",
                   help="comma-separated list from simple-cutoff, wolf, msm")
    _field_args(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("parareal", help="parareal run with coarse G and fine F")
    _common(p, "reduced")
    _input_args(p, "parareal10")
    p.add_argument("--coarse", choices=FIELD_NAMES, default="simple-cutoff")
    p.add_argument("--fine", choices=FIELD_NAMES, default="msm")
    p.add_argument("--window", type=int, default=8, help="time points per window (T_W)")
    p.add_argument("--max-iter", type=int, default=5, help="iterations per window (K)")
    p.add_argument("--tol", type=float, default=1e-6, help="RMS position tolerance (A)")
    p.add_argument("--points", type=_positive_int, default=None,
                   help="total time points (default two windows)")
    p.add_argument("--dt", type=_positive_float, default=fixtures.PARAREAL_DT)
    p.add_argument("--steps-per-slice", type=_positive_int,
                   default=fixtures.PARAREAL_STEPS_PER_SLICE)
    p.add_argument("--skip-threshold", type=float, default=None,
                   help="experimental: skip fine runs whose input moved less than this (A)")
    p.add_argument("--no-short-circuit", dest="short_circuit", action="store_false",
                   help="always run all K iterations")
    p.add_argument("--verify", action="store_true",
                   help="also run the sequential fine propagator and report the deviation")
    _field_args(p, cutoff_default=6.0)
    p.set_defaults(func=cmd_parareal)

    p = sub.add_parser("cost", help="flop model and closed-form speedups")
    _common(p, "n/a")
    p.add_argument("--a", type=_positive_float, default=12.0)
    p.add_argument("--h", type=_positive_float, default=2.0)
    p.add_argument("--N", type=_positive_float, default=1.0, help="particle count")
    p.add_argument("--L", type=_positive_float, default=None,
                   help="box length (A); sets h* = N^(-1/3) L")
    p.add_argument("--h-star", type=_positive_float, default=None,
                   help="nearest-neighbour distance (A); default 1 unless --L is given")
    p.add_argument("--m", type=_positive_int, default=2)
    p.add_argument("--p", type=_positive_int, default=3)
    p.add_argument("--q-g", type=_positive_float, default=cost.Q_G_SIMPLE_CUTOFF,
                   help="coarse flops per particle")
    p.add_argument("--t", type=_positive_int, default=453, help="T for plan-2 speedup")
    p.add_argument("--k", type=_positive_int, default=3, help="K for plan-2 speedup")
    p.add_argument("--simplified", action="store_true",
                   help="report the simplified four-term form as the headline number")
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("schedule", help="discrete-event simulation of plan 1 / plan 2")
    _common(p, "n/a")
    p.add_argument("--plan", choices=["1", "2"], default="2")
    p.add_argument("--q-ratio", type=_positive_int, default=4)
    p.add_argument("--windows", type=_positive_int, default=1)
    p.add_argument("--k", type=_positive_int, default=1)
    p.add_argument("--t", type=_positive_int, default=None,
                   help="points per window T_W (plan 1 default: q-ratio; plan 2: 2*q-ratio)")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("gen", help="write a fixture or random system as extended XYZ")
    _common(p, "n/a")
    p.add_argument("--fixture", choices=sorted(fixtures.FIXTURES), default=None)
    p.add_argument("--N", type=_positive_int, default=10)
    p.add_argument("--box", type=_positive_float, nargs="+", default=[20.0])
    p.add_argument("--charge-scheme", choices=["all_plus_one", "alternating", "random_neutral"],
                   default="random_neutral")
    p.add_argument("--min-sep", type=float, default=1.0)
    p.add_argument("--mass", type=_positive_float, default=1.0)
    p.add_argument("--output", default=None, help="file name (default OUT/system.xyz)")
    p.set_defaults(func=cmd_gen)
    return parser, sub


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def read_config_file(path):
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.lstrip("-")] = (lineno, value)
    return out


def _apply_config(subparser, entries, path):
    by_option = {}
    for action in subparser._actions:
        for opt in action.option_strings:
            if opt.startswith("--"):
                by_option[opt[2:]] = action
                by_option[opt[2:].replace("-", "_")] = action
    defaults = {}
    for key, (lineno, value) in entries.items():
        action = by_option.get(key)
        if action is None or action.dest in ("config", "help"):
            raise ConfigError(f"{path}:{lineno}: unknown option {key!r}")
        if action.nargs == 0:
            low = value.lower()
            if low not in _TRUE | _FALSE:
                raise ConfigError(f"{path}:{lineno}: {key} expects true/false")
            # store_false flags (e.g. no-figures) invert the written value
            flag_on = low in _TRUE
            defaults[action.dest] = action.const if flag_on else action.default
        else:
            try:
                if action.nargs in ("+", "*"):
                    conv = [action.type(v) if action.type else v for v in value.split()]
                else:
                    conv = action.type(value) if action.type else value
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}")
            if action.choices is not None and conv not in action.choices:
                raise ConfigError(f"{path}:{lineno}: {key} must be one of {action.choices}")
            defaults[action.dest] = conv
    subparser.set_defaults(**defaults)


def parse_args(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    parser, sub = build_parser()
    if known.config:
        command = next((a for a in argv if not a.startswith("-")), None)
        if command in sub.choices:
            _apply_config(sub.choices[command], read_config_file(known.config), known.config)
    return parser.parse_args(argv)


def main(argv=None):
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        os.makedirs(args.out, exist_ok=True)
    except OSError as exc:
        print(f"config error: cannot create output directory: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return args.func(args)


# ----------------------------------------------------------------------------
# helpers


def _units(args, default):
    name = args.units or default
    return PHYSICAL if name == "physical" else REDUCED


def _load_input(args):
    if args.input:
        return load_system(args.input)
    make = fixtures.FIXTURES[args.fixture]
    if args.seed is not None and args.fixture != "rocksalt8":
        return make(seed=args.seed)
    return make()


def _make_field(name, args, units):
    if name == "direct":
        return DirectField(units)
    if name == "simple-cutoff":
        return CutoffField(args.cutoff, units)
    if name == "wolf":
        return WolfField(args.cutoff, args.alpha, units)
    if name == "msm":
        return MsmField(MsmConfig(args.a, args.h, args.levels), units)
    raise ConfigError(f"unknown force field {name!r}")


def _path(args, name):
    return os.path.join(args.out, name)


def _setup(build, args):
    """Run the configuration phase; returns (value, None) or (None, exit code)."""
    try:
        return build(), None
    except (ConfigError, ParticleFileError, ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return None, EXIT_CONFIG


def _runtime_error(exc):
    print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
    return EXIT_RUNTIME


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in r])


# ----------------------------------------------------------------------------
# commands


def cmd_simulate(args):
    def build():
        units = _units(args, "physical")
        system = _load_input(args)
        ff = _make_field(args.force_field, args, units)
        if args.dump_levels and args.force_field != "msm":
            raise ConfigError("--dump-levels needs --force-field msm")
        return system, ff, units

    setup, code = _setup(build, args)
    if code is not None:
        return code
    system, ff, units = setup
    steps, energies = [], []
    try:
        if args.dump_levels:
            dump_levels(system, ff.config, units, _path(args, "msm_levels.csv"))
        with TrajectoryWriter(_path(args, "trajectory.xyz"), _path(args, "energy.csv")) as tw:
            for step, state, e in run_md(system, ff, args.dt, args.steps, units):
                frame = step % args.frame_every == 0 or step == args.steps
                tw.write(step, step * args.dt, state, e, frame=frame)
                steps.append(step)
                energies.append((e["kinetic"], e["potential"], e["total"]))
    except Exception as exc:  # non-finite state, grid failure, ...
        return _runtime_error(exc)
    ke, pe, tot = (np.array(c) for c in zip(*energies))
    drift = abs(tot[-1] - tot[0]) / abs(tot[0]) if tot[0] else float("nan")
    print(f"{args.force_field}: {args.steps} steps, |dE/E0| = {drift:.3e}")
    if args.figures:
        from .plotting import plot_energy
        plot_energy(steps, ke, pe, tot, _path(args, "energy.png"),
                    title=f"{args.force_field}, dt = {args.dt}")
    return EXIT_OK


LEVEL_FIELDS = ["level", "i", "j", "k", "x", "y", "z", "charge", "potential"]


def dump_levels(system, config, units, path):
    """Per-level lattice charges and potentials, one row per grid point."""
    _, levels = msm_potential(system, config, units, return_levels=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LEVEL_FIELDS)
        for lev in levels:
            xs, ys, zs = (lev.points(ax) for ax in range(3))
            for idx in np.ndindex(*lev.dims):
                gi = [lev.lo[d] + idx[d] for d in range(3)]
                w.writerow([lev.level_k, *gi, repr(float(xs[idx[0]])), repr(float(ys[idx[1]])),
                            repr(float(zs[idx[2]])), repr(float(lev.charge[idx])),
                            repr(float(lev.potential[idx]))])


COMPARE_SUMMARY_FIELDS = ["field", "energy_direct", "energy_approx", "energy_rel_error",
                          "potential_rms_rel_error", "force_rms_rel_error"]
COMPARE_PARTICLE_FIELDS = ["field", "particle", "phi_direct", "phi_approx",
                           "potential_rel_error", "force_rel_error"]


def cmd_compare(args):
    def build():
        units = _units(args, "physical")
        names = [n.strip() for n in args.fields.split(",") if n.strip()]
        if not names:
            raise ConfigError("--fields is empty")
        fields = [(n, _make_field(n, args, units)) for n in names]
        return _load_input(args), units, fields

    setup, code = _setup(build, args)
    if code is not None:
        return code
    system, units, fields = setup
    summary, per_particle, hist = [], [], {}
    try:
        ref = direct_coulomb(system, units)
        phi_scale = math.sqrt(float(np.mean(ref.per_particle_potential ** 2))) or 1.0
        f_scale = math.sqrt(float(np.mean(ref.per_particle_force ** 2))) or 1.0
        for name, ff in fields:
            res = ff.evaluate(system)
            agg = compare_results(ref, res)
            summary.append([name, agg["energy_reference"], agg["energy_approx"],
                            agg["energy_rel_error"], agg["potential_rms_rel_error"],
                            agg["force_rms_rel_error"]])
            dphi = np.abs(res.per_particle_potential - ref.per_particle_potential) / phi_scale
            dforce = np.linalg.norm(res.per_particle_force - ref.per_particle_force, axis=1) / f_scale
            hist[name] = dphi
            for i in range(system.n):
                per_particle.append([name, i, float(ref.per_particle_potential[i]),
                                     float(res.per_particle_potential[i]),
                                     float(dphi[i]), float(dforce[i])])
    except Exception as exc:
        return _runtime_error(exc)
    _write_rows(_path(args, "compare_summary.csv"), COMPARE_SUMMARY_FIELDS, summary)
    _write_rows(_path(args, "compare_particles.csv"), COMPARE_PARTICLE_FIELDS, per_particle)
    for row in summary:
        print(f"{row[0]:>14s}: energy rel err {row[3]:.3e}, potential RMS rel err {row[4]:.3e}, "
              f"force RMS rel err {row[5]:.3e}")
    if args.figures:
        from .plotting import plot_error_histogram
        plot_error_histogram(hist, _path(args, "compare_errors.png"))
    return EXIT_OK


VERIFY_FIELDS = ["point", "rms_deviation"]


def cmd_parareal(args):
    def build():
        units = _units(args, "reduced")
        system = _load_input(args)
        fine = PropagatorSpec(_make_field(args.fine, args, units), args.dt, args.steps_per_slice)
        coarse = PropagatorSpec(_make_field(args.coarse, args, units), args.dt,
                                args.steps_per_slice)
        if args.coarse == args.fine:
            coarse = fine
        cfg = PararealConfig(fine, coarse, args.window, args.max_iter, args.tol,
                             skip_threshold=args.skip_threshold,
                             short_circuit=args.short_circuit)
        points = args.points if args.points is not None else 2 * args.window
        return system, cfg, points

    setup, code = _setup(build, args)
    if code is not None:
        return code
    system, cfg, points = setup
    executor = make_executor(args.threads)
    try:
        result = parareal_run(system, points, cfg, executor)
    except NonConvergenceError as exc:
        if exc.report is not None:
            _write_parareal_reports(args, exc.report)
        print(f"non-convergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except Exception as exc:
        return _runtime_error(exc)
    finally:
        executor.shutdown()
    report = result.report
    _write_parareal_reports(args, report)
    with open(_path(args, "parareal_trajectory.xyz"), "w") as fh:
        for n, state in enumerate(result.trajectory, 1):
            fh.write(format_xyz(state, f"point={n} time={n * cfg.fine.slice_time!r}"))
    print(f"parareal: {points} points in {len(report.windows)} windows, "
          f"max iterations {report.max_iterations}, F evaluations {report.n_f}, "
          f"G evaluations {report.n_g}, skipped {report.n_skipped}")
    code = EXIT_OK
    if args.verify:
        try:
            ref = sequential_reference(system, cfg.fine, points)
        except Exception as exc:
            return _runtime_error(exc)
        dev = [rms_position_difference(a, b) for a, b in zip(result.trajectory, ref)]
        _write_rows(_path(args, "verify.csv"), VERIFY_FIELDS,
                    [[i + 1, float(d)] for i, d in enumerate(dev)])
        worst = max(dev)
        print(f"verify: max RMS deviation from sequential fine run = {worst:.3e}")
        if worst > cfg.tol:
            print(f"verification failed: {worst:.3e} > tol {cfg.tol}", file=sys.stderr)
            code = EXIT_NONCONVERGED
    return code


def _write_parareal_reports(args, report):
    report.write_csv(_path(args, "convergence.csv"))
    report.write_counts_csv(_path(args, "parareal_counts.csv"))
    if args.figures and report.rows:
        from .plotting import plot_convergence
        plot_convergence(report, _path(args, "convergence.png"))


FLOP_FIELDS = ["form", "term", "flops_per_particle", "flops_total"]
SUMMARY_FIELDS = ["quantity", "value"]


def cmd_cost(args):
    def build():
        N = args.N
        if args.L is not None and args.h_star is not None:
            raise ConfigError("give at most one of --L and --h-star")
        if args.L is not None:
            params = cost.FlopParams(N, args.L, args.a, args.h, m=args.m, p=args.p)
        else:
            hs = args.h_star if args.h_star is not None else 1.0
            params = cost.FlopParams(N, hs * N ** (1.0 / 3.0), args.a, args.h, h_star=hs,
                                     m=args.m, p=args.p)
        return params

    params, code = _setup(build, args)
    if code is not None:
        return code
    N = params.N
    general = cost.msm_flops_terms(params)
    simple = cost.msm_flops_simplified_terms(args.a, args.h, N)
    rows = [["general", k, v / N, v] for k, v in general.items()]
    g_total = cost.msm_flops_general(params)
    rows.append(["general", "total", g_total / N, g_total])
    rows += [["simplified", k, v / N, v] for k, v in simple.items()]
    s_total = cost.msm_flops_simplified(args.a, args.h, N)
    rows.append(["simplified", "total", s_total / N, s_total])
    _write_rows(_path(args, "flops_model.csv"), FLOP_FIELDS, rows)

    headline = s_total if args.simplified else g_total
    q_f = headline / N
    qr = cost.q_ratio(q_f, args.q_g)
    first_gap = general["short_range"] / simple["short_range"] - 1.0 if args.a > 0 else 0.0
    summary = [
        ["flops_per_particle", q_f],
        ["flops_total", headline],
        ["general_vs_simplified_rel_diff", g_total / s_total - 1.0],
        ["short_range_coefficient_rel_diff", first_gap],
        ["q_g", float(args.q_g)],
        ["q_ratio", qr],
        ["speedup_plan1", cost.speedup_plan1(qr)],
        ["speedup_plan2_printed", cost.speedup_plan2(qr, args.t, args.k)],
        ["speedup_plan2_makespan", cost.speedup_plan2_makespan(qr, args.t, args.k)],
    ]
    _write_rows(_path(args, "cost_summary.csv"), SUMMARY_FIELDS, summary)
    form = "simplified" if args.simplified else "general"
    print(f"MSM flops per particle ({form}): {q_f:.1f}")
    print(f"MSM flops total for N = {N:g}: {headline:.4e}")
    print(f"general form differs from simplified by {100 * (g_total / s_total - 1):.2f}% "
          f"(short-range coefficient {100 * first_gap:.2f}%)")
    print(f"Q_F/Q_G = {q_f:.1f}/{args.q_g:g} = {qr:.2f}")
    print(f"speedup plan 1 = {cost.speedup_plan1(qr):.2f}; plan 2 (T={args.t}, K={args.k}) "
          f"printed form = {cost.speedup_plan2(qr, args.t, args.k):.3f}, "
          f"from makespan = {cost.speedup_plan2_makespan(qr, args.t, args.k):.3f}")
    if args.figures:
        from .plotting import plot_flop_terms
        plot_flop_terms({f"{'gen' if r[0] == 'general' else 'simp'}:{r[1]}": r[3]
                         for r in rows if r[1] != "total" and r[3] > 0},
                        _path(args, "flops_model.png"))
    return EXIT_OK


EVENT_FIELDS = ["task", "unit", "start", "end"]
SPEEDUP_FIELDS = ["plan", "params", "simulated", "closed_form", "ratio"]


def cmd_schedule(args):
    def build():
        q = args.q_ratio
        if args.plan == "1":
            t_w = args.t if args.t is not None else q
        else:
            t_w = args.t if args.t is not None else 2 * q
        params = cost.ScheduleParams(T_W=t_w, W=args.windows, K=args.k, Q_ratio=q)
        if args.plan == "1":
            schedule.build_plan1(params)  # validates T_W == Q
        return params

    params, code = _setup(build, args)
    if code is not None:
        return code
    try:
        res = schedule.simulate_schedule("plan" + args.plan, params)
    except Exception as exc:
        return _runtime_error(exc)
    _write_rows(_path(args, "schedule_events.csv"), EVENT_FIELDS,
                [[e.task, e.unit, e.start, e.end] for e in res.event_log])
    p = params
    desc = f"Q={p.Q_ratio};T_W={p.T_W};W={p.W};K={p.K}"
    rows = []
    if args.plan == "1":
        closed = cost.speedup_plan1(p.Q_ratio)
        rows.append(["plan1", desc, res.speedup, closed, res.speedup / closed])
    else:
        closed = cost.speedup_plan2_makespan(p.Q_ratio, p.T_W, p.K)
        printed = cost.speedup_plan2(p.Q_ratio, p.T_W, p.K)
        rows.append(["plan2", desc, res.speedup, closed, res.speedup / closed])
        rows.append(["plan2-printed", desc, res.speedup, printed, res.speedup / printed])
    rows.append(["makespan", desc, float(res.makespan), float(res.closed_form_makespan),
                 res.makespan / res.closed_form_makespan])
    _write_rows(_path(args, "speedup_table.csv"), SPEEDUP_FIELDS, rows)
    print(f"plan {args.plan}: makespan {res.makespan} R_G (closed form "
          f"{res.closed_form_makespan:g}), simulated speedup {res.speedup:.4g}, "
          f"closed form {rows[0][3]:.4g}")
    if args.plan == "2":
        print(f"units: G-init 1, G iterations {res.g_iteration_units}, "
              f"F allocated {res.f_units}, used {res.units_used}; "
              f"utilization {res.utilization:.3f}")
    if args.figures:
        from .plotting import plot_gantt
        plot_gantt(res.event_log, _path(args, "schedule_gantt.png"))
    return EXIT_OK


def cmd_gen(args):
    def build():
        if args.fixture:
            make = fixtures.FIXTURES[args.fixture]
            if args.seed is not None and args.fixture != "rocksalt8":
                return make(seed=args.seed)
            return make()
        box = args.box * 3 if len(args.box) == 1 else args.box
        if len(box) != 3:
            raise ConfigError("--box takes one or three values")
        return generate_random_system(args.N, box, args.charge_scheme, args.min_sep,
                                      seed=args.seed or 0, mass=args.mass)

    system, code = _setup(build, args)
    if code is not None:
        return code
    path = args.output or _path(args, "system.xyz")
    save_system(system, path)
    print(f"wrote {system.n} particles to {path}")
    return EXIT_OK
