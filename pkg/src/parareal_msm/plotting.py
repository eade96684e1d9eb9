"""Figures written next to the CSV outputs.  Uses the non-interactive Agg backend."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 120,
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.bbox": "tight",
}


def _save(fig, path):
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_energy(steps, kinetic, potential, total, path, title=None):
    with plt.rc_context(STYLE):
        fig, (ax0, ax1) = plt.subplots(2, 1, sharex=True)
        ax0.plot(steps, kinetic, label="kinetic")
        ax0.plot(steps, potential, label="potential")
        ax0.plot(steps, total, label="total", color="k")
        ax0.set_ylabel("energy")
        ax0.legend(fontsize=8)
        total = np.asarray(total, dtype=float)
        e0 = total[0] if total.size and total[0] != 0 else 1.0
        ax1.plot(steps, (total - total[0]) / abs(e0), color="C3")
        ax1.set_xlabel("step")
        ax1.set_ylabel(r"$\Delta E / |E_0|$")
        if title:
            ax0.set_title(title)
        return _save(fig, path)


def plot_convergence(report, path):
    """delta_rms against iteration, one line per accepted point (log scale)."""
    by_point = {}
    for window, point, it, d, _ in report.rows:
        by_point.setdefault((window, point), []).append((it, d))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for (window, point), seq in sorted(by_point.items()):
            it, d = zip(*seq)
            d = np.maximum(np.asarray(d), 1e-300)
            ax.semilogy(it, d, marker="o", ms=3, lw=1, color=f"C{window % 10}", alpha=0.7)
        ax.set_xlabel("iteration k")
        ax.set_ylabel("RMS position change")
        ax.set_title("parareal convergence (colour = window)")
        return _save(fig, path)


def plot_gantt(event_log, path, max_units=40):
    """Unit occupancy chart of a simulated schedule; zero-cost tasks omitted."""
    units = []
    rows = {}
    for e in event_log:
        if e.unit == "-" or e.end == e.start:
            continue
        if e.unit not in rows:
            if len(units) >= max_units:
                continue
            rows[e.unit] = len(units)
            units.append(e.unit)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(7.0, 0.5 + 0.18 * max(len(units), 4)))
        for e in event_log:
            r = rows.get(e.unit)
            if r is None or e.end == e.start:
                continue
            color = "C0" if e.task.startswith("G") else "C1"
            ax.broken_barh([(e.start, e.end - e.start)], (r - 0.4, 0.8),
                           facecolors=color, edgecolor="k", linewidth=0.3)
        ax.set_yticks(range(len(units)))
        ax.set_yticklabels(units, fontsize=6)
        ax.invert_yaxis()
        ax.set_xlabel("time (units of R_G)")
        ax.set_title("schedule (blue = G, orange = F)")
        return _save(fig, path)


def plot_error_histogram(errors_by_field, path):
    """Per-particle relative potential error for each approximate field."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for name, err in errors_by_field.items():
            err = np.abs(np.asarray(err, dtype=float))
            err = err[err > 0]
            if err.size == 0:
                continue
            bins = np.logspace(np.log10(err.min()), np.log10(err.max()) + 1e-9, 30)
            ax.hist(err, bins=bins, histtype="step", label=name)
        ax.set_xscale("log")
        ax.set_xlabel("relative potential error per particle")
        ax.set_ylabel("count")
        ax.legend(fontsize=8)
        return _save(fig, path)


def plot_flop_terms(terms, path, title="flops per step"):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        names = list(terms)
        ax.bar(names, [terms[n] for n in names], color="C2")
        ax.set_yscale("log")
        ax.set_ylabel("flops")
        ax.set_title(title)
        ax.tick_params(axis="x", labelrotation=20)
        return _save(fig, path)
