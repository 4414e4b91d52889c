"""Figure rendering for trajectories, root sets and tuning traces.

Everything draws on the non-interactive Agg backend and writes straight to
files; CSV output stays the canonical record.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

RC = {
    "figure.figsize": (6.4, 3.6),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "lines.linewidth": 1.2,
    "font.size": 9,
    "svg.hashsalt": "dfctrack",
}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)
    return path


def line_chart(times, series, labels, path, ylabel="", title="", xlabel="t [s]") -> Path:
    """One line per column of ``series``."""
    series = np.atleast_2d(np.asarray(series).T).T
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        for col, label in zip(series.T, labels):
            ax.plot(times, col, label=label)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        if len(labels) > 1:
            ax.legend(frameon=False)
        return _save(fig, path)


def trajectory_plots(traj, directory, stem="trajectory", fmt="svg") -> list[Path]:
    """Output, control and tracking error against time, one file each."""
    directory = Path(directory)
    out = []
    for name, data, ylabel in (("y", traj.y, "output"), ("u", traj.u, "control"),
                               ("e", traj.e, "tracking error")):
        labels = [f"{name}{i + 1}" for i in range(data.shape[1])]
        out.append(line_chart(traj.times, data, labels, directory / f"{stem}_{name}.{fmt}", ylabel))
    return out


def compare_outputs(trajs: dict, path, quantity="y", ylabel="output", title="") -> Path:
    """Overlay the same quantity from several named runs."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        for label, traj in trajs.items():
            data = getattr(traj, quantity)
            for i in range(data.shape[1]):
                suffix = f" {quantity}{i + 1}" if data.shape[1] > 1 else ""
                ax.plot(traj.times, data[:, i], label=label + suffix)
        ax.set_xlabel("t [s]")
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.legend(frameon=False)
        return _save(fig, path)


def root_plot(result, path, marks=(), title="") -> Path:
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        ax.axvline(0.0, color="k", lw=0.8)
        ax.plot(result.values.real, result.values.imag, "x", label="computed")
        if len(marks):
            marks = np.asarray(marks, dtype=complex)
            ax.plot(marks.real, marks.imag, "o", mfc="none", label="reference")
            ax.legend(frameon=False)
        ax.set_xlabel("Re s")
        ax.set_ylabel("Im s")
        if title:
            ax.set_title(title)
        return _save(fig, path)


def trace_plot(trace, path, threshold=None) -> Path:
    """Parameters and best abscissa against annealing iteration."""
    it = np.arange(1, len(trace.costs) + 1)
    with plt.rc_context(RC):
        fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(6.4, 5.0))
        params = np.array(trace.candidates)
        for col, name in zip(params.T, trace.parameter_names):
            ax1.plot(it, col, label=name)
        ax1.set_ylabel("parameter")
        ax1.legend(frameon=False, ncol=3)
        costs = np.array(trace.costs, dtype=float)
        ax2.plot(it, np.where(np.isfinite(costs), costs, np.nan), ".", ms=2, alpha=0.4, label="candidate")
        ax2.plot(it, trace.best_costs, label="best")
        if threshold is not None:
            ax2.axhline(threshold, color="k", ls="--", lw=0.8)
        ax2.set_xlabel("iteration")
        ax2.set_ylabel("rightmost real part")
        ax2.legend(frameon=False)
        return _save(fig, path)
