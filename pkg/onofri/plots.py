from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .duality import EpsilonSweep  # noqa: E402
from .pde import TrajectorySummary  # noqa: E402

WIDTH = 6.0
STYLE = {
    "svg.hashsalt": "onofri",
    "svg.fonttype": "none",
    "font.size": 10,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def _figure(width: float = WIDTH):
    golden_ratio = (math.sqrt(5) - 1.0) / 2.0
    return plt.subplots(figsize=(width, width * golden_ratio))


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def plot_epsilon_sweep(sweep: EpsilonSweep, path: Path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = _figure()
        ax.plot(sweep.epsilons, sweep.values, color="0.2", linewidth=1.2)
        if sweep.eps_max > 0:
            ax.axvline(sweep.eps_max, color="tab:red", linestyle="--", linewidth=0.8)
            ax.plot([sweep.eps_max], [sweep.peak], "o", color="tab:red")
            ax.annotate(
                f"eps_max = {sweep.eps_max:.6g}",
                (sweep.eps_max, sweep.peak),
                textcoords="offset points",
                xytext=(8, -14),
            )
        ax.axhline(0.0, color="0.7", linewidth=0.6)
        ax.set_xlabel("eps")
        ax.set_ylabel("G(eps)")
        ax.set_title(f"{sweep.label}, n={sweep.n}, R={sweep.R:g}")
        return _save(fig, path)


def plot_trajectory(summary: TrajectorySummary, path: Path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = _figure()
        floor = 1e-18
        ax.semilogy(summary.times, [max(v, floor) for v in summary.l1_mu], label="to mu_2")
        if not all(math.isnan(v) for v in summary.l1_equilibrium):
            ax.semilogy(
                summary.times,
                [max(v, floor) for v in summary.l1_equilibrium],
                linestyle="--",
                label="to discrete equilibrium",
            )
        ax.set_xlabel("t")
        ax.set_ylabel("L1 distance")
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_deficits(values: Sequence[float], path: Path, label: str = "deficit") -> Path:
    with plt.rc_context(STYLE):
        fig, ax = _figure()
        ax.hist(list(values), bins=min(30, max(5, len(values) // 3)), color="0.5", edgecolor="0.2")
        ax.axvline(0.0, color="tab:red", linewidth=0.8)
        ax.set_xlabel(label)
        ax.set_ylabel("count")
        return _save(fig, path)
