"""Matplotlib rendering of run and sweep reports to image files."""
from __future__ import annotations

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .harness import SweepResult
from .problem import Trajectory


def _step_series(trajectory: Trajectory):
    controls = np.vstack([trajectory.controls, trajectory.controls[-1]])
    return trajectory.times, controls


def plot_controls(path: Path, online: Trajectory, reference: Trajectory) -> None:
    """Held controls over time, learned loop vs known-model baseline."""
    m = online.controls.shape[1]
    fig, axes = plt.subplots(1, m, figsize=(4.2 * m, 3.2), squeeze=False)
    t_on, u_on = _step_series(online)
    t_ref, u_ref = _step_series(reference)
    for j, ax in enumerate(axes[0]):
        ax.step(t_ref, u_ref[:, j], where="post", color="tab:blue", label="reference")
        ax.step(t_on, u_on[:, j], where="post", color="tab:red", label="online")
        ax.set_xlabel("t")
        ax.set_ylabel(f"u_{j+1}")
        ax.grid(True, alpha=0.3)
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_trajectory(path: Path, online: Trajectory, reference: Trajectory) -> None:
    """Phase-plane pairs for even state dimension, time series otherwise."""
    n = online.states.shape[1]
    if n % 2 == 0:
        pairs = [(2 * i, 2 * i + 1) for i in range(n // 2)]
        fig, axes = plt.subplots(1, len(pairs), figsize=(4.2 * len(pairs), 3.6),
                                 squeeze=False)
        for (i, j), ax in zip(pairs, axes[0]):
            ax.plot(reference.states[:, i], reference.states[:, j],
                    color="tab:blue", label="reference")
            ax.plot(online.states[:, i], online.states[:, j],
                    color="tab:red", label="online")
            ax.plot(online.states[0, i], online.states[0, j], "o", color="tab:red")
            ax.set_xlabel(f"x_{i+1}")
            ax.set_ylabel(f"x_{j+1}")
            ax.grid(True, alpha=0.3)
            ax.legend()
    else:
        fig, ax = plt.subplots(figsize=(6.0, 3.6))
        for i in range(n):
            ax.plot(online.times, online.states[:, i], label=f"x_{i+1} online")
            ax.plot(reference.times, reference.states[:, i], "--",
                    label=f"x_{i+1} reference")
        ax.set_xlabel("t")
        ax.grid(True, alpha=0.3)
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_sweep(path: Path, sweep: SweepResult) -> None:
    """Log-log estimation error and cost error against the grid step."""
    fig, (ax_a, ax_c) = plt.subplots(1, 2, figsize=(9.0, 3.6))
    orders = sorted({cell.scheme_order for cell in sweep.cells})
    for p in orders:
        cells = [c for c in sweep.cells_for_order(p) if c.status == "ok"]
        dts = [c.dt for c in cells]
        ax_a.loglog(dts, [c.a_err for c in cells], "o-", label=f"p={p}")
        cost_cells = [(c.dt, c.cost_error) for c in cells if np.isfinite(c.cost_error)
                      and c.cost_error > 0]
        if cost_cells:
            ax_c.loglog(*zip(*cost_cells), "s-", label=f"p={p}")
    ax_a.set_xlabel("dt")
    ax_a.set_ylabel("state-matrix error (Frobenius)")
    ax_c.set_xlabel("dt")
    ax_c.set_ylabel("cost error vs baseline")
    for ax in (ax_a, ax_c):
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
