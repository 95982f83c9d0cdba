"""Figure rendering for report paths.

Every report-producing command renders a PNG next to its delimited output.
matplotlib is imported lazily and forced onto the Agg backend so the
package works headless; nothing here ever opens a window.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "save_measure_curve_figure",
    "save_path_figure",
    "save_report_figure",
    "save_trajectory_figure",
]


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    return plt


def save_path_figure(path, dest: str) -> str:
    """All channels of a sampled path against time."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    for g in range(path.channels):
        ax.plot(path.times, path.values[:, g], lw=0.9, label=f"channel {g}")
    ax.set_xlabel("t")
    ax.set_ylabel("B(t)")
    ax.set_title(f"fBm path, H = {path.hurst:g}, N = {path.grid.steps}")
    if path.channels <= 6:
        ax.legend(loc="best", fontsize="small")
    fig.tight_layout()
    fig.savefig(dest, dpi=150)
    plt.close(fig)
    return dest


def save_trajectory_figure(trajectory, dest: str) -> str:
    """Flow trajectory: phase portrait in the plane, components elsewhere."""
    plt = _pyplot()
    states = trajectory.states
    if states.ndim == 3:  # batched start points: show the first few
        states = states[:, : min(states.shape[1], 8), :]
    fig, ax = plt.subplots(figsize=(6.0, 5.0))
    dim = states.shape[-1]
    if dim == 2:
        flat = states.reshape(states.shape[0], -1, 2)
        for p in range(flat.shape[1]):
            ax.plot(flat[:, p, 0], flat[:, p, 1], lw=0.9)
            ax.plot(flat[0, p, 0], flat[0, p, 1], "o", ms=4, color="black")
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
        ax.set_aspect("equal", adjustable="datalim")
        ax.set_title("flow trajectory")
    else:
        flat = states.reshape(states.shape[0], -1)
        for column in range(min(flat.shape[1], 12)):
            ax.plot(trajectory.times, flat[:, column], lw=0.9)
        ax.set_xlabel("t")
        ax.set_ylabel("state components")
        ax.set_title("flow trajectory components")
    fig.tight_layout()
    fig.savefig(dest, dpi=150)
    plt.close(fig)
    return dest


def save_measure_curve_figure(curve, bound_log2: float, dest: str) -> str:
    """Pushforward measure over time against its certified bound (log2 axis)."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    with np.errstate(divide="ignore"):
        ax.plot(curve.times, np.log2(curve.values), lw=1.1, label="measure estimate")
    if math.isfinite(bound_log2):
        ax.axhline(bound_log2, color="crimson", ls="--", lw=1.0, label="certified bound")
    ax.set_xlabel("t")
    ax.set_ylabel("log2 measure")
    ax.set_title("pushforward measure growth")
    ax.legend(loc="best", fontsize="small")
    fig.tight_layout()
    fig.savefig(dest, dpi=150)
    plt.close(fig)
    return dest


def save_report_figure(result, dest: str) -> str:
    """Two panels: per-replication slack (log2) and the C_T histogram."""
    plt = _pyplot()
    rows = [row for row in result.rows if row.ok]
    fig, (left, right) = plt.subplots(1, 2, figsize=(10.0, 4.0))

    if rows:
        reps = np.array([row.replication for row in rows])
        t_slack = np.array([row.tangent_slack_log2 for row in rows])
        left.plot(reps, t_slack, ".", ms=5, label="tangent")
        m_slack = np.array([row.measure_slack_log2 for row in rows])
        if np.any(np.isfinite(m_slack)):
            left.plot(reps, m_slack, "x", ms=5, label="measure")
        left.axhline(0.0, color="crimson", ls="--", lw=1.0)
        left.legend(loc="best", fontsize="small")
    left.set_xlabel("replication")
    left.set_ylabel("log2 slack (bound - empirical)")
    left.set_title("certified slack per replication")

    if rows:
        c_t = np.array([row.c_t for row in rows])
        finite = c_t[np.isfinite(c_t)]
        if len(finite):
            right.hist(finite, bins=min(30, max(5, len(finite) // 4)), color="steelblue")
    right.set_xlabel("C_T")
    right.set_ylabel("count")
    right.set_title("growth-rate constant across paths")

    fig.tight_layout()
    fig.savefig(dest, dpi=150)
    plt.close(fig)
    return dest
