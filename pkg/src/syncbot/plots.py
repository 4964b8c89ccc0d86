"""Static chart emission for sessions and reports (PNG, no display)."""

from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .analysis import Report
from .session import RecorderRecord


def plot_bend_angle(records: Sequence[RecorderRecord], path) -> None:
    """Bend magnitude over time, with stage boundaries marked."""
    fig, ax = plt.subplots(figsize=(9, 3.2))
    ts = [r.t for r in records]
    ax.plot(ts, [r.phi for r in records], lw=0.8)
    last_stage = None
    for r in records:
        if r.stage != last_stage and last_stage is not None:
            ax.axvline(r.t, color="gray", lw=0.6, ls="--")
        last_stage = r.stage
    ax.set_xlabel("time [s]")
    ax.set_ylabel("bend angle [deg]")
    ax.set_ylim(bottom=0)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_cable_velocities(records: Sequence[RecorderRecord], path) -> None:
    """Per-cable velocities derived from successive recorder rows."""
    fig, ax = plt.subplots(figsize=(9, 3.2))
    ts = [r.t for r in records[1:]]
    for name in ("dl1", "dl2", "dl3"):
        vals = [getattr(r, name) for r in records]
        vel = [
            (b - a) / (records[i + 1].t - records[i].t) / 1000.0
            for i, (a, b) in enumerate(zip(vals, vals[1:]))
        ]
        ax.plot(ts, vel, lw=0.7, label=name)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("cable velocity [m/s]")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_report(report: Report, path) -> None:
    """Grouped bars of per-item medians by condition."""
    fig, ax = plt.subplots(figsize=(10, 3.6))
    labels = [row.label for row in report.rows]
    width = 0.8 / len(report.conditions)
    for ci, condition in enumerate(report.conditions):
        xs = [i + ci * width for i in range(len(labels))]
        ax.bar(xs, [row.medians[condition] for row in report.rows],
               width=width, label=condition)
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(labels))])
    ax.set_xticklabels(labels, fontsize=8)
    ax.set_ylabel("median response")
    ax.set_ylim(0, 7.5)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
