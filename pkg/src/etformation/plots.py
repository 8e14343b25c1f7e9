"""Plot-data emission and figure rendering for finished runs.

Writes plot-ready CSV files (per-agent trajectory polylines and the
trigger-time raster) plus rendered PNG figures next to them. Rendering uses
the Agg backend so it works headless.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

import numpy as np  # noqa: E402

from .engine import Trace  # noqa: E402
from .formation import FormationSpec  # noqa: E402
from .traceio import _fmt, output_precision  # noqa: E402
from .triggering import TriggerRecord  # noqa: E402


def emit_plot_data(out_dir, trace: Trace, triggers: list[TriggerRecord]) -> list[Path]:
    """Write one polyline CSV per agent plus the trigger raster CSV."""
    out_dir = Path(out_dir)
    digits = output_precision()
    n, p = trace.x.shape[1], trace.x.shape[2]
    written = []
    for i in range(n):
        path = out_dir / f"plot_trajectory_agent_{i + 1}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t"] + [f"x_{k + 1}" for k in range(p)])
            for s in range(trace.times.size):
                writer.writerow([_fmt(trace.times[s], digits)]
                                + [_fmt(v, digits) for v in trace.x[s, i]])
        written.append(path)
    raster = out_dir / "plot_trigger_raster.csv"
    with open(raster, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["agent", "t"])
        for rec in sorted(triggers, key=lambda r: (r.time, r.agent)):
            writer.writerow([str(rec.agent + 1), _fmt(rec.time, digits)])
    written.append(raster)
    return written


def render_figures(out_dir, trace: Trace, triggers: list[TriggerRecord],
                   spec: FormationSpec) -> list[Path]:
    """Render the trajectory plot and the per-agent trigger raster to PNG files."""
    out_dir = Path(out_dir)
    written = []

    if spec.p == 2:
        fig, ax = plt.subplots(figsize=(6, 6))
        n = trace.x.shape[1]
        for i in range(n):
            line, = ax.plot(trace.x[:, i, 0], trace.x[:, i, 1],
                            label=f"agent {i + 1}")
            ax.plot(trace.x[0, i, 0], trace.x[0, i, 1], "o",
                    color=line.get_color(), fillstyle="none", markersize=9)
        final = trace.x[-1]
        for i, j in spec.graph.edges:
            ax.plot([final[i, 0], final[j, 0]], [final[i, 1], final[j, 1]],
                    "k-", linewidth=1.2, alpha=0.7)
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        ax.set_title("Trajectories (circles: start, solid edges: final formation)")
        ax.legend(loc="best")
        ax.set_aspect("equal")
        ax.grid(True, alpha=0.3)
        path = out_dir / "fig_trajectories.png"
        fig.savefig(path, dpi=150, bbox_inches="tight")
        plt.close(fig)
        written.append(path)

    fig, ax = plt.subplots(figsize=(8, 3))
    n = trace.x.shape[1]
    per_agent = [[rec.time for rec in triggers if rec.agent == i] for i in range(n)]
    ax.eventplot(per_agent, lineoffsets=np.arange(1, n + 1), linelengths=0.8,
                 colors="tab:blue")
    ax.set_yticks(np.arange(1, n + 1))
    ax.set_ylabel("agent")
    ax.set_xlabel("t")
    ax.set_title("Triggering times")
    ax.grid(True, axis="x", alpha=0.3)
    path = out_dir / "fig_triggers.png"
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    written.append(path)
    return written
