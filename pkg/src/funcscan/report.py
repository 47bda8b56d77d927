"""Figure rendering for scan results and power studies.

Everything here writes image files next to the delimited outputs; no
interactive backend is touched.  The numeric pipeline never imports
this module, so headless use of the library stays matplotlib-free.
"""

from __future__ import annotations

from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .fdata import FunctionalDataset
from .geometry import SiteGrid
from .scan import ScanResult

METHOD_COLORS = {"pfss": "#1f77b4", "dffss": "#d62728", "npfss": "#2ca02c"}
_METRICS = ("power", "tpr", "fpr", "f_measure")


def render_scan_figure(
    ds: FunctionalDataset,
    grid: SiteGrid,
    results: Mapping[str, ScanResult],
    path,
    dpi: int = 150,
) -> None:
    """One row per method: site map with the detected clusters, and the
    curves with cluster members highlighted."""
    if tuple(ds.site_ids) != tuple(grid.ids):
        ds = ds.reindex(grid.ids)
    methods = list(results)
    fig, axes = plt.subplots(
        len(methods), 2, figsize=(11, 4 * len(methods)), squeeze=False
    )
    for row, name in enumerate(methods):
        res = results[name]
        mlc = set(res.mlc.member_indices)
        secondary = {
            i for sec in res.secondaries for i in sec.cluster.member_indices
        }

        ax = axes[row][0]
        colors = []
        for i in range(grid.n):
            if i in mlc:
                colors.append("#d62728")
            elif i in secondary:
                colors.append("#ff7f0e")
            else:
                colors.append("#bbbbbb")
        ax.scatter(grid.coords[:, 0], grid.coords[:, 1], c=colors, s=45,
                   edgecolors="black", linewidths=0.4)
        center = grid.coords[res.mlc.center_index]
        circle = plt.Circle(center, res.mlc.radius, fill=False,
                            color="#d62728", linestyle="--", linewidth=1.0)
        ax.add_patch(circle)
        ax.set_aspect("equal")
        ax.set_title(
            f"{name}: p = {res.p_value:.4g}"
            + (" *" if res.significant else "")
        )

        ax = axes[row][1]
        for r in range(ds.n):
            in_mlc = r in mlc
            ax.plot(ds.time_grid, ds.curves[r],
                    color="#d62728" if in_mlc else "#cccccc",
                    linewidth=1.1 if in_mlc else 0.6,
                    zorder=2 if in_mlc else 1)
        if res.argmax_time is not None:
            ax.axvline(res.argmax_time, color="#555555", linestyle=":",
                       linewidth=0.9)
        ax.set_xlabel("t")
        ax.set_title(f"statistic = {res.statistic:.4g}")
    fig.tight_layout()
    fig.savefig(path, dpi=dpi)
    plt.close(fig)


def render_study_figure(rows: Sequence[Mapping], path, dpi: int = 150) -> None:
    """Metric curves versus intensity, one column per (distribution, shift)
    cell present in the rows, one line per method."""
    if not rows:
        raise ValueError("no study rows to plot")
    cells = sorted({(r["distribution"], r["shift"]) for r in rows})
    fig, axes = plt.subplots(
        len(_METRICS), len(cells),
        figsize=(4.2 * len(cells), 2.9 * len(_METRICS)),
        squeeze=False,
    )
    for col, cell in enumerate(cells):
        sub = [r for r in rows if (r["distribution"], r["shift"]) == cell]
        methods = sorted({r["method"] for r in sub})
        for mrow, metric in enumerate(_METRICS):
            ax = axes[mrow][col]
            for m in methods:
                pts = sorted(
                    (float(r["alpha"]), float(r[metric]))
                    for r in sub
                    if r["method"] == m
                )
                xs = [p[0] for p in pts]
                ys = [p[1] for p in pts]
                ax.plot(xs, ys, marker="o", markersize=3.5,
                        color=METHOD_COLORS.get(m), label=m)
            if mrow == 0:
                ax.set_title(f"{cell[0]}, {cell[1]}")
                ax.legend(fontsize=8)
            if col == 0:
                ax.set_ylabel(metric)
            if mrow == len(_METRICS) - 1:
                ax.set_xlabel("alpha")
            if metric != "fpr":
                ax.set_ylim(-0.04, 1.04)
    fig.tight_layout()
    fig.savefig(path, dpi=dpi)
    plt.close(fig)
