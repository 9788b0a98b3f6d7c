"""Render ROC curves and cost surfaces to PNG files next to the CSV output."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _split_by_method(points):
    by_method: dict = {}
    for pt in points:
        by_method.setdefault(pt.method, []).append(pt)
    return by_method


def plot_roc(points, path: str) -> None:
    """Detection vs false alarm per threshold, one trace per method.

    Points missing either coordinate (single-sided estimates) are skipped;
    the false-alarm axis goes logarithmic when every plotted value allows it.
    """
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    plotted = []
    markers = {"mc": "o", "analytic": "s"}
    for method, pts in sorted(_split_by_method(points).items()):
        pts = [p for p in pts if p.p_d is not None and p.p_fa is not None]
        if not pts:
            continue
        pts.sort(key=lambda p: p.gamma)
        fa = np.array([p.p_fa for p in pts])
        pd = np.array([p.p_d for p in pts])
        if method == "mc" and all(p.p_d_lo is not None for p in pts):
            yerr = np.vstack(
                [
                    pd - np.array([p.p_d_lo for p in pts]),
                    np.array([p.p_d_hi for p in pts]) - pd,
                ]
            )
            ax.errorbar(
                fa, pd, yerr=yerr, marker=markers.get(method, "o"),
                linestyle="-", capsize=2, label=method,
            )
        else:
            ax.plot(
                fa, pd, marker=markers.get(method, "o"), linestyle="--",
                label=method,
            )
        plotted.extend(fa.tolist())
    if plotted and min(plotted) > 0:
        ax.set_xscale("log")
    ax.set_xlabel("false alarm probability per listen interval")
    ax.set_ylabel("detection probability per listen interval")
    ax.set_title("Detector operating characteristic")
    ax.grid(True, which="both", alpha=0.3)
    if plotted:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_cost_surface(surface, path: str) -> None:
    """Heat map of the best cost per (M, K) cell over the gamma grid."""
    ms = sorted({pt.M for pt in surface})
    ks = sorted({pt.K for pt in surface})
    grid = np.full((len(ks), len(ms)), np.inf)
    for pt in surface:
        r = ks.index(pt.K)
        c = ms.index(pt.M)
        grid[r, c] = min(grid[r, c], pt.cost)

    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    im = ax.imshow(grid, origin="lower", aspect="auto", cmap="viridis")
    ax.set_xticks(range(len(ms)), [str(m) for m in ms])
    ax.set_yticks(range(len(ks)), [str(k) for k in ks])
    ax.set_xlabel("preamble bits M")
    ax.set_ylabel("spreading chips K")
    ax.set_title("Cost surface (best threshold per cell)")
    fig.colorbar(im, ax=ax, label="cost")
    best = np.unravel_index(np.argmin(grid), grid.shape)
    ax.plot(best[1], best[0], marker="*", markersize=14, color="red")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
