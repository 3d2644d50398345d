"""SVG renderings of the three artifact kinds: curves, heatmaps, histograms.

Output must be reproducible byte for byte, so the figures are saved without
timestamps and with a pinned id-hash salt.  Everything renders through the
Agg backend; no display is ever needed.
"""

from __future__ import annotations

import numpy as np

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "sfopt"

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .diagnostics import N_BINS, UpdateHistogram  # noqa: E402
from .exceptions import NonRectangularGrid  # noqa: E402

__all__ = ["save_svg", "plot_curves", "plot_heatmap", "plot_histogram"]


def save_svg(fig, path):
    """Write the figure without volatile metadata and release it."""
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_curves(series: dict, path, ylabel: str = "value", logy: bool = True,
                title: str = ""):
    """Line plot of named per-step series, log-scaled by default."""
    # divergent runs produce values near the float ceiling; the log-scale
    # inverse transform then overflows harmlessly while drawing
    with np.errstate(over="ignore"):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        for label, values in series.items():
            values = np.asarray(values, dtype=np.float64)
            ax.plot(np.arange(1, values.shape[0] + 1), values, label=label)
        if logy:
            ax.set_yscale("log")
        ax.set_xlabel("step")
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.legend()
        fig.tight_layout()
        save_svg(fig, path)


def plot_heatmap(alphas, lambdas, matrix, path, metric: str = "final_loss",
                 best_ij: tuple | None = None, title: str = ""):
    """Metric landscape over a full (alpha, lambda) product grid.

    The best cell is circled.  A matrix whose shape does not match the axes
    is rejected: a heatmap of a partial grid would silently mislead.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.shape != (len(alphas), len(lambdas)):
        raise NonRectangularGrid(
            f"matrix shape {matrix.shape} != ({len(alphas)}, {len(lambdas)})")
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    finite = matrix[np.isfinite(matrix)]
    shown = np.where(np.isfinite(matrix), matrix, np.nan)
    im = ax.imshow(shown, origin="lower", aspect="auto", cmap="viridis")
    if best_ij is None and finite.size:
        best_ij = np.unravel_index(int(np.nanargmin(shown)), matrix.shape)
    if best_ij is not None:
        ax.scatter([best_ij[1]], [best_ij[0]], s=220, facecolors="none",
                   edgecolors="red", linewidths=2.0)
    ax.set_xticks(range(len(lambdas)), [f"{l:g}" for l in lambdas])
    ax.set_yticks(range(len(alphas)), [f"{a:g}" for a in alphas])
    ax.set_xlabel("weight decay")
    ax.set_ylabel("step size")
    fig.colorbar(im, ax=ax, label=metric)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    save_svg(fig, path)


def plot_histogram(hist: UpdateHistogram, path, title: str = ""):
    """Bar chart of the 29 fixed bins on a log2-labelled axis."""
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    ax.bar(range(N_BINS), hist.counts, width=0.9, color="steelblue")
    labels = [r"$\leq 2^{-27}$"]
    labels += [f"$2^{{{k}}}$" for k in range(-26, 0, 5)]
    ax.set_xticks([0] + list(range(2, N_BINS - 1, 5)))
    ax.set_xticklabels(labels)
    ax.set_xlabel("update magnitude / step size")
    ax.set_ylabel("count")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    save_svg(fig, path)
