"""SVG renders of diagnostic and evaluation tables.

Thin layer over the CSV data: every figure is a deterministic function of
the arrays passed in (fixed hash salt, no embedded dates), so repeated runs
produce byte-identical SVG files.
"""

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "scrambleml"

import matplotlib.pyplot as plt
import numpy as np

_SAVE_KW = {"format": "svg", "metadata": {"Date": None}}


def line_figure(path, x, series: dict, xlabel: str, ylabel: str,
                title: str = "", logy: bool = False, hlines: dict | None = None):
    """One line per entry of ``series`` (name -> vector over x)."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for name, values in series.items():
        ax.plot(x, values, label=name, linewidth=1.4)
    for name, level in (hlines or {}).items():
        ax.axhline(level, linestyle="--", color="gray", linewidth=1.0)
        ax.annotate(name, xy=(x[0], level), fontsize=8, color="gray",
                    xytext=(2, 3), textcoords="offset points")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if len(series) > 1 or hlines:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def heatmap_figure(path, field: np.ndarray, xlabel: str, ylabel: str,
                   title: str = "", vmax: float | None = None):
    """Depth-by-site heatmap (rows = depth, drawn bottom-up)."""
    fig, ax = plt.subplots(figsize=(5.0, 4.2))
    im = ax.imshow(field, aspect="auto", origin="lower", cmap="viridis",
                   vmin=0.0, vmax=vmax,
                   extent=(0.5, field.shape[1] + 0.5, -0.5, field.shape[0] - 0.5))
    fig.colorbar(im, ax=ax, shrink=0.9)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
