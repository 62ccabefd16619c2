"""Matplotlib renderings of experiment results.

Figures are written next to the CSV output; the CSV stays the
authoritative record.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .harness import CellResult, ExperimentResult  # noqa: E402

LABELS = {"naive": "naive-MC", "dmc": "D-MC", "rdmc": "RD-MC"}

plt.rcParams.update({
    "figure.dpi": 120,
    "savefig.dpi": 150,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
})


def cell_label(c: CellResult, vary: set[str]) -> str:
    parts = [LABELS.get(c.algorithm, c.algorithm)]
    if "sigma2" in vary:
        parts.append(f"$\\sigma^2$={c.sigma2:g}")
    if "window" in vary or (c.algorithm == "rdmc" and "algorithm" in vary):
        parts.append(f"C={c.window}")
    if "topology" in vary:
        parts.append(c.topology)
    return ", ".join(parts)


def plot_mse(result: ExperimentResult, path: str | Path, title: str | None = None) -> Path:
    """Network-wide MSE against iteration, one line per cell, log scale."""
    cells = sorted(result.cells, key=lambda c: c.key)
    vary = {k for k in ("algorithm", "sigma2", "window", "topology")
            if len({getattr(c, k) for c in cells}) > 1}
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for c in cells:
        k = np.arange(len(c.curve))
        v = np.where(np.isfinite(c.curve.values), c.curve.values, np.nan)
        label = cell_label(c, vary)
        if c.curve.diverged:
            label += " (diverged)"
        ax.semilogy(k, v, lw=1.2, label=label)
    ax.set_xlabel("iteration $k$")
    ax.set_ylabel("network-wide MSE")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_estimates(result: ExperimentResult, path: str | Path) -> Path:
    """Per-agent estimates of realization 0, one panel per cell, with the true maximum."""
    cells = [c for c in sorted(result.cells, key=lambda c: c.key) if c.sample_x is not None]
    fig, axes = plt.subplots(1, max(1, len(cells)), figsize=(4.0 * max(1, len(cells)), 3.4),
                             squeeze=False)
    for ax, c in zip(axes[0], cells):
        ax.plot(c.sample_x, lw=0.6, alpha=0.8)
        ax.axhline(c.a_star, color="k", ls="--", lw=1.0, label="true max")
        ax.set_title(LABELS.get(c.algorithm, c.algorithm))
        ax.set_xlabel("iteration $k$")
    axes[0][0].set_ylabel("estimate $x_i(k)$")
    axes[0][0].legend(fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path)
    plt.close(fig)
    return path
