"""SVG heatmaps of sweep results."""

from __future__ import annotations

import math
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.colors import Normalize  # noqa: E402
from matplotlib.patches import Rectangle  # noqa: E402

CMAP = "viridis"  # dark end is the smallest distance


def _edges(values: Sequence[float]) -> np.ndarray:
    """Cell boundaries on a log axis: geometric midpoints, padded at the ends."""
    logs = np.log10(np.asarray(values, dtype=float))
    if logs.size == 1:
        return 10.0 ** np.array([logs[0] - 0.5, logs[0] + 0.5])
    mids = (logs[1:] + logs[:-1]) / 2
    first = logs[0] - (mids[0] - logs[0])
    last = logs[-1] + (logs[-1] - mids[-1])
    return 10.0 ** np.concatenate([[first], mids, [last]])


def render_heatmap(learning_rates, inverse_temperatures, table, path, title: str = "",
                   label: str = "mean recall distance") -> int:
    """Write an SVG heatmap; ``table[t, l]`` is the shade of cell (lr ``l``, 1/T ``t``).

    Returns the number of heat cells drawn. Output is byte-stable for equal
    inputs.
    """
    table = np.asarray(table, dtype=float)
    if table.shape != (len(inverse_temperatures), len(learning_rates)):
        raise ValueError("table shape does not match the axes")
    finite = table[np.isfinite(table)]
    top = float(finite.max()) if finite.size else 1.0
    norm = Normalize(vmin=0.0, vmax=top if top > 0 else 1.0)
    cmap = plt.get_cmap(CMAP)
    xe = _edges(learning_rates)
    ye = _edges(inverse_temperatures)

    with plt.rc_context({"svg.hashsalt": "dam-lab", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 5))
        count = 0
        for t in range(table.shape[0]):
            for l in range(table.shape[1]):
                v = table[t, l]
                face = cmap(norm(v)) if math.isfinite(v) else "lightgrey"
                rect = Rectangle((xe[l], ye[t]), xe[l + 1] - xe[l], ye[t + 1] - ye[t],
                                 facecolor=face, edgecolor="white", linewidth=0.5,
                                 hatch=None if math.isfinite(v) else "xx")
                rect.set_gid(f"heat-cell-{count}")
                ax.add_patch(rect)
                count += 1
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlim(xe[0], xe[-1])
        ax.set_ylim(ye[0], ye[-1])
        ax.set_xlabel("initial learning rate")
        ax.set_ylabel("1/T")
        if title:
            ax.set_title(title)
        sm = plt.cm.ScalarMappable(norm=norm, cmap=cmap)
        cbar = fig.colorbar(sm, ax=ax)
        cbar.set_label(label)
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return count
