"""Matplotlib settings shared by every chart, tuned for deterministic SVG output."""

from __future__ import annotations

from contextlib import contextmanager
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

RC = {
    "svg.hashsalt": "blindredact",  # fixed element ids -> byte-identical files
    "svg.fonttype": "none",         # keep text as text
    "font.family": "DejaVu Sans",
    "font.size": 8,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "legend.fontsize": 7,
    "xtick.labelsize": 5,
    "ytick.labelsize": 7,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "axes.grid.axis": "y",
    "grid.linewidth": 0.4,
    "grid.alpha": 0.5,
}

#: minus / plus / mikro bar colours
TRIPLE_COLORS = ("#c0504d", "#4f81bd", "#9bbb59")


@contextmanager
def style():
    with plt.rc_context(RC):
        yield


def new_figure(width: float = 8.0, height: float = 4.0):
    return plt.subplots(figsize=(width, height))


def save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", bbox_inches="tight", metadata={"Date": None})
    plt.close(fig)
    return path
