"""Figures rendered next to the CSV outputs of the command-line tools."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def learning_curve_figure(episodes: Sequence[int], mean: Sequence[float], lo: Sequence[float],
                          hi: Sequence[float], path: str | Path, title: str = "Mean episode reward") -> Path:
    fig, ax = plt.subplots(figsize=(6.0, 3.6))
    ax.fill_between(episodes, lo, hi, alpha=0.25, linewidth=0, label="95% CI")
    ax.plot(episodes, mean, linewidth=1.2, label="mean over runs")
    ax.set_xlabel("episode")
    ax.set_ylabel("mean episode reward")
    ax.set_title(title)
    ax.legend(loc="lower right")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def engagement_figure(rates: Mapping[str, float], path: str | Path) -> Path:
    """Bar chart of per-robot capture engagement rates."""
    fig, ax = plt.subplots(figsize=(4.8, 3.2))
    names = list(rates)
    ax.bar(names, [100.0 * rates[k] for k in names])
    ax.set_ylim(0.0, 100.0)
    ax.set_ylabel("capture engagement (%)")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path
