"""Report figures. Everything renders off-screen to PNG files."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

FIG_WIDTH = 6.4
# PNG metadata without the matplotlib version keeps reruns byte-stable
_META = {"Software": None}


def _finish(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_META)
    plt.close(fig)
    return path


def _grouped_bars(ax, groups: Sequence[str], series: Mapping[str, Sequence[float]]):
    x = np.arange(len(groups))
    width = 0.8 / max(1, len(series))
    for i, (name, values) in enumerate(series.items()):
        ax.bar(x + (i - (len(series) - 1) / 2) * width, values, width, label=name)
    ax.set_xticks(x)
    ax.set_xticklabels(groups, rotation=20, ha="right")
    ax.set_ylim(0, 1.05)
    ax.grid(axis="y", alpha=0.3)
    ax.legend(frameon=False, fontsize="small")


def plot_ner_report(report, path: str | Path) -> Path:
    """Precision / recall / F1 bars per entity class plus the micro average."""
    rows = report.rows()
    names = [name for name, _ in rows]
    fig, ax = plt.subplots(figsize=(FIG_WIDTH, 3.6))
    _grouped_bars(ax, names, {
        "precision": [s.precision for _, s in rows],
        "recall": [s.recall for _, s in rows],
        "F1": [s.f1 for _, s in rows],
    })
    ax.set_ylabel("token-level score")
    ax.set_title("NER on held-out distant labels")
    return _finish(fig, path)


def plot_loss(losses: Sequence[float], path: str | Path,
              valid_mrr: Sequence[tuple[int, float]] = ()) -> Path:
    fig, ax = plt.subplots(figsize=(FIG_WIDTH, 3.4))
    epochs = np.arange(1, len(losses) + 1)
    ax.plot(epochs, losses, color="C0", lw=1.4)
    ax.set_xlabel("epoch")
    ax.set_ylabel("training loss (BCE)", color="C0")
    ax.set_yscale("log")
    if valid_mrr:
        ax2 = ax.twinx()
        ep, mrr = zip(*valid_mrr)
        ax2.plot(ep, mrr, "o-", color="C1", ms=3)
        ax2.set_ylabel("validation MRR", color="C1")
        ax2.set_ylim(0, 1)
    return _finish(fig, path)


def plot_ranking(reports: Mapping[str, object], path: str | Path) -> Path:
    """Hits@n and MRR side by side for several ranking reports."""
    metrics = ["Hits@1", "Hits@3", "Hits@10", "MRR"]
    series = {}
    for name, rep in reports.items():
        series[name] = [rep.hits_at.get(1, 0.0), rep.hits_at.get(3, 0.0), rep.hits_at.get(10, 0.0), rep.mrr]
    fig, ax = plt.subplots(figsize=(FIG_WIDTH, 3.6))
    _grouped_bars(ax, metrics, series)
    ax.set_title("tail prediction on the test split")
    return _finish(fig, path)


def plot_rank_histogram(ranks: Mapping[str, np.ndarray], path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(FIG_WIDTH, 3.4))
    top = max(float(np.max(r)) for r in ranks.values() if len(r))
    bins = np.unique(np.geomspace(1, max(top, 2.0), 25).round())
    for name, r in ranks.items():
        ax.hist(r, bins=bins, histtype="step", lw=1.4, label=name)
    ax.set_xscale("log")
    ax.set_xlabel("rank of the true tail")
    ax.set_ylabel("test triples")
    ax.legend(frameon=False, fontsize="small")
    return _finish(fig, path)
