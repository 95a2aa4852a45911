"""CSV reports and the figures rendered next to them."""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams.update(
    {
        "font.size": 10,
        "axes.labelsize": 10,
        "legend.fontsize": 8,
        "xtick.labelsize": 8,
        "ytick.labelsize": 8,
        "figure.figsize": (4.5, 3.0),
        "savefig.dpi": 150,
        "svg.hashsalt": "mvcrec",
    }
)


def write_csv(rows: list[dict], path) -> Path:
    path = Path(path)
    if not rows:
        raise ValueError("nothing to write")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    return path


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    # fixed metadata so reruns produce identical files
    fig.savefig(path, metadata={"Software": None} if path.suffix == ".png" else {"Date": None})
    plt.close(fig)
    return path


def plot_sweep(csv_path, out_path=None, metric: str = "NDCG@20") -> Path:
    """Mean metric per grid value (error bars over seeds)."""
    rows = read_csv(csv_path)
    param = rows[0]["param"]
    by_value = defaultdict(list)
    for r in rows:
        by_value[float(r["value"])].append(float(r[metric]))
    xs = sorted(by_value)
    mean = np.array([np.mean(by_value[x]) for x in xs])
    std = np.array([np.std(by_value[x]) for x in xs])

    fig, ax = plt.subplots()
    ax.errorbar(range(len(xs)), mean, yerr=std, marker="o", capsize=3, color="tab:blue")
    ax.set_xticks(range(len(xs)))
    ax.set_xticklabels([f"{x:g}" for x in xs])
    ax.set_xlabel(param)
    ax.set_ylabel(metric)
    ax.grid(alpha=0.3)
    return _save(fig, out_path or Path(csv_path).with_suffix(".png"))


def plot_ablation(csv_path, out_path=None) -> Path:
    """Grouped bars of HR@20 and NDCG@20 per variant, averaged over seeds."""
    rows = read_csv(csv_path)
    variants = list(dict.fromkeys(r["variant"] for r in rows))
    metrics = ("HR@20", "NDCG@20")
    means = {m: [np.mean([float(r[m]) for r in rows if r["variant"] == v]) for v in variants] for m in metrics}

    fig, ax = plt.subplots()
    x = np.arange(len(variants))
    width = 0.38
    for i, m in enumerate(metrics):
        ax.bar(x + (i - 0.5) * width, means[m], width, label=m)
    ax.set_xticks(x)
    ax.set_xticklabels(variants)
    ax.set_ylabel("score")
    ax.legend(frameon=False)
    ax.grid(axis="y", alpha=0.3)
    return _save(fig, out_path or Path(csv_path).with_suffix(".png"))
