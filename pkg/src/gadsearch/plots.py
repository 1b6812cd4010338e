"""Figure rendering for bench reports: one PNG per delimited output."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

# strip the Software tag so identical runs produce identical bytes
_PNG_META = {"metadata": {"Software": None}}


def _save(fig, path: Path) -> None:
    fig.savefig(path, dpi=120, **_PNG_META)
    plt.close(fig)


def sdr_curve_figure(curves: dict[str, tuple[list[float], list[float]]], path: Path) -> None:
    """Mean SDR per query step with a shaded standard-error band per search."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, (mean, stderr) in curves.items():
        steps = np.arange(1, len(mean) + 1)
        mean = np.asarray(mean)
        stderr = np.asarray(stderr)
        ax.plot(steps, mean, label=name)
        ax.fill_between(steps, mean - stderr, mean + stderr, alpha=0.2)
    ax.axhline(1.0, color="gray", linestyle="--", linewidth=1)
    ax.set_xlabel("queries")
    ax.set_ylabel("mean SDR")
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def errors_curve_figure(curves: dict[str, list[float]], path: Path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, mean in curves.items():
        ax.plot(np.arange(1, len(mean) + 1), mean, label=name)
    ax.set_xlabel("queries")
    ax.set_ylabel("mean errors discovered")
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def confidence_box_figure(confidences: dict[str, list[float]], path: Path) -> None:
    """Distribution of queried-prediction confidences per search."""
    fig, ax = plt.subplots(figsize=(6, 4))
    names = list(confidences)
    ax.boxplot([confidences[n] for n in names], tick_labels=names, showfliers=False)
    ax.set_ylabel("queried confidence")
    fig.tight_layout()
    _save(fig, path)


def reliability_figure(bins, path: Path) -> None:
    """Observed accuracy bars against the diagonal; red marks overconfidence."""
    fig, ax = plt.subplots(figsize=(5, 4))
    occupied = [b for b in bins if b.count]
    centers = [(b.low + b.high) / 2 for b in occupied]
    width = min((b.high - b.low for b in occupied), default=0.05) * 0.9
    observed = [b.observed for b in occupied]
    expected = [b.expected for b in occupied]
    ax.bar(centers, observed, width=width, color="tab:blue", label="observed accuracy")
    for c, o, e in zip(centers, observed, expected):
        if e > o:
            ax.bar(c, e - o, width=width, bottom=o, color="tab:red", alpha=0.6)
    ax.plot([0.65, 1.0], [0.65, 1.0], color="gray", linestyle="--", linewidth=1)
    ax.set_xlim(0.65, 1.0)
    ax.set_ylim(0.0, 1.0)
    ax.set_xlabel("confidence")
    ax.set_ylabel("accuracy")
    ax.legend(loc="upper left")
    fig.tight_layout()
    _save(fig, path)


def gad_scatter_figure(records, path: Path) -> None:
    """Perturbation cost vs. confidence with the fitted expectation overlaid."""
    flipped = [r for r in records if r.flipped]
    fig, ax = plt.subplots(figsize=(6, 4))
    conf = np.array([r.confidence for r in flipped])
    resp = np.array([r.expected + r.gad for r in flipped])
    expected = np.array([r.expected for r in flipped])
    order = np.argsort(conf)
    ax.scatter(conf, resp, s=8, alpha=0.4, label="instances")
    ax.plot(conf[order], expected[order], color="tab:orange", label="expected cost")
    ax.set_xlabel("confidence")
    ax.set_ylabel("perturbation cost")
    ax.legend()
    fig.tight_layout()
    _save(fig, path)
