"""Figure and delimited-file rendering for evaluation reports."""

from __future__ import annotations

import csv

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .metrics import LABELS

_LABEL_STYLE = {"challenge": "tab:red", "direction": "tab:blue"}


def write_pr_csv(report: dict, path) -> int:
    """Write every PR-curve point as delimited rows; returns the row count."""
    n = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "threshold", "recall", "precision"])
        for label in LABELS:
            curve = report["labels"].get(label, {}).get("pr_curve")
            if not curve:
                continue
            for recall, precision, threshold in curve["points"]:
                writer.writerow([label, threshold, recall, precision])
                n += 1
    return n


def save_pr_figure(report: dict, path) -> None:
    """Render the per-label precision-recall curves to an image file.

    Format follows the file extension (svg/png/pdf).
    """
    fig, ax = plt.subplots(figsize=(6, 4.5))
    plotted = False
    for label in LABELS:
        entry = report["labels"].get(label, {})
        curve = entry.get("pr_curve")
        if not curve:
            continue
        recalls = [p[0] for p in curve["points"]]
        precisions = [p[1] for p in curve["points"]]
        ap = entry.get("average_precision")
        name = label if ap is None else f"{label} (AP={ap:.3f})"
        ax.plot(recalls, precisions, label=name, color=_LABEL_STYLE.get(label))
        plotted = True
    ax.set_xlabel("Recall")
    ax.set_ylabel("Precision")
    ax.set_xlim(0.0, 1.0)
    ax.set_ylim(0.0, 1.05)
    ax.grid(True, alpha=0.3)
    if plotted:
        ax.legend(loc="lower left")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
