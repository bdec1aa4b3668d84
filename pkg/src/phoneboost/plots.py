"""Figure rendering for evaluation reports.

The core experiment code emits data-only reports; this module turns them
into PNG files. It is invoked from the CLI report path so every written
.txt/.csv report gets a figure next to it, and it is the only module that
imports matplotlib.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .evaluate import ConfusionMatrix, ExperimentReport

# axis captions per report name; anything else falls back to generic labels
_AXIS_LABELS = {
    "learning": ("training samples per phone", "error rate"),
    "rounds": ("boosting rounds", "error rate"),
    "margins": ("margin on either side (s)", "error rate"),
}


def render_report(report: ExperimentReport, path) -> Path:
    """Line plot of the report's curves, or a bar chart of its scalars
    when there are no curve series."""
    path = Path(path)
    xlabel, ylabel = _AXIS_LABELS.get(report.name, ("x", "y"))
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    try:
        if report.series:
            for series in report.series:
                ax.plot(series.x, series.y, marker="o", label=series.label)
            ax.set_xlabel(xlabel)
            ax.set_ylabel(ylabel)
            ax.legend()
            title = report.name
            if report.scalars:
                parts = [f"{k}={v:.4g}" for k, v in report.scalars.items()]
                title += "  (" + ", ".join(parts) + ")"
            ax.set_title(title)
        else:
            names = list(report.scalars)
            values = [report.scalars[k] for k in names]
            ax.bar(names, values)
            for i, value in enumerate(values):
                ax.text(i, value, f"{value:.4g}", ha="center", va="bottom")
            ax.set_ylim(0.0, max(1.0, max(values, default=1.0) * 1.15))
            ax.set_title(report.name)
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        fig.savefig(path, dpi=120)
    finally:
        plt.close(fig)
    return path


def render_confusion(matrix: ConfusionMatrix, path) -> Path:
    """Heatmap of row-normalized confusion frequencies."""
    path = Path(path)
    n = len(matrix.labels)
    size = max(4.0, 0.35 * n)
    fig, ax = plt.subplots(figsize=(size + 1.5, size))
    try:
        image = ax.imshow(matrix.normalized(), vmin=0.0, vmax=1.0,
                          cmap="viridis")
        ax.set_xticks(range(n), matrix.labels, rotation=90, fontsize=7)
        ax.set_yticks(range(n), matrix.labels, fontsize=7)
        ax.set_xlabel("predicted")
        ax.set_ylabel("true")
        if n <= 12:
            # small tables are more useful with the raw counts visible
            for i in range(n):
                for j in range(n):
                    count = int(matrix.counts[i, j])
                    if count:
                        ax.text(j, i, str(count), ha="center", va="center",
                                color="white", fontsize=8)
        fig.colorbar(image, ax=ax, label="row frequency")
        fig.tight_layout()
        fig.savefig(path, dpi=120)
    finally:
        plt.close(fig)
    return path
