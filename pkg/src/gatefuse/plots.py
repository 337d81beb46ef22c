"""Figure rendering for the report paths (headless Agg backend).

Each report command drops a PNG next to its delimited output: a confusion
heatmap for evaluations, grouped accuracy bars for ablation grids, and the
per-gender training-time comparison for timing runs.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .classifiers import DISPLAY_NAMES
from .evaluation import AblationGrid, EvalReport, TimingReport
from .manifest import FEMALE, MALE
from .pipeline import STRATEGY_DISPLAY

_SAVE_OPTS = {"dpi": 110, "metadata": {"Software": None}}


def confusion_heatmap(report: EvalReport, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = len(report.labels)
    fig, ax = plt.subplots(figsize=(max(4.0, 0.25 * n + 2), max(3.5, 0.25 * n + 1.5)))
    image = ax.imshow(report.confusion, cmap="viridis")
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    ax.set_title(f"accuracy {report.accuracy * 100:.2f}% (n={report.n_samples})")
    if n <= 30:
        ax.set_xticks(range(n), [str(v) for v in report.labels], rotation=90,
                      fontsize=6)
        ax.set_yticks(range(n), [str(v) for v in report.labels], fontsize=6)
    fig.colorbar(image, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)


def ablation_bars(grid: AblationGrid, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = []
    for extractor in grid.extractors:
        for population in grid.populations:
            for fs in grid.fs_options:
                cells = [
                    grid.cell(extractor, family, fs, population)
                    for family in grid.families
                ]
                label = cells[0].row_label
                values = [
                    np.nan if c.error is not None else c.report.accuracy * 100
                    for c in cells
                ]
                rows.append((label, values))

    n_rows = len(rows)
    n_fam = len(grid.families)
    fig, ax = plt.subplots(figsize=(max(6.0, 0.55 * n_rows + 2), 4.5))
    offsets = np.linspace(-0.3, 0.3, n_fam)
    for j, family in enumerate(grid.families):
        heights = [values[j] for _, values in rows]
        ax.bar(
            np.arange(n_rows) + offsets[j], heights,
            width=0.6 / max(1, n_fam - 1) if n_fam > 1 else 0.6,
            label=DISPLAY_NAMES.get(family, family),
        )
    ax.set_xticks(np.arange(n_rows), [label for label, _ in rows],
                  rotation=45, ha="right", fontsize=7)
    ax.set_ylabel("test accuracy (%)")
    ax.set_ylim(0, 100)
    ax.legend(fontsize=8)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)


def timing_bars(report: TimingReport, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    strategies = list(dict.fromkeys(c.strategy for c in report.cells))
    series = {
        "male": [report.cell(s, MALE).seconds for s in strategies],
        "female": [report.cell(s, FEMALE).seconds for s in strategies],
        "genderless": [report.cell(s, "all").seconds for s in strategies],
    }
    x = np.arange(len(strategies))
    fig, ax = plt.subplots(figsize=(7.5, 4.2))
    for offset, (name, values) in zip((-0.25, 0.0, 0.25), series.items()):
        ax.bar(x + offset, values, width=0.22, label=name)
    ax.set_xticks(x, [STRATEGY_DISPLAY.get(s, s) for s in strategies],
                  rotation=20, ha="right", fontsize=8)
    ax.set_ylabel("step-3 training time (s)")
    ax.set_title(
        f"(male+female)/genderless = {report.overall_ratio:.2f}"
    )
    ax.legend(fontsize=8)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_OPTS)
    plt.close(fig)
