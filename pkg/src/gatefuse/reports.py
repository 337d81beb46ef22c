"""Report serialization: JSON, delimited CSV, and aligned plain-text tables.

Metric payloads are deterministic for a fixed seed: wall-clock numbers are
always written to a separate ``*_timing.json`` sidecar so that the main
report files are byte-identical across reruns.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .classifiers import DISPLAY_NAMES
from .evaluation import AblationGrid, EvalReport, TimingReport
from .manifest import FEMALE, MALE
from .pipeline import STRATEGY_DISPLAY


def _write_json(payload, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def _format_table(header: list[str], rows: list[list[str]], label_width: int) -> str:
    widths = [label_width] + [max(8, len(h) + 2) for h in header[1:]]
    lines = []
    for i, row in enumerate([header] + rows):
        cells = [row[0].ljust(widths[0])]
        cells += [cell.rjust(w) for cell, w in zip(row[1:], widths[1:])]
        lines.append("".join(cells).rstrip())
        if i == 0:
            lines.append("-" * (sum(widths)))
    return "\n".join(lines) + "\n"


# -- evaluation reports -----------------------------------------------------------

def eval_report_payload(report: EvalReport) -> dict:
    return {
        "accuracy": report.accuracy,
        "n_samples": report.n_samples,
        "labels": [str(v) for v in report.labels],
        "per_class_accuracy": {
            str(k): v for k, v in report.per_class_accuracy.items()
        },
        "confusion": report.confusion.tolist(),
    }


def write_eval_report(report: EvalReport, out_dir: str | Path) -> None:
    """report.json + confusion.csv + report.txt, timing in a sidecar."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(eval_report_payload(report), out_dir / "report.json")
    _write_json(report.wall_clock, out_dir / "report_timing.json")

    with (out_dir / "confusion.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["true\\predicted"] + [str(v) for v in report.labels])
        for label, row in zip(report.labels, report.confusion):
            writer.writerow([str(label)] + [int(v) for v in row])

    label_width = max([len(str(v)) for v in report.labels] + [12]) + 2
    rows = [
        [str(label), f"{report.per_class_accuracy.get(label, 0.0) * 100:.2f}"]
        for label in report.labels
    ]
    text = (
        f"samples: {report.n_samples}\n"
        f"accuracy: {report.accuracy * 100:.2f}%\n\n"
        + _format_table(["class", "acc(%)"], rows, label_width)
    )
    (out_dir / "report.txt").write_text(text, encoding="utf-8")


# -- ablation grid ------------------------------------------------------------------

def _grid_row_labels(grid: AblationGrid) -> list[tuple[str, str, bool]]:
    ordered = []
    for extractor in grid.extractors:
        for population in grid.populations:
            for fs in grid.fs_options:
                ordered.append((extractor, population, fs))
    return ordered


def grid_payload(grid: AblationGrid) -> dict:
    cells = []
    for cell in grid.cells:
        entry = {
            "extractor": cell.extractor,
            "classifier": cell.family,
            "fs": cell.fs,
            "population": cell.population,
            "row_label": cell.row_label,
            "error": cell.error,
            "kept_width": cell.kept_width,
        }
        if cell.report is not None:
            entry["accuracy"] = cell.report.accuracy
            entry["n_samples"] = cell.report.n_samples
        cells.append(entry)
    return {
        "seed": grid.seed,
        "classifiers": list(grid.families),
        "cells": cells,
    }


def write_ablation_grid(grid: AblationGrid, out_dir: str | Path) -> None:
    """grid.json + grid.csv + grid.txt (Tables 1-2 layout), timing sidecar."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(grid_payload(grid), out_dir / "grid.json")
    timing = {
        f"{c.row_label} / {DISPLAY_NAMES.get(c.family, c.family)}":
            c.report.wall_clock
        for c in grid.cells if c.report is not None
    }
    _write_json(timing, out_dir / "grid_timing.json")

    columns = [DISPLAY_NAMES.get(f, f) for f in grid.families]
    table_rows = []
    csv_rows = []
    for extractor, population, fs in _grid_row_labels(grid):
        cells = [
            grid.cell(extractor, family, fs, population)
            for family in grid.families
        ]
        label = cells[0].row_label
        values = [
            "err" if c.error is not None else f"{c.report.accuracy * 100:.2f}"
            for c in cells
        ]
        table_rows.append([label] + values)
        csv_rows.append([label] + values)

    label_width = max([len(r[0]) for r in table_rows] + [20]) + 2
    (out_dir / "grid.txt").write_text(
        _format_table(["FE(population)"] + columns, table_rows, label_width),
        encoding="utf-8",
    )
    with (out_dir / "grid.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["row_label"] + columns)
        writer.writerows(csv_rows)


# -- timing report ------------------------------------------------------------------

def timing_payload(report: TimingReport) -> dict:
    return {
        "seed": report.seed,
        "cells": [
            {
                "strategy": c.strategy,
                "population": c.population,
                "seconds": c.seconds,
                "fused_width": c.fused_width,
            }
            for c in report.cells
        ],
        "strategy_ratios": report.strategy_ratios,
        "overall_ratio": report.overall_ratio,
    }


def write_timing_report(report: TimingReport, out_dir: str | Path) -> None:
    """timing.json + timing.csv + timing.txt in the Table 5 layout."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(timing_payload(report), out_dir / "timing.json")

    strategies = list(dict.fromkeys(c.strategy for c in report.cells))
    header = ["approach", "Male(s)", "Female(s)", "Genderless(s)", "(M+F)/G"]
    rows = []
    for strategy in strategies:
        male = report.cell(strategy, MALE).seconds
        female = report.cell(strategy, FEMALE).seconds
        total = report.cell(strategy, "all").seconds
        rows.append([
            STRATEGY_DISPLAY.get(strategy, strategy),
            f"{male:.3f}", f"{female:.3f}", f"{total:.3f}",
            f"{report.strategy_ratios[strategy]:.3f}",
        ])
    label_width = max(len(r[0]) for r in rows) + 2
    text = _format_table(header, rows, label_width)
    text += f"\noverall (male+female)/genderless: {report.overall_ratio:.3f}\n"
    (out_dir / "timing.txt").write_text(text, encoding="utf-8")

    with (out_dir / "timing.csv").open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["strategy", "male_s", "female_s", "genderless_s", "ratio"])
        for strategy in strategies:
            writer.writerow([
                strategy,
                f"{report.cell(strategy, MALE).seconds:.6f}",
                f"{report.cell(strategy, FEMALE).seconds:.6f}",
                f"{report.cell(strategy, 'all').seconds:.6f}",
                f"{report.strategy_ratios[strategy]:.6f}",
            ])
