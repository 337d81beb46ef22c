"""Metrics, the ablation grid, and the per-gender timing comparison.

Ablation cells are mutually independent: each draws its own seed from the
master seed and its coordinates, so any execution order (or worker count)
produces the identical grid. Timing cells always run serially to avoid
contention skew.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import classifiers
from .classifiers import ClassifierModel
from .errors import DimensionMismatch, GatefuseError
from .feature_selection import SelectionConfig, fit_select, transform
from .manifest import FEMALE, MALE, TEST, TRAIN, Manifest
from .pipeline import (
    GENDERLESS,
    PipelineModel,
    STRATEGIES,
    predict_identities,
    train_branch,
)
from .seeding import derive_seed

POPULATIONS = (MALE, FEMALE, "all")
POPULATION_CODES = {MALE: "M", FEMALE: "F", "all": "all"}

EXTRACTOR_DISPLAY = {
    "spectrogram": "Spectrogram",
    "waveform": "Waveform",
    "mfcc": "MFCC",
    "dmfcc": "DMFCC",
    "fbank": "Filter bank",
    "face": "Face",
}


@dataclass
class EvalReport:
    accuracy: float
    per_class_accuracy: dict
    confusion: np.ndarray  # rows: true label, columns: predicted label
    labels: list
    n_samples: int
    wall_clock: dict = field(default_factory=dict)


def evaluate_predictions(
    y_true, y_pred, fit_seconds: float = 0.0, predict_seconds: float = 0.0
) -> EvalReport:
    """Accuracy, per-class accuracy, and a confusion matrix over the sorted
    union of true and predicted labels."""
    y_true = list(np.asarray(y_true).tolist())
    y_pred = list(np.asarray(y_pred).tolist())
    if len(y_true) != len(y_pred):
        raise ValueError(f"{len(y_true)} truths vs {len(y_pred)} predictions")
    labels = sorted(set(y_true) | set(y_pred))
    index_of = {label: k for k, label in enumerate(labels)}
    confusion = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        confusion[index_of[t], index_of[p]] += 1
    n = len(y_true)
    accuracy = float(np.trace(confusion) / n) if n else 0.0
    per_class = {}
    for label in labels:
        k = index_of[label]
        row_total = int(confusion[k].sum())
        if row_total:
            per_class[label] = float(confusion[k, k] / row_total)
    return EvalReport(
        accuracy=accuracy,
        per_class_accuracy=per_class,
        confusion=confusion,
        labels=labels,
        n_samples=n,
        wall_clock={"fit_seconds": fit_seconds, "predict_seconds": predict_seconds},
    )


def evaluate(model: ClassifierModel, X, y) -> EvalReport:
    """Evaluate a single classifier; predict wall clock is measured here."""
    started = time.perf_counter()
    y_pred = classifiers.predict(model, X)
    predict_seconds = time.perf_counter() - started
    return evaluate_predictions(
        y, y_pred,
        fit_seconds=model.train_meta.get("fit_seconds", 0.0),
        predict_seconds=predict_seconds,
    )


def evaluate_pipeline(model: PipelineModel, face_X, voice_X, y) -> EvalReport:
    """Evaluate end-to-end identity prediction (gate errors count as wrong)."""
    started = time.perf_counter()
    speakers, _ = predict_identities(model, face_X, voice_X)
    predict_seconds = time.perf_counter() - started
    fit_seconds = model.gate_seconds + sum(
        b.fit_seconds for b in model.branches.values()
    )
    return evaluate_predictions(
        y, speakers, fit_seconds=fit_seconds, predict_seconds=predict_seconds
    )


# -- ablation grid ----------------------------------------------------------------

@dataclass
class AblationCell:
    extractor: str
    family: str
    fs: bool
    population: str
    report: EvalReport | None = None
    error: str | None = None
    kept_width: int | None = None

    @property
    def row_label(self) -> str:
        display = EXTRACTOR_DISPLAY.get(self.extractor, self.extractor)
        label = f"{display}({POPULATION_CODES.get(self.population, self.population)})"
        return label + (" + FS" if self.fs else "")


@dataclass
class AblationGrid:
    seed: int
    extractors: list[str]
    families: list[str]
    fs_options: list[bool]
    populations: list[str]
    cells: list[AblationCell] = field(default_factory=list)

    def cell(self, extractor, family, fs, population) -> AblationCell:
        for c in self.cells:
            if (c.extractor, c.family, c.fs, c.population) == (
                extractor, family, fs, population,
            ):
                return c
        raise KeyError((extractor, family, fs, population))


def _population_rows(manifest: Manifest, population: str, split: str) -> np.ndarray:
    rows = manifest.split_indices(split)
    if population == "all":
        return rows
    keep = [i for i in rows if manifest.records[i].gender_label == population]
    return np.array(keep, dtype=int)


def _run_cell(
    cell: AblationCell,
    manifest: Manifest,
    source: np.ndarray,
    selection_cfg: SelectionConfig,
    classifier_cfg,
    seed: int,
) -> AblationCell:
    try:
        train_rows = _population_rows(manifest, cell.population, TRAIN)
        test_rows = _population_rows(manifest, cell.population, TEST)
        if train_rows.size == 0 or test_rows.size == 0:
            raise GatefuseError(
                f"population {cell.population!r} has empty train or test split"
            )
        y_train = [manifest.records[i].speaker_label for i in train_rows]
        y_test = [manifest.records[i].speaker_label for i in test_rows]
        X_train = source[train_rows]
        X_test = source[test_rows]
        cell_seed = derive_seed(
            seed, cell.extractor, cell.family, cell.fs, cell.population
        )
        started = time.perf_counter()
        if cell.fs:
            mask, X_train = fit_select(
                X_train, y_train, selection_cfg, derive_seed(cell_seed, "fs")
            )
            X_test = transform(X_test, mask)
            cell.kept_width = mask.width
        model = classifiers.train(
            cell.family, X_train, y_train, cfg=classifier_cfg, seed=cell_seed
        )
        fit_seconds = time.perf_counter() - started
        report = evaluate(model, X_test, y_test)
        report.wall_clock["fit_seconds"] = fit_seconds
        cell.report = report
    except GatefuseError as exc:
        cell.error = f"{type(exc).__name__}: {exc}"
    return cell


def run_ablation(
    manifest: Manifest,
    sources: dict[str, np.ndarray],
    extractors: list[str] | None = None,
    families: list[str] | None = None,
    fs_options: list[bool] | None = None,
    populations: list[str] | None = None,
    selection_cfg: SelectionConfig = SelectionConfig(),
    classifier_cfgs: dict | None = None,
    seed: int = 0,
    workers: int = 1,
) -> AblationGrid:
    """Train and evaluate every (extractor, classifier, FS, population) cell.

    `sources` maps extractor names to matrices aligned with the manifest.
    Per-cell failures are recorded on the cell; the rest of the grid
    continues. Identical grids come back for any `workers` value.
    """
    extractors = list(extractors if extractors is not None else sources)
    families = list(families if families is not None else classifiers.FAMILIES)
    fs_options = list(fs_options if fs_options is not None else [False, True])
    populations = list(populations if populations is not None else POPULATIONS)
    classifier_cfgs = classifier_cfgs or {}
    for name in extractors:
        if name not in sources:
            raise KeyError(f"no feature source named {name!r}")

    grid = AblationGrid(
        seed=seed, extractors=extractors, families=families,
        fs_options=fs_options, populations=populations,
    )
    for extractor in extractors:
        for population in populations:
            for fs in fs_options:
                for family in families:
                    grid.cells.append(
                        AblationCell(extractor, family, fs, population)
                    )

    def job(cell: AblationCell) -> AblationCell:
        return _run_cell(
            cell, manifest, sources[cell.extractor], selection_cfg,
            classifier_cfgs.get(cell.family), seed,
        )

    if workers <= 1:
        for cell in grid.cells:
            job(cell)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(job, grid.cells))
    return grid


# -- timing comparison --------------------------------------------------------------

@dataclass
class TimingCell:
    strategy: str
    population: str
    seconds: float
    fused_width: int


@dataclass
class TimingReport:
    seed: int
    cells: list[TimingCell]
    strategy_ratios: dict[str, float]
    overall_ratio: float

    def cell(self, strategy: str, population: str) -> TimingCell:
        for c in self.cells:
            if (c.strategy, c.population) == (strategy, population):
                return c
        raise KeyError((strategy, population))


def timing_comparison(
    manifest: Manifest,
    face_X: np.ndarray,
    voice_X: np.ndarray,
    selection_cfg: SelectionConfig = SelectionConfig(),
    classifier_family: str = classifiers.FAMILY_SVM,
    classifier_cfg=None,
    seed: int = 0,
    strategies: tuple = STRATEGIES,
) -> TimingReport:
    """Step-3 wall clock (selection fits + final classifier fit) for the male
    branch, female branch, and genderless mode under every strategy.

    Reports (male + female) / genderless per strategy and overall; gendered
    training is expected to come in well under the genderless time.
    """
    if face_X.shape[1] < 1 or voice_X.shape[1] < 1:
        raise DimensionMismatch("timing needs non-empty face and voice features")
    cells = []
    per_strategy = {}
    for strategy in strategies:
        seconds = {}
        for population in POPULATIONS:
            rows = _population_rows(manifest, population, TRAIN)
            speakers = [manifest.records[i].speaker_label for i in rows]
            branch_gender = GENDERLESS if population == "all" else population
            branch = train_branch(
                branch_gender, face_X[rows], voice_X[rows], speakers, strategy,
                selection_cfg, classifier_family, classifier_cfg,
                seed=derive_seed(seed, "timing", strategy, population),
            )
            seconds[population] = branch.fit_seconds
            cells.append(
                TimingCell(strategy, population, branch.fit_seconds,
                           branch.fused_width)
            )
        per_strategy[strategy] = (
            (seconds[MALE] + seconds[FEMALE]) / seconds["all"]
        )
    gendered = sum(c.seconds for c in cells if c.population != "all")
    genderless = sum(c.seconds for c in cells if c.population == "all")
    return TimingReport(
        seed=seed,
        cells=cells,
        strategy_ratios=per_strategy,
        overall_ratio=gendered / genderless,
    )
