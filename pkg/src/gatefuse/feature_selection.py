"""Wrapper-style feature selection: fit an L1-penalized linear SVM, rank
columns by coefficient magnitude, keep the strong ones.

Columns are standardized internally before fitting (constant columns become
zero), so importances are comparable across features; the resulting mask
indexes the original, unstandardized columns. Masks are train-only
artifacts: ``transform`` never sees labels.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateLabels, MaskMismatch, NonFiniteInput

POLICY_MEAN_ABS = "mean-abs"
POLICY_QUANTILE = "quantile"
POLICY_TOP_K = "top-k"


@dataclass(frozen=True)
class SelectionConfig:
    lam: float = 1e-3
    epochs: int = 30
    learning_rate: float = 0.1
    batch_size: int = 64
    policy: str = POLICY_MEAN_ABS
    quantile: float = 0.75
    top_k: int = 64


@dataclass
class L1SvmFit:
    weights: np.ndarray  # (num_classes, input_dim), standardized feature space
    biases: np.ndarray
    classes: list
    lam: float
    epochs: int
    seed: int


@dataclass
class SelectionMask:
    kept: list[int]
    input_dim: int
    threshold: float
    policy: str
    importances: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        kept = list(self.kept)
        if not kept:
            raise ValueError("a selection mask cannot be empty")
        if kept != sorted(set(kept)) or kept[0] < 0 or kept[-1] >= self.input_dim:
            raise ValueError("kept indices must be strictly increasing and in range")
        self.kept = kept

    @property
    def width(self) -> int:
        return len(self.kept)


def identity_mask(input_dim: int) -> SelectionMask:
    return SelectionMask(
        kept=list(range(input_dim)), input_dim=input_dim, threshold=0.0,
        policy="identity",
    )


def _soft_threshold(values: np.ndarray, amount: float) -> np.ndarray:
    return np.sign(values) * np.maximum(np.abs(values) - amount, 0.0)


def _check_training_input(X: np.ndarray, y) -> tuple[np.ndarray, np.ndarray, list]:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if not np.all(np.isfinite(X)):
        raise NonFiniteInput("feature matrix contains NaN or infinity")
    y = np.asarray(y)
    if X.shape[0] != len(y):
        raise ValueError(f"{X.shape[0]} rows but {len(y)} labels")
    classes = sorted(set(y.tolist()))
    if len(classes) < 2:
        raise DegenerateLabels(f"need >= 2 classes, got {classes!r}")
    return X, y, classes


def fit_l1_svm(
    X: np.ndarray,
    y,
    lam: float = 1e-3,
    epochs: int = 30,
    seed: int = 0,
    learning_rate: float = 0.1,
    batch_size: int = 64,
) -> L1SvmFit:
    """One-vs-rest linear SVMs under hinge loss + lam * ||w||_1.

    Mini-batch subgradient steps on the hinge term with a decaying step
    eta_t = eta0 / (1 + t/T), each followed by soft-thresholding at
    eta_t * lam (the proximal map of the L1 term), so weights reach exact
    zeros and sparsity grows with lam. Shuffling is driven by `seed` only;
    identical inputs give identical weights.
    """
    X, y, classes = _check_training_input(X, y)
    n, d = X.shape

    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std[std == 0.0] = 1.0
    Xs = (X - mean) / std

    index_of = {c: k for k, c in enumerate(classes)}
    targets = -np.ones((n, len(classes)))
    targets[np.arange(n), [index_of[label] for label in y.tolist()]] = 1.0

    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    weights = np.zeros((len(classes), d))
    biases = np.zeros(len(classes))
    batches_per_epoch = max(1, -(-n // batch_size))
    total_steps = epochs * batches_per_epoch
    step = 0
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            rows = order[start : start + batch_size]
            eta = learning_rate / (1.0 + step / total_steps)
            scores = Xs[rows] @ weights.T + biases
            active = (targets[rows] * scores < 1.0) * targets[rows]
            weights -= eta * (-(active.T @ Xs[rows]) / len(rows))
            biases -= eta * (-active.sum(axis=0) / len(rows))
            weights = _soft_threshold(weights, eta * lam)
            step += 1

    return L1SvmFit(
        weights=weights, biases=biases, classes=classes,
        lam=lam, epochs=epochs, seed=seed,
    )


def importances_from_fit(fit: L1SvmFit) -> np.ndarray:
    """Per-column importance: max over classes of |weight|."""
    return np.max(np.abs(fit.weights), axis=0)


def mask_from_fit(
    fit: L1SvmFit,
    policy: str = POLICY_MEAN_ABS,
    quantile: float = 0.75,
    top_k: int = 64,
) -> SelectionMask:
    """Derive a column mask from fitted coefficient magnitudes.

    mean-abs keeps columns at or above the mean importance, quantile keeps
    the top (1 - q) tail, top-k keeps the k largest (ties to the lower
    index). An empty result falls back to the single best column.
    """
    imp = importances_from_fit(fit)
    if policy == POLICY_MEAN_ABS:
        threshold = float(imp.mean())
        kept = np.flatnonzero(imp >= threshold)
    elif policy == POLICY_QUANTILE:
        if not 0.0 <= quantile < 1.0:
            raise ValueError(f"quantile must be in [0, 1), got {quantile}")
        threshold = float(np.quantile(imp, quantile))
        kept = np.flatnonzero(imp >= threshold)
    elif policy == POLICY_TOP_K:
        if top_k < 1:
            raise ValueError(f"top_k must be >= 1, got {top_k}")
        k = min(top_k, imp.size)
        order = np.argsort(-imp, kind="stable")[:k]
        kept = np.sort(order)
        threshold = float(imp[order[-1]])
    else:
        raise ValueError(f"unknown mask policy {policy!r}")

    if kept.size == 0 or not np.any(imp > 0):
        best = int(np.argmax(imp))
        kept = np.array([best])
        threshold = float(imp[best])
    return SelectionMask(
        kept=kept.tolist(), input_dim=imp.size, threshold=threshold,
        policy=policy, importances=imp,
    )


def transform(X: np.ndarray, mask: SelectionMask) -> np.ndarray:
    """Keep the mask's columns, order preserved; rows untouched."""
    X = np.atleast_2d(np.asarray(X))
    if X.shape[1] != mask.input_dim:
        raise MaskMismatch(
            f"matrix has {X.shape[1]} columns, mask expects {mask.input_dim}"
        )
    return X[:, mask.kept]


def fit_select(
    X: np.ndarray, y, cfg: SelectionConfig = SelectionConfig(), seed: int = 0
) -> tuple[SelectionMask, np.ndarray]:
    """Fit, derive the mask, and reduce X in one call."""
    fit = fit_l1_svm(
        X, y, lam=cfg.lam, epochs=cfg.epochs, seed=seed,
        learning_rate=cfg.learning_rate, batch_size=cfg.batch_size,
    )
    mask = mask_from_fit(fit, policy=cfg.policy, quantile=cfg.quantile,
                         top_k=cfg.top_k)
    return mask, transform(X, mask)


def save_mask(mask: SelectionMask, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "input_dim": mask.input_dim,
        "threshold": mask.threshold,
        "kept": mask.kept,
        "policy": mask.policy,
    }
    if mask.importances is not None:
        payload["importances"] = [float(v) for v in mask.importances]
    path.write_text(json.dumps(payload, sort_keys=True) + "\n", encoding="utf-8")


def load_mask(path: str | Path) -> SelectionMask:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    importances = payload.get("importances")
    return SelectionMask(
        kept=payload["kept"],
        input_dim=payload["input_dim"],
        threshold=payload["threshold"],
        policy=payload["policy"],
        importances=None if importances is None else np.asarray(importances),
    )
