"""Four classifier families behind one train/predict/predict_scores contract:
linear SVM (one-vs-rest hinge + L2), multinomial logistic regression,
Gaussian naive Bayes, and a random forest of CART trees.

All fits are deterministic functions of (X, y, cfg, seed). Ties at argmax
break toward the lowest index in the sorted label vocabulary. Models
serialize to a JSON envelope plus a binary parameter blob and round-trip
to bit-identical predictions.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import binfmt
from .errors import DegenerateLabels, DimensionMismatch, NonFiniteInput

FAMILY_SVM = "svm"
FAMILY_LOGREG = "logreg"
FAMILY_GNB = "gnb"
FAMILY_FOREST = "forest"
FAMILIES = (FAMILY_SVM, FAMILY_LOGREG, FAMILY_GNB, FAMILY_FOREST)

DISPLAY_NAMES = {
    FAMILY_FOREST: "RF",
    FAMILY_GNB: "NB",
    FAMILY_LOGREG: "LR",
    FAMILY_SVM: "SVM",
}


@dataclass(frozen=True)
class SvmConfig:
    epochs: int = 30
    learning_rate: float = 0.1
    l2: float = 1e-4
    batch_size: int = 64


@dataclass(frozen=True)
class LogRegConfig:
    iterations: int = 150
    learning_rate: float = 1.0
    l2: float = 1e-4
    max_backtracks: int = 40


@dataclass(frozen=True)
class GnbConfig:
    var_floor: float = 1e-9


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: int | None = None
    min_leaf: int = 1
    max_features: str | int = "sqrt"  # "sqrt", "all", or a count


CONFIG_TYPES = {
    FAMILY_SVM: SvmConfig,
    FAMILY_LOGREG: LogRegConfig,
    FAMILY_GNB: GnbConfig,
    FAMILY_FOREST: ForestConfig,
}


def default_config(family: str):
    return CONFIG_TYPES[family]()


@dataclass
class ClassifierModel:
    family: str
    label_vocab: list
    input_dim: int
    params: dict[str, np.ndarray]
    cfg: object
    train_meta: dict

    @property
    def num_classes(self) -> int:
        return len(self.label_vocab)


def _validate_fit_input(X, y):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if not np.all(np.isfinite(X)):
        raise NonFiniteInput("feature matrix contains NaN or infinity")
    y = list(np.asarray(y).tolist())
    if X.shape[0] != len(y):
        raise ValueError(f"{X.shape[0]} rows but {len(y)} labels")
    vocab = sorted(set(y))
    if len(vocab) < 2:
        raise DegenerateLabels(f"need >= 2 classes, got {vocab!r}")
    index_of = {label: k for k, label in enumerate(vocab)}
    codes = np.array([index_of[label] for label in y], dtype=int)
    return X, codes, vocab


def _standardize_fit(X):
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0.0] = 1.0
    return (X - mean) / scale, mean, scale


# -- linear SVM ---------------------------------------------------------------

def _fit_svm(X, codes, n_classes, cfg: SvmConfig, seed: int):
    Xs, mean, scale = _standardize_fit(X)
    n, d = Xs.shape
    targets = -np.ones((n, n_classes))
    targets[np.arange(n), codes] = 1.0
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    weights = np.zeros((n_classes, d))
    biases = np.zeros(n_classes)
    total_steps = cfg.epochs * max(1, -(-n // cfg.batch_size))
    step = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            rows = order[start : start + cfg.batch_size]
            eta = cfg.learning_rate / (1.0 + step / total_steps)
            scores = Xs[rows] @ weights.T + biases
            active = (targets[rows] * scores < 1.0) * targets[rows]
            grad_w = -(active.T @ Xs[rows]) / len(rows) + cfg.l2 * weights
            grad_b = -active.sum(axis=0) / len(rows)
            weights -= eta * grad_w
            biases -= eta * grad_b
            step += 1
    return {
        "weights": weights,
        "biases": biases[None, :],
        "feature_mean": mean[None, :],
        "feature_scale": scale[None, :],
    }


def _scores_svm(model: ClassifierModel, X):
    mean = model.params["feature_mean"][0]
    scale = model.params["feature_scale"][0]
    Xs = (X - mean) / scale
    return Xs @ model.params["weights"].T + model.params["biases"][0]


# -- logistic regression ------------------------------------------------------

def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def logreg_loss(weights, biases, X, onehot, l2) -> float:
    """Mean cross-entropy of softmax(XW + b) plus (l2/2)||W||^2."""
    logits = X @ weights + biases
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    nll = -(np.sum(shifted[onehot.astype(bool)]) - log_norm.sum()) / len(X)
    return float(nll + 0.5 * l2 * np.sum(weights**2))


def logreg_gradient(weights, biases, X, onehot, l2):
    """Analytic gradient of :func:`logreg_loss` in (weights, biases)."""
    delta = (softmax(X @ weights + biases) - onehot) / len(X)
    return X.T @ delta + l2 * weights, delta.sum(axis=0)


def _fit_logreg(X, codes, n_classes, cfg: LogRegConfig, seed: int):
    Xs, mean, scale = _standardize_fit(X)
    onehot = np.eye(n_classes)[codes]
    weights = np.zeros((Xs.shape[1], n_classes))
    biases = np.zeros(n_classes)
    eta = cfg.learning_rate
    loss = logreg_loss(weights, biases, Xs, onehot, cfg.l2)
    history = [loss]
    for _ in range(cfg.iterations):
        grad_w, grad_b = logreg_gradient(weights, biases, Xs, onehot, cfg.l2)
        accepted = False
        for _ in range(cfg.max_backtracks):
            cand_w = weights - eta * grad_w
            cand_b = biases - eta * grad_b
            cand_loss = logreg_loss(cand_w, cand_b, Xs, onehot, cfg.l2)
            if cand_loss <= loss:
                accepted = True
                break
            eta /= 2.0
        if not accepted:
            break
        weights, biases, loss = cand_w, cand_b, cand_loss
        history.append(loss)
    return {
        "weights": weights,
        "biases": biases[None, :],
        "feature_mean": mean[None, :],
        "feature_scale": scale[None, :],
        "loss_history": np.asarray(history)[None, :],
    }


def _scores_logreg(model: ClassifierModel, X):
    mean = model.params["feature_mean"][0]
    scale = model.params["feature_scale"][0]
    Xs = (X - mean) / scale
    return softmax(Xs @ model.params["weights"] + model.params["biases"][0])


# -- Gaussian naive Bayes -----------------------------------------------------

def _fit_gnb(X, codes, n_classes, cfg: GnbConfig, seed: int):
    d = X.shape[1]
    means = np.empty((n_classes, d))
    variances = np.empty((n_classes, d))
    counts = np.empty(n_classes)
    for k in range(n_classes):
        rows = X[codes == k]
        counts[k] = len(rows)
        means[k] = rows.mean(axis=0)
        variances[k] = rows.var(axis=0) + cfg.var_floor
    log_priors = np.log(counts / counts.sum())
    return {"means": means, "variances": variances, "log_priors": log_priors[None, :]}


def _log_joint_gnb(model: ClassifierModel, X):
    means = model.params["means"]
    variances = model.params["variances"]
    log_priors = model.params["log_priors"][0]
    out = np.empty((len(X), len(log_priors)))
    for k in range(len(log_priors)):
        diff = X - means[k]
        out[:, k] = log_priors[k] - 0.5 * np.sum(
            np.log(2.0 * np.pi * variances[k]) + diff**2 / variances[k], axis=1
        )
    return out


def _scores_gnb(model: ClassifierModel, X):
    return softmax(_log_joint_gnb(model, X))


# -- random forest ------------------------------------------------------------

_LEAF = -1


def _best_split(X, labels, n_classes, feats, min_leaf):
    n = len(labels)
    onehot = np.eye(n_classes)[labels]
    best_cost = np.inf
    best = None
    sizes_left = np.arange(1, n)
    sizes_right = n - sizes_left
    valid_size = (sizes_left >= min_leaf) & (sizes_right >= min_leaf)
    for f in feats:
        order = np.argsort(X[:, f], kind="stable")
        values = X[order, f]
        boundaries = (values[:-1] < values[1:]) & valid_size
        if not boundaries.any():
            continue
        left_counts = np.cumsum(onehot[order], axis=0)[:-1]
        right_counts = left_counts[-1] + onehot[order[-1]] - left_counts
        gini_left = 1.0 - np.sum((left_counts / sizes_left[:, None]) ** 2, axis=1)
        gini_right = 1.0 - np.sum((right_counts / sizes_right[:, None]) ** 2, axis=1)
        cost = (sizes_left * gini_left + sizes_right * gini_right) / n
        cost[~boundaries] = np.inf
        i = int(np.argmin(cost))
        if cost[i] < best_cost - 1e-15:
            best_cost = cost[i]
            best = (int(f), float((values[i] + values[i + 1]) / 2.0))
    return best


def _grow_tree(X, labels, n_classes, n_feats, cfg: ForestConfig, rng):
    d = X.shape[1]
    nodes = []  # rows of [feature, threshold, left, right, leaf_code]

    def new_node():
        nodes.append([_LEAF, 0.0, _LEAF, _LEAF, _LEAF])
        return len(nodes) - 1

    stack = [(new_node(), np.arange(len(labels)), 0)]
    while stack:
        node_id, idx, depth = stack.pop()
        counts = np.bincount(labels[idx], minlength=n_classes)
        majority = int(np.argmax(counts))
        depth_capped = cfg.max_depth is not None and depth >= cfg.max_depth
        if counts[majority] == len(idx) or len(idx) < 2 * cfg.min_leaf or depth_capped:
            nodes[node_id][4] = majority
            continue
        feats = rng.choice(d, size=n_feats, replace=False)
        split = _best_split(X[idx], labels[idx], n_classes, feats, cfg.min_leaf)
        if split is None:
            nodes[node_id][4] = majority
            continue
        feat, threshold = split
        go_left = X[idx, feat] <= threshold
        left_id, right_id = new_node(), new_node()
        nodes[node_id][:4] = [feat, threshold, left_id, right_id]
        stack.append((right_id, idx[~go_left], depth + 1))
        stack.append((left_id, idx[go_left], depth + 1))
    return np.array(nodes, dtype=np.float64)


def _resolve_feature_count(max_features, d):
    if max_features == "sqrt":
        return max(1, int(round(np.sqrt(d))))
    if max_features == "all":
        return d
    return min(int(max_features), d)


def _fit_forest(X, codes, n_classes, cfg: ForestConfig, seed: int):
    n, d = X.shape
    n_feats = _resolve_feature_count(cfg.max_features, d)
    params = {}
    for i in range(cfg.n_trees):
        # per-tree stream derived from (seed, i): parallel-safe, order-free
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        rows = rng.integers(0, n, size=n)
        params[f"tree_{i:04d}"] = _grow_tree(
            X[rows], codes[rows], n_classes, n_feats, cfg, rng
        )
    return params


def _tree_leaf_codes(tree: np.ndarray, X) -> np.ndarray:
    feature = tree[:, 0].astype(int)
    threshold = tree[:, 1]
    left = tree[:, 2].astype(int)
    right = tree[:, 3].astype(int)
    leaf = tree[:, 4].astype(int)
    node = np.zeros(len(X), dtype=int)
    active = np.flatnonzero(leaf[node] == _LEAF)
    while active.size:
        current = node[active]
        go_left = X[active, feature[current]] <= threshold[current]
        node[active] = np.where(go_left, left[current], right[current])
        active = active[leaf[node[active]] == _LEAF]
    return leaf[node]


def _scores_forest(model: ClassifierModel, X):
    votes = np.zeros((len(X), model.num_classes))
    trees = [name for name in model.params if name.startswith("tree_")]
    for name in sorted(trees):
        codes = _tree_leaf_codes(model.params[name], X)
        votes[np.arange(len(X)), codes] += 1.0
    return votes / len(trees)


# -- shared entry points --------------------------------------------------------

_FITTERS = {
    FAMILY_SVM: _fit_svm,
    FAMILY_LOGREG: _fit_logreg,
    FAMILY_GNB: _fit_gnb,
    FAMILY_FOREST: _fit_forest,
}

_SCORERS = {
    FAMILY_SVM: _scores_svm,
    FAMILY_LOGREG: _scores_logreg,
    FAMILY_GNB: _scores_gnb,
    FAMILY_FOREST: _scores_forest,
}


def train(family: str, X, y, cfg=None, seed: int = 0) -> ClassifierModel:
    """Fit one family on (X, y); every source of randomness comes from `seed`."""
    if family not in FAMILIES:
        raise ValueError(f"unknown classifier family {family!r}")
    if cfg is None:
        cfg = default_config(family)
    X, codes, vocab = _validate_fit_input(X, y)
    started = time.perf_counter()
    params = _FITTERS[family](X, codes, len(vocab), cfg, seed)
    fit_seconds = time.perf_counter() - started
    return ClassifierModel(
        family=family,
        label_vocab=vocab,
        input_dim=X.shape[1],
        params=params,
        cfg=cfg,
        train_meta={"seed": seed, "fit_seconds": fit_seconds},
    )


def _validate_predict_input(model: ClassifierModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.input_dim:
        raise DimensionMismatch(
            f"matrix has {X.shape[1]} columns, model expects {model.input_dim}"
        )
    return X


def predict_scores(model: ClassifierModel, X) -> np.ndarray:
    """Score matrix (rows x classes): probabilities for logreg/gnb, raw
    margins for the SVM, vote fractions for the forest."""
    X = _validate_predict_input(model, X)
    return _SCORERS[model.family](model, X)


def predict(model: ClassifierModel, X) -> np.ndarray:
    """Argmax of scores; ties break to the lowest vocab index."""
    codes = np.argmax(predict_scores(model, X), axis=1)
    return np.asarray(model.label_vocab)[codes]


# -- persistence ----------------------------------------------------------------

_ENVELOPE_VERSION = 1


def save_model(model: ClassifierModel, basepath: str | Path) -> None:
    """Write `<basepath>.json` (envelope) and `<basepath>.msrm` (parameters)."""
    basepath = Path(basepath)
    basepath.parent.mkdir(parents=True, exist_ok=True)
    label_kind = "int" if all(
        isinstance(v, (int, np.integer)) for v in model.label_vocab
    ) else "str"
    envelope = {
        "version": _ENVELOPE_VERSION,
        "family": model.family,
        "label_vocab": [int(v) if label_kind == "int" else str(v)
                        for v in model.label_vocab],
        "label_kind": label_kind,
        "input_dim": model.input_dim,
        "cfg": asdict(model.cfg),
        "train_meta": model.train_meta,
    }
    basepath.with_suffix(".json").write_text(
        json.dumps(envelope, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    binfmt.write_matrix_blob(basepath.with_suffix(".msrm"), model.params)


def load_model(basepath: str | Path) -> ClassifierModel:
    basepath = Path(basepath)
    envelope = json.loads(basepath.with_suffix(".json").read_text(encoding="utf-8"))
    family = envelope["family"]
    cfg = CONFIG_TYPES[family](**envelope["cfg"])
    vocab = envelope["label_vocab"]
    if envelope["label_kind"] == "int":
        vocab = [int(v) for v in vocab]
    params = binfmt.read_matrix_blob(basepath.with_suffix(".msrm"))
    return ClassifierModel(
        family=family,
        label_vocab=vocab,
        input_dim=envelope["input_dim"],
        params=params,
        cfg=cfg,
        train_meta=envelope["train_meta"],
    )
