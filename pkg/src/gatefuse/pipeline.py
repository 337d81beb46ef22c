"""The three-step gated fusion architecture.

Step 1 trains a binary gender gate on face features alone. Step 2 routes
each sample to a per-gender branch (training routes by true labels;
inference trusts the gate, so a misroute forces an identity error). Step 3
runs the fusion strategy inside the branch: optional per-modality feature
selection, face-then-voice concatenation, optional post-fusion selection,
and the final identity classifier.

A genderless variant (no gate, one all-speaker branch) exists for ablation
baselines. Branches never see rows of another gender at fit time, and masks
are fit on training rows only.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import classifiers
from .classifiers import ClassifierModel, load_model, save_model
from .embeddings import EmbeddingTable, align
from .errors import (
    DataError,
    DegenerateBranch,
    DegenerateLabels,
    DimensionMismatch,
    GenderLeak,
)
from .feature_selection import (
    SelectionConfig,
    SelectionMask,
    fit_select,
    load_mask,
    save_mask,
    transform,
)
from .manifest import FEMALE, GENDERS, MALE, TRAIN, Manifest
from .seeding import derive_seed

STRATEGY_SIMPLE = "simple-concat"
STRATEGY_PRE = "pre-fs"
STRATEGY_POST = "post-fs"
STRATEGY_PREPOST = "pre-post-fs"
STRATEGIES = (STRATEGY_SIMPLE, STRATEGY_PRE, STRATEGY_POST, STRATEGY_PREPOST)

STRATEGY_DISPLAY = {
    STRATEGY_SIMPLE: "Simple concatenation",
    STRATEGY_PRE: "FS + concatenation",
    STRATEGY_POST: "concatenation + FS",
    STRATEGY_PREPOST: "FS + concatenation + FS",
}

MODALITY_BOTH = "both"
MODALITY_FACE = "face"
MODALITY_VOICE = "voice"
MODALITIES = (MODALITY_BOTH, MODALITY_FACE, MODALITY_VOICE)

GENDERLESS = "all"


def _uses_pre_masks(strategy: str) -> bool:
    return strategy in (STRATEGY_PRE, STRATEGY_PREPOST)


def _uses_post_mask(strategy: str) -> bool:
    return strategy in (STRATEGY_POST, STRATEGY_PREPOST)


@dataclass
class BranchModel:
    gender: str  # "male", "female", or "all" for the genderless branch
    strategy: str
    modality: str
    face_dim: int | None
    voice_dim: int | None
    face_mask: SelectionMask | None
    voice_mask: SelectionMask | None
    fused_mask: SelectionMask | None
    classifier: ClassifierModel
    fit_seconds: float  # step-3 wall clock: mask fits + classifier fit

    @property
    def fused_width(self) -> int:
        return self.classifier.input_dim


@dataclass
class PipelineModel:
    gate: ClassifierModel | None
    branches: dict[str, BranchModel]
    strategy: str
    modality: str
    seed: int
    feature_spec: dict
    gate_seconds: float = 0.0

    @property
    def genderless(self) -> bool:
        return self.gate is None


def _as_matrix(source, manifest: Manifest | None) -> np.ndarray:
    if isinstance(source, EmbeddingTable):
        if manifest is None:
            raise ValueError("aligning an EmbeddingTable requires a manifest")
        return align(source, manifest)
    return np.atleast_2d(np.asarray(source, dtype=np.float64))


def train_gate(
    face_X: np.ndarray,
    genders,
    family: str = classifiers.FAMILY_SVM,
    cfg=None,
    seed: int = 0,
) -> ClassifierModel:
    """Binary gender classifier on face features only."""
    genders = list(genders)
    present = sorted(set(genders))
    if len(present) < 2:
        raise DegenerateLabels(
            f"gate needs both genders in training data, got {present!r}"
        )
    return classifiers.train(family, face_X, genders, cfg=cfg, seed=seed)


def fuse(face_rows, voice_rows, branch: BranchModel) -> np.ndarray:
    """Apply the branch's masks and concatenation to one row or a batch.

    Order is always face features first, then voice. Raises
    DimensionMismatch when a supplied modality's width differs from the
    branch's training-time width.
    """
    single = False
    parts = []
    if branch.modality in (MODALITY_BOTH, MODALITY_FACE):
        if face_rows is None:
            raise DimensionMismatch("branch requires face features")
        face = np.asarray(face_rows, dtype=np.float64)
        single = single or face.ndim == 1
        face = np.atleast_2d(face)
        if face.shape[1] != branch.face_dim:
            raise DimensionMismatch(
                f"face width {face.shape[1]}, branch expects {branch.face_dim}"
            )
        parts.append(transform(face, branch.face_mask) if branch.face_mask else face)
    if branch.modality in (MODALITY_BOTH, MODALITY_VOICE):
        if voice_rows is None:
            raise DimensionMismatch("branch requires voice features")
        voice = np.asarray(voice_rows, dtype=np.float64)
        single = single or voice.ndim == 1
        voice = np.atleast_2d(voice)
        if voice.shape[1] != branch.voice_dim:
            raise DimensionMismatch(
                f"voice width {voice.shape[1]}, branch expects {branch.voice_dim}"
            )
        parts.append(
            transform(voice, branch.voice_mask) if branch.voice_mask else voice
        )
    fused = parts[0] if len(parts) == 1 else np.hstack(parts)
    if branch.fused_mask is not None:
        fused = transform(fused, branch.fused_mask)
    return fused[0] if single else fused


def train_branch(
    gender: str,
    face_X,
    voice_X,
    speakers,
    strategy: str = STRATEGY_PREPOST,
    selection_cfg: SelectionConfig = SelectionConfig(),
    classifier_family: str = classifiers.FAMILY_SVM,
    classifier_cfg=None,
    seed: int = 0,
    genders=None,
    modality: str = MODALITY_BOTH,
) -> BranchModel:
    """Fit one branch's masks and final classifier on aligned training rows.

    When per-row `genders` are supplied, any row of a different gender
    raises GenderLeak. The recorded fit_seconds covers exactly the
    selection fits plus the classifier fit.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    if modality not in MODALITIES:
        raise ValueError(f"unknown modality {modality!r}")
    speakers = list(speakers)
    if genders is not None and gender != GENDERLESS:
        stray = sorted({g for g in genders if g != gender})
        if stray:
            raise GenderLeak(
                f"{gender} branch received rows labelled {stray!r}"
            )

    face = None if face_X is None else np.atleast_2d(np.asarray(face_X, np.float64))
    voice = None if voice_X is None else np.atleast_2d(np.asarray(voice_X, np.float64))
    use_face = modality in (MODALITY_BOTH, MODALITY_FACE)
    use_voice = modality in (MODALITY_BOTH, MODALITY_VOICE)
    if use_face and face is None:
        raise DataError(f"modality {modality!r} requires face features")
    if use_voice and voice is None:
        raise DataError(f"modality {modality!r} requires voice features")

    started = time.perf_counter()
    face_mask = voice_mask = fused_mask = None
    parts = []
    if use_face:
        if _uses_pre_masks(strategy):
            face_mask, reduced = fit_select(
                face, speakers, selection_cfg, derive_seed(seed, "fs", "face")
            )
            parts.append(reduced)
        else:
            parts.append(face)
    if use_voice:
        if _uses_pre_masks(strategy):
            voice_mask, reduced = fit_select(
                voice, speakers, selection_cfg, derive_seed(seed, "fs", "voice")
            )
            parts.append(reduced)
        else:
            parts.append(voice)
    fused = parts[0] if len(parts) == 1 else np.hstack(parts)
    if _uses_post_mask(strategy):
        fused_mask, fused = fit_select(
            fused, speakers, selection_cfg, derive_seed(seed, "fs", "fused")
        )
    classifier = classifiers.train(
        classifier_family, fused, speakers,
        cfg=classifier_cfg, seed=derive_seed(seed, "classifier"),
    )
    fit_seconds = time.perf_counter() - started

    return BranchModel(
        gender=gender,
        strategy=strategy,
        modality=modality,
        face_dim=None if face is None else face.shape[1],
        voice_dim=None if voice is None else voice.shape[1],
        face_mask=face_mask,
        voice_mask=voice_mask,
        fused_mask=fused_mask,
        classifier=classifier,
        fit_seconds=fit_seconds,
    )


def _training_rows(manifest: Manifest) -> np.ndarray:
    rows = manifest.split_indices(TRAIN)
    if rows.size == 0:
        if any(r.split != "" for r in manifest.records):
            raise DataError("manifest carries split assignments but no train rows")
        rows = np.arange(len(manifest))  # fully unassigned: train on everything
    if rows.size == 0:
        raise DataError("manifest has no training rows")
    return rows


def train_full(
    manifest: Manifest,
    face_source,
    voice_source,
    strategy: str = STRATEGY_PREPOST,
    selection_cfg: SelectionConfig = SelectionConfig(),
    classifier_family: str = classifiers.FAMILY_SVM,
    classifier_cfg=None,
    gate_family: str = classifiers.FAMILY_SVM,
    gate_cfg=None,
    seed: int = 0,
    genderless: bool = False,
    modality: str = MODALITY_BOTH,
) -> PipelineModel:
    """Train gate and branches from a manifest plus aligned feature sources.

    Sources may be EmbeddingTables (aligned here) or matrices already in
    manifest row order. Training-time routing uses true gender labels;
    branch genders with fewer than two speakers raise DegenerateBranch.
    """
    face_X = None if face_source is None else _as_matrix(face_source, manifest)
    voice_X = None if voice_source is None else _as_matrix(voice_source, manifest)
    rows = _training_rows(manifest)
    records = [manifest.records[i] for i in rows]
    speakers = [r.speaker_label for r in records]
    genders = [r.gender_label for r in records]

    face_train = None if face_X is None else face_X[rows]
    voice_train = None if voice_X is None else voice_X[rows]

    feature_spec = {
        "face_dim": None if face_X is None else int(face_X.shape[1]),
        "voice_dim": None if voice_X is None else int(voice_X.shape[1]),
        "modality": modality,
    }

    if genderless:
        branch = train_branch(
            GENDERLESS, face_train, voice_train, speakers, strategy,
            selection_cfg, classifier_family, classifier_cfg,
            seed=derive_seed(seed, "branch", GENDERLESS),
            genders=genders, modality=modality,
        )
        return PipelineModel(
            gate=None, branches={GENDERLESS: branch}, strategy=strategy,
            modality=modality, seed=seed, feature_spec=feature_spec,
        )

    if face_X is None:
        raise DataError("the gated pipeline requires face features for the gate")
    for gender in GENDERS:
        gender_speakers = {s for s, g in zip(speakers, genders) if g == gender}
        if len(gender_speakers) < 2:
            raise DegenerateBranch(
                f"gender {gender!r} has {len(gender_speakers)} speakers in "
                "training data, need >= 2"
            )

    gate_started = time.perf_counter()
    gate = train_gate(
        face_train, genders, family=gate_family, cfg=gate_cfg,
        seed=derive_seed(seed, "gate"),
    )
    gate_seconds = time.perf_counter() - gate_started

    branches = {}
    for gender in (MALE, FEMALE):
        member = np.array([g == gender for g in genders])
        branches[gender] = train_branch(
            gender,
            None if face_train is None else face_train[member],
            None if voice_train is None else voice_train[member],
            [s for s, keep in zip(speakers, member) if keep],
            strategy, selection_cfg, classifier_family, classifier_cfg,
            seed=derive_seed(seed, "branch", gender),
            genders=[gender] * int(member.sum()), modality=modality,
        )

    return PipelineModel(
        gate=gate, branches=branches, strategy=strategy, modality=modality,
        seed=seed, feature_spec=feature_spec, gate_seconds=gate_seconds,
    )


def _check_predict_widths(model: PipelineModel, face, voice):
    spec = model.feature_spec
    if model.modality in (MODALITY_BOTH, MODALITY_FACE) or not model.genderless:
        if face is None:
            raise DimensionMismatch("model requires face features")
        if face.shape[1] != spec["face_dim"]:
            raise DimensionMismatch(
                f"face width {face.shape[1]}, model expects {spec['face_dim']}"
            )
    if model.modality in (MODALITY_BOTH, MODALITY_VOICE):
        if voice is None:
            raise DimensionMismatch("model requires voice features")
        if voice.shape[1] != spec["voice_dim"]:
            raise DimensionMismatch(
                f"voice width {voice.shape[1]}, model expects {spec['voice_dim']}"
            )


def predict_identities(
    model: PipelineModel, face_X, voice_X
) -> tuple[np.ndarray, np.ndarray]:
    """Batch identity prediction. Returns (speakers, routed_genders).

    Exactly one branch is consulted per row; in the gated pipeline the
    gate's prediction picks it, so a gate error forces an identity error.
    Genderless models report an empty-string gender.
    """
    face = None if face_X is None else np.atleast_2d(np.asarray(face_X, np.float64))
    voice = None if voice_X is None else np.atleast_2d(np.asarray(voice_X, np.float64))
    n = len(face) if face is not None else len(voice)
    _check_predict_widths(model, face, voice)

    speakers = np.empty(n, dtype=object)
    if model.genderless:
        branch = model.branches[GENDERLESS]
        fused = fuse(
            face if branch.face_dim is not None else None,
            voice if branch.voice_dim is not None else None,
            branch,
        )
        speakers[:] = classifiers.predict(branch.classifier, fused)
        return speakers, np.array([""] * n, dtype=object)

    routed = classifiers.predict(model.gate, face)
    genders = np.asarray(routed, dtype=object)
    for gender, branch in model.branches.items():
        member = np.flatnonzero(genders == gender)
        if member.size == 0:
            continue
        fused = fuse(
            None if face is None else face[member],
            None if voice is None else voice[member],
            branch,
        )
        speakers[member] = classifiers.predict(branch.classifier, fused)
    return speakers, genders


def predict_identity(model: PipelineModel, face_row, voice_row):
    """Single-sample prediction: (speaker, routed_gender, identity scores)."""
    face = None if face_row is None else np.atleast_2d(np.asarray(face_row, np.float64))
    voice = None if voice_row is None else np.atleast_2d(
        np.asarray(voice_row, np.float64)
    )
    _check_predict_widths(model, face, voice)
    if model.genderless:
        branch = model.branches[GENDERLESS]
        gender = ""
    else:
        gender = str(classifiers.predict(model.gate, face)[0])
        branch = model.branches[gender]
    fused = fuse(
        face if branch.face_dim is not None else None,
        voice if branch.voice_dim is not None else None,
        branch,
    )
    scores = classifiers.predict_scores(branch.classifier, fused)
    speaker = branch.classifier.label_vocab[int(np.argmax(scores[0]))]
    return speaker, gender, scores[0]


# -- persistence ----------------------------------------------------------------

_PIPELINE_VERSION = 1


def save_pipeline(model: PipelineModel, out_dir: str | Path) -> None:
    """Write the model directory: pipeline.json, gate files, branch dirs."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    meta = {
        "version": _PIPELINE_VERSION,
        "mode": "genderless" if model.genderless else "gated",
        "strategy": model.strategy,
        "modality": model.modality,
        "seed": model.seed,
        "feature_spec": model.feature_spec,
        "fit_seconds": {
            "gate": model.gate_seconds,
            "branches": {
                name: branch.fit_seconds for name, branch in model.branches.items()
            },
        },
        "branches": sorted(model.branches),
    }
    (out_dir / "pipeline.json").write_text(
        json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    if model.gate is not None:
        save_model(model.gate, out_dir / "gate")
    for name, branch in model.branches.items():
        branch_dir = out_dir / "branches" / name
        branch_dir.mkdir(parents=True, exist_ok=True)
        info = {
            "gender": branch.gender,
            "strategy": branch.strategy,
            "modality": branch.modality,
            "face_dim": branch.face_dim,
            "voice_dim": branch.voice_dim,
            "fit_seconds": branch.fit_seconds,
            "fused_width": branch.fused_width,
        }
        (branch_dir / "branch.json").write_text(
            json.dumps(info, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        save_model(branch.classifier, branch_dir / "classifier")
        for mask, filename in (
            (branch.face_mask, "face_mask.json"),
            (branch.voice_mask, "voice_mask.json"),
            (branch.fused_mask, "fused_mask.json"),
        ):
            if mask is not None:
                save_mask(mask, branch_dir / filename)


def load_pipeline(out_dir: str | Path) -> PipelineModel:
    out_dir = Path(out_dir)
    meta = json.loads((out_dir / "pipeline.json").read_text(encoding="utf-8"))
    gate = None
    if meta["mode"] == "gated":
        gate = load_model(out_dir / "gate")
    branches = {}
    for name in meta["branches"]:
        branch_dir = out_dir / "branches" / name
        info = json.loads((branch_dir / "branch.json").read_text(encoding="utf-8"))
        masks = {}
        for key, filename in (
            ("face_mask", "face_mask.json"),
            ("voice_mask", "voice_mask.json"),
            ("fused_mask", "fused_mask.json"),
        ):
            mask_path = branch_dir / filename
            masks[key] = load_mask(mask_path) if mask_path.exists() else None
        branches[name] = BranchModel(
            gender=info["gender"],
            strategy=info["strategy"],
            modality=info["modality"],
            face_dim=info["face_dim"],
            voice_dim=info["voice_dim"],
            face_mask=masks["face_mask"],
            voice_mask=masks["voice_mask"],
            fused_mask=masks["fused_mask"],
            classifier=load_model(branch_dir / "classifier"),
            fit_seconds=info["fit_seconds"],
        )
    return PipelineModel(
        gate=gate,
        branches=branches,
        strategy=meta["strategy"],
        modality=meta["modality"],
        seed=meta["seed"],
        feature_spec=meta["feature_spec"],
        gate_seconds=meta["fit_seconds"]["gate"],
    )
