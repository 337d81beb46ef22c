"""Gender-gated dual-modality speaker identification toolkit.

A library plus CLI covering the full pipeline: audio feature extraction
(MFCC, delta-MFCC, filterbank, spectrogram, waveform raster), external
embedding ingestion, two-phase L1 linear-SVM feature selection, late
fusion behind a binary gender gate, four classifier families, and an
ablation/timing harness with figure-rendering report writers.
"""

from .audio import (
    AudioClip,
    FrontEnd,
    dmfcc_features,
    fbank_features,
    load_wav,
    mfcc_features,
    spectrogram_image,
    waveform_raster,
)
from .classifiers import (
    ClassifierModel,
    load_model,
    predict,
    predict_scores,
    save_model,
    train,
)
from .embeddings import EmbeddingTable, align, load_embeddings, save_embeddings, stub_embed
from .evaluation import (
    AblationGrid,
    EvalReport,
    TimingReport,
    evaluate,
    evaluate_pipeline,
    run_ablation,
    timing_comparison,
)
from .feature_selection import (
    SelectionConfig,
    SelectionMask,
    fit_l1_svm,
    fit_select,
    mask_from_fit,
    transform,
)
from .manifest import (
    Manifest,
    SampleRecord,
    assign_splits,
    filter_by_gender,
    load_manifest,
    save_manifest,
)
from .pipeline import (
    BranchModel,
    PipelineModel,
    fuse,
    load_pipeline,
    predict_identities,
    predict_identity,
    save_pipeline,
    train_branch,
    train_full,
    train_gate,
)
from .synth import SynthSpec, generate_corpus

__version__ = "0.1.0"

__all__ = [
    "AblationGrid",
    "AudioClip",
    "BranchModel",
    "ClassifierModel",
    "EmbeddingTable",
    "EvalReport",
    "FrontEnd",
    "Manifest",
    "PipelineModel",
    "SampleRecord",
    "SelectionConfig",
    "SelectionMask",
    "SynthSpec",
    "TimingReport",
    "align",
    "assign_splits",
    "dmfcc_features",
    "evaluate",
    "evaluate_pipeline",
    "fbank_features",
    "filter_by_gender",
    "fit_l1_svm",
    "fit_select",
    "fuse",
    "generate_corpus",
    "load_embeddings",
    "load_manifest",
    "load_model",
    "load_pipeline",
    "load_wav",
    "mask_from_fit",
    "mfcc_features",
    "predict",
    "predict_identities",
    "predict_identity",
    "predict_scores",
    "run_ablation",
    "save_embeddings",
    "save_manifest",
    "save_model",
    "save_pipeline",
    "spectrogram_image",
    "stub_embed",
    "timing_comparison",
    "train",
    "train_branch",
    "train_full",
    "train_gate",
    "transform",
    "waveform_raster",
]
