"""Seeded synthetic corpora: a desk-scale stand-in for real face/voice data.

Two generators live here. ``make_informative_noise`` plants a handful of
informative columns among pure noise for feature-selection checks.
``generate_corpus`` builds a full manifest plus face and voice tables with:

* per-speaker Gaussian cluster centers in designated informative dimensions,
* a gender-level offset in reserved gate-visible face dimensions,
* pure-noise dimensions on both modalities, and
* modality complementarity: some speaker pairs share identical face centers
  (separable only by voice) and others identical voice centers (separable
  only by face).

Everything is a pure function of its spec and seed.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .embeddings import EmbeddingTable
from .errors import ConfigError
from .manifest import FEMALE, MALE, Manifest, SampleRecord, assign_splits


def make_informative_noise(
    n_samples: int = 400,
    n_dims: int = 200,
    n_informative: int = 10,
    n_classes: int = 4,
    seed: int = 0,
    center_scale: float = 3.0,
    noise_sigma: float = 1.0,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Class clusters living in `n_informative` random columns, noise elsewhere.

    Returns (X, labels, informative_column_indices).
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, n_dims, n_classes]))
    informative = np.sort(rng.choice(n_dims, size=n_informative, replace=False))
    centers = rng.normal(0.0, center_scale, size=(n_classes, n_informative))
    labels = np.arange(n_samples) % n_classes
    X = rng.normal(0.0, noise_sigma, size=(n_samples, n_dims))
    X[:, informative] += centers[labels]
    return X, labels, informative


@dataclass(frozen=True)
class SynthSpec:
    """Corpus shape and separability knobs.

    ``gate_offset`` is the distance between gender means per gate dimension,
    in units of ``noise_sigma``; >= 6 makes the gate separable by
    construction. ``face_blind_fraction`` is the fraction of same-gender
    speakers grouped into pairs with identical face centers (and likewise
    for voice).
    """

    n_speakers: int = 40
    n_male: int = 20
    samples_per_speaker: int = 50
    face_informative: int = 24
    face_gate_dims: int = 4
    face_noise_dims: int = 44
    voice_informative: int = 24
    voice_noise_dims: int = 48
    center_scale: float = 1.0
    noise_sigma: float = 1.0
    gate_offset: float = 8.0
    face_blind_fraction: float = 0.4
    voice_blind_fraction: float = 0.4
    ratios: tuple[float, float, float] = (0.7, 0.15, 0.15)
    seed: int = 0

    @property
    def face_dim(self) -> int:
        return self.face_informative + self.face_gate_dims + self.face_noise_dims

    @property
    def voice_dim(self) -> int:
        return self.voice_informative + self.voice_noise_dims


@dataclass
class SynthCorpus:
    manifest: Manifest
    face: EmbeddingTable
    voice: EmbeddingTable
    face_blind_pairs: list[tuple[str, str]]
    voice_blind_pairs: list[tuple[str, str]]


def _blind_pairs(speakers: list[str], face_fraction: float, voice_fraction: float):
    """Disjoint consecutive pairs: first the face-blind ones, then voice-blind.

    Pair counts round down, so tiny gender groups simply get fewer (or no)
    complementary pairs instead of over-committing speakers.
    """
    n = len(speakers)
    if not 0.0 <= face_fraction + voice_fraction <= 1.0:
        raise ConfigError(
            f"blind fractions {face_fraction}+{voice_fraction} exceed 1"
        )
    n_face = int(face_fraction * n / 2.0)
    n_voice = int(voice_fraction * n / 2.0)
    face_pairs = [(speakers[2 * k], speakers[2 * k + 1]) for k in range(n_face)]
    offset = 2 * n_face
    voice_pairs = [
        (speakers[offset + 2 * k], speakers[offset + 2 * k + 1])
        for k in range(n_voice)
    ]
    return face_pairs, voice_pairs


def generate_corpus(spec: SynthSpec) -> SynthCorpus:
    if not 0 < spec.n_male < spec.n_speakers:
        raise ConfigError("need at least one speaker of each gender")
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed]))
    speakers = [f"spk{i:03d}" for i in range(spec.n_speakers)]
    gender_of = {
        s: (MALE if i < spec.n_male else FEMALE) for i, s in enumerate(speakers)
    }

    face_centers = {
        s: rng.normal(0.0, spec.center_scale, size=spec.face_informative)
        for s in speakers
    }
    voice_centers = {
        s: rng.normal(0.0, spec.center_scale, size=spec.voice_informative)
        for s in speakers
    }

    face_blind: list[tuple[str, str]] = []
    voice_blind: list[tuple[str, str]] = []
    for gender in (MALE, FEMALE):
        members = [s for s in speakers if gender_of[s] == gender]
        f_pairs, v_pairs = _blind_pairs(
            members, spec.face_blind_fraction, spec.voice_blind_fraction
        )
        for a, b in f_pairs:
            face_centers[b] = face_centers[a].copy()
        for a, b in v_pairs:
            voice_centers[b] = voice_centers[a].copy()
        face_blind.extend(f_pairs)
        voice_blind.extend(v_pairs)

    half_gate = spec.gate_offset * spec.noise_sigma / 2.0
    records = []
    face_rows = {}
    voice_rows = {}
    i = 0
    for speaker in speakers:
        gate_level = half_gate if gender_of[speaker] == MALE else -half_gate
        for _ in range(spec.samples_per_speaker):
            sid = f"s{i:05d}"
            face = rng.normal(0.0, spec.noise_sigma, size=spec.face_dim)
            face[: spec.face_informative] += face_centers[speaker]
            face[
                spec.face_informative : spec.face_informative + spec.face_gate_dims
            ] += gate_level
            voice = rng.normal(0.0, spec.noise_sigma, size=spec.voice_dim)
            voice[: spec.voice_informative] += voice_centers[speaker]
            face_rows[sid] = face.astype(np.float32)
            voice_rows[sid] = voice.astype(np.float32)
            records.append(
                SampleRecord(
                    sample_id=sid,
                    face_path=f"synth/face/{sid}",
                    audio_path=f"synth/voice/{sid}",
                    speaker_label=speaker,
                    gender_label=gender_of[speaker],
                )
            )
            i += 1

    manifest = assign_splits(Manifest(records), spec.ratios, spec.seed)
    return SynthCorpus(
        manifest=manifest,
        face=EmbeddingTable(spec.face_dim, face_rows, source_tag="synth-face"),
        voice=EmbeddingTable(spec.voice_dim, voice_rows, source_tag="synth-voice"),
        face_blind_pairs=face_blind,
        voice_blind_pairs=voice_blind,
    )


def with_noise_fraction(spec: SynthSpec, fraction: float) -> SynthSpec:
    """Resize noise dimensions so `fraction` of each modality's columns is noise."""
    if not 0.0 <= fraction < 1.0:
        raise ConfigError(f"noise fraction must be in [0, 1), got {fraction}")
    face_signal = spec.face_informative + spec.face_gate_dims
    voice_signal = spec.voice_informative
    face_noise = int(round(face_signal * fraction / (1.0 - fraction)))
    voice_noise = int(round(voice_signal * fraction / (1.0 - fraction)))
    return replace(spec, face_noise_dims=face_noise, voice_noise_dims=voice_noise)
