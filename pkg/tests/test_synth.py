import numpy as np
import pytest

from gatefuse.errors import ConfigError
from gatefuse.manifest import FEMALE, MALE
from gatefuse.synth import (
    SynthSpec,
    generate_corpus,
    make_informative_noise,
    with_noise_fraction,
)

SPEC = SynthSpec(n_speakers=40, n_male=20, samples_per_speaker=50, seed=1)


class TestGenerateCorpus:
    def test_row_and_speaker_counts(self):
        corpus = generate_corpus(SPEC)
        assert len(corpus.manifest) == 2000
        assert len(corpus.manifest.speaker_vocab) == 40
        assert corpus.manifest.gender_counts == {MALE: 20, FEMALE: 20}
        assert len(corpus.face) == 2000
        assert corpus.face.dim == SPEC.face_dim
        assert corpus.voice.dim == SPEC.voice_dim

    def test_complementary_pairs_by_construction(self):
        corpus = generate_corpus(SPEC)
        assert corpus.face_blind_pairs and corpus.voice_blind_pairs
        manifest = corpus.manifest
        rows_of = {}
        for i, r in enumerate(manifest.records):
            rows_of.setdefault(r.speaker_label, []).append(i)
        face = np.array([corpus.face.entries[r.sample_id] for r in manifest.records])
        voice = np.array([corpus.voice.entries[r.sample_id] for r in manifest.records])
        a, b = corpus.face_blind_pairs[0]
        # identical face centers, distinct voice centers: compare class means
        fa = face[rows_of[a], : SPEC.face_informative].mean(axis=0)
        fb = face[rows_of[b], : SPEC.face_informative].mean(axis=0)
        va = voice[rows_of[a], : SPEC.voice_informative].mean(axis=0)
        vb = voice[rows_of[b], : SPEC.voice_informative].mean(axis=0)
        assert np.linalg.norm(fa - fb) < 1.0  # same center, sample noise only
        assert np.linalg.norm(va - vb) > 2.0

    def test_gate_offset_separates_genders(self):
        corpus = generate_corpus(SPEC)
        lo = SPEC.face_informative
        hi = lo + SPEC.face_gate_dims
        by_gender = {MALE: [], FEMALE: []}
        for r in corpus.manifest.records:
            by_gender[r.gender_label].append(
                corpus.face.entries[r.sample_id][lo:hi].mean()
            )
        assert min(by_gender[MALE]) > max(by_gender[FEMALE])

    def test_deterministic(self):
        a = generate_corpus(SPEC)
        b = generate_corpus(SPEC)
        assert a.manifest.records == b.manifest.records
        for sid in list(a.face.entries)[:50]:
            np.testing.assert_array_equal(a.face.entries[sid], b.face.entries[sid])
            np.testing.assert_array_equal(a.voice.entries[sid], b.voice.entries[sid])

    def test_split_sizes(self):
        corpus = generate_corpus(SPEC)
        m = corpus.manifest
        assert len(m.split_indices("train")) == 40 * 35
        assert len(m.split_indices("val")) + len(m.split_indices("test")) == 40 * 15

    def test_tiny_gender_groups_degrade_gracefully(self):
        # 3 speakers per gender cannot host 0.4+0.4 blind pairs; none are made
        spec = SynthSpec(n_speakers=6, n_male=3, samples_per_speaker=8, seed=0)
        corpus = generate_corpus(spec)
        assert corpus.face_blind_pairs == []
        assert corpus.voice_blind_pairs == []
        assert len(corpus.manifest) == 48

    def test_invalid_specs_are_config_errors(self):
        with pytest.raises(ConfigError):
            generate_corpus(SynthSpec(n_speakers=4, n_male=4))
        with pytest.raises(ConfigError):
            with_noise_fraction(SPEC, 1.5)
        with pytest.raises(ConfigError):
            generate_corpus(
                SynthSpec(face_blind_fraction=0.7, voice_blind_fraction=0.7)
            )


class TestNoiseFraction:
    def test_resize_arithmetic(self):
        spec = with_noise_fraction(SPEC, 0.75)
        face_signal = spec.face_informative + spec.face_gate_dims
        assert spec.face_noise_dims == 3 * face_signal
        assert spec.voice_noise_dims == 3 * spec.voice_informative

    def test_informative_noise_generator(self):
        X, y, informative = make_informative_noise(
            n_samples=200, n_dims=50, n_informative=5, n_classes=4, seed=0
        )
        assert X.shape == (200, 50)
        assert len(informative) == 5
        assert set(y.tolist()) == {0, 1, 2, 3}
        X2, y2, inf2 = make_informative_noise(
            n_samples=200, n_dims=50, n_informative=5, n_classes=4, seed=0
        )
        np.testing.assert_array_equal(X, X2)
        np.testing.assert_array_equal(informative, inf2)
