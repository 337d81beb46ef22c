import numpy as np
import pytest

from gatefuse.classifiers import SvmConfig
from gatefuse.embeddings import align
from gatefuse.errors import (
    DegenerateBranch,
    DegenerateLabels,
    DimensionMismatch,
    GenderLeak,
)
from gatefuse.feature_selection import SelectionConfig
from gatefuse.manifest import FEMALE, MALE, Manifest, TEST, TRAIN
from gatefuse.pipeline import (
    BranchModel,
    GENDERLESS,
    MODALITY_FACE,
    STRATEGIES,
    STRATEGY_PRE,
    STRATEGY_PREPOST,
    STRATEGY_SIMPLE,
    fuse,
    load_pipeline,
    predict_identities,
    predict_identity,
    save_pipeline,
    train_branch,
    train_full,
    train_gate,
)
from gatefuse.synth import SynthSpec, generate_corpus

SMALL_SPEC = SynthSpec(
    n_speakers=8,
    n_male=4,
    samples_per_speaker=20,
    face_informative=8,
    face_gate_dims=2,
    face_noise_dims=6,
    voice_informative=8,
    voice_noise_dims=8,
    face_blind_fraction=0.5,
    voice_blind_fraction=0.5,
    seed=42,
)

FAST_SELECTION = SelectionConfig(epochs=10)
FAST_SVM = SvmConfig(epochs=10)


@pytest.fixture(scope="module")
def corpus():
    return generate_corpus(SMALL_SPEC)


@pytest.fixture(scope="module")
def trained(corpus):
    return train_full(
        corpus.manifest, corpus.face, corpus.voice,
        strategy=STRATEGY_PREPOST, selection_cfg=FAST_SELECTION,
        classifier_cfg=FAST_SVM, seed=7,
    )


def branch_inputs(corpus, gender):
    manifest = corpus.manifest
    rows = [
        i for i, r in enumerate(manifest.records)
        if r.split == TRAIN and r.gender_label == gender
    ]
    face = align(corpus.face, manifest)[rows]
    voice = align(corpus.voice, manifest)[rows]
    speakers = [manifest.records[i].speaker_label for i in rows]
    return face, voice, speakers


class TestTrainGate:
    def test_separable_genders_classify_perfectly(self, corpus):
        manifest = corpus.manifest
        face = align(corpus.face, manifest)
        train_rows = manifest.split_indices(TRAIN)
        test_rows = manifest.split_indices(TEST)
        genders = [r.gender_label for r in manifest.records]
        gate = train_gate(face[train_rows], [genders[i] for i in train_rows], seed=0)
        from gatefuse.classifiers import predict

        got = predict(gate, face[test_rows])
        want = np.array([genders[i] for i in test_rows])
        assert np.mean(got == want) == 1.0

    def test_one_gender_rejected(self, corpus):
        face, _, _ = branch_inputs(corpus, MALE)
        with pytest.raises(DegenerateLabels):
            train_gate(face, [MALE] * len(face))

    def test_gate_vocab_is_both_genders(self, trained):
        assert trained.gate.label_vocab == sorted([MALE, FEMALE])


class TestFuse:
    def test_simple_concat_order(self):
        branch = BranchModel(
            gender=MALE, strategy=STRATEGY_SIMPLE, modality="both",
            face_dim=4, voice_dim=3, face_mask=None, voice_mask=None,
            fused_mask=None, classifier=None, fit_seconds=0.0,
        )
        face = np.array([1.0, 2.0, 3.0, 4.0])
        voice = np.array([5.0, 6.0, 7.0])
        np.testing.assert_array_equal(
            fuse(face, voice, branch), [1, 2, 3, 4, 5, 6, 7]
        )

    def test_width_mismatch(self):
        branch = BranchModel(
            gender=MALE, strategy=STRATEGY_SIMPLE, modality="both",
            face_dim=4, voice_dim=3, face_mask=None, voice_mask=None,
            fused_mask=None, classifier=None, fit_seconds=0.0,
        )
        with pytest.raises(DimensionMismatch):
            fuse(np.ones(5), np.ones(3), branch)

    @pytest.mark.parametrize("strategy", STRATEGIES)
    def test_width_chain_matches_classifier(self, corpus, strategy):
        face, voice, speakers = branch_inputs(corpus, MALE)
        branch = train_branch(
            MALE, face, voice, speakers, strategy,
            selection_cfg=FAST_SELECTION, classifier_cfg=FAST_SVM, seed=0,
        )
        fused = fuse(face[:3], voice[:3], branch)
        assert fused.shape == (3, branch.classifier.input_dim)


class TestTrainBranch:
    def test_simple_concat_has_no_masks(self, corpus):
        face, voice, speakers = branch_inputs(corpus, FEMALE)
        branch = train_branch(
            FEMALE, face, voice, speakers, STRATEGY_SIMPLE,
            classifier_cfg=FAST_SVM, seed=1,
        )
        assert branch.face_mask is None
        assert branch.voice_mask is None
        assert branch.fused_mask is None
        assert branch.classifier.input_dim == face.shape[1] + voice.shape[1]

    def test_pre_post_width_chain_decreases(self, corpus):
        face, voice, speakers = branch_inputs(corpus, MALE)
        branch = train_branch(
            MALE, face, voice, speakers, STRATEGY_PREPOST,
            selection_cfg=FAST_SELECTION, classifier_cfg=FAST_SVM, seed=2,
        )
        pre_width = branch.face_mask.width + branch.voice_mask.width
        assert pre_width < face.shape[1] + voice.shape[1]
        assert branch.fused_mask.width <= pre_width
        assert branch.classifier.input_dim == branch.fused_mask.width

    def test_branch_vocab_is_gender_speakers(self, corpus):
        face, voice, speakers = branch_inputs(corpus, MALE)
        branch = train_branch(
            MALE, face, voice, speakers, STRATEGY_SIMPLE,
            classifier_cfg=FAST_SVM, seed=3,
        )
        assert branch.classifier.label_vocab == sorted(set(speakers))

    def test_gender_leak_detected(self, corpus):
        face, voice, speakers = branch_inputs(corpus, MALE)
        genders = [MALE] * len(speakers)
        genders[0] = FEMALE
        with pytest.raises(GenderLeak):
            train_branch(
                MALE, face, voice, speakers, STRATEGY_SIMPLE,
                classifier_cfg=FAST_SVM, genders=genders,
            )


class TestTrainFull:
    def test_two_branch_structure(self, trained):
        assert set(trained.branches) == {MALE, FEMALE}
        for gender, branch in trained.branches.items():
            assert branch.gender == gender
            assert len(branch.classifier.label_vocab) == 4

    def test_single_gender_manifest_rejected(self, corpus):
        records = [
            r for r in corpus.manifest.records if r.gender_label == MALE
        ]
        males = Manifest(records)
        with pytest.raises(DegenerateBranch):
            train_full(
                males, corpus.face, corpus.voice,
                selection_cfg=FAST_SELECTION, classifier_cfg=FAST_SVM,
            )

    def test_deterministic_predictions(self, corpus):
        manifest = corpus.manifest
        face = align(corpus.face, manifest)
        voice = align(corpus.voice, manifest)
        test_rows = manifest.split_indices(TEST)
        runs = []
        for _ in range(2):
            model = train_full(
                manifest, corpus.face, corpus.voice,
                strategy=STRATEGY_PRE, selection_cfg=FAST_SELECTION,
                classifier_cfg=FAST_SVM, seed=11,
            )
            speakers, genders = predict_identities(
                model, face[test_rows], voice[test_rows]
            )
            runs.append((speakers.tolist(), genders.tolist()))
        assert runs[0] == runs[1]

    def test_genderless_mode(self, corpus):
        model = train_full(
            corpus.manifest, corpus.face, corpus.voice,
            strategy=STRATEGY_SIMPLE, classifier_cfg=FAST_SVM,
            seed=5, genderless=True,
        )
        assert model.gate is None
        assert set(model.branches) == {GENDERLESS}
        assert len(model.branches[GENDERLESS].classifier.label_vocab) == 8


class TestPredictIdentity:
    def test_routing_stays_in_gender_vocab(self, corpus, trained):
        manifest = corpus.manifest
        face = align(corpus.face, manifest)
        voice = align(corpus.voice, manifest)
        for i in manifest.split_indices(TEST)[:20]:
            speaker, gender, scores = predict_identity(trained, face[i], voice[i])
            assert speaker in trained.branches[gender].classifier.label_vocab
            assert len(scores) == 4

    def test_held_out_accuracy_high(self, corpus, trained):
        manifest = corpus.manifest
        face = align(corpus.face, manifest)
        voice = align(corpus.voice, manifest)
        rows = manifest.split_indices(TEST)
        speakers, _ = predict_identities(trained, face[rows], voice[rows])
        truth = np.array([manifest.records[i].speaker_label for i in rows])
        assert np.mean(speakers == truth) >= 0.9

    def test_misgendered_probe_forces_identity_error(self, corpus, trained):
        manifest = corpus.manifest
        face = align(corpus.face, manifest)
        voice = align(corpus.voice, manifest)
        female_rows = [
            i for i in manifest.split_indices(TEST)
            if manifest.records[i].gender_label == FEMALE
        ]
        i = female_rows[0]
        probe = face[i].copy()
        gate_lo = SMALL_SPEC.face_informative
        gate_hi = gate_lo + SMALL_SPEC.face_gate_dims
        probe[gate_lo:gate_hi] = 50.0  # push into the male gate region
        speaker, gender, _ = predict_identity(trained, probe, voice[i])
        assert gender == MALE
        assert speaker in trained.branches[MALE].classifier.label_vocab
        assert speaker != manifest.records[i].speaker_label

    def test_width_mismatch(self, trained):
        with pytest.raises(DimensionMismatch):
            predict_identity(trained, np.ones(3), np.ones(3))

    def test_face_only_modality(self, corpus):
        model = train_full(
            corpus.manifest, corpus.face, corpus.voice,
            strategy=STRATEGY_PRE, selection_cfg=FAST_SELECTION,
            classifier_cfg=FAST_SVM, seed=9, modality=MODALITY_FACE,
        )
        manifest = corpus.manifest
        face = align(corpus.face, manifest)
        rows = manifest.split_indices(TEST)
        speakers, genders = predict_identities(model, face[rows], None)
        assert len(speakers) == len(rows)


class TestPersistence:
    def test_save_load_round_trip(self, corpus, trained, tmp_path):
        manifest = corpus.manifest
        face = align(corpus.face, manifest)
        voice = align(corpus.voice, manifest)
        rows = manifest.split_indices(TEST)
        before, before_genders = predict_identities(trained, face[rows], voice[rows])
        save_pipeline(trained, tmp_path / "model")
        back = load_pipeline(tmp_path / "model")
        after, after_genders = predict_identities(back, face[rows], voice[rows])
        assert before.tolist() == after.tolist()
        assert before_genders.tolist() == after_genders.tolist()
        assert back.strategy == trained.strategy
        assert back.feature_spec == trained.feature_spec

    def test_model_directory_layout(self, trained, tmp_path):
        save_pipeline(trained, tmp_path / "model")
        root = tmp_path / "model"
        assert (root / "pipeline.json").exists()
        assert (root / "gate.json").exists()
        assert (root / "gate.msrm").exists()
        for gender in (MALE, FEMALE):
            branch = root / "branches" / gender
            assert (branch / "classifier.json").exists()
            assert (branch / "face_mask.json").exists()
            assert (branch / "voice_mask.json").exists()
            assert (branch / "fused_mask.json").exists()
