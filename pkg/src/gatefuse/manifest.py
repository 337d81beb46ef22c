"""Sample catalog: records, label spaces, and train/val/test splitting.

The manifest is a CSV with header ``sample_id,face_path,audio_path,speaker,
gender,split``. An empty split cell means unassigned; explicit splits in the
file win over :func:`assign_splits`, which refuses already-assigned input.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import (
    BadRatios,
    DuplicateId,
    InconsistentGender,
    ParseError,
    SplitCoverage,
)

MALE = "male"
FEMALE = "female"
GENDERS = (MALE, FEMALE)

TRAIN = "train"
VAL = "val"
TEST = "test"
UNASSIGNED = ""
SPLITS = (TRAIN, VAL, TEST)

CSV_HEADER = ["sample_id", "face_path", "audio_path", "speaker", "gender", "split"]

_GENDER_ALIASES = {"m": MALE, "male": MALE, "f": FEMALE, "female": FEMALE}


def parse_gender(text: str) -> str:
    gender = _GENDER_ALIASES.get(text.strip().lower())
    if gender is None:
        raise ValueError(f"unknown gender value {text!r}")
    return gender


@dataclass(frozen=True)
class SampleRecord:
    sample_id: str
    face_path: str
    audio_path: str
    speaker_label: str
    gender_label: str
    split: str = UNASSIGNED


class Manifest:
    """Immutable, validated collection of :class:`SampleRecord`.

    Validation enforces unique sample ids, a single gender per speaker, and
    (when every record carries a split) that each speaker occurs in train.
    """

    def __init__(self, records):
        records = tuple(records)
        seen_ids = set()
        speaker_gender: dict[str, str] = {}
        for rec in records:
            if rec.sample_id in seen_ids:
                raise DuplicateId(f"duplicate sample_id {rec.sample_id!r}")
            seen_ids.add(rec.sample_id)
            if rec.gender_label not in GENDERS:
                raise ParseError(
                    f"record {rec.sample_id!r}: bad gender {rec.gender_label!r}"
                )
            if rec.split not in SPLITS and rec.split != UNASSIGNED:
                raise ParseError(f"record {rec.sample_id!r}: bad split {rec.split!r}")
            known = speaker_gender.get(rec.speaker_label)
            if known is not None and known != rec.gender_label:
                raise InconsistentGender(
                    f"speaker {rec.speaker_label!r} appears as both genders"
                )
            speaker_gender[rec.speaker_label] = rec.gender_label

        self._records = records
        self._speaker_gender = speaker_gender
        self.speaker_vocab = tuple(sorted(speaker_gender))
        self.gender_counts = {
            g: sum(1 for sg in speaker_gender.values() if sg == g) for g in GENDERS
        }

        if records and all(r.split != UNASSIGNED for r in records):
            in_train = {r.speaker_label for r in records if r.split == TRAIN}
            missing = [s for s in self.speaker_vocab if s not in in_train]
            if missing:
                raise SplitCoverage(
                    f"speakers never in train split: {', '.join(missing)}"
                )

    @property
    def records(self) -> tuple[SampleRecord, ...]:
        return self._records

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self):
        return iter(self._records)

    def gender_of(self, speaker: str) -> str:
        return self._speaker_gender[speaker]

    def sample_ids(self) -> list[str]:
        return [r.sample_id for r in self._records]

    def split_indices(self, split: str) -> np.ndarray:
        """Row indices (manifest order) of records assigned to `split`."""
        return np.array(
            [i for i, r in enumerate(self._records) if r.split == split], dtype=int
        )

    def all_assigned(self) -> bool:
        return all(r.split != UNASSIGNED for r in self._records)


def load_manifest(path: str | Path) -> Manifest:
    """Load and validate a manifest CSV.

    Raises ParseError (with the offending line number) on malformed rows,
    DuplicateId, InconsistentGender, or SplitCoverage on invariant violations.
    """
    path = Path(path)
    records = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty manifest") from None
        if [h.strip() for h in header] != CSV_HEADER:
            raise ParseError(
                f"{path}:1: bad header, expected {','.join(CSV_HEADER)}"
            )
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise ParseError(f"{path}:{line}: expected 6 fields, got {len(row)}")
            sample_id, face_path, audio_path, speaker, gender, split = (
                v.strip() for v in row
            )
            if not sample_id or not speaker:
                raise ParseError(f"{path}:{line}: empty sample_id or speaker")
            try:
                gender = parse_gender(gender)
            except ValueError as exc:
                raise ParseError(f"{path}:{line}: {exc}") from None
            split = split.lower()
            if split not in SPLITS and split != UNASSIGNED:
                raise ParseError(f"{path}:{line}: bad split value {split!r}")
            records.append(
                SampleRecord(sample_id, face_path, audio_path, speaker, gender, split)
            )
    return Manifest(records)


def save_manifest(manifest: Manifest, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in manifest.records:
            writer.writerow(
                [r.sample_id, r.face_path, r.audio_path, r.speaker_label,
                 r.gender_label, r.split]
            )


def _speaker_rng(seed: int, speaker: str) -> np.random.Generator:
    # stable across processes: never use the salted builtin hash()
    digest = hashlib.blake2b(speaker.encode("utf-8"), digest_size=8).digest()
    return np.random.default_rng(
        np.random.SeedSequence([seed, int.from_bytes(digest, "little")])
    )


def _split_counts(n: int, ratios: tuple[float, float, float]) -> list[int]:
    """Largest-remainder split of n samples, each split within +-1 of n*ratio.

    Splits with a positive ratio are then guaranteed at least one sample
    when n permits, donating from the split with the largest surplus.
    """
    ideal = [n * r for r in ratios]
    counts = [int(np.floor(v)) for v in ideal]
    remainders = [v - c for v, c in zip(ideal, counts)]
    for _ in range(n - sum(counts)):
        k = max(range(3), key=lambda i: (remainders[i], -i))
        counts[k] += 1
        remainders[k] = -1.0
    positive = [i for i in range(3) if ratios[i] > 0]
    if n >= len(positive):
        for i in positive:
            while counts[i] == 0:
                donor = max(
                    (j for j in range(3) if counts[j] >= 2),
                    key=lambda j: counts[j] - ideal[j],
                )
                counts[donor] -= 1
                counts[i] += 1
    return counts


def assign_splits(
    manifest: Manifest, ratios: tuple[float, float, float], seed: int
) -> Manifest:
    """Per-speaker stratified split assignment, a pure function of inputs.

    Every record must be unassigned, every speaker needs >= 3 samples, and
    ratios must sum to 1 (train ratio strictly positive so the train-coverage
    invariant can hold). Each speaker's samples are shuffled with a generator
    derived from (seed, speaker) and dealt train/val/test by largest-remainder
    counts.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise BadRatios(f"ratios {ratios} sum to {sum(ratios)!r}, expected 1")
    if any(r < 0 for r in ratios):
        raise BadRatios(f"ratios {ratios} contain a negative fraction")
    if ratios[0] <= 0:
        raise BadRatios("train ratio must be positive")
    if not all(r.split == UNASSIGNED for r in manifest.records):
        raise BadRatios("manifest already carries split assignments")

    by_speaker: dict[str, list[int]] = {}
    for i, rec in enumerate(manifest.records):
        by_speaker.setdefault(rec.speaker_label, []).append(i)
    for speaker, idxs in by_speaker.items():
        if len(idxs) < 3:
            raise BadRatios(
                f"speaker {speaker!r} has {len(idxs)} samples, need >= 3 to split"
            )

    assignment = [TRAIN] * len(manifest)
    for speaker in manifest.speaker_vocab:
        idxs = by_speaker[speaker]
        order = _speaker_rng(seed, speaker).permutation(len(idxs))
        n_train, n_val, _ = _split_counts(len(idxs), tuple(ratios))
        for pos, j in enumerate(order):
            if pos < n_train:
                split = TRAIN
            elif pos < n_train + n_val:
                split = VAL
            else:
                split = TEST
            assignment[idxs[j]] = split

    return Manifest(
        replace(rec, split=assignment[i]) for i, rec in enumerate(manifest.records)
    )


def filter_by_gender(manifest: Manifest, gender: str) -> Manifest:
    """Records of one gender only; speaker vocab is rebuilt. Empty is legal."""
    if gender not in GENDERS:
        raise ValueError(f"gender must be one of {GENDERS}, got {gender!r}")
    return Manifest(r for r in manifest.records if r.gender_label == gender)
