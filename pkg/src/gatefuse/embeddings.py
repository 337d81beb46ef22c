"""Externally computed embeddings (e.g. 4,096-dim CNN features) plus a
deterministic stub embedder so the pipeline is testable without any network.

Vectors are stored as float32, matching the on-disk format; ``align``
upcasts to float64 for downstream numerics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import binfmt
from .errors import CorruptFile, MissingEmbedding
from .manifest import Manifest

FC7_DIM = 4096


@dataclass
class EmbeddingTable:
    """Map of sample_id -> vector, all of one dimension.

    ``source_tag`` is in-memory provenance only (e.g. "fc7-face", "mfcc",
    "stub"); the binary format does not persist it.
    """

    dim: int
    entries: dict[str, np.ndarray] = field(default_factory=dict)
    source_tag: str = ""

    def __post_init__(self):
        for sample_id, vector in self.entries.items():
            vector = np.asarray(vector, dtype=np.float32)
            if vector.shape != (self.dim,):
                raise CorruptFile(
                    f"entry {sample_id!r} has {vector.size} values, expected {self.dim}"
                )
            if not np.all(np.isfinite(vector)):
                raise CorruptFile(f"entry {sample_id!r} contains non-finite values")
            self.entries[sample_id] = vector

    def __len__(self) -> int:
        return len(self.entries)


def load_embeddings(path: str | Path) -> EmbeddingTable:
    """Read a binary embedding table; the file stem becomes the source tag."""
    path = Path(path)
    entries, dim = binfmt.read_table(path)
    return EmbeddingTable(dim=dim, entries=entries, source_tag=path.stem)


def save_embeddings(table: EmbeddingTable, path: str | Path) -> None:
    binfmt.write_table(path, table.entries, table.dim)


def table_from_matrix(
    matrix: np.ndarray, sample_ids: list[str], source_tag: str = ""
) -> EmbeddingTable:
    """Wrap an aligned (n_samples x dim) matrix as a table keyed by id."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float32))
    if matrix.shape[0] != len(sample_ids):
        raise ValueError(
            f"{matrix.shape[0]} rows for {len(sample_ids)} sample ids"
        )
    entries = {sid: matrix[i] for i, sid in enumerate(sample_ids)}
    return EmbeddingTable(dim=matrix.shape[1], entries=entries, source_tag=source_tag)


_PROJECTION_CHUNK = 2048


def stub_embed_rows(rows: np.ndarray, dim: int, seed: int) -> np.ndarray:
    """Seeded random projection of each row followed by max(0, .).

    Structurally mimics a ReLU feature layer: nonnegative, sparse-ish.
    The projection stream depends only on (row width, dim, seed); repeated
    calls with identical arguments return identical output.
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    if not np.all(np.isfinite(rows)):
        raise ValueError("stub embedder requires finite input")
    n_pixels = rows.shape[1]
    rng = np.random.default_rng(np.random.SeedSequence([seed, dim, n_pixels]))
    out = np.zeros((rows.shape[0], dim))
    for start in range(0, n_pixels, _PROJECTION_CHUNK):
        stop = min(start + _PROJECTION_CHUNK, n_pixels)
        block = rng.standard_normal((stop - start, dim))
        out += rows[:, start:stop] @ block
    return np.maximum(out / np.sqrt(n_pixels), 0.0)


def stub_embed(image: np.ndarray, dim: int, seed: int) -> np.ndarray:
    """Embed one image (any shape); flattened row-major before projection."""
    return stub_embed_rows(np.asarray(image).reshape(1, -1), dim, seed)[0]


def align(table: EmbeddingTable, manifest: Manifest) -> np.ndarray:
    """Rows of `table` in manifest record order, as float64.

    Raises MissingEmbedding naming the absent ids.
    """
    missing = [r.sample_id for r in manifest.records if r.sample_id not in table.entries]
    if missing:
        shown = ", ".join(missing[:10])
        suffix = "" if len(missing) <= 10 else f" (+{len(missing) - 10} more)"
        raise MissingEmbedding(
            f"{len(missing)} manifest ids absent from table "
            f"{table.source_tag or '<unnamed>'}: {shown}{suffix}"
        )
    out = np.empty((len(manifest), table.dim), dtype=np.float64)
    for i, record in enumerate(manifest.records):
        out[i] = table.entries[record.sample_id]
    return out
