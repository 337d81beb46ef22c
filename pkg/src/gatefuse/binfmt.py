"""Binary file formats.

Two little-endian container formats live here:

* Embedding table (magic ``MSRF``): u32 version=1, u32 dim, u64 count,
  then per entry [u16 id-length, UTF-8 id, dim x f32]. One vector per
  sample id; the on-disk byte layout is a stable interchange contract.

* Named matrix blob (magic ``MSRM``): u32 version=1, u32 count, then per
  entry [u16 name-length, UTF-8 name, u8 dtype, u64 rows, u64 cols,
  row-major payload]. dtype codes: 0 = f64, 1 = f32, 2 = i64. Used for
  model parameter blobs.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import CorruptFile, DuplicateId

TABLE_MAGIC = b"MSRF"
BLOB_MAGIC = b"MSRM"
_VERSION = 1

_DTYPE_CODES = {0: "<f8", 1: "<f4", 2: "<i8"}
_CODE_FOR_KIND = {"f8": 0, "f4": 1, "i8": 2}


class _Reader:
    def __init__(self, raw: bytes, path: Path):
        self.raw = raw
        self.pos = 0
        self.path = path

    def take(self, count: int) -> bytes:
        if self.pos + count > len(self.raw):
            raise CorruptFile(f"{self.path}: truncated at byte {self.pos}")
        chunk = self.raw[self.pos : self.pos + count]
        self.pos += count
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def write_table(path: str | Path, entries: dict[str, np.ndarray], dim: int) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(TABLE_MAGIC)
        fh.write(struct.pack("<IIQ", _VERSION, dim, len(entries)))
        for sample_id, vector in entries.items():
            encoded = sample_id.encode("utf-8")
            vector = np.ascontiguousarray(vector, dtype="<f4")
            if vector.shape != (dim,):
                raise ValueError(
                    f"vector for {sample_id!r} has shape {vector.shape}, want ({dim},)"
                )
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(vector.tobytes())


def read_table(path: str | Path) -> tuple[dict[str, np.ndarray], int]:
    path = Path(path)
    reader = _Reader(path.read_bytes(), path)
    if reader.take(4) != TABLE_MAGIC:
        raise CorruptFile(f"{path}: bad magic, not an embedding table")
    version, dim, count = reader.unpack("<IIQ")
    if version != _VERSION:
        raise CorruptFile(f"{path}: unsupported version {version}")
    entries: dict[str, np.ndarray] = {}
    for _ in range(count):
        (id_len,) = reader.unpack("<H")
        sample_id = reader.take(id_len).decode("utf-8")
        if sample_id in entries:
            raise DuplicateId(f"{path}: duplicate id {sample_id!r}")
        vector = np.frombuffer(reader.take(4 * dim), dtype="<f4")
        entries[sample_id] = vector
    if reader.pos != len(reader.raw):
        raise CorruptFile(f"{path}: {len(reader.raw) - reader.pos} trailing bytes")
    return entries, dim


def write_matrix_blob(path: str | Path, matrices: dict[str, np.ndarray]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as fh:
        fh.write(BLOB_MAGIC)
        fh.write(struct.pack("<II", _VERSION, len(matrices)))
        for name, matrix in matrices.items():
            matrix = np.atleast_2d(np.asarray(matrix))
            kind = matrix.dtype.str.lstrip("<>|=")
            if kind not in _CODE_FOR_KIND:
                matrix = matrix.astype(np.float64)
                kind = "f8"
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<BQQ", _CODE_FOR_KIND[kind], *matrix.shape))
            fh.write(np.ascontiguousarray(matrix, dtype=f"<{kind}").tobytes())


def read_matrix_blob(path: str | Path) -> dict[str, np.ndarray]:
    path = Path(path)
    reader = _Reader(path.read_bytes(), path)
    if reader.take(4) != BLOB_MAGIC:
        raise CorruptFile(f"{path}: bad magic, not a matrix blob")
    version, count = reader.unpack("<II")
    if version != _VERSION:
        raise CorruptFile(f"{path}: unsupported version {version}")
    matrices: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = reader.unpack("<H")
        name = reader.take(name_len).decode("utf-8")
        code, rows, cols = reader.unpack("<BQQ")
        if code not in _DTYPE_CODES:
            raise CorruptFile(f"{path}: unknown dtype code {code}")
        dtype = np.dtype(_DTYPE_CODES[code])
        payload = reader.take(rows * cols * dtype.itemsize)
        matrices[name] = np.frombuffer(payload, dtype=dtype).reshape(rows, cols)
    if reader.pos != len(reader.raw):
        raise CorruptFile(f"{path}: {len(reader.raw) - reader.pos} trailing bytes")
    return matrices
