"""EMB1 encoding: the file boundary to the metric toolkit.

Layout (little-endian): magic "EMB1", uint32 dim, uint32 count, then
count*dim float32 values row-major, no padding, no trailer.  This
must stay bit-compatible with the stemeval reader.
"""

import struct
from pathlib import Path

import numpy as np

from .errors import ParameterError

MAGIC = b"EMB1"
_HEADER = struct.Struct("<4sII")


def write_emb1(rows: np.ndarray, path) -> tuple[int, int]:
    """Write a (count, dim) float array; returns (dim, count)."""
    rows = np.asarray(rows)
    if rows.ndim != 2 or rows.shape[0] < 1 or rows.shape[1] < 1:
        raise ParameterError(f"embeddings must be (count, dim), got {rows.shape}")
    if not np.all(np.isfinite(rows)):
        raise ParameterError("embeddings contain non-finite values")
    count, dim = rows.shape
    payload = _HEADER.pack(MAGIC, dim, count) + rows.astype("<f4").tobytes()
    Path(path).write_bytes(payload)
    return dim, count


def read_emb1(path) -> np.ndarray:
    """Decode for self-validation; the authoritative reader lives in
    the metric toolkit."""
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise ParameterError(f"{path}: missing EMB1 magic")
    _, dim, count = _HEADER.unpack_from(data)
    expected = _HEADER.size + 4 * dim * count
    if len(data) != expected:
        raise ParameterError(f"{path}: expected {expected} bytes, found {len(data)}")
    return np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(count, dim)
