"""Frechet distance between Gaussian statistics of audio embeddings.

Embeddings cross the process boundary as EMB1 files (see
``read_embeddings``), so the distance here never depends on any
embedding model internals.  Each embedding matrix is summarized by its
mean vector and sample covariance; the distance between two summaries
is

    ||mu_a - mu_b||^2 + tr(S_a + S_b - 2*(S_a^1/2 S_b S_a^1/2)^1/2)

Per-clip embedding counts are small, so covariances are ridge
regularized; the epsilon used is recorded on the stats object and
surfaced in score metadata to keep results auditable.
"""

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, NumericalFailureError, ParameterError

EMB1_MAGIC = b"EMB1"
_HEADER = struct.Struct("<4sII")

# cov += eps*I with eps = COV_REG_SCALE * max(mean diagonal, COV_REG_FLOOR)
COV_REG_SCALE = 1e-6
COV_REG_FLOOR = 1e-12

SYMMETRY_TOL = 1e-9
NEGATIVE_TOL = 1e-6


@dataclass(frozen=True)
class EmbeddingMatrix:
    """count x dim matrix of real features, one row per model frame."""

    rows: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[0] < 1 or rows.shape[1] < 1:
            raise ParameterError(f"embeddings must be (count, dim) with count >= 1, got {rows.shape}")
        if not np.all(np.isfinite(rows)):
            raise ParameterError("embeddings contain non-finite values")
        rows = np.ascontiguousarray(rows)
        rows.flags.writeable = False
        object.__setattr__(self, "rows", rows)

    @property
    def count(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]


@dataclass(frozen=True)
class GaussianStats:
    """Mean vector and (regularized) covariance fitted to embeddings."""

    mean: np.ndarray
    cov: np.ndarray
    reg_eps: float = 0.0

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def read_embeddings(path) -> EmbeddingMatrix:
    """Decode an EMB1 file.

    Layout (little-endian): magic "EMB1", uint32 dim, uint32 count,
    then count*dim float32 values, row-major, no padding or trailer.
    """
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size or data[:4] != EMB1_MAGIC:
        raise FormatError(f"{path}: missing EMB1 magic")
    _, dim, count = _HEADER.unpack_from(data)
    if dim < 1 or count < 1:
        raise FormatError(f"{path}: invalid header (dim={dim}, count={count})")
    expected = _HEADER.size + 4 * dim * count
    if len(data) != expected:
        raise FormatError(
            f"{path}: expected {expected} bytes for dim={dim}, count={count}; "
            f"file has {len(data)}"
        )
    flat = np.frombuffer(data, dtype="<f4", offset=_HEADER.size)
    return EmbeddingMatrix(flat.reshape(count, dim))


def write_embeddings(matrix: EmbeddingMatrix, path):
    """Encode to EMB1; float32 round-trips are bit-identical."""
    header = _HEADER.pack(EMB1_MAGIC, matrix.dim, matrix.count)
    Path(path).write_bytes(header + matrix.rows.astype("<f4").tobytes())


def fit_gaussian(e: EmbeddingMatrix) -> GaussianStats:
    """Column means and unbiased sample covariance, ridge regularized.

    A single row yields a zero covariance before regularization.
    """
    mean = e.rows.mean(axis=0)
    if e.count >= 2:
        centered = e.rows - mean
        cov = centered.T @ centered / (e.count - 1)
    else:
        cov = np.zeros((e.dim, e.dim))
    eps = COV_REG_SCALE * max(float(np.mean(np.diag(cov))), COV_REG_FLOOR)
    cov = cov + eps * np.eye(e.dim)
    return GaussianStats(mean=mean, cov=cov, reg_eps=eps)


def sqrtm_psd(m: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition.

    Negative eigenvalues (numerical noise) are clipped to zero.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ParameterError(f"need a square matrix, got shape {m.shape}")
    scale = max(1.0, float(np.abs(m).max()))
    if float(np.abs(m - m.T).max()) > SYMMETRY_TOL * scale:
        raise ParameterError("matrix is not symmetric within tolerance")
    eigvals, eigvecs = np.linalg.eigh(m)
    root = (eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))) @ eigvecs.T
    return (root + root.T) / 2.0


def frechet_distance(a: GaussianStats, b: GaussianStats) -> float:
    """Squared Frechet distance between two Gaussian summaries.

    Slightly negative results (> -1e-6) are clamped to zero; anything
    more negative raises NumericalFailureError.
    """
    if a.dim != b.dim:
        raise ParameterError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if np.array_equal(a.mean, b.mean) and np.array_equal(a.cov, b.cov):
        return 0.0
    root_a = sqrtm_psd(a.cov)
    inner = root_a @ b.cov @ root_a
    cross = sqrtm_psd((inner + inner.T) / 2.0)
    delta = a.mean - b.mean
    value = float(delta @ delta + np.trace(a.cov) + np.trace(b.cov) - 2.0 * np.trace(cross))
    if value < -NEGATIVE_TOL:
        raise NumericalFailureError(f"Frechet distance came out negative: {value:g}")
    return max(value, 0.0)


@dataclass(frozen=True)
class FadResult:
    distance: float
    inverted: float
    metadata: dict = field(default_factory=dict)


def fad_score(reference_path, estimate_path) -> FadResult:
    """Frechet audio distance between two EMB1 files.

    ``inverted`` is the negated distance: larger-is-better, so it can
    be rank-correlated against dB metrics directly.
    """
    ref = read_embeddings(reference_path)
    est = read_embeddings(estimate_path)
    if ref.dim != est.dim:
        raise ParameterError(
            f"embedding dims differ: {reference_path} has {ref.dim}, "
            f"{estimate_path} has {est.dim}"
        )
    ref_stats = fit_gaussian(ref)
    est_stats = fit_gaussian(est)
    distance = frechet_distance(ref_stats, est_stats)
    return FadResult(
        distance=distance,
        inverted=0.0 if distance == 0.0 else -distance,
        metadata={
            "dim": ref.dim,
            "reference_count": ref.count,
            "estimate_count": est.count,
            "cov_divisor": "count-1",
            "cov_reg_eps": {"reference": ref_stats.reg_eps, "estimate": est_stats.reg_eps},
        },
    )
