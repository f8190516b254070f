"""Framewise energy-ratio metrics with FIR-subspace projection.

An estimate frame is projected, in the least-squares sense, onto the
span of the reference signals and all their delays up to
``filter_len - 1`` taps (per channel), so that any time-invariant
filtering of a true source is credited to that source rather than
scored as error.  The projection subspace lives in the zero-padded
space of length n + filter_len - 1; correlations are computed by FFT
and the block-Toeplitz normal equations are solved after a small
ridge regularization.

The per-frame decomposition is

    estimate = s_target + e_spatial + e_interference + e_artifact

with s_target the raw reference frame, e_spatial the gap between the
single-source projection and the reference, e_interference the extra
span captured by the remaining sources, and e_artifact the component
outside every source's delay span.  SDR/ISR/SIR/SAR are the standard
nested energy ratios over these parts, aggregated as the median over
frames.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft
import scipy.linalg
from scipy.linalg import lapack
from scipy.signal import fftconvolve

from .errors import DependentReferencesError, ParameterError
from .values import COND_LIMIT, MetricValue, energy_ratio_db

# Ridge added to the Gram diagonal: far below audio noise floors, but
# enough to make near-collinear reference sets solvable.
RIDGE_SCALE = 1e-10

DEFAULT_FILTER_LEN = 512
DEFAULT_WINDOW_S = 1.0
DEFAULT_HOP_S = 1.0

BSS_METRIC_NAMES = ("SDR", "ISR", "SIR", "SAR")


def _as_multichannel(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[np.newaxis, :]
    if arr.ndim != 2:
        raise ParameterError(f"{name} must be (channels, samples), got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class FirProjection:
    """Result of projecting an estimate onto a delay span.

    Both arrays have shape (channels, out_len) with
    out_len = max(len(estimate), len(reference) + filter_len - 1): the
    projection carries the convolution tail, and the residual is the
    zero-padded estimate minus the projection.
    """

    projection: np.ndarray
    residual: np.ndarray


class _SpanProjector:
    """Least-squares projector onto delays 0..flen-1 of a set of rows.

    The Gram matrix is built once (FFT cross-correlations arranged in
    Toeplitz blocks) and LU-factorized; estimates are then projected by
    solving for one coefficient vector per estimate channel.
    """

    def __init__(self, rows: np.ndarray, flen: int, out_len: int | None = None):
        n_rows, n = rows.shape
        self.rows = rows
        self.flen = flen
        self.n = n
        self.out_len = max(out_len or 0, n + flen - 1)
        self.n_fft = scipy.fft.next_fast_len(self.out_len + flen)
        self.row_spectra = scipy.fft.rfft(rows, self.n_fft, axis=1)
        self._lag_index = (-np.arange(flen)) % self.n_fft

        dim = n_rows * flen
        gram = np.empty((dim, dim))
        for i in range(n_rows):
            for j in range(i + 1):
                corr = scipy.fft.irfft(
                    self.row_spectra[i] * np.conj(self.row_spectra[j]), self.n_fft
                )
                block = scipy.linalg.toeplitz(corr[self._lag_index], corr[:flen])
                gram[i * flen:(i + 1) * flen, j * flen:(j + 1) * flen] = block
                if i != j:
                    gram[j * flen:(j + 1) * flen, i * flen:(i + 1) * flen] = block.T

        ridge = RIDGE_SCALE * np.trace(gram) / dim
        gram[np.diag_indices(dim)] += ridge
        anorm = np.linalg.norm(gram, 1)
        try:
            self._lu = scipy.linalg.lu_factor(gram)
        except np.linalg.LinAlgError as exc:
            raise DependentReferencesError(f"Gram factorization failed: {exc}") from None
        rcond, info = lapack.dgecon(self._lu[0], anorm)
        if info != 0 or rcond <= 0 or 1.0 / rcond > COND_LIMIT:
            cond = math.inf if rcond <= 0 else 1.0 / rcond
            raise DependentReferencesError(
                f"Gram system condition number {cond:.3g} exceeds {COND_LIMIT:g} "
                "after regularization; references are linearly dependent"
            )

    def project(self, estimate: np.ndarray) -> np.ndarray:
        """Project (channels, n) onto the span; returns (channels, out_len)."""
        n_rows = self.rows.shape[0]
        flen = self.flen
        est_spectra = scipy.fft.rfft(estimate, self.n_fft, axis=1)
        rhs = np.empty((n_rows * flen, estimate.shape[0]))
        for i in range(n_rows):
            corr = scipy.fft.irfft(
                self.row_spectra[i][np.newaxis, :] * np.conj(est_spectra), self.n_fft,
                axis=1,
            )
            rhs[i * flen:(i + 1) * flen, :] = corr[:, self._lag_index].T
        coeffs = scipy.linalg.lu_solve(self._lu, rhs)
        coeffs = coeffs.reshape(n_rows, flen, -1)
        out = np.zeros((estimate.shape[0], self.out_len))
        for i in range(n_rows):
            for c in range(estimate.shape[0]):
                out[c, : self.n + flen - 1] += fftconvolve(coeffs[i, :, c], self.rows[i])
        return out


def fir_project(estimate, references, filter_len: int = DEFAULT_FILTER_LEN) -> FirProjection:
    """Least-squares projection of an estimate onto delayed references.

    Parameters
    ----------
    estimate : (channels, n_e) signal; n_e may exceed the reference
        length by up to the projection tail, so a projection can be
        re-projected (idempotence)
    references : list of (channels, n) signals; every channel of every
        reference contributes delays 0..filter_len-1 as regressors
    filter_len : number of taps

    Raises
    ------
    DependentReferencesError
        The regularized Gram system has condition number above 1e12.
    """
    if filter_len < 1:
        raise ParameterError(f"filter_len must be >= 1, got {filter_len}")
    est = _as_multichannel(estimate, "estimate")
    if not references:
        raise ParameterError("need at least one reference")
    refs = [_as_multichannel(r, f"references[{i}]") for i, r in enumerate(references)]
    ref_shape = refs[0].shape
    for i, r in enumerate(refs):
        if r.shape != ref_shape:
            raise ParameterError(
                f"references[{i}] shape {r.shape} != {ref_shape}"
            )
    if est.shape[0] != ref_shape[0]:
        raise ParameterError(
            f"estimate has {est.shape[0]} channels, references {ref_shape[0]}"
        )
    out_len = ref_shape[1] + filter_len - 1
    if not ref_shape[1] <= est.shape[1] <= out_len:
        raise ParameterError(
            f"estimate length {est.shape[1]} must lie in "
            f"[{ref_shape[1]}, {out_len}] for references of length {ref_shape[1]}"
        )
    if ref_shape[1] <= filter_len:
        raise ParameterError(
            f"signals must be longer than filter_len={filter_len}, got {ref_shape[1]}"
        )
    rows = np.vstack(refs)
    projector = _SpanProjector(rows, filter_len, out_len=est.shape[1])
    projection = projector.project(est)
    padded = np.concatenate(
        [est, np.zeros((est.shape[0], projector.out_len - est.shape[1]))], axis=1
    )
    return FirProjection(projection=projection, residual=padded - projection)


@dataclass(frozen=True)
class BssDecomposition:
    """Four-part split of one estimate frame (zero-padded length)."""

    s_target: np.ndarray
    e_spatial: np.ndarray
    e_interference: np.ndarray
    e_artifact: np.ndarray

    def scores(self) -> dict[str, MetricValue]:
        t = float(np.sum(self.s_target ** 2))
        spatial = self.s_target + self.e_spatial
        full = spatial + self.e_interference
        err = self.e_spatial + self.e_interference + self.e_artifact
        spatial_energy = float(np.sum(spatial ** 2))
        full_energy = float(np.sum(full ** 2))
        return {
            "SDR": energy_ratio_db(t, float(np.sum(err ** 2))),
            "ISR": energy_ratio_db(t, float(np.sum(self.e_spatial ** 2))),
            "SIR": energy_ratio_db(
                spatial_energy, float(np.sum(self.e_interference ** 2))
            ),
            "SAR": energy_ratio_db(full_energy, float(np.sum(self.e_artifact ** 2))),
        }


@dataclass
class BssFrameScores:
    """Per-frame SDR/ISR/SIR/SAR for one source, plus skipped frames."""

    sdr: list[MetricValue] = field(default_factory=list)
    isr: list[MetricValue] = field(default_factory=list)
    sir: list[MetricValue] = field(default_factory=list)
    sar: list[MetricValue] = field(default_factory=list)
    undefined_frames: list[int] = field(default_factory=list)

    def append(self, scores: dict[str, MetricValue]):
        self.sdr.append(scores["SDR"])
        self.isr.append(scores["ISR"])
        self.sir.append(scores["SIR"])
        self.sar.append(scores["SAR"])

    def aggregate(self) -> dict[str, MetricValue]:
        """Median over scored frames; NaN if every frame was skipped."""
        out = {}
        for name, values in zip(BSS_METRIC_NAMES, (self.sdr, self.isr, self.sir, self.sar)):
            out[name] = float(np.median(values)) if values else math.nan
        return out


def bss_decompose(estimate, references, target_index: int,
                  filter_len: int = DEFAULT_FILTER_LEN) -> BssDecomposition:
    """Decompose one estimate frame against labeled reference frames.

    Silent (zero-energy) non-target references are excluded from the
    projection span; they contribute nothing to it.
    """
    est = _as_multichannel(estimate, "estimate")
    refs = [_as_multichannel(r, f"references[{i}]") for i, r in enumerate(references)]
    if not 0 <= target_index < len(refs):
        raise ParameterError(f"target_index {target_index} out of range")
    target = refs[target_index]
    if not np.any(target):
        raise ParameterError("target reference frame is silent")
    active = [r for i, r in enumerate(refs) if i == target_index or np.any(r)]

    flen = filter_len
    proj_single = fir_project(est, [target], flen).projection
    if len(active) > 1:
        proj_all = fir_project(est, active, flen).projection
    else:
        proj_all = proj_single
    padded_target = np.concatenate(
        [target, np.zeros((target.shape[0], flen - 1))], axis=1
    )
    padded_est = np.concatenate([est, np.zeros((est.shape[0], flen - 1))], axis=1)
    return BssDecomposition(
        s_target=padded_target,
        e_spatial=proj_single - padded_target,
        e_interference=proj_all - proj_single,
        e_artifact=padded_est - proj_all,
    )


def bsseval(estimates, references, sample_rate: int,
            window_s: float | None = DEFAULT_WINDOW_S,
            hop_s: float | None = DEFAULT_HOP_S,
            filter_len: int = DEFAULT_FILTER_LEN) -> list[BssFrameScores]:
    """Framewise SDR/ISR/SIR/SAR for labeled per-source estimates.

    Parameters
    ----------
    estimates, references : equal-length lists of (channels, n) signals,
        paired by index (no permutation search)
    sample_rate : Hz, used to convert window/hop seconds to samples
    window_s, hop_s : framing; pass None for a single whole-track frame
    filter_len : taps of the distortion filter span

    Returns
    -------
    list of BssFrameScores, one per source.  Frames whose target
    reference is silent are skipped and recorded in
    ``undefined_frames``; they are excluded from the median.
    """
    if len(estimates) != len(references) or not estimates:
        raise ParameterError("estimates and references must pair up one to one")
    ests = [_as_multichannel(e, f"estimates[{i}]") for i, e in enumerate(estimates)]
    refs = [_as_multichannel(r, f"references[{i}]") for i, r in enumerate(references)]
    shapes = {a.shape for a in ests} | {r.shape for r in refs}
    if len(shapes) > 1:
        raise ParameterError(f"all signals must share one shape, got {sorted(shapes)}")
    n = ests[0].shape[1]

    if window_s is None or hop_s is None:
        frames = [slice(0, n)]
    else:
        window = int(round(window_s * sample_rate))
        hop = int(round(hop_s * sample_rate))
        if hop < 1:
            raise ParameterError(f"hop of {hop_s} s is below one sample")
        if window < filter_len:
            raise ParameterError(
                f"window of {window} samples is shorter than filter_len={filter_len}"
            )
        starts = range(0, n - window + 1, hop)
        frames = [slice(s, s + window) for s in starts]
        if not frames:
            frames = [slice(0, n)]

    results = [BssFrameScores() for _ in ests]
    for frame_index, sl in enumerate(frames):
        ref_frames = [r[:, sl] for r in refs]
        for j, est in enumerate(ests):
            if not np.any(ref_frames[j]):
                results[j].undefined_frames.append(frame_index)
                continue
            decomp = bss_decompose(est[:, sl], ref_frames, j, filter_len)
            results[j].append(decomp.scores())
    return results
