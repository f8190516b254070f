"""WAV decoding and rate conversion for model input.

Unlike the metric toolkit (which forbids resampling so that metric
values cannot drift invisibly), feeding a pretrained model *requires*
resampling to the rate it was trained at; resample_poly keeps that
step deterministic.
"""

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

from .errors import ParameterError

_INT_SCALE = {
    np.dtype(np.int16): 2.0**15,
    np.dtype(np.int32): 2.0**31,
    np.dtype(np.uint8): 2.0**7,
}


def load_wav_mono(path) -> tuple[np.ndarray, int]:
    """Read a WAV file as normalized float64 mono; returns (samples, rate)."""
    try:
        rate, data = wavfile.read(path)
    except ValueError as exc:
        raise ParameterError(f"{path}: {exc}") from None
    if data.size == 0:
        raise ParameterError(f"{path}: empty audio")
    if data.dtype in _INT_SCALE:
        scale = _INT_SCALE[data.dtype]
        samples = data.astype(np.float64)
        if data.dtype == np.dtype(np.uint8):
            samples -= 128.0
        samples /= scale
    else:
        samples = data.astype(np.float64)
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    return samples, int(rate)


def resample_to(samples: np.ndarray, rate: int, target_rate: int) -> np.ndarray:
    if rate == target_rate:
        return samples
    gcd = np.gcd(rate, target_rate)
    return resample_poly(samples, target_rate // gcd, rate // gcd)
