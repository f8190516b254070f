"""WAV ingestion/emission, fragment extraction, anchor synthesis, downmix.

Audio lives in :class:`AudioBuffer`: an immutable (channels, samples)
float64 array plus a sample rate.  Integer PCM is normalized into
[-1, 1) by dividing by 2**(bits-1); 32-bit float data is taken as-is,
so float WAVs round-trip bit-exactly through :func:`save_wav` /
:func:`load_wav`.

There is deliberately no resampling: metric comparisons require all
inputs to share a sample rate, and silent resampling would change
metric values invisibly.
"""

import enum
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import butter, sosfiltfilt

from .errors import (
    FormatError,
    ParameterError,
    ParseError,
    RangeError,
    SampleRateMismatchError,
    ShortFragmentError,
)

_WAVE_FORMAT_PCM = 0x0001
_WAVE_FORMAT_IEEE_FLOAT = 0x0003
_WAVE_FORMAT_EXTENSIBLE = 0xFFFE

# Low-pass anchor cutoffs: bass gets a much lower cutoff so the
# degradation stays clearly audible against the reference.
ANCHOR_CUTOFF_HZ = {"bass": 175.0, "default": 3500.0}
ANCHOR_FILTER_ORDER = 8

MIN_FRAGMENT_S = 1.0


class StemKind(enum.Enum):
    """The four stem classes of a pop-music separation target."""

    VOCALS = "vocals"
    DRUMS = "drums"
    BASS = "bass"
    OTHER = "other"

    @classmethod
    def parse(cls, text: str) -> "StemKind":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ParameterError(
                f"unknown stem {text!r}; expected one of "
                f"{[k.value for k in cls]}"
            ) from None

    @property
    def anchor_cutoff_hz(self) -> float:
        if self is StemKind.BASS:
            return ANCHOR_CUTOFF_HZ["bass"]
        return ANCHOR_CUTOFF_HZ["default"]


@dataclass(frozen=True)
class AudioBuffer:
    """Multichannel sampled audio.

    samples : float64 array, shape (channels, num_samples), read-only
    sample_rate : positive int, Hz
    """

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim == 1:
            samples = samples[np.newaxis, :]
        if samples.ndim != 2:
            raise ParameterError(f"samples must be 1-D or 2-D, got ndim={samples.ndim}")
        if self.sample_rate <= 0:
            raise ParameterError(f"sample_rate must be positive, got {self.sample_rate}")
        samples = np.ascontiguousarray(samples)
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    @property
    def num_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def num_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return self.num_samples / self.sample_rate


def require_nonempty(buffer: AudioBuffer, what: str = "buffer"):
    if buffer.num_samples == 0:
        raise ParameterError(f"{what} is empty")


def require_same_rate(*buffers: AudioBuffer):
    rates = {b.sample_rate for b in buffers}
    if len(rates) > 1:
        raise SampleRateMismatchError(
            f"sample rates differ: {sorted(rates)}; resample inputs explicitly first"
        )


def _read_exact(data: bytes, offset: int, count: int, what: str) -> bytes:
    if offset + count > len(data):
        raise ParseError(
            f"truncated WAV: needed {count} bytes for {what} at byte offset "
            f"{offset}, file has {len(data) - offset} bytes left"
        )
    return data[offset : offset + count]


def load_wav(path) -> AudioBuffer:
    """Read a RIFF/WAVE file into an :class:`AudioBuffer`.

    Supports PCM 16/24/32-bit integer and 32-bit IEEE float data with
    1 or 2 channels.  Integer samples are normalized by 2**(bits-1),
    so full-scale negative maps to -1.0 exactly.

    Raises
    ------
    FormatError
        Unsupported codec, bit depth, or channel count.
    ParseError
        Truncated or structurally broken file (message names the byte
        offset where data ran out).
    """
    data = Path(path).read_bytes()
    header = _read_exact(data, 0, 12, "RIFF header")
    if header[0:4] != b"RIFF" or header[8:12] != b"WAVE":
        raise FormatError(f"{path}: not a RIFF/WAVE file")

    fmt = None
    payload = None
    offset = 12
    while offset < len(data) and (fmt is None or payload is None):
        chunk_header = _read_exact(data, offset, 8, "chunk header")
        chunk_id = chunk_header[0:4]
        (chunk_size,) = struct.unpack("<I", chunk_header[4:8])
        body_offset = offset + 8
        if chunk_id == b"fmt ":
            body = _read_exact(data, body_offset, chunk_size, "fmt chunk")
            if chunk_size < 16:
                raise FormatError(f"{path}: fmt chunk too small ({chunk_size} bytes)")
            tag, channels, rate, _byte_rate, _align, bits = struct.unpack(
                "<HHIIHH", body[:16]
            )
            if tag == _WAVE_FORMAT_EXTENSIBLE:
                if chunk_size < 40:
                    raise FormatError(f"{path}: extensible fmt chunk too small")
                (tag,) = struct.unpack("<H", body[24:26])
            fmt = (tag, channels, rate, bits)
        elif chunk_id == b"data":
            payload = _read_exact(data, body_offset, chunk_size, "data chunk")
        # chunk bodies are padded to even length
        offset = body_offset + chunk_size + (chunk_size & 1)

    if fmt is None:
        raise ParseError(f"{path}: missing fmt chunk")
    if payload is None:
        raise ParseError(f"{path}: missing data chunk")
    tag, channels, rate, bits = fmt
    if channels not in (1, 2):
        raise FormatError(f"{path}: {channels} channels declared; only 1 or 2 supported")
    if rate <= 0:
        raise FormatError(f"{path}: non-positive sample rate {rate}")

    if tag == _WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        flat = np.frombuffer(payload[: len(payload) - len(payload) % 4], dtype="<f4")
        samples = flat.astype(np.float64)
    elif tag == _WAVE_FORMAT_PCM and bits == 16:
        flat = np.frombuffer(payload[: len(payload) - len(payload) % 2], dtype="<i2")
        samples = flat.astype(np.float64) / 2.0**15
    elif tag == _WAVE_FORMAT_PCM and bits == 32:
        flat = np.frombuffer(payload[: len(payload) - len(payload) % 4], dtype="<i4")
        samples = flat.astype(np.float64) / 2.0**31
    elif tag == _WAVE_FORMAT_PCM and bits == 24:
        raw = np.frombuffer(payload[: len(payload) - len(payload) % 3], dtype=np.uint8)
        raw = raw.reshape(-1, 3).astype(np.int64)
        ints = raw[:, 0] | (raw[:, 1] << 8) | (raw[:, 2] << 16)
        ints = (ints ^ 0x800000) - 0x800000  # sign-extend 24 bits
        samples = ints.astype(np.float64) / 2.0**23
    else:
        raise FormatError(
            f"{path}: unsupported format (tag={tag:#06x}, bits={bits}); "
            "need PCM 16/24/32-bit int or 32-bit IEEE float"
        )

    frames = samples.size // channels
    samples = samples[: frames * channels].reshape(frames, channels).T
    return AudioBuffer(samples, int(rate))


def save_wav(buffer: AudioBuffer, path, sample_format: str = "float32"):
    """Write an :class:`AudioBuffer` as a WAV file.

    ``sample_format``: "float32" (default, lossless for float32 data),
    "int16", "int24", or "int32".  Integer formats scale by
    2**(bits-1), round, and clip at full scale.
    """
    interleaved = np.ascontiguousarray(buffer.samples.T)
    channels = buffer.num_channels
    if sample_format == "float32":
        tag, bits = _WAVE_FORMAT_IEEE_FLOAT, 32
        raw = interleaved.astype("<f4").tobytes()
    elif sample_format == "int16":
        tag, bits = _WAVE_FORMAT_PCM, 16
        scaled = np.clip(np.rint(interleaved * 2.0**15), -(2**15), 2**15 - 1)
        raw = scaled.astype("<i2").tobytes()
    elif sample_format == "int32":
        tag, bits = _WAVE_FORMAT_PCM, 32
        scaled = np.clip(np.rint(interleaved * 2.0**31), -(2**31), 2**31 - 1)
        raw = scaled.astype("<i4").tobytes()
    elif sample_format == "int24":
        tag, bits = _WAVE_FORMAT_PCM, 24
        scaled = np.clip(np.rint(interleaved * 2.0**23), -(2**23), 2**23 - 1)
        ints = scaled.astype(np.int64) & 0xFFFFFF
        raw = np.stack(
            [ints & 0xFF, (ints >> 8) & 0xFF, (ints >> 16) & 0xFF], axis=-1
        ).astype(np.uint8).tobytes()
    else:
        raise ParameterError(f"unknown sample_format {sample_format!r}")

    block_align = channels * bits // 8
    fmt_body = struct.pack(
        "<HHIIHH", tag, channels, buffer.sample_rate,
        buffer.sample_rate * block_align, block_align, bits,
    )
    chunks = b"WAVE"
    chunks += b"fmt " + struct.pack("<I", len(fmt_body)) + fmt_body
    chunks += b"data" + struct.pack("<I", len(raw)) + raw
    if len(raw) & 1:
        chunks += b"\x00"
    Path(path).write_bytes(b"RIFF" + struct.pack("<I", len(chunks)) + chunks)


def extract_fragment(buffer: AudioBuffer, start_s: float, duration_s: float) -> AudioBuffer:
    """Slice ``duration_s`` seconds starting at ``start_s``.

    If the buffer ends early the fragment is truncated to what exists
    (never zero-padded: padding would inject silence into energy
    ratios).  Fragments shorter than 1 s raise ShortFragmentError.
    """
    require_nonempty(buffer)
    if start_s < 0:
        raise ParameterError(f"start_s must be >= 0, got {start_s}")
    if duration_s <= 0:
        raise ParameterError(f"duration_s must be positive, got {duration_s}")
    rate = buffer.sample_rate
    start = int(round(start_s * rate))
    if start >= buffer.num_samples:
        raise RangeError(
            f"fragment start {start_s} s (sample {start}) is beyond the buffer "
            f"end ({buffer.num_samples} samples)"
        )
    stop = min(start + int(round(duration_s * rate)), buffer.num_samples)
    if stop - start < MIN_FRAGMENT_S * rate:
        raise ShortFragmentError(
            f"fragment is {(stop - start) / rate:.3f} s; shorter than "
            f"{MIN_FRAGMENT_S:g} s"
        )
    return AudioBuffer(buffer.samples[:, start:stop], rate)


def make_anchor(buffer: AudioBuffer, kind: StemKind) -> AudioBuffer:
    """Low-pass the buffer into a MUSHRA-style anchor for ``kind``.

    8th-order Butterworth applied forward-backward (zero phase), cutoff
    3500 Hz for vocals/drums/other, 175 Hz for bass.
    """
    require_nonempty(buffer)
    cutoff = kind.anchor_cutoff_hz
    if buffer.sample_rate <= 2 * cutoff:
        raise ParameterError(
            f"sample rate {buffer.sample_rate} Hz too low for a {cutoff:g} Hz "
            "low-pass anchor"
        )
    sos = butter(ANCHOR_FILTER_ORDER, cutoff, btype="low",
                 fs=buffer.sample_rate, output="sos")
    try:
        filtered = sosfiltfilt(sos, buffer.samples, axis=1)
    except ValueError as exc:
        raise ParameterError(f"buffer too short to filter: {exc}") from None
    return AudioBuffer(filtered, buffer.sample_rate)


def downmix_mono(buffer: AudioBuffer) -> AudioBuffer:
    """Average channels into one; mono input is returned unchanged."""
    require_nonempty(buffer)
    if buffer.num_channels == 1:
        return buffer
    return AudioBuffer(np.mean(buffer.samples, axis=0, keepdims=True),
                       buffer.sample_rate)
