"""Fixtures: a synthetic WAV clip and a deterministic stub backend.

Real model weights are not available in offline CI, so the pipeline
is exercised through a stub that mimics the vggish registry entry
(16 kHz in, 128-dim frames out) with a pure-numpy spectral feature.
Tests needing real weights skip themselves when loading fails.
"""

import struct

import numpy as np
import pytest

from stemeval_extractor import models
from stemeval_extractor.models import Backend


def write_test_wav(path, seconds=2.0, rate=22050, channels=1, seed=0):
    rng = np.random.default_rng(seed)
    n = int(seconds * rate)
    t = np.arange(n) / rate
    wave = 0.4 * np.sin(2 * np.pi * 220 * t) + 0.05 * rng.standard_normal(n)
    data = np.tile(wave.astype(np.float32)[:, None], (1, channels))
    payload = data.tobytes()
    fmt = struct.pack("<HHIIHH", 3, channels, rate, rate * 4 * channels,
                      4 * channels, 32)
    body = b"WAVE"
    body += b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(payload)) + payload
    path.write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)
    return path


def _stub_loader(spec):
    def embed(samples):
        window = spec.sample_rate // 4
        count = max(len(samples) // window, 1)
        frames = []
        for i in range(count):
            chunk = samples[i * window:(i + 1) * window]
            spectrum = np.abs(np.fft.rfft(chunk, 2 * spec.dim))[: spec.dim]
            frames.append(spectrum)
        return np.stack(frames).astype(np.float32)

    return Backend(spec=spec, embed=embed, weights_hash="stub-0000")


@pytest.fixture
def stub_vggish(monkeypatch):
    """Route the 'vggish' registry entry through the stub backend."""
    monkeypatch.setitem(models._LOADERS, "vggish", _stub_loader)
    monkeypatch.setattr(models, "_CACHE", {})
    return "vggish"


@pytest.fixture
def clip(tmp_path):
    return write_test_wav(tmp_path / "clip.wav")
