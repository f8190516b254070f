"""The extraction pipeline: WAV -> model frames -> EMB1 + sidecar."""

import json
from pathlib import Path

import numpy as np

from .audio import load_wav_mono, resample_to
from .emb1 import write_emb1
from .errors import ParameterError
from .models import Backend, get_spec, load_backend


def extract(input_path, model_name: str, output_path,
            backend: Backend | None = None) -> dict:
    """Embed one clip and write an EMB1 file plus a JSON sidecar.

    The sidecar (<output>.json) records the model identity, matrix
    shape, and a hash of the weights, so embedding files stay tied to
    the exact model that produced them.  Returns the sidecar dict.
    """
    spec = get_spec(model_name)
    if backend is None:
        backend = load_backend(model_name)
    samples, rate = load_wav_mono(input_path)
    samples = resample_to(samples, rate, spec.sample_rate)
    if samples.size == 0:
        raise ParameterError(f"{input_path}: no samples after resampling")

    rows = np.asarray(backend.embed(samples), dtype=np.float32)
    if rows.ndim != 2 or rows.shape[0] < 1:
        raise ParameterError(
            f"{model_name} backend returned shape {rows.shape}; need (count, dim)"
        )
    if rows.shape[1] != spec.dim:
        raise ParameterError(
            f"{model_name} backend returned dim {rows.shape[1]}, expected {spec.dim}"
        )
    dim, count = write_emb1(rows, output_path)

    sidecar = {
        "model": spec.model_name,
        "dim": dim,
        "count": count,
        "weights_hash": backend.weights_hash,
        "input_sample_rate": rate,
        "model_sample_rate": spec.sample_rate,
    }
    Path(str(output_path) + ".json").write_text(
        json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return sidecar
