"""Model registry and lazily loaded embedding backends.

Every backend takes mono float audio at its model's expected sample
rate and returns a (count, dim) float32 matrix, one row per model
frame or window.  Backends are loaded at most once per process (one
model instance per process; parallelize across processes, never
inside a model call).

Weights are resolved from the local cache only.  Missing weights
raise ModelUnavailableError with the explicit download command, so an
offline run never silently pulls gigabytes.
"""

import hashlib
import os
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ModelUnavailableError, ParameterError


@dataclass(frozen=True)
class ExtractorSpec:
    """Identity of one embedding model: name, input rate, output dim."""

    model_name: str
    sample_rate: int
    dim: int
    weights_ref: str  # hub id or hub spec used to resolve weights


@dataclass(frozen=True)
class Backend:
    spec: ExtractorSpec
    embed: Callable[[np.ndarray], np.ndarray]  # mono float at spec rate -> (count, dim)
    weights_hash: str


REGISTRY: dict[str, ExtractorSpec] = {
    spec.model_name: spec
    for spec in (
        ExtractorSpec("clap-laion-music", 48000, 512, "laion/larger_clap_music"),
        ExtractorSpec("vggish", 16000, 128, "harritaylor/torchvggish"),
        ExtractorSpec("encodec", 24000, 128, "facebook/encodec_24khz"),
        ExtractorSpec("wav2vec2", 16000, 768, "facebook/wav2vec2-base-960h"),
        ExtractorSpec("hubert", 16000, 768, "facebook/hubert-base-ls960"),
    )
}

_CACHE: dict[str, Backend] = {}


def get_spec(model_name: str) -> ExtractorSpec:
    try:
        return REGISTRY[model_name]
    except KeyError:
        raise ParameterError(
            f"unknown model {model_name!r}; choose from {sorted(REGISTRY)}"
        ) from None


def _unavailable(spec: ExtractorSpec, cause: Exception) -> ModelUnavailableError:
    return ModelUnavailableError(
        f"weights for {spec.model_name} ({spec.weights_ref}) are not available "
        f"locally: {cause}. Download them once with network access: "
        f"`HF_HUB_OFFLINE=0 python -c \"from stemeval_extractor.models import "
        f"load_backend; load_backend('{spec.model_name}')\"`, "
        "or pre-populate the cache (HF_HOME / TORCH_HOME)."
    )


def _hash_state_dict(module) -> str:
    digest = hashlib.sha256()
    state = module.state_dict()
    for name in sorted(state):
        digest.update(name.encode())
        digest.update(state[name].detach().cpu().numpy().tobytes())
    return digest.hexdigest()


def _torch_eval(module):
    module.eval()
    for param in module.parameters():
        param.requires_grad_(False)
    return module


def _load_clap(spec: ExtractorSpec) -> Backend:
    import torch
    from transformers import ClapModel, ClapProcessor

    model = _torch_eval(ClapModel.from_pretrained(spec.weights_ref))
    processor = ClapProcessor.from_pretrained(spec.weights_ref)

    def embed(samples):
        inputs = processor(audios=[samples.astype(np.float32)],
                           sampling_rate=spec.sample_rate, return_tensors="pt")
        with torch.no_grad():
            features = model.get_audio_features(**inputs)
        return features.cpu().numpy().astype(np.float32)

    return Backend(spec, embed, _hash_state_dict(model))


def _load_encodec(spec: ExtractorSpec) -> Backend:
    import torch
    from transformers import EncodecModel

    model = _torch_eval(EncodecModel.from_pretrained(spec.weights_ref))

    def embed(samples):
        wav = torch.from_numpy(samples.astype(np.float32))[None, None, :]
        with torch.no_grad():
            latents = model.encoder(wav)  # (1, dim, frames)
        return latents[0].T.cpu().numpy().astype(np.float32)

    return Backend(spec, embed, _hash_state_dict(model))


def _load_wav2vec2(spec: ExtractorSpec) -> Backend:
    import torch
    from transformers import Wav2Vec2Model

    model = _torch_eval(Wav2Vec2Model.from_pretrained(spec.weights_ref))

    def embed(samples):
        wav = torch.from_numpy(samples.astype(np.float32))[None, :]
        with torch.no_grad():
            hidden = model(wav).last_hidden_state  # (1, frames, dim)
        return hidden[0].cpu().numpy().astype(np.float32)

    return Backend(spec, embed, _hash_state_dict(model))


def _load_hubert(spec: ExtractorSpec) -> Backend:
    import torch
    from transformers import HubertModel

    model = _torch_eval(HubertModel.from_pretrained(spec.weights_ref))

    def embed(samples):
        wav = torch.from_numpy(samples.astype(np.float32))[None, :]
        with torch.no_grad():
            hidden = model(wav).last_hidden_state
        return hidden[0].cpu().numpy().astype(np.float32)

    return Backend(spec, embed, _hash_state_dict(model))


def _load_vggish(spec: ExtractorSpec) -> Backend:
    import torch

    model = torch.hub.load(spec.weights_ref, "vggish",
                           trust_repo=True, skip_validation=True)
    model = _torch_eval(model)
    model.postprocess = False

    def embed(samples):
        with torch.no_grad():
            out = model(samples.astype(np.float32), fs=spec.sample_rate)
        return out.cpu().numpy().astype(np.float32).reshape(-1, spec.dim)

    return Backend(spec, embed, _hash_state_dict(model))


_LOADERS: dict[str, Callable[[ExtractorSpec], Backend]] = {
    "clap-laion-music": _load_clap,
    "vggish": _load_vggish,
    "encodec": _load_encodec,
    "wav2vec2": _load_wav2vec2,
    "hubert": _load_hubert,
}


def load_backend(model_name: str) -> Backend:
    """Load (once per process) the backend for ``model_name``."""
    spec = get_spec(model_name)
    if model_name in _CACHE:
        return _CACHE[model_name]
    # resolve from the local cache only; downloading is a user decision
    os.environ.setdefault("HF_HUB_OFFLINE", "1")
    try:
        backend = _LOADERS[model_name](spec)
    except ModelUnavailableError:
        raise
    except Exception as exc:
        raise _unavailable(spec, exc) from None
    if backend.spec.dim != spec.dim:
        raise ModelUnavailableError(
            f"{model_name} backend advertises dim {backend.spec.dim}, "
            f"registry says {spec.dim}"
        )
    _CACHE[model_name] = backend
    return backend
