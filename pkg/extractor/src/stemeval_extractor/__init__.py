"""Thin wrappers over pretrained audio embedding models, emitting the
EMB1 files that the stemeval Frechet-audio-distance pipeline consumes."""

from .emb1 import read_emb1, write_emb1
from .errors import ExtractorError, ModelUnavailableError, ParameterError
from .extract import extract
from .models import REGISTRY, Backend, ExtractorSpec, get_spec, load_backend

__version__ = "0.1.0"
