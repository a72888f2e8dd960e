"""Whisper serving shim speaking the sicl wire protocol."""

from .model import ShimConfig, WhisperBundle, load_bundle, tiny_bundle
from .service import create_app, serve_stdio

__version__ = "0.1.0"

__all__ = [
    "ShimConfig",
    "WhisperBundle",
    "create_app",
    "load_bundle",
    "serve_stdio",
    "tiny_bundle",
]
