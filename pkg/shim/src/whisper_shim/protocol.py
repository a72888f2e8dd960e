"""Wire payload helpers: base64 float32 codecs and error objects.

Field names here are the protocol; they must match the toolkit client
bit for bit.
"""

from __future__ import annotations

import base64

import numpy as np


def floats_to_b64(values: np.ndarray) -> str:
    return base64.b64encode(
        np.ascontiguousarray(values, dtype="<f4").tobytes()
    ).decode("ascii")


def b64_to_floats(payload: str) -> np.ndarray:
    raw = base64.b64decode(payload.encode("ascii"), validate=True)
    if len(raw) % 4:
        raise ValueError("float32 payload length not a multiple of 4")
    return np.frombuffer(raw, dtype="<f4").astype(np.float32)


def error_response(code: str, message: str) -> dict:
    return {"error": {"code": code, "message": message}}


def control_fields(obj: dict) -> dict:
    """Normalized control object echoed back as applied_control."""
    return {
        "language": obj.get("language"),
        "task": obj.get("task", "transcribe"),
        "no_timestamps": bool(obj.get("no_timestamps", True)),
        "prompt": obj.get("prompt"),
        "prefix": obj.get("prefix"),
    }
