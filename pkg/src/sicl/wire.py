"""JSON wire format for remote backends.

Requests and responses are plain JSON objects; audio and embedding payloads
travel as base64-encoded little-endian float32. The same message shapes are
used over HTTP and over newline-delimited stdio.
"""

from __future__ import annotations

import base64

import numpy as np

from .audio import Waveform
from .backend import Backend, ControlSequence, EmbeddingSequence, Transcript
from .errors import AudioTooLong, ControlRejected, SiclError

ENCODE_PATH = "/v1/encode"
TRANSCRIBE_PATH = "/v1/transcribe"


def floats_to_b64(values: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(values, dtype="<f4").tobytes()).decode("ascii")


def b64_to_floats(payload: str) -> np.ndarray:
    raw = base64.b64decode(payload.encode("ascii"), validate=True)
    if len(raw) % 4:
        raise ValueError("float32 payload length not a multiple of 4")
    return np.frombuffer(raw, dtype="<f4").astype(np.float32)


def control_to_wire(c: ControlSequence) -> dict:
    return {
        "language": c.language,
        "task": c.task,
        "no_timestamps": c.no_timestamps,
        "prompt": c.prompt_text,
        "prefix": c.prefix_text,
    }


def control_from_wire(obj: dict) -> ControlSequence:
    return ControlSequence(
        language=obj.get("language"),
        task=obj.get("task", "transcribe"),
        no_timestamps=bool(obj.get("no_timestamps", True)),
        prompt_text=obj.get("prompt"),
        prefix_text=obj.get("prefix"),
    )


def encode_request(w: Waveform) -> dict:
    return {"op": "encode", "sample_rate": w.sample_rate, "audio_b64": floats_to_b64(w.samples)}


def transcribe_request(w: Waveform, control: ControlSequence) -> dict:
    return {
        "op": "transcribe",
        "sample_rate": w.sample_rate,
        "audio_b64": floats_to_b64(w.samples),
        "control": control_to_wire(control),
    }


def waveform_from_request(obj: dict) -> Waveform:
    samples = b64_to_floats(obj["audio_b64"])
    return Waveform(np.clip(samples, -1.0, 1.0), int(obj["sample_rate"]))


def embedding_to_response(seq: EmbeddingSequence) -> dict:
    return {
        "dim": seq.dim,
        "hop_seconds": seq.frame_hop_seconds,
        "audio_frames": seq.audio_frames,
        "frames_b64": floats_to_b64(seq.frames),
    }


def embedding_from_response(obj: dict) -> EmbeddingSequence:
    dim = int(obj["dim"])
    flat = b64_to_floats(obj["frames_b64"])
    if dim <= 0 or len(flat) % dim:
        raise ValueError("frames payload does not match dim")
    return EmbeddingSequence(flat.reshape(-1, dim), float(obj["hop_seconds"]),
                             int(obj["audio_frames"]))


def transcript_to_response(t: Transcript) -> dict:
    return {"text": t.text, "applied_control": control_to_wire(t.applied_control)}


def transcript_from_response(obj: dict) -> Transcript:
    return Transcript(obj["text"], control_from_wire(obj["applied_control"]))


def error_response(code: str, message: str) -> dict:
    return {"error": {"code": code, "message": message}}


def handle_request(backend: Backend, request: dict) -> dict:
    """Serve one protocol request against a local backend handle.

    Used by the stdio server and by in-process test servers; error conditions
    map to the protocol's error objects rather than raising.
    """
    try:
        op = request.get("op")
        if op == "encode":
            return embedding_to_response(backend.encode(waveform_from_request(request)))
        if op == "transcribe":
            control = control_from_wire(request.get("control") or {})
            return transcript_to_response(
                backend.transcribe(waveform_from_request(request), control)
            )
        return error_response("bad_request", f"unknown op {op!r}")
    except AudioTooLong as exc:
        return error_response("audio_too_long", str(exc))
    except ControlRejected as exc:
        return error_response("control_rejected", str(exc))
    except (KeyError, ValueError, TypeError) as exc:
        return error_response("bad_request", str(exc))
    except SiclError as exc:
        return error_response("model_error", str(exc))
