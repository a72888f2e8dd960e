"""Protocol endpoints over HTTP (FastAPI) and newline-delimited stdio.

Request bodies are parsed by hand so error objects keep the exact protocol
shape even for malformed JSON.
"""

from __future__ import annotations

import json
import sys

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .model import AudioTooLongError, ControlError, WhisperBundle
from .protocol import b64_to_floats, control_fields, error_response, floats_to_b64

ENCODE_PATH = "/v1/encode"
TRANSCRIBE_PATH = "/v1/transcribe"

_STATUS = {"bad_request": 400, "audio_too_long": 400, "model_error": 500}


def handle_request(bundle: WhisperBundle, request: dict) -> dict:
    op = request.get("op")
    if op not in ("encode", "transcribe"):
        return error_response("bad_request", f"unknown op {op!r}")
    try:
        audio = b64_to_floats(request["audio_b64"])
        sample_rate = int(request["sample_rate"])
        if audio.size == 0:
            return error_response("bad_request", "empty audio payload")
        if op == "encode":
            frames, audio_frames = bundle.encode(audio, sample_rate)
            return {
                "dim": bundle.dim,
                "hop_seconds": bundle.hop_seconds,
                "audio_frames": audio_frames,
                "frames_b64": floats_to_b64(frames),
            }
        control = control_fields(request.get("control") or {})
        text = bundle.transcribe(audio, sample_rate, control)
        return {"text": text, "applied_control": control}
    except AudioTooLongError as exc:
        return error_response("audio_too_long", str(exc))
    except (ControlError, KeyError, ValueError, TypeError) as exc:
        return error_response("bad_request", str(exc))
    except RuntimeError as exc:
        return error_response("model_error", str(exc))


def create_app(bundle: WhisperBundle) -> FastAPI:
    app = FastAPI(title="whisper-shim")

    async def _dispatch(request: Request, op: str) -> JSONResponse:
        try:
            body = json.loads(await request.body())
            if not isinstance(body, dict):
                raise ValueError("request body must be a JSON object")
        except (json.JSONDecodeError, ValueError) as exc:
            return _reply(error_response("bad_request", f"invalid JSON: {exc}"))
        body.setdefault("op", op)
        if body["op"] != op:
            return _reply(error_response(
                "bad_request", f"op {body['op']!r} does not match endpoint {op!r}"))
        return _reply(handle_request(bundle, body))

    def _reply(obj: dict) -> JSONResponse:
        status = 200
        if "error" in obj:
            status = _STATUS.get(obj["error"]["code"], 500)
        return JSONResponse(obj, status_code=status)

    @app.post(ENCODE_PATH)
    async def encode(request: Request):
        return await _dispatch(request, "encode")

    @app.post(TRANSCRIBE_PATH)
    async def transcribe(request: Request):
        return await _dispatch(request, "transcribe")

    return app


def serve_stdio(bundle: WhisperBundle, stdin=None, stdout=None) -> None:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
        except json.JSONDecodeError as exc:
            response = error_response("bad_request", f"invalid JSON: {exc}")
        else:
            response = handle_request(bundle, request)
        stdout.write(json.dumps(response, ensure_ascii=False) + "\n")
        stdout.flush()
