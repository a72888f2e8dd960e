"""Remote backend clients: HTTP and newline-delimited JSON over stdio.

Backend spec strings accepted by :func:`resolve_backend`:

* ``mock`` - the in-process deterministic mock backend
* ``http://host:port`` / ``https://...`` - HTTP POST to /v1/encode and
  /v1/transcribe
* ``stdio:CMD ARGS...`` - spawn CMD and exchange one JSON object per line

The CLI reads the default spec from the ``SICL_BACKEND_URL`` environment
variable.
"""

from __future__ import annotations

import json
import shlex
import subprocess
import threading

import requests

from . import wire
from .audio import Waveform
from .backend import Backend, ControlSequence, EmbeddingSequence, MockBackend, Transcript
from .errors import AudioTooLong, BackendUnavailable, ControlRejected

BACKEND_URL_ENV = "SICL_BACKEND_URL"

_ERROR_MAP = {
    "audio_too_long": AudioTooLong,
    "control_rejected": ControlRejected,
}


def _raise_for_error(obj: dict):
    err = obj.get("error")
    if err is None:
        return
    code = err.get("code", "unknown")
    message = err.get("message", "")
    raise _ERROR_MAP.get(code, BackendUnavailable)(f"{code}: {message}")


class HttpBackend(Backend):
    """Client for an HTTP serving shim speaking the wire protocol."""

    def __init__(self, base_url: str, timeout: float = 120.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.tag = base_url
        self._local = threading.local()

    def _session(self) -> requests.Session:
        if not hasattr(self._local, "session"):
            self._local.session = requests.Session()
        return self._local.session

    def _post(self, path: str, payload: dict) -> dict:
        try:
            resp = self._session().post(self.base_url + path, json=payload,
                                        timeout=self.timeout)
        except requests.RequestException as exc:
            raise BackendUnavailable(f"{self.base_url}: {exc}") from exc
        try:
            obj = resp.json()
        except ValueError as exc:
            raise BackendUnavailable(
                f"{self.base_url}: non-JSON response (HTTP {resp.status_code})"
            ) from exc
        _raise_for_error(obj)
        if resp.status_code != 200:
            raise BackendUnavailable(f"{self.base_url}: HTTP {resp.status_code}")
        return obj

    def encode(self, w: Waveform) -> EmbeddingSequence:
        return wire.embedding_from_response(
            self._post(wire.ENCODE_PATH, wire.encode_request(w))
        )

    def transcribe(self, w: Waveform, control: ControlSequence) -> Transcript:
        return wire.transcript_from_response(
            self._post(wire.TRANSCRIBE_PATH, wire.transcribe_request(w, control))
        )


class StdioBackend(Backend):
    """Client that speaks the protocol to a subprocess over stdin/stdout.

    Requests are serialized under a lock: one line out, one line back, so
    concurrent callers cannot interleave frames.
    """

    def __init__(self, command: list[str]):
        self.command = command
        self.tag = "stdio:" + " ".join(command)
        self._lock = threading.Lock()
        try:
            self._proc = subprocess.Popen(
                command, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True
            )
        except OSError as exc:
            raise BackendUnavailable(f"cannot start {command!r}: {exc}") from exc

    def _roundtrip(self, payload: dict) -> dict:
        with self._lock:
            if self._proc.poll() is not None:
                raise BackendUnavailable(f"{self.tag}: process exited")
            try:
                self._proc.stdin.write(json.dumps(payload) + "\n")
                self._proc.stdin.flush()
                line = self._proc.stdout.readline()
            except (BrokenPipeError, OSError) as exc:
                raise BackendUnavailable(f"{self.tag}: {exc}") from exc
        if not line:
            raise BackendUnavailable(f"{self.tag}: closed stream")
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise BackendUnavailable(f"{self.tag}: bad response line") from exc
        _raise_for_error(obj)
        return obj

    def encode(self, w: Waveform) -> EmbeddingSequence:
        return wire.embedding_from_response(self._roundtrip(wire.encode_request(w)))

    def transcribe(self, w: Waveform, control: ControlSequence) -> Transcript:
        return wire.transcript_from_response(
            self._roundtrip(wire.transcribe_request(w, control))
        )

    def close(self):
        if self._proc.poll() is None:
            self._proc.stdin.close()
            self._proc.wait(timeout=10)


def resolve_backend(spec: str) -> Backend:
    """Turn a backend spec string into a backend handle."""
    if spec == "mock":
        return MockBackend()
    if spec.startswith(("http://", "https://")):
        return HttpBackend(spec)
    if spec.startswith("stdio:"):
        return StdioBackend(shlex.split(spec[len("stdio:"):]))
    raise ValueError(f"unknown backend spec {spec!r} (expected mock, http(s)://, or stdio:)")
