import json
import sys
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from sicl import wire
from sicl.backend import ControlSequence, MockBackend, make_tone
from sicl.errors import AudioTooLong, BackendUnavailable
from sicl.remote import HttpBackend, StdioBackend, resolve_backend
from sicl.audio import Waveform


class _ProtocolHandler(BaseHTTPRequestHandler):
    backend = MockBackend()

    def do_POST(self):
        body = self.rfile.read(int(self.headers.get("Content-Length", 0)))
        try:
            request = json.loads(body)
        except json.JSONDecodeError:
            response, status = wire.error_response("bad_request", "invalid JSON"), 400
        else:
            if self.path == wire.ENCODE_PATH:
                request.setdefault("op", "encode")
            elif self.path == wire.TRANSCRIBE_PATH:
                request.setdefault("op", "transcribe")
            else:
                self._reply(wire.error_response("bad_request", "unknown path"), 404)
                return
            response = wire.handle_request(self.backend, request)
            status = 200 if "error" not in response else 400
        self._reply(response, status)

    def _reply(self, obj, status):
        payload = json.dumps(obj, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):  # keep test output quiet
        pass


@pytest.fixture(scope="module")
def http_url():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _ProtocolHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()


class TestHttpBackend:
    def test_encode(self, http_url):
        client = HttpBackend(http_url)
        seq = client.encode(make_tone(700))
        assert seq.dim == 8
        assert np.all(seq.frames[:, 1] == 1.0)

    def test_transcribe(self, http_url):
        client = HttpBackend(http_url)
        out = client.transcribe(make_tone(300), ControlSequence(prefix_text="洞。"))
        assert out.text == "洞"
        assert out.applied_control.prefix_text == "洞。"

    def test_matches_local_mock(self, http_url):
        client = HttpBackend(http_url)
        local = MockBackend()
        w = make_tone(2300)
        np.testing.assert_array_equal(
            client.encode(w).frames, local.encode(w).frames
        )

    def test_audio_too_long_maps_to_exception(self, http_url):
        client = HttpBackend(http_url)
        w = Waveform(np.full(16000 * 31, 0.1, dtype=np.float32), 16000)
        with pytest.raises(AudioTooLong):
            client.encode(w)

    def test_unreachable_host(self):
        client = HttpBackend("http://127.0.0.1:1", timeout=0.5)
        with pytest.raises(BackendUnavailable):
            client.encode(make_tone(300))

    def test_concurrent_calls(self, http_url):
        client = HttpBackend(http_url)
        results = {}

        def work(f):
            results[f] = client.transcribe(make_tone(f), ControlSequence()).text

        threads = [threading.Thread(target=work, args=(f,)) for f in (300, 700, 1100)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert results == {300: "零", 700: "一", 1100: "二"}


@pytest.fixture(scope="module")
def stdio_client():
    client = StdioBackend([sys.executable, "-m", "sicl.stdio_server", "--backend", "mock"])
    yield client
    client.close()


class TestStdioBackend:
    def test_encode(self, stdio_client):
        seq = stdio_client.encode(make_tone(1100))
        assert seq.dim == 8
        assert np.all(seq.frames[:, 2] == 1.0)

    def test_transcribe(self, stdio_client):
        out = stdio_client.transcribe(make_tone(300), ControlSequence(prefix_text="洞"))
        assert out.text == "洞"

    def test_sequential_requests_stay_in_sync(self, stdio_client):
        for f, expected in ((300, "零"), (700, "一"), (2700, "五")):
            out = stdio_client.transcribe(make_tone(f), ControlSequence())
            assert out.text == expected

    def test_error_maps_to_exception(self, stdio_client):
        w = Waveform(np.full(16000 * 31, 0.1, dtype=np.float32), 16000)
        with pytest.raises(AudioTooLong):
            stdio_client.encode(w)

    def test_missing_command(self):
        with pytest.raises(BackendUnavailable):
            StdioBackend(["/nonexistent-binary-xyz"])


class TestResolveBackend:
    def test_mock(self):
        assert isinstance(resolve_backend("mock"), MockBackend)

    def test_http(self):
        b = resolve_backend("http://example.test:9000")
        assert isinstance(b, HttpBackend)
        assert b.tag == "http://example.test:9000"

    def test_stdio(self):
        spec = f"stdio:{sys.executable} -m sicl.stdio_server --backend mock"
        b = resolve_backend(spec)
        assert isinstance(b, StdioBackend)
        b.close()

    def test_unknown(self):
        with pytest.raises(ValueError):
            resolve_backend("carrier-pigeon:coop")
