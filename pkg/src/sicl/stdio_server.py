"""Serve a local backend over newline-delimited JSON on stdin/stdout.

Lets any process drive the mock backend through the remote protocol:

    python -m sicl.stdio_server --backend mock
"""

from __future__ import annotations

import argparse
import json
import sys

from .wire import error_response, handle_request


def serve(backend, stdin=None, stdout=None) -> None:
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
            response = handle_request(backend, request)
        stdout.write(json.dumps(response, ensure_ascii=False) + "\n")
        stdout.flush()


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="serve a backend over stdio")
    parser.add_argument("--backend", default="mock", help="backend spec (default: mock)")
    args = parser.parse_args(argv)
    from .remote import resolve_backend

    serve(resolve_backend(args.backend))
    return 0


if __name__ == "__main__":
    sys.exit(main())
