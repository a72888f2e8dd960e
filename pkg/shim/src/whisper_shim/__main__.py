"""Serve a Whisper checkpoint over the wire protocol.

    whisper-shim --model base --port 8000
    whisper-shim --model tiny-random --stdio
"""

from __future__ import annotations

import argparse
import sys

from .model import ShimConfig, load_bundle
from .service import create_app, serve_stdio


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="whisper-shim",
                                     description="Whisper wire-protocol server")
    parser.add_argument("--model", default="base",
                        help="size tag (base/small/medium/large), checkpoint "
                             "path, or tiny-random for an offline dev model")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--port", type=int, default=8000)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--max-new-tokens", type=int, default=128)
    parser.add_argument("--stdio", action="store_true",
                        help="serve newline-delimited JSON on stdin/stdout")
    args = parser.parse_args(argv)

    cfg = ShimConfig(model=args.model, device=args.device, port=args.port,
                     max_new_tokens=args.max_new_tokens)
    bundle = load_bundle(cfg)
    if args.stdio:
        serve_stdio(bundle)
        return 0
    import uvicorn

    uvicorn.run(create_app(bundle), host=args.host, port=cfg.port, log_level="warning")
    return 0


if __name__ == "__main__":
    sys.exit(main())
