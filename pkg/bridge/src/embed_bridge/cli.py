"""Command-line entry point: load the model, then serve."""

from __future__ import annotations

import argparse
import sys

import uvicorn

from .app import DEFAULT_MAX_BATCH, create_app
from .encoders import DEFAULT_MODEL, build_encoder


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(
        prog="embed-bridge",
        description="Serve sentence embeddings over POST /embed and GET /health.",
    )
    parser.add_argument(
        "--model", default=DEFAULT_MODEL,
        help=f"sentence-transformers model name, or hash:<dim> (default {DEFAULT_MODEL})",
    )
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8080)
    parser.add_argument(
        "--max-batch", type=int, default=DEFAULT_MAX_BATCH,
        help=f"largest accepted 'texts' batch (default {DEFAULT_MAX_BATCH})",
    )
    args = parser.parse_args(argv)

    try:
        encoder = build_encoder(args.model)
    except Exception as exc:
        print(f"error: could not load model {args.model!r}: {exc}", file=sys.stderr)
        sys.exit(1)

    print(
        f"serving model {encoder.model_id} (dim {encoder.dim}) "
        f"on {args.host}:{args.port}",
        file=sys.stderr,
    )
    uvicorn.run(
        create_app(encoder, max_batch=args.max_batch),
        host=args.host,
        port=args.port,
        log_level="warning",
    )


if __name__ == "__main__":
    main()
