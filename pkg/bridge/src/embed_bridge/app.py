"""The HTTP application: POST /embed and GET /health.

Request: ``{"texts": ["..."]}``. Response: ``{"dim": N, "embeddings":
[[...], ...]}``, one vector per input text, in order. Malformed bodies
get 400, oversized batches 413. The service is stateless; callers are
expected to persist embeddings themselves.
"""

from __future__ import annotations

import math

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .encoders import Encoder

DEFAULT_MAX_BATCH = 1_000


def create_app(encoder: Encoder, max_batch: int = DEFAULT_MAX_BATCH) -> FastAPI:
    app = FastAPI(title="embed-bridge", docs_url=None, redoc_url=None)

    @app.get("/health")
    async def health() -> dict:
        return {"status": "ok", "dim": encoder.dim, "model": encoder.model_id}

    @app.post("/embed")
    async def embed(request: Request):
        try:
            body = await request.json()
        except Exception:
            return _error(400, "request body is not valid JSON")
        if not isinstance(body, dict) or "texts" not in body:
            return _error(400, "expected a JSON object with a 'texts' list")
        texts = body["texts"]
        if not isinstance(texts, list) or not texts:
            return _error(400, "'texts' must be a non-empty list")
        if not all(isinstance(t, str) for t in texts):
            return _error(400, "'texts' must contain only strings")
        if len(texts) > max_batch:
            return _error(413, f"batch of {len(texts)} exceeds maximum {max_batch}")

        embeddings = encoder.encode(texts)
        if len(embeddings) != len(texts) or any(
            len(vec) != encoder.dim or not all(math.isfinite(x) for x in vec)
            for vec in embeddings
        ):
            return _error(500, "encoder produced an invalid embedding batch")
        return {"dim": encoder.dim, "embeddings": embeddings}

    return app


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message})
