"""Encoder backends for the bridge.

The default backend wraps a pre-trained sentence-transformers model
(all-MiniLM-L6-v2, 384 dimensions). A dependency-free deterministic
backend is available as ``hash:<dim>`` for offline deployments and CI.
"""

from __future__ import annotations

import math
from typing import Protocol, Sequence

DEFAULT_MODEL = "all-MiniLM-L6-v2"

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


class Encoder(Protocol):
    model_id: str
    dim: int

    def encode(self, texts: Sequence[str]) -> list[list[float]]: ...


class SentenceTransformerEncoder:
    """Pre-trained sentence-embedding model, loaded once at startup."""

    def __init__(self, model_name: str = DEFAULT_MODEL):
        from sentence_transformers import SentenceTransformer

        self.model_id = model_name
        self._model = SentenceTransformer(model_name)
        self.dim = int(self._model.get_sentence_embedding_dimension())

    def encode(self, texts: Sequence[str]) -> list[list[float]]:
        vectors = self._model.encode(list(texts), show_progress_bar=False)
        return [[float(x) for x in row] for row in vectors]


class HashTrigramEncoder:
    """Deterministic signed trigram-hashing encoder (no model download)."""

    def __init__(self, dim: int = 384):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.model_id = f"hash:{dim}"
        self.dim = dim

    def encode(self, texts: Sequence[str]) -> list[list[float]]:
        return [self._one(text) for text in texts]

    def _one(self, text: str) -> list[float]:
        data = text.lower().encode("utf-8")
        acc = [0.0] * self.dim
        if data:
            windows = (
                [data] if len(data) < 3 else [data[i : i + 3] for i in range(len(data) - 2)]
            )
            for window in windows:
                h = _FNV_OFFSET
                for byte in window:
                    h = ((h ^ byte) * _FNV_PRIME) & _MASK64
                acc[h % self.dim] += 1.0 if h < (1 << 63) else -1.0
        norm = math.sqrt(sum(x * x for x in acc))
        return [x / norm for x in acc] if norm else acc


def build_encoder(model_spec: str) -> Encoder:
    """Resolve a --model value into an encoder backend.

    ``hash:<dim>`` selects the offline encoder; anything else is treated
    as a sentence-transformers model name.
    """
    if model_spec.startswith("hash:"):
        return HashTrigramEncoder(dim=int(model_spec.split(":", 1)[1]))
    if model_spec == "hash":
        return HashTrigramEncoder()
    return SentenceTransformerEncoder(model_spec)
