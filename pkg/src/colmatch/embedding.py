"""Vector embeddings of column values and metadata.

Two providers sit behind one contract: a deterministic hashing embedder
(``hash-v1``, dependency-free, bit-identical across runs and platforms)
and a remote client that speaks the HTTP/JSON protocol of an external
embedding service. Column embeddings are the unweighted mean of the
embeddings of a column's unique text values, accumulated in 64-bit floats
and stored as 32-bit floats.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import requests

from .ingest import ColumnProfile, ColumnRef, DataType

DEFAULT_DIM = 384
DEFAULT_CHUNK_SIZE = 10_000

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


class ProviderError(Exception):
    """A provider could not produce embeddings (unreachable, bad shape...)."""


class EmptyColumnError(Exception):
    """A column has no embeddable values; callers record it as skipped."""

    def __init__(self, ref: ColumnRef):
        super().__init__(f"column {ref.key()} has no embeddable values")
        self.ref = ref


def fnv1a_64(data: bytes) -> int:
    """64-bit FNV-1a hash."""
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return h


def hash_embed(text: str, dim: int = DEFAULT_DIM) -> np.ndarray:
    """Deterministic signed trigram-hashing embedding, L2-normalized.

    The lowercased UTF-8 bytes are scanned with a 3-byte window (a string
    shorter than 3 bytes is a single feature); each feature's 64-bit
    FNV-1a hash picks a bucket (hash mod dim) and a sign (top hash bit).
    Empty text yields the zero vector.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    data = text.lower().encode("utf-8")
    acc = np.zeros(dim, dtype=np.float64)
    if len(data) == 0:
        return acc.astype(np.float32)
    if len(data) < 3:
        h = fnv1a_64(data)
        acc[h % dim] += 1.0 if h < (1 << 63) else -1.0
    else:
        buf = np.frombuffer(data, dtype=np.uint8).astype(np.uint64)
        h = np.full(len(buf) - 2, _FNV_OFFSET, dtype=np.uint64)
        prime = np.uint64(_FNV_PRIME)
        for offset in range(3):
            h = (h ^ buf[offset : len(buf) - 2 + offset]) * prime
        signs = np.where((h >> np.uint64(63)) == 0, 1.0, -1.0)
        buckets = (h % np.uint64(dim)).astype(np.intp)
        np.add.at(acc, buckets, signs)
    norm = np.linalg.norm(acc)
    if norm == 0.0:
        return np.zeros(dim, dtype=np.float32)
    return (acc / norm).astype(np.float32)


class HashEmbedder:
    """Built-in deterministic provider (id ``hash-v1``)."""

    provider_id = "hash-v1"

    def __init__(self, dim: int = DEFAULT_DIM):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        return np.stack([hash_embed(t, self.dim) for t in texts])


class RemoteEmbedder:
    """Client for an embedding service speaking the POST /embed protocol."""

    provider_id = "remote"

    def __init__(
        self,
        endpoint: str,
        dim: int = DEFAULT_DIM,
        timeout: float = 60.0,
        max_batch: int = 1_000,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.dim = dim
        self.timeout = timeout
        self.max_batch = max_batch

    def health(self) -> dict:
        try:
            response = requests.get(f"{self.endpoint}/health", timeout=self.timeout)
            response.raise_for_status()
            return response.json()
        except requests.RequestException as exc:
            raise ProviderError(f"embedding service unreachable: {exc}") from exc

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        parts = [
            self._embed_one_batch(list(texts[i : i + self.max_batch]))
            for i in range(0, len(texts), self.max_batch)
        ]
        return np.concatenate(parts) if len(parts) > 1 else parts[0]

    def _embed_one_batch(self, texts: list[str]) -> np.ndarray:
        try:
            response = requests.post(
                f"{self.endpoint}/embed", json={"texts": texts}, timeout=self.timeout
            )
            response.raise_for_status()
            payload = response.json()
        except requests.RequestException as exc:
            raise ProviderError(f"embedding service unreachable: {exc}") from exc
        except ValueError as exc:
            raise ProviderError(f"embedding service returned invalid JSON: {exc}") from exc

        embeddings = payload.get("embeddings")
        if payload.get("dim") != self.dim:
            raise ProviderError(
                f"dimension mismatch: service reports dim {payload.get('dim')}, "
                f"client configured for {self.dim}"
            )
        if not isinstance(embeddings, list) or len(embeddings) != len(texts):
            raise ProviderError(
                f"count mismatch: requested {len(texts)} embeddings, "
                f"got {len(embeddings) if isinstance(embeddings, list) else 'none'}"
            )
        vectors = np.asarray(embeddings, dtype=np.float32)
        if vectors.ndim != 2 or vectors.shape[1] != self.dim:
            raise ProviderError(f"dimension mismatch in response vectors: {vectors.shape}")
        if not np.isfinite(vectors).all():
            raise ProviderError("embedding service returned non-finite components")
        return vectors


Provider = HashEmbedder | RemoteEmbedder


def embed_texts(provider: Provider, batch: Sequence[str]) -> np.ndarray:
    """Embed a batch of texts; one row per input, order preserved."""
    if len(batch) == 0:
        raise ValueError("batch must be non-empty")
    return provider.embed(batch)


@dataclass(frozen=True)
class ColumnEmbedding:
    """Mean embedding of a column's unique values, with provenance."""

    ref: ColumnRef
    mean: np.ndarray
    value_count: int
    provider_id: str


@dataclass(frozen=True)
class MetadataEmbeddings:
    """Separate vectors for a column's name, data type, and table names."""

    ref: ColumnRef
    name_vec: np.ndarray
    dtype_vec: np.ndarray
    tables_vec: np.ndarray


def embed_column(
    profile: ColumnProfile,
    provider: Provider,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> ColumnEmbedding:
    """Mean-embed a column's unique values, processed in chunks.

    The running sum is kept in float64 so the result is independent of
    chunk size to well under 1e-6 per component.
    """
    if chunk_size < 1:
        raise ValueError("chunk_size must be >= 1")
    values = profile.unique_values
    if not values:
        raise EmptyColumnError(profile.ref)

    total = np.zeros(provider.dim, dtype=np.float64)
    for start in range(0, len(values), chunk_size):
        vectors = embed_texts(provider, values[start : start + chunk_size])
        total += vectors.sum(axis=0, dtype=np.float64)
    mean = (total / len(values)).astype(np.float32)
    return ColumnEmbedding(
        ref=profile.ref,
        mean=mean,
        value_count=len(values),
        provider_id=provider.provider_id,
    )


def embed_metadata(
    ref: ColumnRef, dtype: DataType, provider: Provider
) -> MetadataEmbeddings:
    """Embed the column name, its data type word, and its joined table list."""
    name_vec, dtype_vec, tables_vec = embed_texts(
        provider, [ref.column_name, dtype.value, ", ".join(ref.tables)]
    )
    return MetadataEmbeddings(
        ref=ref, name_vec=name_vec, dtype_vec=dtype_vec, tables_vec=tables_vec
    )
