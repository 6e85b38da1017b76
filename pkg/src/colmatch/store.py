"""On-disk store for column embeddings.

Layout: ``<store>/manifest.json`` (provider_id, dim, version) plus one
record per column named ``<db>__<column>.emb``. Record format, all
little-endian: magic ``CEMB``, u32 version=1, u32 dim, u32 value_count,
four dim-length float32 vectors (mean, name, dtype, tables), and a
trailing u64 FNV-1a checksum of everything before it. Writes go through
a temp file and an atomic rename.
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path

import numpy as np

from .embedding import ColumnEmbedding, MetadataEmbeddings, fnv1a_64
from .ingest import ColumnRef

_MAGIC = b"CEMB"
_VERSION = 1
_HEADER = struct.Struct("<III")  # version, dim, value_count
_CHECKSUM = struct.Struct("<Q")


class StoreError(Exception):
    """Base error for embedding-store failures."""


class KeyNotFoundError(StoreError):
    pass


class ProviderMismatchError(StoreError):
    pass


class CorruptRecordError(StoreError):
    pass


class EmbeddingStore:
    """A directory of embedding records under a single provider manifest."""

    def __init__(self, root: Path, provider_id: str, dim: int):
        self.root = root
        self.provider_id = provider_id
        self.dim = dim

    @classmethod
    def create(cls, root: Path | str, provider_id: str, dim: int) -> "EmbeddingStore":
        """Create a store, or open it if a matching manifest already exists."""
        root = Path(root)
        manifest_path = root / "manifest.json"
        if manifest_path.exists():
            store = cls.open(root)
            if store.provider_id != provider_id or store.dim != dim:
                raise ProviderMismatchError(
                    f"store at {root} holds provider={store.provider_id} dim={store.dim}, "
                    f"requested provider={provider_id} dim={dim}"
                )
            return store
        root.mkdir(parents=True, exist_ok=True)
        manifest = {"provider_id": provider_id, "dim": dim, "version": _VERSION}
        _atomic_write(manifest_path, json.dumps(manifest, indent=2).encode("utf-8"))
        return cls(root, provider_id, dim)

    @classmethod
    def open(cls, root: Path | str) -> "EmbeddingStore":
        root = Path(root)
        manifest_path = root / "manifest.json"
        if not manifest_path.exists():
            raise StoreError(f"no embedding store at {root} (missing manifest.json)")
        with manifest_path.open(encoding="utf-8") as fh:
            manifest = json.load(fh)
        if manifest.get("version") != _VERSION:
            raise StoreError(f"unsupported store version: {manifest.get('version')}")
        return cls(root, manifest["provider_id"], int(manifest["dim"]))

    def _path_for(self, key: ColumnRef) -> Path:
        return self.root / f"{key.key()}.emb"

    def has(self, key: ColumnRef) -> bool:
        return self._path_for(key).exists()

    def keys(self) -> list[str]:
        return sorted(p.stem for p in self.root.glob("*.emb"))

    def put(self, col_emb: ColumnEmbedding, meta_emb: MetadataEmbeddings) -> None:
        if col_emb.provider_id != self.provider_id:
            raise ProviderMismatchError(
                f"cannot put provider {col_emb.provider_id!r} record into "
                f"{self.provider_id!r} store"
            )
        vectors = (col_emb.mean, meta_emb.name_vec, meta_emb.dtype_vec, meta_emb.tables_vec)
        for vec in vectors:
            if vec.shape != (self.dim,):
                raise StoreError(
                    f"vector dim {vec.shape} does not match store dim {self.dim}"
                )
            if not np.isfinite(vec).all():
                raise StoreError("refusing to store non-finite vector components")
        body = _MAGIC + _HEADER.pack(_VERSION, self.dim, col_emb.value_count)
        for vec in vectors:
            body += np.ascontiguousarray(vec, dtype="<f4").tobytes()
        body += _CHECKSUM.pack(fnv1a_64(body))
        _atomic_write(self._path_for(col_emb.ref), body)

    def get(self, key: ColumnRef) -> tuple[ColumnEmbedding, MetadataEmbeddings]:
        path = self._path_for(key)
        if not path.exists():
            raise KeyNotFoundError(f"no embedding record for {key.key()}")
        blob = path.read_bytes()

        minimum = len(_MAGIC) + _HEADER.size + _CHECKSUM.size
        if len(blob) < minimum:
            raise CorruptRecordError(f"{path.name}: truncated record")
        if blob[:4] != _MAGIC:
            raise CorruptRecordError(f"{path.name}: bad magic")
        (checksum,) = _CHECKSUM.unpack_from(blob, len(blob) - _CHECKSUM.size)
        if fnv1a_64(blob[: -_CHECKSUM.size]) != checksum:
            raise CorruptRecordError(f"{path.name}: checksum mismatch")

        version, dim, value_count = _HEADER.unpack_from(blob, len(_MAGIC))
        if version != _VERSION:
            raise CorruptRecordError(f"{path.name}: unsupported record version {version}")
        if dim != self.dim:
            raise CorruptRecordError(
                f"{path.name}: record dim {dim} does not match store dim {self.dim}"
            )
        expected = minimum + 4 * dim * 4
        if len(blob) != expected:
            raise CorruptRecordError(f"{path.name}: wrong record length")

        offset = len(_MAGIC) + _HEADER.size
        vectors = []
        for _ in range(4):
            vectors.append(
                np.frombuffer(blob, dtype="<f4", count=dim, offset=offset).copy()
            )
            offset += dim * 4
        mean, name_vec, dtype_vec, tables_vec = vectors
        return (
            ColumnEmbedding(
                ref=key, mean=mean, value_count=value_count, provider_id=self.provider_id
            ),
            MetadataEmbeddings(
                ref=key, name_vec=name_vec, dtype_vec=dtype_vec, tables_vec=tables_vec
            ),
        )


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)
