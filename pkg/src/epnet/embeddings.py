"""Per-token contextual embeddings: EPNE binary file IO, a deterministic
hash-based fallback embedder, and span max-pooling.

Embeddings rest as 32-bit floats and are promoted to float64 in memory so
that downstream gradient checks run in double precision.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass

import numpy as np

from .corpus import Dataset, Span
from .errors import CorruptFileError, DataError, FileFormatError, VersionMismatchError

EPNE_MAGIC = b"EPNE"
EPNE_VERSION = 1

# Relative weight of the neighbor-token components in the fallback embedder.
# Large enough that context shifts a token's vector, small enough that the
# token identity dominates and few-shot classification stays learnable.
CONTEXT_WEIGHT = 0.15

_BOS = "\x02"
_EOS = "\x03"


@dataclass
class EmbeddingStore:
    dim: int
    table: dict[str, np.ndarray]  # sentence id -> (n, dim) float64

    def matrix(self, sentence_id: str) -> np.ndarray:
        try:
            return self.table[sentence_id]
        except KeyError:
            raise DataError(f"no embeddings for sentence id '{sentence_id}'") from None

    def __contains__(self, sentence_id: str) -> bool:
        return sentence_id in self.table


@dataclass
class PooledSpan:
    span: Span
    pooled: np.ndarray  # (dim,) coordinate-wise maximum over the span's rows


def write_embedding_file(store: EmbeddingStore, path) -> None:
    with open(path, "wb") as fh:
        fh.write(EPNE_MAGIC)
        fh.write(struct.pack("<II", EPNE_VERSION, store.dim))
        fh.write(struct.pack("<Q", len(store.table)))
        for sid, matrix in store.table.items():
            raw = sid.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", matrix.shape[0]))
            fh.write(np.ascontiguousarray(matrix, dtype="<f4").tobytes())


def read_embedding_file(path, dataset: Dataset | None = None) -> EmbeddingStore:
    """Load an EPNE file; when a dataset is supplied, verify coverage and
    per-sentence token counts against it."""
    data = open(path, "rb").read()
    pos = 0

    def take(n: int, what: str) -> bytes:
        nonlocal pos
        if pos + n > len(data):
            raise CorruptFileError(f"{path}: truncated while reading {what}")
        chunk = data[pos:pos + n]
        pos += n
        return chunk

    if take(4, "magic") != EPNE_MAGIC:
        raise FileFormatError(f"{path}: bad magic, not an EPNE embedding file")
    version, dim = struct.unpack("<II", take(8, "header"))
    if version != EPNE_VERSION:
        raise VersionMismatchError(f"{path}: format version {version}, expected {EPNE_VERSION}")
    (count,) = struct.unpack("<Q", take(8, "sentence count"))
    table: dict[str, np.ndarray] = {}
    for _ in range(count):
        (id_len,) = struct.unpack("<I", take(4, "id length"))
        sid = take(id_len, "sentence id").decode("utf-8")
        (n_tokens,) = struct.unpack("<I", take(4, "token count"))
        payload = take(n_tokens * dim * 4, f"embedding rows of '{sid}'")
        matrix = np.frombuffer(payload, dtype="<f4").reshape(n_tokens, dim)
        table[sid] = matrix.astype(np.float64)
    if pos != len(data):
        raise CorruptFileError(f"{path}: {len(data) - pos} trailing bytes after payload")

    store = EmbeddingStore(dim=dim, table=table)
    if dataset is not None:
        for sent in dataset.sentences:
            if sent.id not in table:
                raise DataError(f"{path}: no embeddings for sentence id '{sent.id}'")
            rows = table[sent.id].shape[0]
            if rows != len(sent):
                raise DataError(
                    f"{path}: sentence '{sent.id}' has {rows} rows but {len(sent)} tokens"
                )
    return store


def _hash_unit_vector(seed: int, role: str, text: str, dim: int) -> np.ndarray:
    """Map (seed, role, text) to a unit vector via per-block integer hashing."""
    coords = np.empty(dim, dtype=np.float64)
    for block in range(0, dim, 8):
        key = f"{seed}\x1f{role}\x1f{text}\x1f{block}".encode("utf-8")
        digest = hashlib.blake2b(key, digest_size=64).digest()
        words = np.frombuffer(digest, dtype="<u8")[: min(8, dim - block)]
        coords[block:block + len(words)] = words.astype(np.float64) / 2.0**63 - 1.0
    norm = float(np.linalg.norm(coords))
    if norm == 0.0:
        coords[0] = 1.0
        norm = 1.0
    return coords / norm


def hash_embed(dataset: Dataset, dim: int, seed: int) -> EmbeddingStore:
    """Deterministic stand-in embedder: each token's vector is a function of
    its lowercased string and a one-token context window, unit-normalized."""
    if dim < 1:
        raise DataError(f"embedding dimension must be >= 1, got {dim}")
    cache: dict[tuple[str, str, str], np.ndarray] = {}
    table: dict[str, np.ndarray] = {}
    for sent in dataset.sentences:
        lowered = [tok.lower() for tok in sent.tokens]
        rows = np.empty((len(sent), dim), dtype=np.float64)
        for i, tok in enumerate(lowered):
            left = lowered[i - 1] if i > 0 else _BOS
            right = lowered[i + 1] if i + 1 < len(lowered) else _EOS
            key = (left, tok, right)
            vec = cache.get(key)
            if vec is None:
                vec = _hash_unit_vector(seed, "tok", tok, dim) + CONTEXT_WEIGHT * (
                    _hash_unit_vector(seed, "left", left, dim)
                    + _hash_unit_vector(seed, "right", right, dim)
                )
                vec /= np.linalg.norm(vec)
                cache[key] = vec
            rows[i] = vec
        table[sent.id] = rows
    return EmbeddingStore(dim=dim, table=table)


def max_pool(store: EmbeddingStore, span: Span) -> PooledSpan:
    matrix = store.matrix(span.sentence_id)
    if span.end > matrix.shape[0]:
        raise DataError(
            f"span ({span.start}, {span.end}) out of bounds for sentence "
            f"'{span.sentence_id}' with {matrix.shape[0]} tokens"
        )
    pooled = matrix[span.start:span.end].max(axis=0)
    return PooledSpan(span=span, pooled=pooled)
