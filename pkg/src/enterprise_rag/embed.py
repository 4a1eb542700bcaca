"""Embedding contract for the dense index.

Two producers share it: a deterministic local feature-hash embedder used
for tests and desk-scale runs, and a remote HTTP client for real sentence
embedding models. Every vector leaving this module is L2-normalized, so
downstream inner products equal cosine similarity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import requests

from .sparse_index import tokenize

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


class EmbedError(RuntimeError):
    """Remote embedding endpoint failure or malformed response."""


@dataclass(frozen=True)
class EmbedderProfile:
    name: str
    dims: int
    endpoint: str | None = None
    model_id: str | None = None

    def __post_init__(self):
        if self.dims <= 0:
            raise ValueError("dims must be positive")

    @property
    def is_remote(self) -> bool:
        return self.endpoint is not None


# high_precision / lightweight expect an endpoint from config before use;
# local_test is the self-contained hash embedder.
DEFAULT_EMBEDDER_PROFILES = {
    "high_precision": EmbedderProfile("high_precision", 768, model_id="all-mpnet-base-v2"),
    "lightweight": EmbedderProfile("lightweight", 384, model_id="paraphrase-MiniLM-L3-v2"),
    "local_test": EmbedderProfile("local_test", 1024),
}


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a. Fixed constants keep buckets stable across runs and
    reimplementations."""
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def local_embed(text: str, dims: int) -> np.ndarray:
    """Deterministic feature-hash embedding.

    Each token and each character trigram of the token hashes to a bucket
    in [0, dims) with a +-1 sign from bit 63; accumulated counts are
    L2-normalized. Empty or whitespace-only text maps to the basis vector
    e_0 so it is still unit norm.
    """
    if dims < 8:
        raise ValueError("dims must be >= 8")
    tokens = tokenize(text)
    vec = np.zeros(dims, dtype=np.float64)
    if not tokens:
        vec[0] = 1.0
        return vec.astype(np.float32)
    for token in tokens:
        features = [token]
        features.extend(token[i : i + 3] for i in range(len(token) - 2))
        for feat in features:
            h = fnv1a64(feat.encode("utf-8"))
            sign = 1.0 if (h >> 63) == 0 else -1.0
            vec[h % dims] += sign
    norm = np.linalg.norm(vec)
    if norm == 0.0:  # signs can cancel exactly on tiny dims
        vec[:] = 0.0
        vec[0] = 1.0
        return vec.astype(np.float32)
    return (vec / norm).astype(np.float32)


def _normalize_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return (matrix / norms).astype(np.float32)


def embed_texts(
    texts: list[str],
    profile: EmbedderProfile,
    timeout: float = 30.0,
) -> list[np.ndarray]:
    """Embed a batch of texts, order-preserving, all unit norm."""
    if not texts:
        raise ValueError("texts must be a non-empty list")
    if not profile.is_remote:
        return [local_embed(t, profile.dims) for t in texts]

    payload = {"model": profile.model_id or profile.name, "input": list(texts)}
    try:
        resp = requests.post(profile.endpoint, json=payload, timeout=timeout)
    except requests.RequestException as exc:
        raise EmbedError(f"embedding endpoint unreachable: {profile.endpoint}") from exc
    if resp.status_code != 200:
        raise EmbedError(f"embedding endpoint returned {resp.status_code}")
    try:
        rows = [item["embedding"] for item in resp.json()["data"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise EmbedError("malformed embedding response") from exc
    if len(rows) != len(texts):
        raise EmbedError(f"expected {len(texts)} embeddings, got {len(rows)}")
    matrix = np.asarray(rows, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[1] != profile.dims:
        raise EmbedError(
            f"embedding dimension mismatch: expected {profile.dims}, got {matrix.shape}"
        )
    normalized = _normalize_rows(matrix)
    return [normalized[i] for i in range(normalized.shape[0])]
