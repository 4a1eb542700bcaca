"""Cross-encoder style reranking of the fused candidate pool.

The local_lexical scorer is a deterministic stand-in for a remote
cross-encoder: token-multiset F1 between query and chunk text. The remote
kind posts query/document pairs to an HTTP scorer and min-max normalizes
the returned scores into [0, 1] so both kinds are interchangeable
downstream.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import requests

from .ingest import Chunk
from .retrieve import ScoredCandidate, normalize_scores
from .sparse_index import tokenize

DEFAULT_TOP_N = 20


@dataclass(frozen=True)
class RerankerProfile:
    kind: str = "local_lexical"  # "local_lexical" | "remote"
    endpoint: str | None = None
    model_id: str | None = "ms-marco-MiniLM-L-12-v2"
    top_n: int = DEFAULT_TOP_N

    def __post_init__(self):
        if self.kind not in ("local_lexical", "remote"):
            raise ValueError(f"unknown reranker kind: {self.kind!r}")
        if (self.kind == "remote") != (self.endpoint is not None):
            raise ValueError("endpoint must be set iff kind is remote")
        if self.top_n < 1:
            raise ValueError("top_n must be >= 1")


class RerankError(RuntimeError):
    """Remote reranker failure. Carries the untouched fused ordering so
    callers may degrade gracefully."""

    def __init__(self, message: str, fallback: list[ScoredCandidate]):
        super().__init__(message)
        self.fallback = fallback


def score_pair(query: str, chunk_text: str) -> float:
    """Token-multiset F1 in [0, 1]: 2*|overlap| / (|q| + |c|), overlap
    counted with multiplicity. Both empty scores 0."""
    q = Counter(tokenize(query))
    c = Counter(tokenize(chunk_text))
    total = sum(q.values()) + sum(c.values())
    if total == 0:
        return 0.0
    overlap = sum((q & c).values())
    return 2.0 * overlap / total


def _remote_scores(
    query: str, documents: list[str], profile: RerankerProfile, timeout: float
) -> list[float]:
    payload = {"model": profile.model_id, "query": query, "documents": documents}
    resp = requests.post(profile.endpoint, json=payload, timeout=timeout)
    if resp.status_code != 200:
        raise requests.HTTPError(f"reranker returned {resp.status_code}")
    scores = resp.json()["scores"]
    if len(scores) != len(documents):
        raise ValueError(f"expected {len(documents)} scores, got {len(scores)}")
    return [float(s) for s in scores]


def rerank_candidates(
    query: str,
    candidates: Sequence[ScoredCandidate],
    profile: RerankerProfile,
    chunk_lookup: Callable[[str], Chunk],
    timeout: float = 30.0,
) -> list[ScoredCandidate]:
    """Re-score the first top_n candidates and reorder them by rerank score
    (ties by fused, then chunk_id); the remainder keeps its fused order
    after the reranked prefix. Output is a permutation of the input."""
    head = [replace(c) for c in candidates[: profile.top_n]]
    tail = [replace(c) for c in candidates[profile.top_n :]]
    if not head:
        return tail

    if profile.kind == "local_lexical":
        scores = [score_pair(query, chunk_lookup(c.chunk_id).text) for c in head]
    else:
        documents = [chunk_lookup(c.chunk_id).text for c in head]
        try:
            raw = _remote_scores(query, documents, profile, timeout)
        except (requests.RequestException, KeyError, ValueError) as exc:
            raise RerankError(
                f"reranker endpoint failed: {exc}", fallback=[replace(c) for c in candidates]
            ) from exc
        normalized = normalize_scores(list(zip((c.chunk_id for c in head), raw)))
        scores = [s for _, s in normalized]

    for cand, score in zip(head, scores):
        cand.rerank = score
    head.sort(key=lambda c: (-c.rerank, -c.fused, c.chunk_id))
    return head + tail
