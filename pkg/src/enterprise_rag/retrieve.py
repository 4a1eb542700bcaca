"""Hybrid retrieval: dense + sparse search, min-max normalization,
weighted fusion, and metadata/entity filtering.

Raw dense scores are cosines and raw BM25 scores are unbounded, so each
retrieved list is min-max normalized over its own candidates before the
weighted sum. This keeps the fusion weights meaningful but does mean
ranking differs from raw-score fusion; a degenerate list (max == min)
normalizes to 1.0 so a lone result still contributes its full weight.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from .ingest import Chunk

PROFILE_NAMES = ("direct_llm", "naive", "advanced")


@dataclass
class MetadataFilter:
    exact: dict[str, str] = field(default_factory=dict)
    require_entity_overlap: bool = False

    def __post_init__(self):
        if not self.exact and not self.require_entity_overlap:
            raise ValueError("filter must set at least one criterion")


@dataclass
class RetrievalConfig:
    profile: str = "advanced"
    w_dense: float = 0.6
    w_sparse: float = 0.4
    k_dense: int = 50
    k_sparse: int = 50
    pool_size: int = 50
    final_k: int = 5
    filter: MetadataFilter | None = None

    def __post_init__(self):
        if self.profile not in PROFILE_NAMES:
            raise ValueError(f"unknown profile: {self.profile!r}")
        if self.w_dense < 0 or self.w_sparse < 0:
            raise ValueError("fusion weights must be non-negative")
        if abs(self.w_dense + self.w_sparse - 1.0) > 1e-9:
            raise ValueError("fusion weights must sum to 1")
        if self.pool_size < self.final_k:
            raise ValueError("pool_size must be >= final_k")


@dataclass
class ScoredCandidate:
    chunk_id: str
    dense_raw: float | None = None
    sparse_raw: float | None = None
    dense_norm: float = 0.0
    sparse_norm: float = 0.0
    fused: float = 0.0
    rerank: float | None = None


def normalize_scores(raw: Sequence[tuple[str, float]]) -> list[tuple[str, float]]:
    """Min-max normalize a retrieved list into [0, 1]; a constant list maps
    to all 1.0."""
    if not raw:
        return []
    values = [score for _, score in raw]
    low, high = min(values), max(values)
    if high == low:
        return [(cid, 1.0) for cid, _ in raw]
    span = high - low
    return [(cid, (score - low) / span) for cid, score in raw]


def fuse(
    dense: Sequence[tuple[str, float]],
    sparse: Sequence[tuple[str, float]],
    w_dense: float,
    w_sparse: float,
    dense_raw: Mapping[str, float] | None = None,
    sparse_raw: Mapping[str, float] | None = None,
) -> list[ScoredCandidate]:
    """Weighted sum of normalized scores over the union of chunk_ids; a
    side missing a chunk contributes 0. Sorted by fused descending, ties
    by ascending chunk_id."""
    if abs(w_dense + w_sparse - 1.0) > 1e-9:
        raise ValueError("fusion weights must sum to 1")
    dense_raw = dense_raw or {}
    sparse_raw = sparse_raw or {}
    dense_map = dict(dense)
    sparse_map = dict(sparse)
    out = []
    for cid in set(dense_map) | set(sparse_map):
        d = dense_map.get(cid, 0.0)
        s = sparse_map.get(cid, 0.0)
        out.append(
            ScoredCandidate(
                chunk_id=cid,
                dense_raw=dense_raw.get(cid),
                sparse_raw=sparse_raw.get(cid),
                dense_norm=d,
                sparse_norm=s,
                fused=w_dense * d + w_sparse * s,
            )
        )
    out.sort(key=lambda c: (-c.fused, c.chunk_id))
    return out


def apply_filter(
    candidates: Sequence[ScoredCandidate],
    flt: MetadataFilter,
    query_entities: Sequence[tuple[str, str]],
    chunk_lookup: Callable[[str], Chunk],
) -> list[ScoredCandidate]:
    """Hard filter: drop candidates failing any exact metadata pair, and,
    when entity overlap is required and the query has entities, those
    sharing no (label, surface) entity. Never reorders survivors."""
    query_keys = {(label, surface.lower()) for label, surface in query_entities}
    kept = []
    for cand in candidates:
        chunk = chunk_lookup(cand.chunk_id)
        if chunk is None:
            raise LookupError(f"unresolvable chunk_id: {cand.chunk_id}")
        if any(chunk.metadata.get(k) != v for k, v in flt.exact.items()):
            continue
        if flt.require_entity_overlap and query_keys:
            chunk_keys = {(label, surface.lower()) for label, surface in chunk.entities}
            if not (chunk_keys & query_keys):
                continue
        kept.append(cand)
    return kept


def retrieve(
    query: str,
    cfg: RetrievalConfig,
    dense_index,
    sparse_index,
    embed_query: Callable[[str], "object"],
    chunk_lookup: Callable[[str], Chunk],
    query_entities: Sequence[tuple[str, str]] = (),
) -> list[ScoredCandidate]:
    """Run the profile's retrieval and emit the fused candidate pool.

    direct_llm retrieves nothing; naive is dense-only with no filtering
    (w_dense forced to 1); advanced fuses both channels then filters.
    """
    if cfg.profile == "direct_llm":
        return []
    if len(dense_index) == 0:
        return []

    dense_hits = dense_index.search(embed_query(query), cfg.k_dense)
    dense_norm = normalize_scores(dense_hits)

    if cfg.profile == "naive":
        pool = fuse(dense_norm, [], 1.0, 0.0, dense_raw=dict(dense_hits))
        return pool[: cfg.pool_size]

    sparse_hits = sparse_index.search(query, cfg.k_sparse)
    sparse_norm = normalize_scores(sparse_hits)
    pool = fuse(
        dense_norm,
        sparse_norm,
        cfg.w_dense,
        cfg.w_sparse,
        dense_raw=dict(dense_hits),
        sparse_raw=dict(sparse_hits),
    )
    if cfg.filter is not None:
        pool = apply_filter(pool, cfg.filter, query_entities, chunk_lookup)
    return pool[: cfg.pool_size]
