"""Index directory layout and engine assembly.

An index directory is self-contained:

    manifest.json    version hash, chunk count, config snapshot
    chunks.jsonl     the chunk store
    dense.hnsw       HNSW graph + vectors (binary)
    sparse.json      BM25 postings
    gazetteer.json   entity lexicon copied from the corpus (optional)
    sessions/        session transcripts (created on first use)
    feedback.ndjson  feedback log (created on first use)
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Sequence

from .config import EngineConfig
from .dense_index import DenseIndex
from .embed import embed_texts, local_embed
from .ingest import (
    Chunk,
    Gazetteer,
    chunks_from_jsonl,
    chunks_to_jsonl,
    ingest_corpus,
)
from .orchestrate import Engine
from .session_store import SessionStore
from .sparse_index import SparseIndex

MANIFEST_NAME = "manifest.json"
CHUNKS_NAME = "chunks.jsonl"
DENSE_NAME = "dense.hnsw"
SPARSE_NAME = "sparse.json"
GAZETTEER_NAME = "gazetteer.json"

MANIFEST_FORMAT_VERSION = 1


class IndexDirError(RuntimeError):
    """Missing or inconsistent index directory."""


def content_version(chunks: Sequence[Chunk], config: EngineConfig) -> str:
    """Stable content hash over chunk ids/texts and the indexing config."""
    digest = hashlib.sha256()
    digest.update(
        json.dumps(
            {
                "chunking": config.to_dict()["chunking"],
                "embedder": config.to_dict()["embedder"],
                "table_mode": config.table_mode,
            },
            sort_keys=True,
        ).encode("utf-8")
    )
    for chunk in chunks:
        digest.update(chunk.chunk_id.encode("utf-8"))
        digest.update(b"\x00")
        digest.update(chunk.text.encode("utf-8"))
        digest.update(b"\x01")
    return digest.hexdigest()[:16]


def embed_chunks(chunks: Sequence[Chunk], config: EngineConfig) -> list:
    texts = [c.text for c in chunks]
    if not texts:
        return []
    return embed_texts(texts, config.embedder)


def build_indices(
    chunks: Sequence[Chunk], config: EngineConfig
) -> tuple[DenseIndex, SparseIndex]:
    dense = DenseIndex(
        dims=config.embedder.dims,
        params=config.dense,
        quantized=config.dense_quantized,
        seed=config.dense_seed,
    )
    if chunks:
        for chunk, vec in zip(chunks, embed_chunks(chunks, config)):
            dense.insert(chunk.chunk_id, vec)
    dense.freeze()
    sparse = SparseIndex.build(chunks, k1=config.sparse_k1, b=config.sparse_b)
    return dense, sparse


def write_index(
    out_dir: str | Path,
    chunks: Sequence[Chunk],
    config: EngineConfig,
    gazetteer: Gazetteer | None = None,
) -> str:
    """Build both indices from chunks and persist everything; returns the
    index version hash."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dense, sparse = build_indices(chunks, config)
    version = content_version(chunks, config)

    (out_dir / CHUNKS_NAME).write_text(chunks_to_jsonl(chunks), encoding="utf-8")
    dense.save(out_dir / DENSE_NAME)
    sparse.save(out_dir / SPARSE_NAME)
    if gazetteer is not None and (gazetteer.orgs or gazetteer.locations):
        (out_dir / GAZETTEER_NAME).write_text(
            json.dumps({"ORG": list(gazetteer.orgs), "LOCATION": list(gazetteer.locations)}),
            encoding="utf-8",
        )
    manifest = {
        "format_version": MANIFEST_FORMAT_VERSION,
        "index_version": version,
        "chunk_count": len(chunks),
        "config": config.to_dict(),
    }
    (out_dir / MANIFEST_NAME).write_text(
        json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8"
    )
    return version


def ingest_to_index(
    corpus_dir: str | Path, config: EngineConfig, out_dir: str | Path
) -> tuple[int, str]:
    """CLI/API entry: ingest a corpus directory and persist the index.
    Returns (chunk_count, index_version)."""
    corpus_dir = Path(corpus_dir)
    gazetteer = None
    gaz_path = (
        Path(config.gazetteer_path)
        if config.gazetteer_path
        else corpus_dir / GAZETTEER_NAME
    )
    if gaz_path.exists():
        gazetteer = Gazetteer.from_file(gaz_path)
    chunks = ingest_corpus(
        corpus_dir,
        cfg=config.chunking,
        gazetteer=gazetteer,
        table_mode=config.table_mode,
    )
    version = write_index(out_dir, chunks, config, gazetteer=gazetteer)
    return len(chunks), version


def load_engine(index_dir: str | Path, config: EngineConfig | None = None) -> Engine:
    """Restore a persisted index directory into a ready Engine.

    The manifest's config snapshot drives component assembly; a caller
    config overrides the runtime pieces (LLM client, reranker, profiles)
    without touching index-time settings.
    """
    index_dir = Path(index_dir)
    manifest_path = index_dir / MANIFEST_NAME
    if not manifest_path.exists():
        raise IndexDirError(f"no index at {index_dir}: missing {MANIFEST_NAME}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if manifest.get("format_version") != MANIFEST_FORMAT_VERSION:
        raise IndexDirError("unsupported index directory format version")
    stored = EngineConfig.from_dict(manifest.get("config", {}))
    if config is not None:
        stored.llm = config.llm
        stored.reranker = config.reranker
        stored.profiles = config.profiles

    chunks = chunks_from_jsonl((index_dir / CHUNKS_NAME).read_text(encoding="utf-8"))
    dense = DenseIndex.load(index_dir / DENSE_NAME)
    sparse = SparseIndex.load(index_dir / SPARSE_NAME)
    if not (len(dense) == sparse.N == len(chunks) == manifest.get("chunk_count")):
        raise IndexDirError(
            "index/corpus version mismatch: chunk store and indices disagree"
        )
    gazetteer = None
    gaz_path = index_dir / GAZETTEER_NAME
    if gaz_path.exists():
        gazetteer = Gazetteer.from_file(gaz_path)

    embedder = stored.embedder

    def embed_query(text: str):
        return embed_texts([text], embedder)[0]

    return Engine(
        chunks=chunks,
        dense_index=dense,
        sparse_index=sparse,
        embed_query=embed_query,
        reranker=stored.reranker,
        llm=stored.llm,
        store=SessionStore(index_dir),
        profiles=stored.profiles,
        gazetteer=gazetteer,
        index_version=manifest["index_version"],
    )


def engine_from_chunks(
    chunks: Sequence[Chunk],
    config: EngineConfig | None = None,
    store_dir: str | Path | None = None,
    gazetteer: Gazetteer | None = None,
) -> Engine:
    """Assemble an in-memory engine without touching disk (tests, inline
    ingestion). Sessions persist under store_dir when given."""
    import tempfile

    config = config or EngineConfig()
    dense, sparse = build_indices(chunks, config)
    embedder = config.embedder

    def embed_query(text: str):
        return local_embed(text, embedder.dims) if not embedder.is_remote else embed_texts([text], embedder)[0]

    store_root = Path(store_dir) if store_dir else Path(tempfile.mkdtemp(prefix="rag-sessions-"))
    return Engine(
        chunks=chunks,
        dense_index=dense,
        sparse_index=sparse,
        embed_query=embed_query,
        reranker=config.reranker,
        llm=config.llm,
        store=SessionStore(store_root),
        profiles=config.profiles,
        gazetteer=gazetteer,
        index_version=content_version(chunks, config),
    )
