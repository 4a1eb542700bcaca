"""Hybrid dense+sparse retrieval engine for enterprise text and tables."""

from .config import EngineConfig
from .dense_index import DenseIndex, HnswParams
from .embed import EmbedderProfile, embed_texts, local_embed
from .ingest import (
    Chunk,
    ChunkingConfig,
    Document,
    Gazetteer,
    TableRecord,
    ingest_corpus,
    load_document,
    split_text,
)
from .orchestrate import Engine, GroundedAnswer, LlmClient
from .retrieve import MetadataFilter, RetrievalConfig, ScoredCandidate
from .rerank import RerankerProfile
from .session_store import SessionStore
from .sparse_index import SparseIndex, tokenize
from .storage import engine_from_chunks, ingest_to_index, load_engine

__version__ = "0.1.0"

__all__ = [
    "Chunk",
    "ChunkingConfig",
    "DenseIndex",
    "Document",
    "EmbedderProfile",
    "Engine",
    "EngineConfig",
    "Gazetteer",
    "GroundedAnswer",
    "HnswParams",
    "LlmClient",
    "MetadataFilter",
    "RerankerProfile",
    "RetrievalConfig",
    "ScoredCandidate",
    "SessionStore",
    "SparseIndex",
    "TableRecord",
    "embed_texts",
    "engine_from_chunks",
    "ingest_corpus",
    "ingest_to_index",
    "load_document",
    "load_engine",
    "local_embed",
    "split_text",
    "tokenize",
]
