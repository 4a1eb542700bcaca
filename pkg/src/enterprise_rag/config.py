"""Engine configuration: one JSON file drives chunking, both indices, the
reranker, the LLM client, and the retrieval profiles."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .dense_index import HnswParams
from .embed import DEFAULT_EMBEDDER_PROFILES, EmbedderProfile
from .ingest import ChunkingConfig
from .orchestrate import LlmClient
from .rerank import RerankerProfile
from .retrieve import MetadataFilter, RetrievalConfig


def default_profiles() -> dict[str, RetrievalConfig]:
    return {
        "direct_llm": RetrievalConfig(profile="direct_llm"),
        "naive": RetrievalConfig(profile="naive", w_dense=1.0, w_sparse=0.0),
        "advanced": RetrievalConfig(profile="advanced", w_dense=0.6, w_sparse=0.4),
    }


@dataclass
class EngineConfig:
    chunking: ChunkingConfig = field(default_factory=ChunkingConfig)
    table_mode: str = "rows"  # "rows" | "flatten"
    embedder: EmbedderProfile = field(
        default_factory=lambda: DEFAULT_EMBEDDER_PROFILES["local_test"]
    )
    dense: HnswParams = field(default_factory=HnswParams)
    dense_quantized: bool = False
    dense_seed: int = 0
    sparse_k1: float = 1.2
    sparse_b: float = 0.75
    reranker: RerankerProfile = field(default_factory=RerankerProfile)
    llm: LlmClient = field(default_factory=LlmClient)
    profiles: dict[str, RetrievalConfig] = field(default_factory=default_profiles)
    gazetteer_path: str | None = None

    def to_dict(self) -> dict:
        return {
            "chunking": {
                "chunk_size": self.chunking.chunk_size,
                "overlap": self.chunking.overlap,
                "separators": list(self.chunking.separators),
            },
            "table_mode": self.table_mode,
            "embedder": {
                "name": self.embedder.name,
                "dims": self.embedder.dims,
                "endpoint": self.embedder.endpoint,
                "model_id": self.embedder.model_id,
            },
            "dense": {
                "M": self.dense.M,
                "ef_construction": self.dense.ef_construction,
                "ef_search": self.dense.ef_search,
                "quantized": self.dense_quantized,
                "seed": self.dense_seed,
            },
            "sparse": {"k1": self.sparse_k1, "b": self.sparse_b},
            "reranker": {
                "kind": self.reranker.kind,
                "endpoint": self.reranker.endpoint,
                "model_id": self.reranker.model_id,
                "top_n": self.reranker.top_n,
            },
            "llm": {
                "mode": self.llm.mode,
                "endpoint": self.llm.endpoint,
                "model_id": self.llm.model_id,
                "temperature": self.llm.temperature,
            },
            "profiles": {
                name: {k: v for k, v in asdict(cfg).items()}
                for name, cfg in self.profiles.items()
            },
            "gazetteer": self.gazetteer_path,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EngineConfig":
        cfg = cls()
        if "chunking" in data:
            c = data["chunking"]
            cfg.chunking = ChunkingConfig(
                chunk_size=int(c.get("chunk_size", 2000)),
                overlap=int(c.get("overlap", 500)),
                separators=tuple(c.get("separators", ChunkingConfig().separators)),
            )
        cfg.table_mode = data.get("table_mode", cfg.table_mode)
        if "embedder" in data:
            e = data["embedder"]
            name = e.get("name", "local_test")
            base = DEFAULT_EMBEDDER_PROFILES.get(name)
            cfg.embedder = EmbedderProfile(
                name=name,
                dims=int(e.get("dims", base.dims if base else 1024)),
                endpoint=e.get("endpoint", base.endpoint if base else None),
                model_id=e.get("model_id", base.model_id if base else None),
            )
        if "dense" in data:
            d = data["dense"]
            cfg.dense = HnswParams(
                M=int(d.get("M", 32)),
                ef_construction=int(d.get("ef_construction", 200)),
                ef_search=int(d.get("ef_search", 50)),
            )
            cfg.dense_quantized = bool(d.get("quantized", False))
            cfg.dense_seed = int(d.get("seed", 0))
        if "sparse" in data:
            cfg.sparse_k1 = float(data["sparse"].get("k1", 1.2))
            cfg.sparse_b = float(data["sparse"].get("b", 0.75))
        if "reranker" in data:
            r = data["reranker"]
            cfg.reranker = RerankerProfile(
                kind=r.get("kind", "local_lexical"),
                endpoint=r.get("endpoint"),
                model_id=r.get("model_id", "ms-marco-MiniLM-L-12-v2"),
                top_n=int(r.get("top_n", 20)),
            )
        if "llm" in data:
            l = data["llm"]
            cfg.llm = LlmClient(
                mode=l.get("mode", "mock"),
                endpoint=l.get("endpoint"),
                model_id=l.get("model_id", "mock"),
                temperature=float(l.get("temperature", 0.0)),
            )
        if "profiles" in data:
            for name, p in data["profiles"].items():
                flt = None
                if p.get("filter"):
                    flt = MetadataFilter(
                        exact=dict(p["filter"].get("exact", {})),
                        require_entity_overlap=bool(
                            p["filter"].get("require_entity_overlap", False)
                        ),
                    )
                cfg.profiles[name] = RetrievalConfig(
                    profile=p.get("profile", name),
                    w_dense=float(p.get("w_dense", 0.6)),
                    w_sparse=float(p.get("w_sparse", 0.4)),
                    k_dense=int(p.get("k_dense", 50)),
                    k_sparse=int(p.get("k_sparse", 50)),
                    pool_size=int(p.get("pool_size", 50)),
                    final_k=int(p.get("final_k", 5)),
                    filter=flt,
                )
        cfg.gazetteer_path = data.get("gazetteer")
        return cfg

    @classmethod
    def from_file(cls, path: str | Path) -> "EngineConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))
