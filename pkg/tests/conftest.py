import numpy as np
import pytest

from enterprise_rag.config import EngineConfig
from enterprise_rag.ingest import Chunk
from enterprise_rag.storage import engine_from_chunks
from enterprise_rag.synthetic import demo_gazetteer, write_demo_corpus


def make_chunk(chunk_id: str, text: str, **metadata) -> Chunk:
    meta = {"file_name": metadata.pop("file_name", f"{chunk_id.split('/')[0]}.md")}
    meta.update({k: str(v) for k, v in metadata.items()})
    return Chunk(
        chunk_id=chunk_id,
        doc_id=chunk_id.split("/")[0],
        kind="text_chunk",
        text=text,
        metadata=meta,
    )


def unit_vectors(n: int, dims: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    vecs = rng.standard_normal((n, dims)).astype(np.float32)
    vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
    return vecs


@pytest.fixture
def demo_corpus_dir(tmp_path):
    return write_demo_corpus(tmp_path / "corpus")


@pytest.fixture
def demo_engine(tmp_path):
    """In-memory engine over the demo corpus with mock components."""
    from enterprise_rag.ingest import ingest_corpus

    corpus = write_demo_corpus(tmp_path / "corpus")
    chunks = ingest_corpus(corpus)
    return engine_from_chunks(
        chunks,
        EngineConfig(),
        store_dir=tmp_path / "state",
        gazetteer=demo_gazetteer(),
    )
