"""HTTP facade over the engine: ingest, query, feedback, and session
inspection for the chat UI and external clients.

Index building is request-triggered and exclusive (409 while a build is
running); /v1/query and /v1/feedback serialize per session. Error bodies
always carry code + message, plus the failing pipeline stage when one
exists.
"""

from __future__ import annotations

import json
import threading
from dataclasses import asdict
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field
from starlette.exceptions import HTTPException as StarletteHTTPException

from .config import EngineConfig
from .embed import EmbedError
from .ingest import Chunk, Document, Gazetteer, IngestError, flatten_table, ingest_corpus
from .ingest import extract_table_rows, row_to_chunk, split_text, tag_entities
from .orchestrate import Engine, LlmError, PipelineError
from .rerank import RerankError
from .session_store import SessionError
from .storage import engine_from_chunks, ingest_to_index, load_engine, write_index


class InlineDocument(BaseModel):
    file_name: str
    kind: str = "text"
    content: str | None = None
    tables: list[dict] | None = None
    metadata: dict[str, str] = Field(default_factory=dict)


class IngestRequest(BaseModel):
    corpus_dir: str | None = None
    documents: list[InlineDocument] | None = None
    config: dict | None = None
    gazetteer: dict[str, list[str]] | None = None


class QueryRequest(BaseModel):
    session_id: str
    query: str
    profile: str = "advanced"


class FeedbackRequest(BaseModel):
    session_id: str
    turn_id: str
    verdict: str


def _error(status: int, code: str, message: str, stage: str | None = None):
    detail = {"code": code, "message": message}
    if stage:
        detail["stage"] = stage
    return HTTPException(status_code=status, detail=detail)


def _inline_chunks(docs: list[InlineDocument], config: EngineConfig, gazetteer: Gazetteer):
    chunks: list[Chunk] = []
    for item in docs:
        doc_id = item.file_name
        if item.kind == "text":
            if not item.content:
                raise IngestError(f"{item.file_name}: text document requires content")
            raw = item.content
        elif item.kind == "table":
            if item.tables is None:
                raise IngestError(f"{item.file_name}: table document requires tables")
            raw = json.dumps({"file_name": item.file_name, "tables": item.tables})
        else:
            raise IngestError(f"unknown document kind: {item.kind!r}")
        metadata = {
            "document_type": "unspecified",
            "department": "unspecified",
            "confidentiality_level": "unspecified",
            "file_name": item.file_name,
        }
        metadata.update(item.metadata)
        doc = Document(
            doc_id=doc_id,
            source_path=item.file_name,
            kind=item.kind,
            raw_content=raw,
            metadata=metadata,
        )
        if item.kind == "text":
            doc_chunks = split_text(doc, config.chunking)
        elif config.table_mode == "flatten":
            doc_chunks = flatten_table(doc, config.chunking)
        else:
            doc_chunks = []
            for rec in extract_table_rows(doc):
                chunk = row_to_chunk(rec, doc_id=doc_id)
                merged = dict(doc.metadata)
                merged.update(chunk.metadata)
                chunk.metadata = merged
                doc_chunks.append(chunk)
        chunks.extend(tag_entities(c, gazetteer) for c in doc_chunks)
    return chunks


class EngineState:
    """Mutable server state: the live engine plus locking."""

    def __init__(
        self,
        engine: Engine | None = None,
        index_dir: str | Path | None = None,
        config: EngineConfig | None = None,
    ):
        self.engine = engine
        self.index_dir = Path(index_dir) if index_dir else None
        self.config = config
        self.build_lock = threading.Lock()
        self._session_locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def session_lock(self, session_id: str) -> threading.Lock:
        with self._locks_guard:
            if session_id not in self._session_locks:
                self._session_locks[session_id] = threading.Lock()
            return self._session_locks[session_id]


def create_app(state: EngineState | None = None) -> FastAPI:
    state = state or EngineState()
    app = FastAPI(title="enterprise-rag", version="0.1.0")
    app.state.engine_state = state
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(StarletteHTTPException)
    async def _http_error(request, exc: StarletteHTTPException):
        detail = exc.detail
        if not isinstance(detail, dict):
            code = {404: "not_found", 409: "conflict", 400: "bad_request"}.get(
                exc.status_code, "internal"
            )
            detail = {"code": code, "message": str(detail)}
        return JSONResponse(status_code=exc.status_code, content=detail)

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request, exc: RequestValidationError):
        return JSONResponse(
            status_code=400,
            content={"code": "bad_request", "message": str(exc.errors()[:1])},
        )

    def _require_engine() -> Engine:
        if state.engine is None:
            raise _error(404, "not_found", "no index has been built or loaded")
        return state.engine

    def _map_pipeline_error(exc: PipelineError) -> HTTPException:
        if isinstance(exc.cause, (LlmError, EmbedError, RerankError)):
            return _error(502, "upstream_unavailable", str(exc.cause), stage=exc.stage)
        return _error(500, "internal", str(exc.cause), stage=exc.stage)

    @app.post("/v1/ingest")
    def ingest(req: IngestRequest):
        if not req.corpus_dir and not req.documents:
            raise _error(400, "bad_request", "provide corpus_dir or inline documents")
        if not state.build_lock.acquire(blocking=False):
            raise _error(409, "conflict", "an index build is already running")
        try:
            config = (
                EngineConfig.from_dict(req.config) if req.config else (state.config or EngineConfig())
            )
            if req.corpus_dir:
                if state.index_dir is None:
                    raise _error(400, "bad_request", "server has no index directory configured")
                try:
                    count, version = ingest_to_index(req.corpus_dir, config, state.index_dir)
                except IngestError as exc:
                    raise _error(400, "bad_request", str(exc))
                state.engine = load_engine(state.index_dir, config)
            else:
                gazetteer = Gazetteer(
                    orgs=tuple((req.gazetteer or {}).get("ORG", [])),
                    locations=tuple((req.gazetteer or {}).get("LOCATION", [])),
                )
                try:
                    chunks = _inline_chunks(req.documents, config, gazetteer)
                except IngestError as exc:
                    raise _error(400, "bad_request", str(exc))
                if state.index_dir is not None:
                    version = write_index(state.index_dir, chunks, config, gazetteer=gazetteer)
                    state.engine = load_engine(state.index_dir, config)
                else:
                    state.engine = engine_from_chunks(chunks, config, gazetteer=gazetteer)
                    version = state.engine.index_version
                count = len(chunks)
            return {"chunk_count": count, "index_version": version}
        finally:
            state.build_lock.release()

    @app.post("/v1/query")
    def query(req: QueryRequest):
        engine = _require_engine()
        if not req.query.strip():
            raise _error(400, "bad_request", "query must be non-empty")
        if req.profile not in engine.profiles:
            raise _error(400, "bad_request", f"unknown profile: {req.profile}")
        with state.session_lock(req.session_id):
            try:
                answer = engine.answer_query(req.query, req.session_id, req.profile)
            except PipelineError as exc:
                raise _map_pipeline_error(exc)
        return {
            "session_id": req.session_id,
            "turn_id": answer.turn_id,
            "answer_text": answer.answer_text,
            "citations": answer.citations,
            "used_chunks": answer.used_chunks,
            "summary": answer.summary,
            "reformulated": answer.reformulated,
            "final_query": answer.final_query,
            "sources": answer.sources,
        }

    @app.post("/v1/feedback")
    def feedback(req: FeedbackRequest):
        engine = _require_engine()
        if req.verdict not in ("up", "down"):
            raise _error(400, "bad_request", f"unknown verdict: {req.verdict}")
        with state.session_lock(req.session_id):
            try:
                outcome = engine.handle_feedback(req.session_id, req.turn_id, req.verdict)
            except SessionError as exc:
                raise _error(404, "not_found", str(exc))
            except PipelineError as exc:
                raise _map_pipeline_error(exc)
        body = {
            "retried": outcome.retried,
            "budget_exhausted": outcome.budget_exhausted,
        }
        if outcome.new_answer is not None:
            answer = outcome.new_answer
            body["new_answer"] = {
                "turn_id": answer.turn_id,
                "answer_text": answer.answer_text,
                "citations": answer.citations,
                "summary": answer.summary,
                "reformulated": answer.reformulated,
                "final_query": answer.final_query,
                "sources": answer.sources,
            }
        return body

    @app.get("/v1/sessions/{session_id}")
    def session(session_id: str):
        engine = _require_engine()
        try:
            view = engine.store.get(session_id)
        except SessionError as exc:
            raise _error(404, "not_found", str(exc))
        return {
            "session_id": view.session_id,
            "created_at": view.created_at,
            "retry_budget_used": view.retry_budget_used,
            "turns": [asdict(t) for t in view.turns],
        }

    @app.get("/v1/spec")
    def spec():
        return app.openapi()

    return app


def serve(index_dir: str | Path, addr: str = "127.0.0.1:8080", config: EngineConfig | None = None):
    """Load a persisted index and serve the API on addr."""
    import uvicorn

    engine = load_engine(index_dir, config)
    state = EngineState(engine=engine, index_dir=index_dir, config=config)
    app = create_app(state)
    host, _, port = addr.partition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8080))
