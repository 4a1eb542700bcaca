"""End-to-end query answering.

Pipeline per turn: optional query rewriting from session history, hybrid
retrieval, reranking (advanced profile), grounded prompt construction,
answer generation, and session bookkeeping. Thumbs-down feedback expands
the query once and retries, up to 3 retries per session.

All model calls go through LlmClient; mock mode is fully deterministic and
network-free, so identical corpus + config + transcript produce
byte-identical answers.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Sequence

import requests

from .ingest import Chunk
from .rerank import RerankerProfile, rerank_candidates
from .retrieve import RetrievalConfig, ScoredCandidate, retrieve
from .session_store import (
    RETRY_BUDGET,
    FeedbackEvent,
    SessionStore,
    Turn,
    _now_iso,
)
from .sparse_index import tokenize

_CITATION_RE = re.compile(r"\[([^\[\]]+)\]")
_SENTENCE_SPLIT_RE = re.compile(r"(?<=[.!?])\s+")

_STOPWORDS = frozenset(
    """the and for with that this from your have will been are was were what
    when where which how does about into their there here they them then
    than some more most each also only just over under very much many
    should would could must may can its his her our you all any not""".split()
)

REWRITE_MAX_TOKENS = 3
REWRITE_SHORT_QUERY = 4

GROUNDED_INSTRUCTIONS = (
    "You are an enterprise knowledge assistant. Follow these rules:\n"
    "1. Answer strictly based on the source excerpts provided below; do not "
    "use outside knowledge.\n"
    "2. Use bullet points for clarity.\n"
    "3. Cite the source of every claim with its bracketed excerpt id, for "
    "example [doc/text/0].\n"
    "4. If the response exceeds three sentences, include a summary line "
    'starting with "Summary:".'
)

_FALLBACK_FILLERS = ("details", "overview", "process", "requirements", "explanation")


class LlmError(RuntimeError):
    """Remote LLM endpoint failure or empty completion."""


class PipelineError(RuntimeError):
    """A pipeline stage failed; carries the stage name for error routing."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class LlmClient:
    mode: str = "mock"  # "mock" | "remote"
    endpoint: str | None = None
    model_id: str = "mock"
    temperature: float = 0.0
    timeout: float = 60.0

    def __post_init__(self):
        if self.mode not in ("mock", "remote"):
            raise ValueError(f"unknown llm mode: {self.mode!r}")
        if self.mode == "remote" and not self.endpoint:
            raise ValueError("remote mode requires an endpoint")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")

    def complete(self, system: str, user: str) -> str:
        """Chat-completions round trip; only valid in remote mode."""
        if self.mode != "remote":
            raise LlmError("mock client has no remote completion")
        payload = {
            "model": self.model_id,
            "temperature": self.temperature,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
        }
        try:
            resp = requests.post(self.endpoint, json=payload, timeout=self.timeout)
        except requests.RequestException as exc:
            raise LlmError(f"llm endpoint unreachable: {self.endpoint}") from exc
        if resp.status_code != 200:
            raise LlmError(f"llm endpoint returned {resp.status_code}")
        try:
            content = resp.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise LlmError("malformed llm response") from exc
        if not str(content).strip():
            raise LlmError("empty completion")
        return str(content)


@dataclass
class PromptTemplate:
    system_instructions: str
    context_blocks: list[tuple[str, str, str]]  # (chunk_id, text, file_name)
    user_query: str

    def render(self) -> str:
        parts = []
        for chunk_id, text, file_name in self.context_blocks:
            parts.append(f"[{chunk_id}] (source: {file_name})\n{text}")
        context = "\n\n".join(parts) if parts else "(no source excerpts supplied)"
        return f"Sources:\n{context}\n\nQuestion: {self.user_query}"


@dataclass
class GroundedAnswer:
    answer_text: str
    citations: list[str] = field(default_factory=list)
    used_chunks: list[str] = field(default_factory=list)
    summary: str | None = None
    reformulated: bool = False
    final_query: str = ""
    turn_id: str | None = None
    sources: list[dict] = field(default_factory=list)
    warning: str | None = None


@dataclass
class FeedbackOutcome:
    verdict: str
    retried: bool
    budget_exhausted: bool = False
    new_answer: GroundedAnswer | None = None


# ---------------------------------------------------------------------------
# Query reformulation
# ---------------------------------------------------------------------------


def _content_tokens(text: str) -> list[str]:
    return [
        t
        for t in tokenize(text)
        if len(t) >= 4 and t.isalpha() and t not in _STOPWORDS
    ]


def rewrite_query(query: str, client: LlmClient, history: Sequence[Turn]) -> str:
    """Rephrase a vague query using recent session context.

    Mock rule: append up to 3 of the most recent history content tokens not
    already present in the query, scanning turns newest first.
    """
    if client.mode == "remote":
        context = "\n".join(
            f"Q: {t.final_query}\nA: {t.answer_text}" for t in list(history)[-3:]
        )
        completion = client.complete(
            "Rewrite the user's query to be specific and self-contained, using "
            "the conversation context. Reply with the rewritten query only.",
            f"Context:\n{context}\n\nQuery: {query}",
        )
        rewritten = completion.strip().splitlines()[0].strip()
        return rewritten or query

    present = set(tokenize(query))
    picked: list[str] = []
    for turn in reversed(list(history)):
        answer = _CITATION_RE.sub(" ", turn.answer_text)
        for token in _content_tokens(turn.final_query) + _content_tokens(answer):
            if token not in present:
                present.add(token)
                picked.append(token)
                if len(picked) >= REWRITE_MAX_TOKENS:
                    return f"{query} {' '.join(picked)}"
    if not picked:
        return query
    return f"{query} {' '.join(picked)}"


def _load_lexicon() -> dict[str, list[str]]:
    text = resources.files("enterprise_rag.data").joinpath("expansion_lexicon.json").read_text(
        encoding="utf-8"
    )
    return json.loads(text)


_LEXICON: dict[str, list[str]] | None = None


def expansion_lexicon() -> dict[str, list[str]]:
    global _LEXICON
    if _LEXICON is None:
        _LEXICON = _load_lexicon()
    return _LEXICON


def _mock_variants(query: str):
    """Deterministic variant stream: synonym substitutions left to right,
    then a token rotation, then filler suffixes."""
    lexicon = expansion_lexicon()
    words = query.split()
    lowered = [w.lower().strip(".,!?;:") for w in words]
    for i, low in enumerate(lowered):
        for synonym in lexicon.get(low, ()):  # keeps lexicon order
            variant = list(words)
            variant[i] = synonym
            yield " ".join(variant)
    if len(words) >= 2:
        yield " ".join(words[1:] + words[:1])
    for filler in _FALLBACK_FILLERS:
        yield f"{query} {filler}"
    i = 2
    while True:
        yield f"{query} (alternative {i})"
        i += 1


def expand_query(query: str, client: LlmClient, n: int) -> list[str]:
    """Produce n distinct alternative formulations, none equal to the
    original. Remote output is deduplicated and padded by the mock rules."""
    if n < 1:
        raise ValueError("n must be >= 1")
    variants: list[str] = []
    seen = {query}

    def take(candidate: str) -> None:
        candidate = candidate.strip()
        if candidate and candidate not in seen:
            seen.add(candidate)
            variants.append(candidate)

    if client.mode == "remote":
        completion = client.complete(
            "Generate alternative formulations of the user's query, one per "
            "line, without numbering.",
            f"Query: {query}\nAlternatives: {n}",
        )
        for line in completion.splitlines():
            take(line)
            if len(variants) >= n:
                return variants[:n]
    for candidate in _mock_variants(query):
        take(candidate)
        if len(variants) >= n:
            break
    return variants[:n]


# ---------------------------------------------------------------------------
# Prompting and generation
# ---------------------------------------------------------------------------


def build_prompt(
    query: str,
    candidates: Sequence[ScoredCandidate],
    chunk_lookup,
) -> PromptTemplate:
    """Context blocks in candidate order, deduplicated by chunk_id, each
    labeled with chunk id and source file so the model can cite."""
    blocks = []
    seen = set()
    for cand in candidates:
        if cand.chunk_id in seen:
            continue
        seen.add(cand.chunk_id)
        chunk = chunk_lookup(cand.chunk_id)
        if chunk is None:
            raise LookupError(f"unresolvable chunk_id: {cand.chunk_id}")
        blocks.append((chunk.chunk_id, chunk.text, chunk.metadata.get("file_name", "")))
    return PromptTemplate(
        system_instructions=GROUNDED_INSTRUCTIONS,
        context_blocks=blocks,
        user_query=query,
    )


def sentence_count(text: str) -> int:
    """Sentences are segments split on .!? followed by whitespace."""
    segments = [s for s in _SENTENCE_SPLIT_RE.split(text) if s.strip()]
    return len(segments)


def _first_clause(text: str, limit: int = 160) -> str:
    clause = text
    for sep in (". ", "; ", " | ", "\n"):
        pos = clause.find(sep)
        if pos > 0:
            clause = clause[:pos]
    clause = clause.strip().rstrip(".;:،")
    if len(clause) > limit:
        clause = clause[:limit].rstrip()
    return clause


def _mock_completion(prompt: PromptTemplate) -> str:
    if not prompt.context_blocks:
        return "No source excerpts were retrieved for this query, so a grounded answer cannot be given."
    lines = [
        f"- {_first_clause(text)}. [{chunk_id}]"
        for chunk_id, text, _ in prompt.context_blocks
    ]
    return "\n".join(lines)


def generate_answer(prompt: PromptTemplate, client: LlmClient) -> GroundedAnswer:
    """Run the generator and enforce the grounding contract: citations are
    parsed from [chunk_id] markers, unknown ids are dropped with a warning,
    and a summary exists exactly when the answer runs past 3 sentences."""
    if client.mode == "mock":
        completion = _mock_completion(prompt)
    else:
        completion = client.complete(prompt.system_instructions, prompt.render())

    context_ids = [chunk_id for chunk_id, _, _ in prompt.context_blocks]
    known = set(context_ids)
    citations: list[str] = []
    warning = None
    for marker in _CITATION_RE.findall(completion):
        if marker in known:
            if marker not in citations:
                citations.append(marker)
        else:
            warning = "dropped citations not present in the prompt context"

    summary = None
    if sentence_count(completion) > 3:
        for line in completion.splitlines():
            if line.strip().lower().startswith("summary:"):
                summary = line.strip()
                break
        if summary is None:
            first = _SENTENCE_SPLIT_RE.split(completion)[0].strip()
            summary = f"Summary: {first}"

    return GroundedAnswer(
        answer_text=completion,
        citations=citations,
        used_chunks=list(context_ids),
        summary=summary,
        final_query=prompt.user_query,
        warning=warning,
    )


# ---------------------------------------------------------------------------
# Engine
# ---------------------------------------------------------------------------


class Engine:
    """Wires indices, scorers, the LLM client, and session memory."""

    def __init__(
        self,
        chunks: Sequence[Chunk],
        dense_index,
        sparse_index,
        embed_query,
        reranker: RerankerProfile,
        llm: LlmClient,
        store: SessionStore,
        profiles: dict[str, RetrievalConfig],
        gazetteer=None,
        index_version: str = "",
    ):
        self.chunks = {c.chunk_id: c for c in chunks}
        self.dense_index = dense_index
        self.sparse_index = sparse_index
        self.embed_query = embed_query
        self.reranker = reranker
        self.llm = llm
        self.store = store
        self.profiles = profiles
        self.gazetteer = gazetteer
        self.index_version = index_version

    def chunk_lookup(self, chunk_id: str) -> Chunk | None:
        return self.chunks.get(chunk_id)

    def profile_config(self, profile: str) -> RetrievalConfig:
        if profile not in self.profiles:
            raise ValueError(f"unknown profile: {profile!r}")
        return self.profiles[profile]

    def _query_entities(self, query: str) -> list[tuple[str, str]]:
        if self.gazetteer is None:
            return []
        from .ingest import tag_query_entities

        return tag_query_entities(query, self.gazetteer)

    def retrieve_pool(self, query: str, profile: str) -> list[ScoredCandidate]:
        """Retrieval + profile-dependent rerank; the ranked pool used both
        for prompting and for evaluation."""
        cfg = self.profile_config(profile)
        try:
            pool = retrieve(
                query,
                cfg,
                self.dense_index,
                self.sparse_index,
                self.embed_query,
                self.chunk_lookup,
                query_entities=self._query_entities(query),
            )
        except PipelineError:
            raise
        except Exception as exc:
            raise PipelineError("retrieve", exc) from exc
        if cfg.profile == "advanced" and pool:
            try:
                pool = rerank_candidates(query, pool, self.reranker, self.chunk_lookup)
            except Exception as exc:
                raise PipelineError("rerank", exc) from exc
        return pool

    def answer_query(
        self,
        query: str,
        session_id: str,
        profile: str = "advanced",
        _final_query: str | None = None,
    ) -> GroundedAnswer:
        """Full pipeline for one turn; appends the turn to the session."""
        cfg = self.profile_config(profile)
        self.store.get_or_create(session_id)
        history = self.store.history_window(session_id)

        if _final_query is not None:
            final_query = _final_query
        else:
            final_query = query
            vague = len(tokenize(query)) < REWRITE_SHORT_QUERY or bool(history)
            if vague:
                try:
                    final_query = rewrite_query(query, self.llm, history)
                except LlmError:
                    final_query = query  # degrade to the original query

        pool = self.retrieve_pool(final_query, profile)
        top = pool[: cfg.final_k]
        try:
            prompt = build_prompt(final_query, top, self.chunk_lookup)
        except Exception as exc:
            raise PipelineError("prompt", exc) from exc
        try:
            answer = generate_answer(prompt, self.llm)
        except Exception as exc:
            raise PipelineError("generate", exc) from exc

        answer.final_query = final_query
        answer.reformulated = final_query != query
        answer.sources = [
            {
                "chunk_id": c.chunk_id,
                "file_name": self.chunks[c.chunk_id].metadata.get("file_name", ""),
                "fused": c.fused,
                "rerank": c.rerank,
            }
            for c in top
        ]
        turn_id = f"t{self.store.turn_count(session_id) + 1}"
        answer.turn_id = turn_id
        self.store.append_turn(
            session_id,
            Turn(
                turn_id=turn_id,
                query=query,
                final_query=final_query,
                answer_text=answer.answer_text,
                citations=list(answer.citations),
                reformulated=answer.reformulated,
            ),
        )
        return answer

    def handle_feedback(
        self, session_id: str, turn_id: str, verdict: str, profile: str = "advanced"
    ) -> FeedbackOutcome:
        """Log a thumbs verdict; a down verdict triggers exactly one
        expansion retry while the session's retry budget (3) lasts."""
        if verdict not in ("up", "down"):
            raise ValueError(f"unknown verdict: {verdict!r}")
        turn = self.store.find_turn(session_id, turn_id)

        if verdict == "up":
            self.store.log_feedback(
                FeedbackEvent(session_id, turn_id, "up", _now_iso(), triggered_retry=False)
            )
            return FeedbackOutcome(verdict="up", retried=False)

        if self.store.retry_budget_used(session_id) >= RETRY_BUDGET:
            self.store.log_feedback(
                FeedbackEvent(session_id, turn_id, "down", _now_iso(), triggered_retry=False)
            )
            return FeedbackOutcome(verdict="down", retried=False, budget_exhausted=True)

        expansions = expand_query(turn.final_query, self.llm, 2)
        expansion = expansions[0]
        if expansion == turn.query and len(expansions) > 1:
            expansion = expansions[1]
        self.store.log_feedback(
            FeedbackEvent(session_id, turn_id, "down", _now_iso(), triggered_retry=True)
        )
        new_answer = self.answer_query(
            turn.query, session_id, profile, _final_query=expansion
        )
        return FeedbackOutcome(verdict="down", retried=True, new_answer=new_answer)
