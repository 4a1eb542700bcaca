"""Document loading, chunking, table row extraction, and entity tagging.

Pipeline per document:
  1. load_document  - read .txt/.md (text) or .csv / table-JSON (table)
  2. split_text     - recursive character splitting with overlap (text docs)
     extract_table_rows + row_to_chunk - row-level chunks (table docs)
     flatten_table  - whole table as plain text (naive baseline only)
  3. tag_entities   - regex dates + gazetteer orgs/locations
"""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

DEFAULT_SEPARATORS: tuple[str, ...] = ("\n\n", "\n", ". ", " ")

TEXT_SUFFIXES = {".txt", ".md"}
TABLE_SUFFIXES = {".csv", ".json"}

DEFAULT_DOC_METADATA = ("document_type", "department", "confidentiality_level")


class IngestError(ValueError):
    """Raised for unreadable, empty, or malformed source files."""


@dataclass(frozen=True)
class ChunkingConfig:
    """Chunk size / overlap in characters plus the separator cascade."""

    chunk_size: int = 2000
    overlap: int = 500
    separators: tuple[str, ...] = DEFAULT_SEPARATORS

    def __post_init__(self):
        if self.chunk_size <= 0:
            raise ValueError("chunk_size must be positive")
        if not 0 <= self.overlap < self.chunk_size:
            raise ValueError("overlap must satisfy 0 <= overlap < chunk_size")
        if not self.separators:
            raise ValueError("separators must be non-empty")


# Advanced pipeline default; the naive baseline uses smaller chunks.
ADVANCED_CHUNKING = ChunkingConfig(chunk_size=2000, overlap=500)
NAIVE_CHUNKING = ChunkingConfig(chunk_size=700, overlap=100)


@dataclass
class Document:
    doc_id: str
    source_path: str
    kind: str  # "text" | "table"
    raw_content: str
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("text", "table"):
            raise ValueError(f"unknown document kind: {self.kind!r}")
        if "file_name" not in self.metadata:
            self.metadata["file_name"] = Path(self.source_path).name


@dataclass
class Chunk:
    chunk_id: str
    doc_id: str
    kind: str  # "text_chunk" | "table_row" | "full_table"
    text: str
    char_span: tuple[int, int] | None = None
    metadata: dict[str, str] = field(default_factory=dict)
    entities: list[tuple[str, str]] = field(default_factory=list)


@dataclass(frozen=True)
class TableRecord:
    file_name: str
    table_id: str
    row_index: int
    headers: tuple[str, ...]
    cells: tuple[str, ...]

    def __post_init__(self):
        if len(self.headers) != len(self.cells):
            raise ValueError("headers and cells must have equal length")
        if self.row_index < 0:
            raise ValueError("row_index must be >= 0")


@dataclass(frozen=True)
class Gazetteer:
    """Entity lexicon for ORG / LOCATION lookup tagging."""

    orgs: tuple[str, ...] = ()
    locations: tuple[str, ...] = ()

    @classmethod
    def from_file(cls, path: str | Path) -> "Gazetteer":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        return cls(
            orgs=tuple(data.get("ORG", [])),
            locations=tuple(data.get("LOCATION", [])),
        )


EMPTY_GAZETTEER = Gazetteer()


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------


def load_document(
    path: str | Path,
    kind: str,
    doc_id: str | None = None,
    extra_metadata: dict[str, str] | None = None,
) -> Document:
    """Read a source file into a Document, merging sidecar metadata.

    Text documents come from .txt/.md files; table documents from .csv or
    table-JSON files. Raw content is preserved byte-exact. A sidecar file
    ``<source>.meta.json`` supplies extra metadata; document_type,
    department and confidentiality_level default to "unspecified".
    """
    path = Path(path)
    if kind not in ("text", "table"):
        raise IngestError(f"unknown document kind: {kind!r}")
    suffixes = TEXT_SUFFIXES if kind == "text" else TABLE_SUFFIXES
    if path.suffix.lower() not in suffixes:
        raise IngestError(f"{path.name}: unsupported extension for kind={kind}")
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IngestError(f"unreadable file: {path}") from exc
    if not raw.strip():
        raise IngestError(f"empty file: {path}")

    metadata = {key: "unspecified" for key in DEFAULT_DOC_METADATA}
    metadata["file_name"] = path.name
    sidecar = path.with_name(path.name + ".meta.json")
    if sidecar.exists():
        try:
            side = json.loads(sidecar.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise IngestError(f"malformed sidecar metadata: {sidecar}") from exc
        metadata.update({str(k): str(v) for k, v in side.items()})
    if extra_metadata:
        metadata.update(extra_metadata)

    doc = Document(
        doc_id=doc_id or path.stem,
        source_path=str(path),
        kind=kind,
        raw_content=raw,
        metadata=metadata,
    )
    if kind == "table":
        # Validate the payload parses up front so callers fail early.
        _parse_tables(doc)
    return doc


def _parse_tables(doc: Document) -> list[tuple[str, list[str], list[list[str]]]]:
    """Parse a table document into (table_id, headers, rows) triples."""
    name = doc.metadata.get("file_name", doc.doc_id)
    if name.lower().endswith(".csv") or doc.source_path.lower().endswith(".csv"):
        try:
            rows = list(csv.reader(io.StringIO(doc.raw_content)))
        except csv.Error as exc:
            raise IngestError(f"malformed CSV in {name}: {exc}") from exc
        rows = [row for row in rows if row]
        if not rows:
            raise IngestError(f"empty table: {name}")
        table_id = Path(name).stem
        return [(table_id, rows[0], rows[1:])]
    try:
        payload = json.loads(doc.raw_content)
    except json.JSONDecodeError as exc:
        raise IngestError(f"malformed table JSON in {name}: {exc}") from exc
    if not isinstance(payload, dict) or "tables" not in payload:
        raise IngestError(f"table JSON in {name} lacks a 'tables' list")
    out = []
    for table in payload["tables"]:
        try:
            out.append((str(table["table_id"]), list(table["headers"]), list(table["rows"])))
        except (KeyError, TypeError) as exc:
            raise IngestError(f"table JSON in {name} has a malformed table entry") from exc
    return out


# ---------------------------------------------------------------------------
# Text splitting
# ---------------------------------------------------------------------------


def split_text(doc: Document, cfg: ChunkingConfig) -> list[Chunk]:
    """Recursively split a text document into overlapping chunks.

    Separators are tried in order; the first one present in a span splits
    it, oversize pieces recurse into later separators, and separator-free
    spans fall back to a sliding window with exactly ``cfg.overlap``
    characters of overlap. Spans of consecutive chunks cover every source
    character.
    """
    if doc.kind != "text":
        raise IngestError(f"split_text requires a text document, got {doc.kind}")
    text = doc.raw_content
    if not text:
        return []
    spans = _split_spans(text, 0, len(text), list(cfg.separators), cfg.chunk_size, cfg.overlap)
    chunks = []
    for i, (start, end) in enumerate(spans):
        chunks.append(
            Chunk(
                chunk_id=f"{doc.doc_id}/text/{i}",
                doc_id=doc.doc_id,
                kind="text_chunk",
                text=text[start:end],
                char_span=(start, end),
                metadata=dict(doc.metadata),
            )
        )
    return chunks


def _split_spans(
    text: str,
    start: int,
    end: int,
    separators: list[str],
    size: int,
    overlap: int,
) -> list[tuple[int, int]]:
    if end - start <= size:
        return [(start, end)]

    pieces: list[tuple[int, int]] = []
    remaining: list[str] = []
    for i, sep in enumerate(separators):
        cuts = _cut_points(text, start, end, sep)
        if cuts:
            bounds = [start] + cuts + [end]
            pieces = list(zip(bounds[:-1], bounds[1:]))
            remaining = separators[i + 1 :]
            break
    if not pieces:
        return _window_spans(start, end, size, overlap)

    out: list[tuple[int, int]] = []
    pending: list[tuple[int, int]] = []
    for piece in pieces:
        if piece[1] - piece[0] <= size:
            pending.append(piece)
        else:
            out.extend(_merge_spans(pending, size, overlap))
            pending = []
            out.extend(_split_spans(text, piece[0], piece[1], remaining, size, overlap))
    out.extend(_merge_spans(pending, size, overlap))
    return out


def _cut_points(text: str, start: int, end: int, sep: str) -> list[int]:
    """Positions just after each separator occurrence, keeping it attached
    to the preceding piece so spans stay contiguous."""
    cuts = []
    pos = text.find(sep, start, end)
    while pos != -1:
        after = pos + len(sep)
        if after < end:  # a trailing separator produces no empty piece
            cuts.append(after)
        pos = text.find(sep, after, end)
    return cuts


def _merge_spans(
    pieces: list[tuple[int, int]], size: int, overlap: int
) -> list[tuple[int, int]]:
    """Greedily pack contiguous small pieces into chunks <= size, carrying
    up to ``overlap`` characters of whole trailing pieces into the next
    chunk."""
    if not pieces:
        return []
    out = []
    current = [pieces[0]]
    for piece in pieces[1:]:
        if piece[1] - current[0][0] <= size:
            current.append(piece)
            continue
        out.append((current[0][0], current[-1][1]))
        tail: list[tuple[int, int]] = []
        tail_len = 0
        for prev in reversed(current):
            if tail_len + (prev[1] - prev[0]) > overlap:
                break
            tail.insert(0, prev)
            tail_len += prev[1] - prev[0]
        current = tail + [piece]
        while len(current) > 1 and current[-1][1] - current[0][0] > size:
            current.pop(0)
    out.append((current[0][0], current[-1][1]))
    return out


def _window_spans(start: int, end: int, size: int, overlap: int) -> list[tuple[int, int]]:
    """Sliding window over a separator-free span: stride = size - overlap."""
    stride = size - overlap
    spans = []
    pos = start
    while pos + size < end:
        spans.append((pos, pos + size))
        pos += stride
    spans.append((pos, end))
    return spans


# ---------------------------------------------------------------------------
# Tables
# ---------------------------------------------------------------------------


def extract_table_rows(doc: Document) -> list[TableRecord]:
    """One TableRecord per data row; cells trimmed, headers shared.

    Ragged rows (cell count != header count) raise an error naming the
    offending row: the 1-based file line for CSV, the table row index for
    table-JSON.
    """
    if doc.kind != "table":
        raise IngestError(f"extract_table_rows requires a table document, got {doc.kind}")
    file_name = doc.metadata.get("file_name", doc.doc_id)
    records = []
    for table_id, headers, rows in _parse_tables(doc):
        headers = tuple(h.strip() for h in headers)
        for i, row in enumerate(rows):
            if len(row) != len(headers):
                if doc.source_path.lower().endswith(".csv"):
                    raise IngestError(f"{file_name}: ragged row {i + 2}")
                raise IngestError(f"{file_name}: table {table_id} ragged row {i}")
            records.append(
                TableRecord(
                    file_name=file_name,
                    table_id=table_id,
                    row_index=i,
                    headers=headers,
                    cells=tuple(str(c).strip() for c in row),
                )
            )
    return records


def row_text(rec: TableRecord) -> str:
    """Canonical embeddable serialization: ``h1: v1 | h2: v2 | ...``."""
    return " | ".join(f"{h}: {v}" for h, v in zip(rec.headers, rec.cells))


def row_to_chunk(rec: TableRecord, doc_id: str | None = None) -> Chunk:
    """Serialize one table row as its own chunk; headers become metadata keys."""
    doc_id = doc_id or rec.file_name
    metadata = {h: v for h, v in zip(rec.headers, rec.cells)}
    metadata.update(
        file_name=rec.file_name,
        table_id=rec.table_id,
        row_index=str(rec.row_index),
    )
    return Chunk(
        chunk_id=f"{doc_id}/{rec.table_id}/r{rec.row_index}",
        doc_id=doc_id,
        kind="table_row",
        text=row_text(rec),
        metadata=metadata,
    )


def flatten_table(doc: Document, cfg: ChunkingConfig) -> list[Chunk]:
    """Naive-baseline path: render the whole table as newline-joined rows
    and chunk it like plain text, losing row alignment on long tables."""
    records = extract_table_rows(doc)
    if not records:
        return []
    rendered = "\n".join(row_text(rec) for rec in records)
    pseudo = Document(
        doc_id=doc.doc_id,
        source_path=doc.source_path,
        kind="text",
        raw_content=rendered,
        metadata=dict(doc.metadata),
    )
    chunks = split_text(pseudo, cfg)
    for i, chunk in enumerate(chunks):
        chunk.chunk_id = f"{doc.doc_id}/flat/{i}"
        chunk.kind = "full_table"
        chunk.char_span = None
    return chunks


# ---------------------------------------------------------------------------
# Entity tagging
# ---------------------------------------------------------------------------

_MONTHS = (
    "January|February|March|April|May|June|July|August|September|October|November|December"
)
_DATE_PATTERNS = [
    re.compile(r"\b\d{4}-\d{2}-\d{2}\b"),
    re.compile(r"\b\d{2}/\d{2}/\d{4}\b"),
    re.compile(rf"\b(?:{_MONTHS})\s+\d{{1,2}},\s+\d{{4}}\b"),
]


def _lookup_pattern(entries: tuple[str, ...]) -> re.Pattern | None:
    if not entries:
        return None
    # Longest alternatives first so multiword names win over substrings.
    alts = sorted({e.strip() for e in entries if e.strip()}, key=len, reverse=True)
    if not alts:
        return None
    joined = "|".join(re.escape(a) for a in alts)
    return re.compile(rf"\b(?:{joined})\b", re.IGNORECASE)


def tag_entities(chunk: Chunk, gazetteer: Gazetteer) -> Chunk:
    """Populate chunk.entities with DATE / LOCATION / ORG mentions.

    Dates match fixed patterns; locations and orgs come from case-
    insensitive longest-match gazetteer lookup. Duplicates collapse on
    (label, lowercased surface). Deterministic for a fixed gazetteer.
    """
    found: list[tuple[str, str]] = []
    for pattern in _DATE_PATTERNS:
        for m in pattern.finditer(chunk.text):
            found.append(("DATE", m.group(0)))
    for label, entries in (("LOCATION", gazetteer.locations), ("ORG", gazetteer.orgs)):
        pattern = _lookup_pattern(entries)
        if pattern is None:
            continue
        for m in pattern.finditer(chunk.text):
            found.append((label, m.group(0)))
    seen = set()
    entities = []
    for label, surface in found:
        key = (label, surface.lower())
        if key not in seen:
            seen.add(key)
            entities.append((label, surface))
    chunk.entities = entities
    return chunk


def tag_query_entities(query: str, gazetteer: Gazetteer) -> list[tuple[str, str]]:
    """Entity-tag a raw query string using the same rules as chunks."""
    probe = Chunk(chunk_id="", doc_id="", kind="text_chunk", text=query)
    return tag_entities(probe, gazetteer).entities


# ---------------------------------------------------------------------------
# Corpus walking
# ---------------------------------------------------------------------------

GAZETTEER_FILE = "gazetteer.json"


def discover_documents(corpus_dir: str | Path) -> list[tuple[Path, str]]:
    """Find (path, kind) pairs under a corpus directory, sorted for
    deterministic ingestion order."""
    corpus_dir = Path(corpus_dir)
    pairs = []
    for path in sorted(corpus_dir.rglob("*")):
        if not path.is_file():
            continue
        name = path.name.lower()
        if name == GAZETTEER_FILE or name.endswith(".meta.json"):
            continue
        if path.suffix.lower() in TEXT_SUFFIXES:
            pairs.append((path, "text"))
        elif path.suffix.lower() in TABLE_SUFFIXES:
            pairs.append((path, "table"))
    return pairs


def ingest_corpus(
    corpus_dir: str | Path,
    cfg: ChunkingConfig | None = None,
    gazetteer: Gazetteer | None = None,
    table_mode: str = "rows",
) -> list[Chunk]:
    """Load every document under corpus_dir and emit tagged chunks.

    table_mode "rows" indexes each table row separately (structure
    preserving); "flatten" treats tables as plain text (naive baseline).
    Re-running on the same corpus yields identical chunk ids and texts.
    """
    if table_mode not in ("rows", "flatten"):
        raise IngestError(f"unknown table_mode: {table_mode!r}")
    cfg = cfg or ADVANCED_CHUNKING
    corpus_dir = Path(corpus_dir)
    if gazetteer is None:
        gazetteer_path = corpus_dir / GAZETTEER_FILE
        gazetteer = Gazetteer.from_file(gazetteer_path) if gazetteer_path.exists() else EMPTY_GAZETTEER

    chunks: list[Chunk] = []
    seen_ids: set[str] = set()
    for path, kind in discover_documents(corpus_dir):
        doc_id = path.relative_to(corpus_dir).as_posix()
        doc = load_document(path, kind, doc_id=doc_id)
        if kind == "text":
            doc_chunks = split_text(doc, cfg)
        elif table_mode == "rows":
            doc_chunks = []
            for rec in extract_table_rows(doc):
                chunk = row_to_chunk(rec, doc_id=doc_id)
                base = dict(doc.metadata)
                base.update(chunk.metadata)
                chunk.metadata = base
                doc_chunks.append(chunk)
        else:
            doc_chunks = flatten_table(doc, cfg)
        for chunk in doc_chunks:
            if chunk.chunk_id in seen_ids:
                raise IngestError(f"duplicate chunk_id: {chunk.chunk_id}")
            seen_ids.add(chunk.chunk_id)
            chunks.append(tag_entities(chunk, gazetteer))
    return chunks


def chunks_to_jsonl(chunks: Iterable[Chunk]) -> str:
    lines = []
    for c in chunks:
        lines.append(
            json.dumps(
                {
                    "chunk_id": c.chunk_id,
                    "doc_id": c.doc_id,
                    "kind": c.kind,
                    "text": c.text,
                    "char_span": list(c.char_span) if c.char_span else None,
                    "metadata": c.metadata,
                    "entities": [list(e) for e in c.entities],
                },
                ensure_ascii=False,
            )
        )
    return "\n".join(lines) + ("\n" if lines else "")


def chunks_from_jsonl(text: str) -> list[Chunk]:
    chunks = []
    for line in text.splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        chunks.append(
            Chunk(
                chunk_id=obj["chunk_id"],
                doc_id=obj["doc_id"],
                kind=obj["kind"],
                text=obj["text"],
                char_span=tuple(obj["char_span"]) if obj.get("char_span") else None,
                metadata=obj.get("metadata", {}),
                entities=[tuple(e) for e in obj.get("entities", [])],
            )
        )
    return chunks
