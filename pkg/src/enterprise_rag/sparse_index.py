"""BM25 inverted index over chunk texts.

Scoring follows the Robertson/Zaragoza convention with the +1-inside-log
IDF variant, which keeps IDF non-negative even for terms present in every
chunk:

    IDF(t)  = ln((N - df + 0.5) / (df + 0.5) + 1)
    s(t, c) = IDF(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len/avglen))

No stemming, no stopwords: tokens are lowercased alphanumeric runs.
"""

from __future__ import annotations

import json
import re
from collections import defaultdict
from typing import TYPE_CHECKING, Iterable

import math

if TYPE_CHECKING:
    from .ingest import Chunk

DEFAULT_K1 = 1.2
DEFAULT_B = 0.75

_TOKEN_RE = re.compile(r"[a-z0-9]+")

SPARSE_FORMAT_VERSION = 1


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumerics; drop empties."""
    return _TOKEN_RE.findall(text.lower())


class SparseIndex:
    """Immutable-after-build BM25 index."""

    def __init__(self, k1: float = DEFAULT_K1, b: float = DEFAULT_B):
        self.k1 = k1
        self.b = b
        self.postings: dict[str, list[tuple[str, int]]] = {}
        self.doc_lengths: dict[str, int] = {}
        self.avg_doc_length = 0.0

    @property
    def N(self) -> int:
        return len(self.doc_lengths)

    @classmethod
    def build(
        cls,
        chunks: Iterable["Chunk"],
        k1: float = DEFAULT_K1,
        b: float = DEFAULT_B,
    ) -> "SparseIndex":
        index = cls(k1=k1, b=b)
        term_freqs: dict[str, dict[str, int]] = defaultdict(dict)
        for chunk in chunks:
            cid = chunk.chunk_id
            if cid in index.doc_lengths:
                raise ValueError(f"duplicate chunk_id: {cid}")
            tokens = tokenize(chunk.text)
            index.doc_lengths[cid] = len(tokens)
            for token in tokens:
                freqs = term_freqs[token]
                freqs[cid] = freqs.get(cid, 0) + 1
        index.postings = {
            term: sorted(freqs.items()) for term, freqs in term_freqs.items()
        }
        if index.doc_lengths:
            index.avg_doc_length = sum(index.doc_lengths.values()) / len(index.doc_lengths)
        return index

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        return math.log((self.N - df + 0.5) / (df + 0.5) + 1.0)

    def bm25_score(self, query_tokens: list[str], chunk_id: str) -> float:
        """Score one chunk against query tokens; repeated query tokens
        contribute once per occurrence."""
        if chunk_id not in self.doc_lengths:
            raise KeyError(f"unknown chunk_id: {chunk_id}")
        length = self.doc_lengths[chunk_id]
        score = 0.0
        for token in query_tokens:
            plist = self.postings.get(token)
            if not plist:
                continue
            tf = 0
            for cid, freq in plist:
                if cid == chunk_id:
                    tf = freq
                    break
            if tf == 0:
                continue
            norm = self.k1 * (1.0 - self.b + self.b * length / self.avg_doc_length)
            score += self.idf(token) * tf * (self.k1 + 1.0) / (tf + norm)
        return score

    def search(self, query: str, k: int) -> list[tuple[str, float]]:
        """Top-k chunks containing at least one query term, score
        descending, ties by ascending chunk_id."""
        if k < 1:
            raise ValueError("k must be >= 1")
        query_tokens = tokenize(query)
        scores: dict[str, float] = defaultdict(float)
        for token in query_tokens:
            plist = self.postings.get(token)
            if not plist:
                continue
            idf = self.idf(token)
            for cid, tf in plist:
                length = self.doc_lengths[cid]
                norm = self.k1 * (1.0 - self.b + self.b * length / self.avg_doc_length)
                scores[cid] += idf * tf * (self.k1 + 1.0) / (tf + norm)
        ranked = sorted(
            ((cid, s) for cid, s in scores.items() if s > 0.0),
            key=lambda item: (-item[1], item[0]),
        )
        return ranked[:k]

    # -- persistence --------------------------------------------------------

    def to_json(self) -> str:
        return json.dumps(
            {
                "format_version": SPARSE_FORMAT_VERSION,
                "k1": self.k1,
                "b": self.b,
                "doc_lengths": self.doc_lengths,
                "postings": {t: [[cid, tf] for cid, tf in plist] for t, plist in self.postings.items()},
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "SparseIndex":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValueError("corrupt sparse index file") from exc
        version = data.get("format_version")
        if version != SPARSE_FORMAT_VERSION:
            raise ValueError(f"unsupported sparse index version: {version}")
        index = cls(k1=data["k1"], b=data["b"])
        index.doc_lengths = {str(k): int(v) for k, v in data["doc_lengths"].items()}
        index.postings = {
            t: [(str(cid), int(tf)) for cid, tf in plist]
            for t, plist in data["postings"].items()
        }
        if index.doc_lengths:
            index.avg_doc_length = sum(index.doc_lengths.values()) / len(index.doc_lengths)
        return index

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "SparseIndex":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())
