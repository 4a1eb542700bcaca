"""Retrieval evaluation: Precision@5, Recall@5, and MRR over a judged
query set, compared across retrieval profiles.

Faithfulness / Completeness / Relevance need human or LLM judges, so the
report carries them as manual-annotation columns only. The report path
writes a human table to stdout plus report.json, report.tsv, and a grouped
bar chart rendered to metrics.png.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

METRIC_KEYS = ("precision_at_5", "recall_at_5", "mrr")
MANUAL_METRICS = ("faithfulness", "completeness", "relevance")


class QrelsError(ValueError):
    """Malformed qrels file or a query without judgments."""


def precision_at_k(ranked: Sequence[str], relevant: set[str], k: int) -> float:
    """|top-k hits| / k; the denominator stays k for short rankings."""
    if k < 1:
        raise ValueError("k must be >= 1")
    hits = sum(1 for cid in ranked[:k] if cid in relevant)
    return hits / k


def recall_at_k(ranked: Sequence[str], relevant: set[str], k: int) -> float:
    """|top-k hits| / |relevant|."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not relevant:
        raise ValueError("relevant set must be non-empty")
    hits = sum(1 for cid in ranked[:k] if cid in relevant)
    return hits / len(relevant)


def reciprocal_rank(ranked: Sequence[str], relevant: set[str]) -> float:
    for i, cid in enumerate(ranked):
        if cid in relevant:
            return 1.0 / (i + 1)
    return 0.0


def mrr(
    ranked_by_query: Mapping[str, Sequence[str]],
    qrels: Mapping[str, set[str]],
) -> float:
    """Mean over queries of 1/rank of the first relevant result; a query
    retrieving nothing relevant contributes 0."""
    if not ranked_by_query:
        raise ValueError("no queries to score")
    total = 0.0
    for qid, ranked in ranked_by_query.items():
        if qid not in qrels:
            raise QrelsError(f"query missing from qrels: {qid}")
        total += reciprocal_rank(ranked, qrels[qid])
    return total / len(ranked_by_query)


# ---------------------------------------------------------------------------
# Qrels
# ---------------------------------------------------------------------------


@dataclass
class Qrels:
    relevant: dict[str, set[str]]
    query_text: dict[str, str]

    def __post_init__(self):
        for qid, rel in self.relevant.items():
            if not rel:
                raise QrelsError(f"query {qid} has no relevant chunks")

    @property
    def query_ids(self) -> list[str]:
        return sorted(self.relevant)


def load_qrels(path: str | Path) -> Qrels:
    """TSV lines: query_id <TAB> query_text <TAB> relevant_chunk_id."""
    relevant: dict[str, set[str]] = {}
    query_text: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise QrelsError(f"qrels line {lineno}: expected 3 tab-separated fields")
        qid, text, chunk_id = parts
        relevant.setdefault(qid, set()).add(chunk_id)
        query_text[qid] = text
    if not relevant:
        raise QrelsError("qrels file contains no judgments")
    return Qrels(relevant=relevant, query_text=query_text)


def dump_qrels(qrels: Qrels, path: str | Path) -> None:
    lines = []
    for qid in qrels.query_ids:
        for cid in sorted(qrels.relevant[qid]):
            lines.append(f"{qid}\t{qrels.query_text[qid]}\t{cid}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Profile comparison
# ---------------------------------------------------------------------------


@dataclass
class EvalRun:
    profile: str
    ranked: dict[str, list[str]] = field(default_factory=dict)
    per_query: dict[str, dict[str, float]] = field(default_factory=dict)
    means: dict[str, float] = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)


@dataclass
class EvalReport:
    runs: list[EvalRun]
    k: int = 5

    def run(self, profile: str) -> EvalRun:
        for r in self.runs:
            if r.profile == profile:
                return r
        raise KeyError(profile)


def evaluate_profiles(
    engine,
    qrels: Qrels,
    profiles: Sequence[str],
    k: int = 5,
) -> EvalReport:
    """Run each profile's retrieval over the judged queries and score it.

    direct_llm performs no retrieval, so its rows report 0 with an
    explanatory flag. Deterministic with the local embedder and scorer.
    """
    runs = []
    for profile in profiles:
        run = EvalRun(profile=profile)
        if profile == "direct_llm":
            run.flags.append("no_retrieval: direct_llm answers without sources")
        for qid in qrels.query_ids:
            ranked = [
                c.chunk_id
                for c in engine.retrieve_pool(qrels.query_text[qid], profile)
            ]
            run.ranked[qid] = ranked
            run.per_query[qid] = {
                "precision_at_5": precision_at_k(ranked, qrels.relevant[qid], k),
                "recall_at_5": recall_at_k(ranked, qrels.relevant[qid], k),
                "reciprocal_rank": reciprocal_rank(ranked, qrels.relevant[qid]),
            }
        n = len(qrels.query_ids)
        run.means = {
            "precision_at_5": sum(v["precision_at_5"] for v in run.per_query.values()) / n,
            "recall_at_5": sum(v["recall_at_5"] for v in run.per_query.values()) / n,
            "mrr": mrr(run.ranked, qrels.relevant),
        }
        runs.append(run)
    return EvalReport(runs=runs, k=k)


# ---------------------------------------------------------------------------
# Report rendering
# ---------------------------------------------------------------------------

_ROW_LABELS = {
    "precision_at_5": "Precision@5",
    "recall_at_5": "Recall@5",
    "mrr": "MRR",
}


def format_table(report: EvalReport) -> str:
    profiles = [r.profile for r in report.runs]
    width = max(12, *(len(p) + 2 for p in profiles))
    header = "Metric".ljust(16) + "".join(p.rjust(width) for p in profiles)
    lines = [header, "-" * len(header)]
    for key in METRIC_KEYS:
        row = _ROW_LABELS[key].ljust(16)
        for r in report.runs:
            row += f"{r.means[key]:.4f}".rjust(width)
        lines.append(row)
    for name in MANUAL_METRICS:
        row = name.capitalize().ljust(16)
        row += "".join("manual".rjust(width) for _ in report.runs)
        lines.append(row)
    for r in report.runs:
        for flag in r.flags:
            lines.append(f"note [{r.profile}]: {flag}")
    return "\n".join(lines)


def report_to_dict(report: EvalReport) -> dict:
    return {
        "k": report.k,
        "profiles": [
            {
                "profile": r.profile,
                "means": r.means,
                "manual": {name: None for name in MANUAL_METRICS},
                "flags": r.flags,
                "per_query": r.per_query,
                "ranked": r.ranked,
            }
            for r in report.runs
        ],
    }


def write_report_files(report: EvalReport, out_dir: str | Path) -> dict[str, Path]:
    """Persist report.json, report.tsv, and metrics.png under out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / "report.json"
    tsv_path = out_dir / "report.tsv"
    png_path = out_dir / "metrics.png"

    json_path.write_text(
        json.dumps(report_to_dict(report), indent=2, sort_keys=True), encoding="utf-8"
    )

    rows = ["metric\t" + "\t".join(r.profile for r in report.runs)]
    for key in METRIC_KEYS:
        rows.append(
            _ROW_LABELS[key] + "\t" + "\t".join(f"{r.means[key]:.6f}" for r in report.runs)
        )
    for name in MANUAL_METRICS:
        rows.append(name.capitalize() + "\t" + "\t".join("manual" for _ in report.runs))
    tsv_path.write_text("\n".join(rows) + "\n", encoding="utf-8")

    render_metrics_figure(report, png_path)
    return {"json": json_path, "tsv": tsv_path, "png": png_path}


def render_metrics_figure(report: EvalReport, path: str | Path) -> None:
    """Grouped bar chart of the three retrieval metrics per profile."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    labels = [_ROW_LABELS[k] for k in METRIC_KEYS]
    x = range(len(labels))
    n = max(len(report.runs), 1)
    bar_width = 0.8 / n

    fig, ax = plt.subplots(figsize=(7, 4))
    for i, run in enumerate(report.runs):
        values = [run.means[k] for k in METRIC_KEYS]
        offsets = [xi + (i - (n - 1) / 2) * bar_width for xi in x]
        ax.bar(offsets, values, bar_width, label=run.profile)
    ax.set_xticks(list(x))
    ax.set_xticklabels(labels)
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("score")
    ax.set_title("Retrieval metrics by profile")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
