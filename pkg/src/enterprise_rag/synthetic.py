"""Synthetic corpus generators for benchmarks and demos.

Three generators:

* table_benchmark  - tables with globally unique cell tokens plus
  row-lookup queries, for comparing row-level indexing against flattened
  tables.
* profile_benchmark - text corpus with planted signature tokens and qrels.
  Signature tokens of different documents share character trigrams, which
  confuses the hash embedder but not exact term matching, so hybrid
  retrieval has a real edge to demonstrate over dense-only.
* demo_corpus - a small readable HR corpus (text + one table + gazetteer)
  for end-to-end runs.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

from .ingest import Document, Gazetteer

_FILLERS = (
    "employees should review the handbook before submitting any request",
    "the approval workflow requires a manager sign off within five days",
    "reimbursement claims are processed at the end of every month",
    "access to internal systems is granted after security onboarding",
    "teams coordinate quarterly planning through the operations office",
    "records are retained according to the corporate retention schedule",
    "questions about eligibility should go to the people operations team",
    "the intranet portal lists current contacts for every department",
    "updates to this document are announced on the company notice board",
    "exceptions require written approval from the compliance office",
)

TABLE_HEADERS = ("record", "owner", "region", "budget", "status")


@dataclass
class TableQuery:
    query: str
    table_doc_id: str
    table_id: str
    row_index: int
    header: str
    key_token: str
    value_token: str


def _table_payload(table_index: int, n_rows: int) -> dict:
    table_id = f"tbl{table_index:02d}"
    rows = []
    for r in range(n_rows):
        key = f"key{table_index:02d}x{r:02d}"
        row = [key] + [
            f"{header}{table_index:02d}v{r:02d}" for header in TABLE_HEADERS[1:]
        ]
        rows.append(row)
    return {
        "file_name": f"table_{table_index:02d}.json",
        "tables": [
            {"table_id": table_id, "headers": list(TABLE_HEADERS), "rows": rows}
        ],
    }


def table_benchmark(
    n_tables: int = 20,
    n_rows: int = 50,
    n_queries: int = 100,
    seed: int = 7,
) -> tuple[list[Document], list[TableQuery]]:
    """Tables with unique cell tokens plus row-lookup queries of the form
    "value of <header> for <key>"."""
    rng = random.Random(seed)
    documents = []
    for t in range(n_tables):
        payload = _table_payload(t, n_rows)
        doc_id = f"table_{t:02d}"
        documents.append(
            Document(
                doc_id=doc_id,
                source_path=payload["file_name"],
                kind="table",
                raw_content=json.dumps(payload),
                metadata={"file_name": payload["file_name"]},
            )
        )
    queries = []
    for _ in range(n_queries):
        t = rng.randrange(n_tables)
        r = rng.randrange(n_rows)
        header = rng.choice(TABLE_HEADERS[1:])
        key = f"key{t:02d}x{r:02d}"
        value = f"{header}{t:02d}v{r:02d}"
        queries.append(
            TableQuery(
                query=f"value of {header} for {key}",
                table_doc_id=f"table_{t:02d}",
                table_id=f"tbl{t:02d}",
                row_index=r,
                header=header,
                key_token=key,
                value_token=value,
            )
        )
    return documents, queries


def profile_benchmark(
    n_docs: int = 200,
    n_queries: int = 60,
    seed: int = 11,
) -> tuple[list[Document], dict[str, str], dict[str, set[str]]]:
    """Text corpus with one signature sentence per document and qrels.

    Returns (documents, query_text by qid, relevant chunk ids by qid).
    Each document yields exactly one chunk, id "<doc_id>/text/0".
    """
    rng = random.Random(seed)
    documents = []
    for i in range(n_docs):
        rare_a = f"zq{i:03d}proc"
        rare_b = f"mk{i:03d}form"
        body = rng.sample(_FILLERS, 6)
        slot = rng.randrange(len(body) + 1)
        signature = (
            f"procedure {rare_a} is governed by form {rare_b} for this policy area"
        )
        body.insert(slot, signature)
        text = ". ".join(body) + "."
        doc_id = f"doc_{i:03d}"
        documents.append(
            Document(
                doc_id=doc_id,
                source_path=f"{doc_id}.md",
                kind="text",
                raw_content=text,
                metadata={"file_name": f"{doc_id}.md"},
            )
        )
    query_text: dict[str, str] = {}
    relevant: dict[str, set[str]] = {}
    targets = rng.sample(range(n_docs), n_queries)
    for qnum, i in enumerate(targets):
        qid = f"q{qnum:03d}"
        query_text[qid] = (
            f"policy handbook guidance for procedure zq{i:03d}proc and form mk{i:03d}form"
        )
        relevant[qid] = {f"doc_{i:03d}/text/0"}
    return documents, query_text, relevant


# ---------------------------------------------------------------------------
# Demo corpus
# ---------------------------------------------------------------------------

_DEMO_DOCS = {
    "leave_policy.md": (
        "Annual Leave Policy\n\n"
        "Full-time employees accrue 20 days of annual leave per calendar year. "
        "Leave requests must be submitted through the portal at least 10 working "
        "days in advance. Unused leave up to 5 days carries over to the next year "
        "and expires on 2025-03-31.\n\n"
        "Sick leave is separate from annual leave and requires a medical "
        "certificate after 3 consecutive days of absence."
    ),
    "expense_policy.md": (
        "Travel and Expense Policy\n\n"
        "Business travel must be approved by a manager before booking. Economy "
        "class applies to flights under 6 hours. Per diem rates are published by "
        "the finance team in Bengaluru each quarter.\n\n"
        "Expense reports are due within 14 days of the trip and are reimbursed "
        "with the next payroll run. NASSCOM event fees are reimbursable with a "
        "registration receipt."
    ),
    "remote_work.md": (
        "Remote Work Guidelines\n\n"
        "Employees may work remotely up to 3 days per week with manager "
        "approval. Core collaboration hours are 10:00 to 16:00 local time. "
        "Equipment requests go through the IT service desk in Hyderabad.\n\n"
        "Security training must be renewed by December 15, 2024 for continued "
        "VPN access."
    ),
    "onboarding.md": (
        "Onboarding Checklist\n\n"
        "New hires receive laptop and badge on day one. Mandatory compliance "
        "training completes within the first 30 days. Probation lasts 6 months "
        "with a review at the midpoint.\n\n"
        "Payroll enrollment closes on the 25th of each month; late enrollments "
        "shift to the following cycle."
    ),
    "benefits.md": (
        "Benefits Overview\n\n"
        "Health insurance covers employees and dependents from the first day of "
        "employment. The provident fund contribution matches 12 percent of base "
        "salary. Wellness reimbursement covers 5000 rupees per year for fitness "
        "memberships.\n\n"
        "Open enrollment for plan changes runs 01/11/2024 through 30/11/2024."
    ),
}

_DEMO_TABLE = {
    "file_name": "headcount.json",
    "tables": [
        {
            "table_id": "headcount",
            "headers": ["department", "location", "headcount", "budget_owner"],
            "rows": [
                ["Engineering", "Bengaluru", "120", "Priya Sharma"],
                ["Sales", "Mumbai", "45", "Arjun Mehta"],
                ["HR", "Hyderabad", "18", "Lakshmi Rao"],
                ["Finance", "Mumbai", "22", "Dev Patel"],
                ["Support", "Chennai", "60", "Anita Kumar"],
            ],
        }
    ],
}

_DEMO_GAZETTEER = {
    "ORG": ["NASSCOM", "Finance Team", "IT Service Desk"],
    "LOCATION": ["Bengaluru", "Mumbai", "Hyderabad", "Chennai"],
}


def write_demo_corpus(corpus_dir: str | Path) -> Path:
    """Write the small readable demo corpus (text + table + gazetteer)."""
    corpus_dir = Path(corpus_dir)
    corpus_dir.mkdir(parents=True, exist_ok=True)
    for name, text in _DEMO_DOCS.items():
        (corpus_dir / name).write_text(text, encoding="utf-8")
    (corpus_dir / _DEMO_TABLE["file_name"]).write_text(
        json.dumps(_DEMO_TABLE, indent=2), encoding="utf-8"
    )
    (corpus_dir / "gazetteer.json").write_text(
        json.dumps(_DEMO_GAZETTEER, indent=2), encoding="utf-8"
    )
    meta = {"document_type": "policy", "department": "HR", "confidentiality_level": "internal"}
    (corpus_dir / "leave_policy.md.meta.json").write_text(json.dumps(meta), encoding="utf-8")
    return corpus_dir


def demo_gazetteer() -> Gazetteer:
    return Gazetteer(
        orgs=tuple(_DEMO_GAZETTEER["ORG"]),
        locations=tuple(_DEMO_GAZETTEER["LOCATION"]),
    )


def write_table_benchmark_corpus(
    corpus_dir: str | Path,
    qrels_path: str | Path | None = None,
    n_tables: int = 20,
    n_rows: int = 50,
    n_queries: int = 100,
    seed: int = 7,
) -> tuple[Path, int]:
    """Write the table benchmark as corpus files plus row-mode qrels."""
    corpus_dir = Path(corpus_dir)
    corpus_dir.mkdir(parents=True, exist_ok=True)
    documents, queries = table_benchmark(n_tables, n_rows, n_queries, seed)
    for doc in documents:
        (corpus_dir / doc.metadata["file_name"]).write_text(
            doc.raw_content, encoding="utf-8"
        )
    if qrels_path is not None:
        lines = []
        for i, q in enumerate(queries):
            chunk_id = f"{q.table_doc_id}.json/{q.table_id}/r{q.row_index}"
            lines.append(f"q{i:03d}\t{q.query}\t{chunk_id}")
        Path(qrels_path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return corpus_dir, len(queries)
