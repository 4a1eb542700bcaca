"""Acceptance suite: every criterion runs at its stated tolerance and
prints one pass/fail line (run with ``pytest -s tests/test_acceptance.py``
to see them)."""

import random
import time

import numpy as np
import pytest

from enterprise_rag.config import EngineConfig
from enterprise_rag.dense_index import DenseIndex, HnswParams, build_dense_index
from enterprise_rag.eval_harness import (
    Qrels,
    evaluate_profiles,
    mrr,
    precision_at_k,
    recall_at_k,
    reciprocal_rank,
)
from enterprise_rag.ingest import (
    ChunkingConfig,
    extract_table_rows,
    flatten_table,
    ingest_corpus,
    row_to_chunk,
    split_text,
)
from enterprise_rag.orchestrate import sentence_count
from enterprise_rag.retrieve import fuse
from enterprise_rag.session_store import SessionStore
from enterprise_rag.sparse_index import SparseIndex, tokenize
from enterprise_rag.storage import engine_from_chunks, load_engine, write_index
from enterprise_rag.synthetic import (
    demo_gazetteer,
    profile_benchmark,
    table_benchmark,
    write_demo_corpus,
)
from tests.conftest import make_chunk, unit_vectors
from tests.test_eval_harness import (
    oracle_first_relevant_rank,
    oracle_mrr,
    oracle_precision,
    oracle_recall,
)
from tests.test_sparse_index import BM25_FIXTURE_SCORE, brute_force_scores


def _check(name: str, ok: bool, detail: str = ""):
    marker = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"[{marker}] {name}{suffix}")
    assert ok, f"{name}{suffix}"


def test_criterion_1_metric_oracles():
    start = time.monotonic()
    rng = random.Random(2024)
    ids = [f"c{i:03d}" for i in range(60)]
    agree = True
    for _ in range(1000):
        ranked = rng.sample(ids, rng.randint(0, 40))
        relevant = set(rng.sample(ids, rng.randint(1, 12)))
        k = rng.randint(1, 10)
        agree &= precision_at_k(ranked, relevant, k) == oracle_precision(ranked, relevant, k)
        agree &= recall_at_k(ranked, relevant, k) == oracle_recall(ranked, relevant, k)
        first = oracle_first_relevant_rank(ranked, relevant)
        want = 0.0 if first is None else 1.0 / first
        agree &= reciprocal_rank(ranked, relevant) == want
    ranked_by_query = {}
    qrels = {}
    for qn in range(250):
        qid = f"q{qn}"
        ranked_by_query[qid] = rng.sample(ids, rng.randint(0, 30))
        qrels[qid] = set(rng.sample(ids, rng.randint(1, 6)))
    agree &= abs(mrr(ranked_by_query, qrels) - oracle_mrr(ranked_by_query, qrels)) < 1e-12
    elapsed = time.monotonic() - start
    _check(
        "criterion 1: metric oracles agree over 1000 randomized cases",
        agree and elapsed < 5.0,
        f"{elapsed:.2f}s",
    )


def test_criterion_2_bm25_fixture_and_exhaustive_topk():
    index = SparseIndex.build(
        [make_chunk("d1", "cat cat dog"), make_chunk("d2", "dog"), make_chunk("d3", "fish")]
    )
    fixture_ok = abs(index.bm25_score(["cat"], "d1") - BM25_FIXTURE_SCORE) < 1e-6

    rng = random.Random(7)
    vocab = [f"w{i}" for i in range(50)]
    chunks = [
        make_chunk(f"c{i:03d}", " ".join(rng.choices(vocab, k=rng.randint(3, 25))))
        for i in range(100)
    ]
    corpus_index = SparseIndex.build(chunks)
    topk_ok = True
    for _ in range(30):
        query = " ".join(rng.choices(vocab, k=rng.randint(1, 4)))
        expected = brute_force_scores(corpus_index, query)
        got = corpus_index.search(query, 10)
        topk_ok &= got == expected[:10]
    _check(
        "criterion 2: BM25 fixture within 1e-6 and top-k equals exhaustive scoring",
        fixture_ok and topk_ok,
    )


def test_criterion_3_hnsw_recall_and_quantization():
    start = time.monotonic()
    dims = 64
    params = HnswParams(M=32, ef_construction=200, ef_search=50)
    vecs = unit_vectors(1000, dims, seed=42)
    items = [(f"c{i:04d}", v) for i, v in enumerate(vecs)]
    queries = unit_vectors(100, dims, seed=43)

    exact = build_dense_index(items, dims=dims, params=params, seed=0)
    quant = build_dense_index(items, dims=dims, params=params, quantized=True, seed=0)

    rec_exact, rec_quant = [], []
    for q in queries:
        truth = {cid for cid, _ in exact.brute_force_search(q, 10)}
        rec_exact.append(len({c for c, _ in exact.search(q, 10)} & truth) / 10)
        rec_quant.append(len({c for c, _ in quant.search(q, 10)} & truth) / 10)
    mean_exact = float(np.mean(rec_exact))
    mean_quant = float(np.mean(rec_quant))
    elapsed = time.monotonic() - start
    _check(
        "criterion 3: HNSW recall@10 >= 0.90 and quantized degradation <= 0.05",
        mean_exact >= 0.90 and (mean_exact - mean_quant) <= 0.05 and elapsed < 30.0,
        f"recall={mean_exact:.4f} quantized={mean_quant:.4f} {elapsed:.1f}s",
    )


def test_criterion_4_fusion_law_and_pareto():
    rng = random.Random(99)
    law_ok = True
    pareto_ok = True
    for _ in range(10_000):
        d_a, s_a = rng.random(), rng.random()
        d_b, s_b = rng.random(), rng.random()
        out = fuse([("a", d_a), ("b", d_b)], [("a", s_a), ("b", s_b)], 0.6, 0.4)
        scores = {c.chunk_id: c.fused for c in out}
        law_ok &= abs(scores["a"] - (0.6 * d_a + 0.4 * s_a)) <= 1e-9
        law_ok &= abs(scores["b"] - (0.6 * d_b + 0.4 * s_b)) <= 1e-9
        if d_a >= d_b and s_a >= s_b and (d_a > d_b or s_a > s_b):
            pareto_ok &= scores["a"] > scores["b"]
    _check(
        "criterion 4: fused == 0.6*dense + 0.4*sparse within 1e-9 and Pareto holds",
        law_ok and pareto_ok,
    )


def test_criterion_5_table_handling_directional():
    start = time.monotonic()
    docs, queries = table_benchmark(n_tables=20, n_rows=50, n_queries=100, seed=7)

    row_chunks = []
    for doc in docs:
        for rec in extract_table_rows(doc):
            row_chunks.append(row_to_chunk(rec, doc_id=doc.doc_id))
    flat_chunks = []
    for doc in docs:
        flat_chunks.extend(flatten_table(doc, ChunkingConfig(700, 100)))

    rows_engine = engine_from_chunks(row_chunks, EngineConfig())
    flat_engine = engine_from_chunks(flat_chunks, EngineConfig())

    rows_hits = 0
    flat_hits = 0
    for q in queries:
        pool = rows_engine.retrieve_pool(q.query, "advanced")
        expected = f"{q.table_doc_id}/{q.table_id}/r{q.row_index}"
        if pool and pool[0].chunk_id == expected:
            rows_hits += 1
        flat_pool = flat_engine.retrieve_pool(q.query, "naive")
        if flat_pool:
            text = flat_engine.chunks[flat_pool[0].chunk_id].text
            if q.key_token in text and q.value_token in text:
                flat_hits += 1
    p1_rows = rows_hits / len(queries)
    p1_flat = flat_hits / len(queries)
    elapsed = time.monotonic() - start
    _check(
        "criterion 5: row-level indexing P@1 >= 0.9 and beats flattened tables",
        p1_rows >= 0.9 and p1_rows > p1_flat and elapsed < 60.0,
        f"rows={p1_rows:.3f} flattened={p1_flat:.3f} {elapsed:.1f}s",
    )


def test_criterion_6_profile_ordering():
    docs, query_text, relevant = profile_benchmark(n_docs=200, n_queries=60, seed=11)
    chunks = []
    for doc in docs:
        chunks.extend(split_text(doc, ChunkingConfig(2000, 500)))
    engine = engine_from_chunks(chunks, EngineConfig())
    qrels = Qrels(relevant=relevant, query_text=query_text)
    report = evaluate_profiles(engine, qrels, ["naive", "advanced"])
    naive = report.run("naive").means
    advanced = report.run("advanced").means
    ordered = (
        advanced["precision_at_5"] >= naive["precision_at_5"]
        and advanced["recall_at_5"] >= naive["recall_at_5"]
        and advanced["mrr"] >= naive["mrr"]
        and advanced["mrr"] > naive["mrr"]
    )
    again = evaluate_profiles(engine, qrels, ["advanced"]).run("advanced").means
    deterministic = again == advanced
    _check(
        "criterion 6: advanced >= naive on P@5/R@5/MRR with MRR strictly greater",
        ordered and deterministic,
        f"advanced MRR={advanced['mrr']:.3f} naive MRR={naive['mrr']:.3f}",
    )


def test_criterion_7_memory_and_feedback_contract(tmp_path):
    corpus = write_demo_corpus(tmp_path / "corpus")
    engine = engine_from_chunks(
        ingest_corpus(corpus), EngineConfig(), store_dir=tmp_path / "state",
        gazetteer=demo_gazetteer(),
    )
    session = "acceptance-memory"
    for i in range(15):
        engine.answer_query(f"policy question number {i} about leave", session)
    window = engine.store.history_window(session)
    window_ok = len(window) == 10 and [t.turn_id for t in window] == [
        f"t{i}" for i in range(6, 16)
    ]

    fb_session = "acceptance-feedback"
    answers = [
        engine.answer_query(f"benefits question variant {i}", fb_session)
        for i in range(4)
    ]
    outcomes = [
        engine.handle_feedback(fb_session, a.turn_id, "down") for a in answers
    ]
    retry_ok = (
        [o.retried for o in outcomes] == [True, True, True, False]
        and outcomes[3].budget_exhausted
        and all(
            o.new_answer.final_query != a.final_query
            for o, a in zip(outcomes[:3], answers[:3])
        )
    )
    _check(
        "criterion 7: 10-turn window after 15 turns; down retries once; 4th down blocked",
        window_ok and retry_ok,
    )


def test_criterion_8_grounding_and_summary_rule(tmp_path):
    corpus = write_demo_corpus(tmp_path / "corpus")
    engine = engine_from_chunks(
        ingest_corpus(corpus), EngineConfig(), store_dir=tmp_path / "state",
        gazetteer=demo_gazetteer(),
    )
    queries = [
        "how many days of annual leave do employees accrue",
        "when are expense reports due",
        "remote work core hours",
        "probation period length",
        "provident fund contribution",
        "headcount for Engineering",
        "who owns the Sales budget",
        "leave",
        "training",
        "open enrollment window",
    ]
    answers = []
    for profile in ("direct_llm", "naive", "advanced"):
        for i, q in enumerate(queries):
            answers.append(engine.answer_query(q, f"ground-{profile}-{i}", profile))
    # include feedback retries in the audited set
    fb = engine.answer_query("wellness reimbursement amount", "ground-fb")
    outcome = engine.handle_feedback("ground-fb", fb.turn_id, "down")
    answers.extend([fb, outcome.new_answer])

    violations = 0
    for answer in answers:
        if not set(answer.citations) <= set(answer.used_chunks):
            violations += 1
        has_summary = answer.summary is not None
        if has_summary != (sentence_count(answer.answer_text) > 3):
            violations += 1
    _check(
        "criterion 8: citations grounded and summary rule holds for every answer",
        violations == 0,
        f"{len(answers)} answers audited",
    )


def test_criterion_9_persistence_round_trip(tmp_path):
    corpus = write_demo_corpus(tmp_path / "corpus")
    config = EngineConfig()
    chunks = ingest_corpus(corpus)
    index_dir = tmp_path / "index"
    write_index(index_dir, chunks, config, gazetteer=demo_gazetteer())
    engine = load_engine(index_dir)

    rng = random.Random(17)
    words = sorted({t for c in chunks for t in tokenize(c.text)})
    reloaded = load_engine(index_dir)
    rankings_ok = True
    for _ in range(50):
        query = " ".join(rng.sample(words, rng.randint(1, 4)))
        qvec = engine.embed_query(query)
        rankings_ok &= reloaded.dense_index.search(qvec, 10) == engine.dense_index.search(qvec, 10)
        rankings_ok &= reloaded.sparse_index.search(query, 10) == engine.sparse_index.search(query, 10)
        if not rankings_ok:
            break

    session = "persist-check"
    a1 = engine.answer_query("annual leave carryover", session)
    engine.handle_feedback(session, a1.turn_id, "down")
    state_before = (
        engine.store.turn_count(session),
        engine.store.retry_budget_used(session),
        [e.turn_id for e in engine.store.feedback_events(session)],
    )
    restarted = SessionStore(index_dir)
    state_after = (
        restarted.turn_count(session),
        restarted.retry_budget_used(session),
        [e.turn_id for e in restarted.feedback_events(session)],
    )
    _check(
        "criterion 9: index round-trip rankings identical; sessions survive restart",
        rankings_ok and state_before == state_after,
    )
