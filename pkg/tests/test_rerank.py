import pytest

from enterprise_rag.rerank import (
    RerankError,
    RerankerProfile,
    rerank_candidates,
    score_pair,
)
from enterprise_rag.retrieve import ScoredCandidate
from tests.conftest import make_chunk

DEAD_ENDPOINT = "http://127.0.0.1:9/rerank"


def test_identical_multisets_score_one():
    assert score_pair("leave policy", "leave policy") == 1.0


def test_disjoint_scores_zero():
    assert score_pair("leave policy", "dental plan") == 0.0


def test_partial_overlap_f1():
    assert score_pair("a b", "a c") == pytest.approx(0.5)


def test_multiset_counting():
    # query {a:2}, chunk {a:1, b:1}: overlap 1 -> 2*1/(2+2)
    assert score_pair("a a", "a b") == pytest.approx(0.5)


def test_both_empty_scores_zero():
    assert score_pair("", "") == 0.0


def test_disjoint_iff_zero():
    assert score_pair("x y", "x z") > 0.0
    assert score_pair("x y", "p q") == 0.0


def pool_with_chunks(texts):
    chunks = [make_chunk(f"c{i}", t) for i, t in enumerate(texts)]
    lookup = {c.chunk_id: c for c in chunks}
    cands = [
        ScoredCandidate(c.chunk_id, fused=1.0 - i * 0.1) for i, c in enumerate(chunks)
    ]
    return cands, lambda cid: lookup[cid]


def test_verbatim_match_ranks_first():
    cands, lookup = pool_with_chunks(
        ["unrelated words entirely", "annual leave policy", "another chunk here"]
    )
    profile = RerankerProfile(top_n=10)
    out = rerank_candidates("annual leave policy", cands, profile, lookup)
    assert out[0].chunk_id == "c1"
    assert out[0].rerank == 1.0


def test_equal_scores_preserve_fused_order():
    cands, lookup = pool_with_chunks(["same text", "same text", "same text"])
    out = rerank_candidates("no overlap query", cands, RerankerProfile(top_n=10), lookup)
    assert [c.chunk_id for c in out] == ["c0", "c1", "c2"]
    assert all(c.rerank == 0.0 for c in out)


def test_permutation_property():
    cands, lookup = pool_with_chunks([f"text {i}" for i in range(8)])
    out = rerank_candidates("text 3", cands, RerankerProfile(top_n=4), lookup)
    assert sorted(c.chunk_id for c in out) == sorted(c.chunk_id for c in cands)


def test_prefix_suffix_law():
    cands, lookup = pool_with_chunks([f"body {i}" for i in range(6)])
    out = rerank_candidates("body 5", cands, RerankerProfile(top_n=3), lookup)
    # tail candidates keep fused order after the reranked prefix
    assert [c.chunk_id for c in out[3:]] == ["c3", "c4", "c5"]
    assert all(c.rerank is None for c in out[3:])
    assert all(c.rerank is not None for c in out[:3])


def test_input_not_mutated():
    cands, lookup = pool_with_chunks(["alpha", "beta"])
    rerank_candidates("alpha", cands, RerankerProfile(top_n=2), lookup)
    assert all(c.rerank is None for c in cands)


def test_remote_failure_carries_fallback():
    cands, lookup = pool_with_chunks(["a", "b", "c"])
    profile = RerankerProfile(kind="remote", endpoint=DEAD_ENDPOINT, top_n=2)
    with pytest.raises(RerankError) as err:
        rerank_candidates("q", cands, profile, lookup, timeout=0.5)
    fallback = err.value.fallback
    assert [c.chunk_id for c in fallback] == [c.chunk_id for c in cands]


def test_profile_validation():
    with pytest.raises(ValueError):
        RerankerProfile(kind="remote")  # endpoint required
    with pytest.raises(ValueError):
        RerankerProfile(kind="local_lexical", endpoint="http://x")
    with pytest.raises(ValueError):
        RerankerProfile(top_n=0)
