import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from basketgen.products import (
    EmptyCorpusError,
    OutOfVocabularyError,
    ProductDocument,
    ProductVectors,
    Vocabulary,
    WordEmbeddingTable,
    default_stopwords,
    nearest_products,
    preprocess,
    product_vector,
    skipgram_pairs,
    train_skipgram,
)


def _cos(a, b):
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


def _table(vectors):
    tokens = sorted(vectors)
    vocab = Vocabulary({t: 1 for t in tokens})
    w = np.array([vectors[t] for t in tokens], dtype=float)
    return WordEmbeddingTable(vocab, w, np.zeros_like(w))


# --- preprocess ------------------------------------------------------------------------

def test_preprocess_drops_digits_stopwords_and_short_tokens():
    assert preprocess("Silk Shampoo 250ml", "for dry hair") == ["silk", "shampoo", "dry", "hair"]


def test_preprocess_empty_and_all_stopwords():
    assert preprocess("", "") == []
    assert preprocess("THE the The", "") == []
    assert preprocess(None, "a b c") == []


def test_stopword_list_is_shipped():
    stop = default_stopwords()
    assert {"the", "for", "and", "ml"} <= stop
    assert "shampoo" not in stop


def test_document_needs_tokens():
    with pytest.raises(ValueError, match="no tokens"):
        ProductDocument("p1", ())


# --- vocabulary and pairs -------------------------------------------------------------

def test_vocabulary_ids_are_dense_and_sorted():
    docs = [ProductDocument("a", ("zeta", "alpha", "alpha")), ProductDocument("b", ("mid",))]
    vocab = Vocabulary.from_documents(docs)
    assert vocab.tokens == ["alpha", "mid", "zeta"]
    assert sorted(vocab.ids.values()) == [0, 1, 2]
    assert vocab.counts.tolist() == [2, 1, 1]
    assert len(Vocabulary.from_documents(docs, min_count=2)) == 1


def test_window_one_pairs():
    assert set(skipgram_pairs([0, 1, 2], 1)) == {(0, 1), (1, 0), (1, 2), (2, 1)}
    assert len(skipgram_pairs([0, 1, 2], 1)) == 4


@given(st.lists(st.integers(0, 9), min_size=0, max_size=12), st.integers(1, 6))
def test_pair_count_matches_window_arithmetic(ids, window):
    n = len(ids)
    expected = sum(min(n - 1, i + window) - max(0, i - window) for i in range(n))
    assert len(skipgram_pairs(ids, window)) == expected


# --- training -------------------------------------------------------------------------

def test_empty_corpus_rejected():
    with pytest.raises(EmptyCorpusError):
        train_skipgram([])
    with pytest.raises(ValueError):
        train_skipgram([ProductDocument("a", ("x", "y"))], window=0)


def test_skipgram_is_deterministic():
    docs = [ProductDocument(str(i), ("aa", "bb", "cc", "dd")[i % 2:]) for i in range(6)]
    a = train_skipgram(docs, dim=8, epochs=3, rng=5)
    b = train_skipgram(docs, dim=8, epochs=3, rng=5)
    np.testing.assert_array_equal(a.w_in, b.w_in)
    np.testing.assert_array_equal(a.w_out, b.w_out)
    assert np.isfinite(a.w_in).all()


def test_loss_decreases():
    docs = [ProductDocument(str(i), ("aa", "bb", "cc")) for i in range(10)]
    table = train_skipgram(docs, dim=8, epochs=20, rng=0)
    assert table.losses[-1] < table.losses[0]


def test_topic_groups_separate():
    rng = np.random.default_rng(0)
    groups = [[f"g{g}w{i}" for i in range(5)] for g in range(8)]
    docs = [ProductDocument(f"d{g}_{j}", tuple(rng.permutation(groups[g])))
            for g in range(8) for j in range(10)]
    table = train_skipgram(docs, dim=16, epochs=30, rng=1)
    intra, inter = [], []
    tokens = [t for g in groups for t in g]
    for i, a in enumerate(tokens):
        for b in tokens[i + 1:]:
            (intra if a[:2] == b[:2] else inter).append(_cos(table.vector(a), table.vector(b)))
    assert np.mean(intra) > np.mean(inter) + 0.1


def test_disjoint_documents_gain_no_cross_similarity():
    # averaged over seeds: any shared-direction drift across documents stays small
    # next to the similarity gained within a document
    a, b = ("aa", "ab", "ac"), ("ba", "bb", "bc")
    docs = [ProductDocument("a", a), ProductDocument("b", b)]
    gain_cross, gain_within = [], []
    for seed in range(20):
        init = train_skipgram(docs, dim=2, epochs=0, rng=seed)
        trained = train_skipgram(docs, dim=2, epochs=500, rng=seed)
        for t, sign in ((trained, 1.0), (init, -1.0)):
            gain_cross.append(sign * np.mean([_cos(t.vector(x), t.vector(y))
                                              for x in a for y in b]))
            gain_within.append(sign * np.mean([_cos(t.vector(x), t.vector(y))
                                               for x, y in (a[:2], a[::2], a[1:])]))
    cross, within = 2 * np.mean(gain_cross), 2 * np.mean(gain_within)
    assert within > 0.5
    assert cross < 0.25 * within


def test_oov_lookup():
    table = _table({"aa": [1.0, 0.0]})
    with pytest.raises(OutOfVocabularyError):
        table.vector("zz")


# --- product vectors -----------------------------------------------------------------------

def test_mean_of_token_vectors():
    v = np.array([0.3, -1.2])
    table = _table({"aa": v, "bb": -v, "cc": [2.0, 5.0], "dd": [1.0, 1.0]})
    np.testing.assert_array_equal(product_vector(ProductDocument("p", ("aa",)), table), v)
    np.testing.assert_array_equal(product_vector(ProductDocument("p", ("aa", "bb")), table), 0.0)
    got = product_vector(ProductDocument("p", ("aa", "cc", "dd")), table)
    np.testing.assert_allclose(got, (v + [2.0, 5.0] + [1.0, 1.0]) / 3, rtol=0, atol=1e-15)


def test_oov_tokens_skipped_and_all_oov_rejected():
    table = _table({"aa": [1.0, 2.0]})
    np.testing.assert_array_equal(product_vector(ProductDocument("p", ("aa", "zz")), table),
                                  [1.0, 2.0])
    with pytest.raises(OutOfVocabularyError):
        product_vector(ProductDocument("p", ("zz",)), table)


@settings(max_examples=30)
@given(st.permutations(["aa", "bb", "cc", "dd"]))
def test_token_order_does_not_matter(tokens):
    rng = np.random.default_rng(0)
    table = _table({t: rng.normal(size=3) for t in ("aa", "bb", "cc", "dd")})
    ref = product_vector(ProductDocument("p", ("aa", "bb", "cc", "dd")), table)
    np.testing.assert_allclose(product_vector(ProductDocument("p", tuple(tokens)), table), ref,
                               atol=1e-15)


def test_product_vectors_are_id_sorted_and_immutable():
    pv = ProductVectors(["b", "a"], [[1.0], [2.0]])
    assert pv.ids == ["a", "b"]
    np.testing.assert_array_equal(pv["b"], [1.0])
    with pytest.raises(ValueError):
        pv.matrix[0, 0] = 5.0
    with pytest.raises(ValueError, match="duplicate"):
        ProductVectors(["a", "a"], [[1.0], [2.0]])


# --- retrieval -------------------------------------------------------------------------------

def test_identity_query_ranks_first():
    pv = ProductVectors(["x", "y", "z"], [[0.0, 1.0], [2.0, 2.0], [5.0, 0.0]])
    pid, dist = nearest_products([2.0, 2.0], pv, k=1)[0]
    assert pid == "y" and dist == 0.0


def test_hand_case():
    pv = ProductVectors(["a", "b"], [[0.0, 0.0], [3.0, 4.0]])
    ranked = nearest_products([1.0, 0.0], pv, k=2)
    assert [p for p, _ in ranked] == ["a", "b"]
    assert ranked[0][1] == 1.0
    assert ranked[1][1] == pytest.approx(np.sqrt(20.0))


def test_k_larger_than_catalog_and_invalid_k():
    pv = ProductVectors(["a", "b"], [[0.0], [1.0]])
    assert len(nearest_products([0.0], pv, k=10)) == 2
    with pytest.raises(ValueError):
        nearest_products([0.0], pv, k=0)
    with pytest.raises(ValueError):
        nearest_products([0.0], ProductVectors([], np.zeros((0, 1))))


def test_ties_by_ascending_id():
    pv = ProductVectors(["c", "a", "b"], [[1.0], [-1.0], [1.0]])
    assert [p for p, _ in nearest_products([0.0], pv, k=3)] == ["a", "b", "c"]


@pytest.mark.parametrize("metric", ["l2", "cosine"])
def test_matches_exhaustive_sort(metric):
    rng = np.random.default_rng(4)
    ids = [f"p{i:02d}" for i in range(50)]
    pv = ProductVectors(ids, rng.normal(size=(50, 6)))
    for _ in range(20):
        q = rng.normal(size=6)
        if metric == "l2":
            d = {p: float(np.linalg.norm(pv[p] - q)) for p in ids}
        else:
            d = {p: 1.0 - _cos(pv[p], q) for p in ids}
        oracle = sorted(ids, key=lambda p: (d[p], p))
        assert [p for p, _ in nearest_products(q, pv, k=50, metric=metric)] == oracle


def test_unknown_metric():
    pv = ProductVectors(["a"], [[0.0]])
    with pytest.raises(ValueError, match="metric"):
        nearest_products([0.0], pv, metric="l1")
