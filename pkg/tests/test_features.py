"""
Tests for Feature Extraction
"""

import math
from collections import Counter

import numpy as np
import pytest
from core.errors import InvalidConfig
from core.ynote import tokenize
from stages.features import (
    EmptyVocabulary,
    NGram,
    VectorizerConfig,
    Vocabulary,
    document_frequency_report,
    extract_ngrams,
    fit_vocabulary,
    transform,
    transform_corpus,
)


def _seqs(*songs):
    return [tokenize(s) for s in songs]


def _brute_force_tfidf(token_lists, ngram_min, ngram_max, min_df, max_df, max_features):
    """Dense reference implementation."""
    docs = []
    for tokens in token_lists:
        grams = []
        for n in range(ngram_min, ngram_max + 1):
            grams += [" ".join(tokens[i:i + n]) for i in range(len(tokens) - n + 1)]
        docs.append(grams)
    n_docs = len(docs)
    df = Counter(g for d in docs for g in set(d))
    total = Counter(g for d in docs for g in d)
    limit = math.ceil(max_df * n_docs - 1e-9)
    keep = [g for g in df if min_df <= df[g] <= limit]
    if len(keep) > max_features:
        keep = sorted(keep, key=lambda g: (-total[g], g))[:max_features]
    terms = sorted(keep)
    idf = [math.log((1 + n_docs) / (1 + df[g])) + 1 for g in terms]
    dense = np.zeros((n_docs, len(terms)))
    for r, d in enumerate(docs):
        counts = Counter(d)
        for c, g in enumerate(terms):
            dense[r, c] = counts[g] * idf[c]
        norm = np.linalg.norm(dense[r])
        if norm > 0:
            dense[r] /= norm
    return terms, dense


def test_extract_ngrams_counts():
    """Test n-gram windows for a three-token song."""
    grams = extract_ngrams(tokenize("G402E508C516"), 1, 3)
    assert [g.text for g in grams] == [
        "G402", "E508", "C516", "G402 E508", "E508 C516", "G402 E508 C516"
    ]
    assert grams[-1].arity == 3
    assert grams[-1].tokens == ("G402", "E508", "C516")


def test_extract_ngrams_short_song():
    """Test songs shorter than n contribute nothing for that n."""
    assert extract_ngrams(tokenize("G402"), 2, 3) == []


def test_fit_vocabulary_single_document():
    """Test idf of a single-document vocabulary is 1.0 everywhere."""
    config = VectorizerConfig(ngram_min=1, ngram_max=2, min_df=1, max_df=1.0)
    vocab = fit_vocabulary(_seqs("G402E508"), config)
    assert vocab.terms == ("E508", "G402", "G402 E508")
    assert all(v == pytest.approx(1.0) for v in vocab.idf)


def test_fit_vocabulary_min_df_filters():
    """Test n-grams below min_df are dropped."""
    config = VectorizerConfig(ngram_min=1, ngram_max=1, min_df=2, max_df=1.0)
    vocab = fit_vocabulary(_seqs("G402E508", "G402C516", "G402D504"), config)
    assert vocab.terms == ("G402",)
    assert vocab.doc_freq == (3,)


def test_fit_vocabulary_max_df_threshold():
    """Test max_df keeps df <= ceil(max_df * N)."""
    config = VectorizerConfig(ngram_min=1, ngram_max=1, min_df=1, max_df=0.5)
    vocab = fit_vocabulary(_seqs("G402E508", "G402C516", "G402D504", "A404A404"), config)
    assert "G402" not in vocab
    assert "A404" in vocab


def test_fit_vocabulary_max_features_by_count():
    """Test the cap keeps the most frequent n-grams, ties by text, columns lexicographic."""
    config = VectorizerConfig(ngram_min=1, ngram_max=1, min_df=1, max_df=1.0, max_features=2)
    vocab = fit_vocabulary(_seqs("C404C404C404E508", "D504D504E508B404"), config)
    assert vocab.terms == ("C404", "D504")


def test_fit_vocabulary_empty():
    """Test empty corpus and fully filtered corpus both fail."""
    with pytest.raises(EmptyVocabulary):
        fit_vocabulary([], VectorizerConfig())
    with pytest.raises(EmptyVocabulary):
        fit_vocabulary(_seqs("G402"), VectorizerConfig(min_df=3))


def test_vectorizer_config_validation():
    """Test invalid vectorizer settings."""
    with pytest.raises(InvalidConfig):
        VectorizerConfig(ngram_min=3, ngram_max=1)
    with pytest.raises(InvalidConfig):
        VectorizerConfig(max_df=0.0)
    with pytest.raises(InvalidConfig):
        VectorizerConfig(min_df=0)


def test_transform_unit_norm_and_oov():
    """Test rows are L2-normalized and OOV songs give zero rows."""
    config = VectorizerConfig(ngram_min=1, ngram_max=2, min_df=1, max_df=1.0)
    vocab = fit_vocabulary(_seqs("G402E508C516", "G402D504"), config)
    row = transform(tokenize("G402E508"), vocab)
    assert row.shape == (1, len(vocab))
    assert np.linalg.norm(row.toarray()) == pytest.approx(1.0)

    matrix, zero_rows = transform_corpus(_seqs("G402", "A404B404"), vocab)
    assert zero_rows == [1]
    assert matrix[1].nnz == 0


def test_tfidf_matches_brute_force():
    """Test TF-IDF equals a dense brute-force implementation on random corpora."""
    rng = np.random.default_rng(11)
    alphabet = ["G402", "E508", "C516", "0002", "D504", "A404"]
    checked = 0
    for _ in range(20):
        n_docs = int(rng.integers(1, 11))
        token_lists = [list(rng.choice(alphabet, int(rng.integers(1, 9)))) for _ in range(n_docs)]
        token_lists = [[str(t) for t in tokens] for tokens in token_lists]
        min_df = int(rng.integers(1, 3))
        max_df = float(rng.choice([0.5, 0.8, 1.0]))
        max_features = int(rng.integers(2, 20))
        terms, expected = _brute_force_tfidf(token_lists, 1, 3, min_df, max_df, max_features)
        config = VectorizerConfig(ngram_min=1, ngram_max=3, min_df=min_df, max_df=max_df,
                                  max_features=max_features)
        seqs = [tokenize("".join(tokens)) for tokens in token_lists]
        if not terms:
            with pytest.raises(EmptyVocabulary):
                fit_vocabulary(seqs, config)
            continue
        vocab = fit_vocabulary(seqs, config)
        assert list(vocab.terms) == terms
        matrix, _ = transform_corpus(seqs, vocab)
        np.testing.assert_allclose(matrix.toarray(), expected, atol=1e-9, rtol=0)
        checked += 1
    assert checked > 0


def test_vocabulary_dict_round_trip():
    """Test vocabulary dump/load keeps terms, idf and fingerprint."""
    config = VectorizerConfig(ngram_min=1, ngram_max=2, min_df=1, max_df=1.0)
    vocab = fit_vocabulary(_seqs("G402E508C516", "G402D504"), config)
    restored = Vocabulary.from_dict(vocab.to_dict())
    assert restored == vocab
    assert restored.fingerprint() == vocab.fingerprint()


def test_document_frequency_report():
    """Test per-class document fractions of selected tokens."""
    report = document_frequency_report(
        _seqs("G4020002", "E508E508", "C5160004"), [0, 0, 1], ["0002", "0004"]
    )
    assert report[0] == {"0002": 0.5, "0004": 0.0}
    assert report[1] == {"0002": 0.0, "0004": 1.0}


def test_ngram_value_type():
    """Test NGram equality is by text."""
    assert NGram("G402 E508") == NGram("G402 E508")
