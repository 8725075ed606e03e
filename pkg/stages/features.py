"""
Feature Extraction
Fit an n-gram vocabulary over note tokens and turn songs into L2-normalized TF-IDF rows.

TF is the raw count, IDF is smoothed: ln((1 + N) / (1 + df)) + 1.
N-grams are tokens joined by a single space ("G508 G516").
"""

import logging
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse
from sklearn.preprocessing import normalize

from core.errors import DegenerateDataError, InvalidConfig
from core.utils import canonical_json, sha256_text
from core.ynote import TokenSequence

logger = logging.getLogger(__name__)

NGRAM_JOINER = " "
MAX_DF_EPSILON = 1e-9


class EmptyVocabulary(DegenerateDataError):
    """Raised when no n-gram survives document-frequency filtering."""
    pass


@dataclass(frozen=True)
class NGram:
    text: str

    @property
    def arity(self) -> int:
        return self.text.count(NGRAM_JOINER) + 1

    @property
    def tokens(self) -> tuple[str, ...]:
        return tuple(self.text.split(NGRAM_JOINER))


@dataclass(frozen=True)
class VectorizerConfig:
    ngram_min: int = 1
    ngram_max: int = 3
    max_features: int = 8000
    min_df: int = 3
    max_df: float = 0.95
    case_sensitive: bool = True

    def __post_init__(self):
        if not (1 <= self.ngram_min <= self.ngram_max):
            raise InvalidConfig(
                f"ngram range must satisfy 1 <= min <= max, got ({self.ngram_min}, {self.ngram_max})"
            )
        if not (0 < self.max_df <= 1):
            raise InvalidConfig(f"max_df must be in (0, 1], got {self.max_df}")
        if self.min_df < 1:
            raise InvalidConfig(f"min_df must be >= 1, got {self.min_df}")
        if self.max_features < 1:
            raise InvalidConfig(f"max_features must be >= 1, got {self.max_features}")
        if not self.case_sensitive:
            raise InvalidConfig("YNote features are always case-sensitive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "VectorizerConfig":
        return cls(
            ngram_min=int(data["ngram_min"]),
            ngram_max=int(data["ngram_max"]),
            max_features=int(data["max_features"]),
            min_df=int(data["min_df"]),
            max_df=float(data["max_df"]),
            case_sensitive=bool(data.get("case_sensitive", True)),
        )


@dataclass(frozen=True)
class Vocabulary:
    """
    Fitted n-gram → column map.

    Attributes:
        terms: N-gram texts in column order (lexicographic)
        doc_freq: Document count per column
        idf: Smoothed idf per column
        n_docs_fitted: Number of documents seen by fit_vocabulary
        config: Settings used for fitting
    """
    terms: tuple[str, ...]
    doc_freq: tuple[int, ...]
    idf: tuple[float, ...]
    n_docs_fitted: int
    config: VectorizerConfig
    index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "index", {term: i for i, term in enumerate(self.terms)})

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, text: str) -> bool:
        return text in self.index

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "n_docs_fitted": self.n_docs_fitted,
            "entries": [
                {"index": i, "ngram": term, "doc_freq": df, "idf": idf}
                for i, (term, df, idf) in enumerate(zip(self.terms, self.doc_freq, self.idf))
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Vocabulary":
        entries = sorted(data["entries"], key=lambda e: e["index"])
        return cls(
            terms=tuple(e["ngram"] for e in entries),
            doc_freq=tuple(int(e["doc_freq"]) for e in entries),
            idf=tuple(float(e["idf"]) for e in entries),
            n_docs_fitted=int(data["n_docs_fitted"]),
            config=VectorizerConfig.from_dict(data["config"]),
        )

    def fingerprint(self) -> str:
        """sha256 of the canonical vocabulary dump."""
        return sha256_text(canonical_json(self.to_dict()))


def _ngram_texts(tokens: Sequence[str], ngram_min: int, ngram_max: int) -> list[str]:
    texts = []
    for n in range(ngram_min, ngram_max + 1):
        for start in range(len(tokens) - n + 1):
            texts.append(NGRAM_JOINER.join(tokens[start:start + n]))
    return texts


def extract_ngrams(seq: TokenSequence, ngram_min: int, ngram_max: int) -> list[NGram]:
    """
    All contiguous n-gram windows for n in [ngram_min, ngram_max], with multiplicity.

    Args:
        seq: Tokenized song
        ngram_min: Smallest window
        ngram_max: Largest window

    Returns:
        N-grams grouped by arity, in window order; songs shorter than n
        contribute nothing for that n

    Example:
        ["G402", "E508", "C516"], (1, 3) → 3 unigrams, 2 bigrams, 1 trigram
    """
    return [NGram(text) for text in _ngram_texts(tuple(seq), ngram_min, ngram_max)]


def fit_vocabulary(corpus: Sequence[TokenSequence], config: VectorizerConfig) -> Vocabulary:
    """
    Fit the n-gram vocabulary.

    Args:
        corpus: Tokenized songs
        config: Vectorizer settings

    Returns:
        Vocabulary with lexicographic column order and smoothed idf

    Raises:
        EmptyVocabulary: Empty corpus or nothing survives filtering

    Filtering:
        1. keep min_df <= df <= ceil(max_df * N)
        2. over max_features: keep highest total term count, ties by n-gram text
        3. columns assigned in lexicographic order of n-gram text
    """
    n_docs = len(corpus)
    if n_docs == 0:
        raise EmptyVocabulary("Cannot fit a vocabulary on an empty corpus")

    doc_freq: Counter = Counter()
    term_count: Counter = Counter()
    for seq in corpus:
        texts = _ngram_texts(tuple(seq), config.ngram_min, config.ngram_max)
        term_count.update(texts)
        doc_freq.update(set(texts))

    max_doc_count = math.ceil(config.max_df * n_docs - MAX_DF_EPSILON)
    survivors = [
        term for term, df in doc_freq.items()
        if config.min_df <= df <= max_doc_count
    ]

    if len(survivors) > config.max_features:
        survivors.sort(key=lambda term: (-term_count[term], term))
        survivors = survivors[:config.max_features]

    if not survivors:
        raise EmptyVocabulary(
            f"No n-gram survives min_df={config.min_df}, max_df={config.max_df} over {n_docs} songs"
        )

    terms = tuple(sorted(survivors))
    dfs = tuple(doc_freq[term] for term in terms)
    idf = tuple(math.log((1 + n_docs) / (1 + df)) + 1.0 for df in dfs)

    logger.info("Fitted vocabulary: %d n-grams from %d songs (%d candidates)",
                len(terms), n_docs, len(doc_freq))
    return Vocabulary(terms=terms, doc_freq=dfs, idf=idf, n_docs_fitted=n_docs, config=config)


def transform(seq: TokenSequence, vocab: Vocabulary) -> sparse.csr_matrix:
    """
    TF-IDF row for one song (1 x |vocab|); all-OOV songs give the zero row.

    Args:
        seq: Tokenized song
        vocab: Fitted vocabulary

    Returns:
        L2-normalized sparse row
    """
    matrix, _ = transform_corpus([seq], vocab)
    return matrix


def transform_corpus(corpus: Sequence[TokenSequence], vocab: Vocabulary) -> tuple[sparse.csr_matrix, list[int]]:
    """
    TF-IDF matrix for many songs.

    Args:
        corpus: Tokenized songs
        vocab: Fitted vocabulary

    Returns:
        Tuple of (CSR matrix n_songs x |vocab|, indices of all-zero rows)
    """
    cfg = vocab.config
    rows, cols, values = [], [], []
    for row, seq in enumerate(corpus):
        counts = Counter(
            vocab.index[text]
            for text in _ngram_texts(tuple(seq), cfg.ngram_min, cfg.ngram_max)
            if text in vocab.index
        )
        for col in sorted(counts):
            rows.append(row)
            cols.append(col)
            values.append(counts[col] * vocab.idf[col])

    matrix = sparse.csr_matrix(
        (np.asarray(values, dtype=np.float64), (rows, cols)),
        shape=(len(corpus), len(vocab)),
    )
    matrix = normalize(matrix, norm="l2", axis=1, copy=False).tocsr()
    matrix.sort_indices()

    zero_rows = [i for i in range(len(corpus)) if matrix.indptr[i] == matrix.indptr[i + 1]]
    if zero_rows:
        logger.warning("%d song(s) have no in-vocabulary n-gram; transformed to zero rows",
                       len(zero_rows))
    return matrix, zero_rows


def document_frequency_report(corpus: Iterable[TokenSequence], labels: Iterable[int],
                              tokens: Sequence[str]) -> dict[int, dict[str, float]]:
    """
    Fraction of songs per class that contain each of the given tokens.

    Args:
        corpus: Tokenized songs
        labels: Class label per song
        tokens: Tokens to report (e.g. the rest tokens)

    Returns:
        {label: {token: document fraction}}
    """
    hits: dict[int, Counter] = {}
    totals: Counter = Counter()
    for seq, label in zip(corpus, labels):
        label = int(label)
        totals[label] += 1
        present = set(seq)
        bucket = hits.setdefault(label, Counter())
        for token in tokens:
            if token in present:
                bucket[token] += 1
    return {
        label: {token: hits[label][token] / totals[label] for token in tokens}
        for label in sorted(totals)
    }
