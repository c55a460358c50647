"""Tokenisation, vocabulary construction and TF-IDF feature vectors.

Every vector has ``V + 1`` coordinates; the last one is a constant bias
feature equal to 1. The TF-IDF part is L2-normalised.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

NUM_TOKEN = "<num>"

_TOKEN_RE = re.compile(r"[^\W_]+")


def tokenize(text: str) -> list[str]:
    """Lower-case alphanumeric runs; all-digit runs become ``<num>``."""
    return [NUM_TOKEN if t.isdigit() else t for t in _TOKEN_RE.findall(text.lower())]


@dataclass(frozen=True)
class Vocabulary:
    tokens: tuple[str, ...]
    df: tuple[int, ...]
    total_documents: int

    def __post_init__(self):
        if len(self.tokens) != len(self.df):
            raise ValueError("tokens and df differ in length")
        if any(d > self.total_documents or d < 1 for d in self.df):
            raise ValueError("document frequency outside 1..total_documents")

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def dimension(self) -> int:
        return len(self.tokens) + 1

    @cached_property
    def index(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.tokens)}

    @cached_property
    def idf(self) -> np.ndarray:
        n = self.total_documents
        return np.log((1.0 + n) / (1.0 + np.asarray(self.df, dtype=np.float64)))

    @cached_property
    def fingerprint(self) -> str:
        """Stable hash of the vocabulary, embedded in saved classifier params."""
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()[:16]

    def to_json(self) -> str:
        return json.dumps(
            {"total_documents": self.total_documents, "tokens": list(self.tokens), "df": list(self.df)},
            ensure_ascii=False,
        )

    @classmethod
    def from_json(cls, text: str) -> Vocabulary:
        data = json.loads(text)
        return cls(tuple(data["tokens"]), tuple(data["df"]), int(data["total_documents"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> Vocabulary:
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def build_vocab(texts: Iterable[str], min_df: int = 2) -> Vocabulary:
    """Keep tokens whose document frequency is at least ``min_df``.

    Index order is descending df, ties broken lexicographically.
    """
    return vocab_from_tokens((tokenize(t) for t in texts), min_df)


def vocab_from_tokens(docs: Iterable[Sequence[str]], min_df: int = 2) -> Vocabulary:
    counts: Counter[str] = Counter()
    n = 0
    for tokens in docs:
        counts.update(set(tokens))
        n += 1
    kept = sorted(((t, d) for t, d in counts.items() if d >= min_df), key=lambda td: (-td[1], td[0]))
    return Vocabulary(tuple(t for t, _ in kept), tuple(d for _, d in kept), n)


@dataclass(frozen=True)
class FeatureVector:
    """Sparse vector: strictly increasing ``indices`` with non-zero ``weights``."""

    indices: tuple[int, ...]
    weights: tuple[float, ...]
    dimension: int

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dimension)
        out[list(self.indices)] = self.weights
        return out


def _tfidf_row(tokens: Sequence[str], vocab: Vocabulary) -> tuple[np.ndarray, np.ndarray]:
    index = vocab.index
    ids = [index[t] for t in tokens if t in index]
    if not ids:
        return np.empty(0, dtype=np.int64), np.empty(0)
    cols, tf = np.unique(np.asarray(ids, dtype=np.int64), return_counts=True)
    vals = tf * vocab.idf[cols]
    keep = vals > 0
    cols, vals = cols[keep], vals[keep]
    norm = math.sqrt(float(vals @ vals))
    if norm > 0:
        vals = vals / norm
    return cols, vals


def featurize(text: str, vocab: Vocabulary) -> FeatureVector:
    cols, vals = _tfidf_row(tokenize(text), vocab)
    bias = len(vocab)
    return FeatureVector(tuple(cols.tolist()) + (bias,), tuple(vals.tolist()) + (1.0,), vocab.dimension)


def featurize_many(texts: Sequence[str], vocab: Vocabulary, tokens: Sequence[Sequence[str]] | None = None) -> sp.csr_matrix:
    """Row-stacked :func:`featurize` as a CSR matrix of shape ``(n, V + 1)``.

    ``tokens`` may carry the already tokenized ``texts``.
    """
    if tokens is None:
        tokens = [tokenize(t) for t in texts]
    if len(tokens) == 0:
        return sp.csr_matrix((0, vocab.dimension))
    indptr = [0]
    indices: list[np.ndarray] = []
    data: list[np.ndarray] = []
    bias = np.array([len(vocab)], dtype=np.int64)
    one = np.ones(1)
    for doc in tokens:
        cols, vals = _tfidf_row(doc, vocab)
        indices.extend((cols, bias))
        data.extend((vals, one))
        indptr.append(indptr[-1] + len(cols) + 1)
    return sp.csr_matrix(
        (np.concatenate(data), np.concatenate(indices), np.asarray(indptr)),
        shape=(len(tokens), vocab.dimension),
    )


def stack(vectors: Sequence[FeatureVector]) -> sp.csr_matrix:
    """CSR matrix whose rows are ``vectors``."""
    if not vectors:
        raise ValueError("nothing to stack")
    dim = vectors[0].dimension
    if any(v.dimension != dim for v in vectors):
        raise ValueError("feature vectors differ in dimension")
    indptr = np.cumsum([0] + [len(v.indices) for v in vectors])
    indices = np.fromiter((i for v in vectors for i in v.indices), dtype=np.int64)
    data = np.fromiter((w for v in vectors for w in v.weights), dtype=np.float64)
    return sp.csr_matrix((data, indices, indptr), shape=(len(vectors), dim))
