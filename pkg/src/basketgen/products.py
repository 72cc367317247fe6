"""Product text embeddings: preprocessing, skip-gram training, mean vectors, retrieval."""
import logging
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np

from . import kernels

log = logging.getLogger(__name__)

_TOKEN_RE = re.compile(r"[a-z]+")


class EmptyCorpusError(ValueError):
    pass


class OutOfVocabularyError(KeyError):
    pass


@lru_cache(maxsize=1)
def default_stopwords():
    text = resources.files("basketgen").joinpath("stopwords.txt").read_text()
    return frozenset(line.strip() for line in text.splitlines()
                     if line.strip() and not line.startswith("#"))


def preprocess(name, description, stopwords=None):
    """Lowercased alphabetic tokens of ``name + description`` without stopwords.

    Digits split tokens ("250ml" gives "ml"); tokens shorter than two
    characters are dropped.
    """
    stop = default_stopwords() if stopwords is None else stopwords
    text = f"{name or ''} {description or ''}".lower()
    return [tok for tok in _TOKEN_RE.findall(text) if len(tok) >= 2 and tok not in stop]


@dataclass(frozen=True)
class ProductDocument:
    product_id: str
    tokens: tuple

    def __post_init__(self):
        if not self.tokens:
            raise ValueError(f"product {self.product_id} has no tokens after preprocessing")


class Vocabulary:
    def __init__(self, counts, min_count=1):
        kept = sorted(tok for tok, n in counts.items() if n >= min_count)
        self.tokens = kept
        self.ids = {tok: i for i, tok in enumerate(kept)}
        self.counts = np.array([counts[tok] for tok in kept], dtype=np.int64)

    @classmethod
    def from_documents(cls, docs, min_count=1):
        counts = {}
        for doc in docs:
            for tok in doc.tokens:
                counts[tok] = counts.get(tok, 0) + 1
        return cls(counts, min_count)

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.ids

    def encode(self, tokens):
        return [self.ids[t] for t in tokens if t in self.ids]


def skipgram_pairs(ids, window):
    """(center, context) pairs for one sentence, contexts within ``window`` positions."""
    pairs = []
    n = len(ids)
    for i in range(n):
        for j in range(max(0, i - window), min(n, i + window + 1)):
            if j != i:
                pairs.append((ids[i], ids[j]))
    return pairs


@dataclass
class WordEmbeddingTable:
    vocab: Vocabulary
    w_in: np.ndarray
    w_out: np.ndarray
    losses: list = field(default_factory=list)

    @property
    def dim(self):
        return self.w_in.shape[1]

    def vector(self, token):
        try:
            return self.w_in[self.vocab.ids[token]]
        except KeyError:
            raise OutOfVocabularyError(token) from None


def train_skipgram(corpus, window=5, dim=128, negatives=5, epochs=50, rng=None,
                   lr=0.025, min_lr=1e-4, min_count=1, noise_power=0.75):
    """Skip-gram with negative sampling; each document is an independent sentence.

    Pair order and negative draws come from ``rng`` only, so a fixed seed
    reproduces the table exactly.
    """
    if not corpus:
        raise EmptyCorpusError("skip-gram corpus is empty")
    if window < 1 or dim < 1:
        raise ValueError("window and dim must be >= 1")
    rng = np.random.default_rng(rng)
    vocab = Vocabulary.from_documents(corpus, min_count)
    if len(vocab) == 0:
        raise EmptyCorpusError("no tokens survive min_count")
    pairs = []
    for doc in corpus:
        pairs.extend(skipgram_pairs(vocab.encode(doc.tokens), window))
    w_in = rng.uniform(-0.5 / dim, 0.5 / dim, size=(len(vocab), dim))
    w_out = np.zeros((len(vocab), dim))
    table = WordEmbeddingTable(vocab, w_in, w_out)
    if not pairs or epochs <= 0:
        return table
    pairs = np.asarray(pairs, dtype=np.int64)
    noise = vocab.counts.astype(np.float64) ** noise_power
    cdf = np.cumsum(noise / noise.sum())
    cdf[-1] = 1.0
    total = len(pairs) * epochs
    for epoch in range(epochs):
        order = rng.permutation(len(pairs))
        batch = np.ascontiguousarray(pairs[order])
        negs = np.searchsorted(cdf, rng.random((len(batch), negatives)), side="right")
        negs = np.ascontiguousarray(np.minimum(negs, len(vocab) - 1), dtype=np.int64)
        done = np.arange(epoch * len(pairs), (epoch + 1) * len(pairs))
        lrs = np.maximum(lr * (1.0 - done / total), min_lr)
        loss = kernels.sgns_epoch(w_in, w_out, batch, negs, lrs)
        table.losses.append(loss / len(batch))
        log.debug("skip-gram epoch %d loss %.4f", epoch, table.losses[-1])
    return table


def product_vector(doc, table):
    """Mean of the input vectors of the document's in-vocabulary tokens."""
    ids = table.vocab.encode(doc.tokens)
    if not ids:
        raise OutOfVocabularyError(f"product {doc.product_id}: no token in vocabulary")
    return table.w_in[ids].mean(axis=0)


class ProductVectors:
    """Immutable catalog of product embeddings, stored in ascending id order."""

    def __init__(self, ids, vectors):
        ids = [str(i) for i in ids]
        vectors = np.asarray(vectors, dtype=np.float64)
        if len(ids) != len(vectors):
            raise ValueError("ids and vectors differ in length")
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate product ids")
        order = sorted(range(len(ids)), key=ids.__getitem__)
        self.ids = [ids[i] for i in order]
        self.matrix = vectors[order].copy()
        self.matrix.setflags(write=False)
        self.index = {pid: i for i, pid in enumerate(self.ids)}

    def __len__(self):
        return len(self.ids)

    @property
    def dim(self):
        return self.matrix.shape[1]

    def __getitem__(self, product_id):
        return self.matrix[self.index[product_id]]

    @classmethod
    def from_documents(cls, docs, table):
        return cls([d.product_id for d in docs], [product_vector(d, table) for d in docs])


def _distances(queries, matrix, metric):
    if metric == "l2":
        diff = queries[:, None, :] - matrix[None, :, :]
        return np.sqrt(np.einsum("qnd,qnd->qn", diff, diff))
    if metric == "cosine":
        qn = np.linalg.norm(queries, axis=1)
        mn = np.linalg.norm(matrix, axis=1)
        denom = np.outer(qn, mn)
        sims = np.divide(queries @ matrix.T, denom, out=np.zeros_like(denom), where=denom > 0)
        return 1.0 - sims
    raise ValueError(f"unknown metric {metric!r}")


def nearest_products(query, catalog, k=1, metric="l2"):
    """``k`` closest products as ``(product_id, distance)``, ties by ascending id.

    ``k`` larger than the catalog returns the full ranking.
    """
    if len(catalog) == 0:
        raise ValueError("empty catalog")
    if k < 1:
        raise ValueError("k must be >= 1")
    q = np.asarray(query, dtype=np.float64).reshape(1, -1)
    dist = _distances(q, catalog.matrix, metric)[0]
    # catalog rows are id-sorted, so a stable sort breaks ties by id
    order = np.argsort(dist, kind="stable")[:k]
    return [(catalog.ids[i], float(dist[i])) for i in order]


def nearest_indices(queries, catalog, metric="l2", chunk=512):
    """Row index of the closest catalog product for each query row."""
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    out = np.empty(len(queries), dtype=np.int64)
    for start in range(0, len(queries), chunk):
        block = queries[start:start + chunk]
        out[start:start + chunk] = np.argmin(_distances(block, catalog.matrix, metric), axis=1)
    return out
