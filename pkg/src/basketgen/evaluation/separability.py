"""Basket vectorisation and a logistic-regression real-vs-generated test."""
from dataclasses import dataclass

import numpy as np

GRANULARITIES = ("category", "subcategory", "sku")


class InsufficientSamplesError(ValueError):
    pass


def basket_vectors(baskets, granularity, catalog, vectors=None):
    """One row per basket.

    ``category``/``subcategory``: 0/1 bag over the catalog's sorted labels.
    ``sku``: mean of the basket's product embeddings (``vectors``).
    """
    if granularity == "sku":
        if vectors is None:
            raise ValueError("sku granularity needs product vectors")
        return np.array([np.mean([vectors[p] for p in b.products], axis=0) for b in baskets])
    if granularity not in GRANULARITIES:
        raise ValueError(f"unknown granularity {granularity!r}")
    labels = sorted({getattr(r, granularity) for r in catalog.values()})
    col = {lab: i for i, lab in enumerate(labels)}
    out = np.zeros((len(baskets), len(labels)))
    for i, b in enumerate(baskets):
        for p in b.products:
            out[i, col[getattr(catalog[p], granularity)]] = 1.0
    return out


class LogisticRegression:
    """Full-batch gradient descent on standardised features with an L2 penalty."""

    def __init__(self, l2=1e-3, epochs=500, lr=0.5):
        self.l2 = l2
        self.epochs = epochs
        self.lr = lr

    def fit(self, x, y):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        self.mean = x.mean(axis=0)
        std = x.std(axis=0)
        self.scale = np.where(std > 0, std, 1.0)
        z = (x - self.mean) / self.scale
        self.w = np.zeros(z.shape[1])
        self.b = 0.0
        n = len(y)
        for _ in range(self.epochs):
            p = _sigmoid(z @ self.w + self.b)
            err = p - y
            self.w -= self.lr * (z.T @ err / n + self.l2 * self.w)
            self.b -= self.lr * err.mean()
        return self

    def predict_proba(self, x):
        return _sigmoid(((np.asarray(x) - self.mean) / self.scale) @ self.w + self.b)

    def predict(self, x):
        return (self.predict_proba(x) >= 0.5).astype(np.int64)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass
class SeparabilityReport:
    representation: str
    accuracy: float
    per_class: int
    n_train: int
    n_test: int


def separability(real, gen, seed=0, representation="", test_fraction=0.2, l2=1e-3, epochs=500):
    """Held-out accuracy of a classifier telling real rows from generated rows.

    The larger class is subsampled to the smaller one, then each class is
    split 80/20 into train and test.
    """
    real = np.asarray(real, dtype=np.float64)
    gen = np.asarray(gen, dtype=np.float64)
    n = min(len(real), len(gen))
    if n < 10:
        raise InsufficientSamplesError(f"need at least 10 samples per class, got {n}")
    rng = np.random.default_rng(seed)
    real = real[rng.permutation(len(real))[:n]]
    gen = gen[rng.permutation(len(gen))[:n]]
    n_test = max(1, int(round(test_fraction * n)))
    train_x = np.vstack([real[n_test:], gen[n_test:]])
    train_y = np.r_[np.zeros(n - n_test), np.ones(n - n_test)]
    test_x = np.vstack([real[:n_test], gen[:n_test]])
    test_y = np.r_[np.zeros(n_test), np.ones(n_test)]
    model = LogisticRegression(l2=l2, epochs=epochs).fit(train_x, train_y)
    acc = float((model.predict(test_x) == test_y).mean())
    return SeparabilityReport(representation, acc, n, len(train_y), len(test_y))


def self_separability(vectors, seed=0, representation=""):
    """Calibration run: a random half of ``vectors`` against the other half."""
    vectors = np.asarray(vectors)
    order = np.random.default_rng(seed).permutation(len(vectors))
    half = len(vectors) // 2
    return separability(vectors[order[:half]], vectors[order[half:2 * half]], seed=seed,
                        representation=representation)
