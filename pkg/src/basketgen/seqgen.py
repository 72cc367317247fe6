"""Closed-loop basket sequence generation.

For each future week: find the customer's k nearest indexed customers by
hidden state, draw a basket size from their historical sizes, generate that
many products from the GAN under (state, week), then feed the basket back
through the LSTM to get next week's state.
"""
import zlib
from dataclasses import dataclass, field

import numpy as np

from .dataio.schema import Basket, CustomerHistory
from .gan import make_condition
from .products import nearest_indices


class GenerationError(RuntimeError):
    """Raised when a step of the generation loop fails; carries the partial trace."""

    def __init__(self, message, customer_id, trace):
        super().__init__(message)
        self.customer_id = customer_id
        self.trace = trace


@dataclass
class GenerationConfig:
    k: int = 10
    weeks: int = 5
    seed: int = 0
    max_basket_size: int = 50

    def validate(self, index_size=None):
        if self.k < 1:
            raise ValueError("generation.k must be >= 1")
        if self.weeks < 1:
            raise ValueError("generation.weeks must be >= 1")
        if self.max_basket_size < 1:
            raise ValueError("generation.max_basket_size must be >= 1")
        if index_size is not None and self.k > index_size:
            raise ValueError(f"generation.k={self.k} exceeds the {index_size} indexed customers")
        return self


class CustomerIndex:
    """Hidden vectors and historical basket sizes, rows in ascending customer id."""

    def __init__(self, ids, vectors, sizes):
        ids = [str(i) for i in ids]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate customer ids in index")
        if len(ids) != len(vectors) or len(ids) != len(sizes):
            raise ValueError("ids, vectors and sizes differ in length")
        order = sorted(range(len(ids)), key=ids.__getitem__)
        self.ids = [ids[i] for i in order]
        self.vectors = np.asarray(vectors, dtype=np.float64).reshape(len(ids), -1)[order]
        self.sizes = [np.asarray(sizes[i], dtype=np.int64) for i in order]
        for cid, s in zip(self.ids, self.sizes):
            if s.size == 0 or np.any(s < 1):
                raise ValueError(f"customer {cid} needs at least one non-empty basket")
        self.position = {cid: i for i, cid in enumerate(self.ids)}

    def __len__(self):
        return len(self.ids)

    @classmethod
    def build(cls, histories, model, lookup):
        ids, vectors, sizes = [], [], []
        for h in histories:
            ids.append(h.customer_id)
            vectors.append(model.encode_history(h, lookup).hidden)
            sizes.append([len(b) for b in h.baskets if len(b)])
        return cls(ids, np.array(vectors), sizes)


def k_nearest_customers(h, index, k):
    """``k`` ids by ascending L2 distance, ties by ascending id; k beyond the index size ranks all."""
    if len(index) == 0:
        raise ValueError("customer index is empty")
    if k < 1:
        raise ValueError("k must be >= 1")
    diff = index.vectors - np.asarray(h, dtype=np.float64)
    dist = np.sqrt(np.einsum("nd,nd->n", diff, diff))
    # rows are id-sorted, so a stable sort breaks ties by id
    order = np.argsort(dist, kind="stable")[:k]
    return [index.ids[i] for i in order]


def sample_basket_size(neighbor_ids, index, rng, cap=50):
    pool = np.concatenate([index.sizes[index.position[c]] for c in neighbor_ids])
    return int(min(pool[rng.integers(len(pool))], cap))


def generate_basket(h, week, n, gan, catalog, scaler, horizon, rng, customer_id=""):
    """``n`` generated vectors under (h, week), each mapped to its nearest catalog product."""
    if n < 1:
        raise ValueError("basket size must be >= 1")
    cond = np.tile(make_condition(h, week, horizon), (n, 1))
    vectors = scaler.inverse(gan.generate(gan.sample_noise(n, rng), cond))
    idx = nearest_indices(vectors, catalog)
    return Basket(customer_id, int(week), [catalog.ids[i] for i in idx])


@dataclass
class GeneratedSequence:
    customer_id: str
    baskets: list = field(default_factory=list)

    def as_history(self):
        return CustomerHistory(self.customer_id, list(self.baskets))


@dataclass
class Models:
    customer_model: object
    gan: object
    scaler: object
    lookup: object
    horizon: int


def customer_rng(seed, customer_id):
    return np.random.default_rng([int(seed), zlib.crc32(str(customer_id).encode())])


def generate_sequence(history, cfg, models, index, catalog):
    rng = customer_rng(cfg.seed, history.customer_id)
    cid = history.customer_id
    trace = []
    try:
        state = models.customer_model.encode_history(history, models.lookup)
        for offset in range(1, cfg.weeks + 1):
            week = history.last_week + offset
            neighbors = k_nearest_customers(state.hidden, index, cfg.k)
            n = sample_basket_size(neighbors, index, rng, cfg.max_basket_size)
            trace.append({"week": week, "neighbors": neighbors, "size": n})
            basket = generate_basket(state.hidden, week, n, models.gan, catalog, models.scaler,
                                     models.horizon, rng, cid)
            trace[-1]["products"] = list(basket.products)
            state = models.customer_model.update_state(state, basket, models.lookup)
            trace[-1]["state_norm"] = float(np.linalg.norm(state.hidden))
    except Exception as exc:
        raise GenerationError(f"generation failed for {cid} after {len(trace)} step(s): {exc}",
                              cid, trace) from exc
    return GeneratedSequence(cid, [Basket(cid, t["week"], t["products"]) for t in trace])


def generate_all(histories, cfg, models, index, catalog):
    cfg.validate(len(index))
    return [generate_sequence(h, cfg, models, index, catalog) for h in histories]
