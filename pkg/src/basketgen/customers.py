"""LSTM customer states trained on three alternating prediction heads.

The LSTM reads a customer's products one at a time (baskets in week order).
Its hidden vector is the customer representation. Training samples one of
three tasks per step: end-of-basket (binary), next product category
(softmax) and next product price (squared error on standardised
``log1p(price)``).
"""
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import kernels
from .autodiff import Adam, Linear, Parameter, glorot_uniform

log = logging.getLogger(__name__)

TASKS = ("end_of_basket", "next_category", "next_price")


class EmptyHistoryError(ValueError):
    pass


class NoValidTargetsError(ValueError):
    pass


class EmptyBasketWarning(UserWarning):
    pass


@dataclass(frozen=True)
class CustomerState:
    hidden: np.ndarray
    cell: np.ndarray


class ProductLookup:
    """Maps product ids to their embedding, category id and price."""

    def __init__(self, vectors, categories, prices):
        self.vectors = vectors
        self.category_names = sorted(set(categories.values()))
        cat_ids = {c: i for i, c in enumerate(self.category_names)}
        self.category = {pid: cat_ids[c] for pid, c in categories.items()}
        self.price = dict(prices)

    @classmethod
    def from_catalog(cls, vectors, catalog):
        return cls(vectors, {r.product_id: r.category for r in catalog},
                   {r.product_id: r.price for r in catalog})

    def order_key(self, pid):
        return self.vectors.index[pid]

    def matrix(self, pids):
        return self.vectors.matrix[[self.vectors.index[p] for p in pids]]


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


class CustomerModel:
    def __init__(self, input_dim, hidden_dim, n_categories, rng=None):
        rng = np.random.default_rng(rng)
        h = hidden_dim
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.n_categories = n_categories
        self.wx = Parameter(glorot_uniform(input_dim, 4 * h, rng), name="lstm.wx")
        self.wh = Parameter(glorot_uniform(h, 4 * h, rng), name="lstm.wh")
        self.b = Parameter(np.zeros(4 * h), name="lstm.b")
        self.end_head = Linear(h, 1, rng, name="head.end")
        self.category_head = Linear(h, n_categories, rng, name="head.category")
        self.price_head = Linear(h, 1, rng, name="head.price")
        self.price_mean = 0.0
        self.price_std = 1.0

    def parameters(self):
        return [self.wx, self.wh, self.b, *self.end_head.parameters(),
                *self.category_head.parameters(), *self.price_head.parameters()]

    def state_dict(self):
        out = {p.name: p.data.copy() for p in self.parameters()}
        out["price.mean"] = np.array(self.price_mean)
        out["price.std"] = np.array(self.price_std)
        return out

    def load_state_dict(self, state):
        for p in self.parameters():
            p.data[...] = state[p.name]
        self.price_mean = float(state["price.mean"])
        self.price_std = float(state["price.std"])

    def meta(self):
        return {"kind": "customer-lstm", "input_dim": self.input_dim,
                "hidden_dim": self.hidden_dim, "n_categories": self.n_categories}

    @classmethod
    def from_checkpoint(cls, arrays, meta):
        model = cls(meta["input_dim"], meta["hidden_dim"], meta["n_categories"], rng=0)
        model.load_state_dict(arrays)
        return model

    # --- inference --------------------------------------------------------

    def initial_state(self):
        return CustomerState(np.zeros(self.hidden_dim), np.zeros(self.hidden_dim))

    def lstm_step(self, state, x):
        """One cell update; gate blocks are (input, forget, candidate, output)."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.input_dim,) or state.hidden.shape != (self.hidden_dim,):
            raise ValueError(f"lstm_step: input {x.shape} / state {state.hidden.shape} do not "
                             f"match ({self.input_dim},) / ({self.hidden_dim},)")
        h = self.hidden_dim
        z = x @ self.wx.data + state.hidden @ self.wh.data + self.b.data
        i = _sigmoid(z[:h])
        f = _sigmoid(z[h:2 * h])
        g = np.tanh(z[2 * h:3 * h])
        o = _sigmoid(z[3 * h:])
        c = f * state.cell + i * g
        return CustomerState(o * np.tanh(c), c)

    def run(self, xs, state=None):
        """Fold the LSTM over the rows of ``xs``; returns (hidden per step, final state)."""
        state = state or self.initial_state()
        xs = np.asarray(xs, dtype=np.float64).reshape(-1, self.input_dim)
        if len(xs) == 0:
            return np.zeros((0, self.hidden_dim)), state
        xz = np.ascontiguousarray(xs @ self.wx.data + self.b.data)
        hs, cs, _ = kernels.lstm_forward(xz, np.ascontiguousarray(self.wh.data),
                                         np.ascontiguousarray(state.hidden),
                                         np.ascontiguousarray(state.cell))
        return hs, CustomerState(hs[-1].copy(), cs[-1].copy())

    def ordered_products(self, history, lookup, shuffle=False, rng=None):
        seq = []
        for basket in history.baskets:
            items = sorted(basket.products, key=lookup.order_key)
            if shuffle:
                items = [items[i] for i in rng.permutation(len(items))]
            seq.append(items)
        return seq

    def encode_history(self, history, lookup, shuffle=False, rng=None):
        if not history.baskets or not any(b.products for b in history.baskets):
            raise EmptyHistoryError(f"customer {history.customer_id} has no purchases")
        seq = [p for items in self.ordered_products(history, lookup, shuffle, rng) for p in items]
        return self.run(lookup.matrix(seq))[1]

    def update_state(self, state, basket, lookup):
        if not basket.products:
            warnings.warn(f"empty basket for {basket.customer_id} week {basket.week}; "
                          "state unchanged", EmptyBasketWarning, stacklevel=2)
            return state
        items = sorted(basket.products, key=lookup.order_key)
        return self.run(lookup.matrix(items), state)[1]

    def week_states(self, history, lookup):
        """Hidden state before each basket (zeros before the first) and after the last."""
        seq = self.ordered_products(history, lookup)
        flat = [p for items in seq for p in items]
        hs, _ = self.run(lookup.matrix(flat))
        states = [np.zeros(self.hidden_dim)]
        pos = 0
        for items in seq:
            pos += len(items)
            states.append(hs[pos - 1].copy() if pos else np.zeros(self.hidden_dim))
        return states

    def predict_heads(self, hs):
        return {
            "end_of_basket": _sigmoid(hs @ self.end_head.weight.data + self.end_head.bias.data)[:, 0],
            "next_category": hs @ self.category_head.weight.data + self.category_head.bias.data,
            "next_price": (hs @ self.price_head.weight.data + self.price_head.bias.data)[:, 0],
        }

    # --- training graph ---------------------------------------------------

    def head_loss(self, task, xs, targets):
        """Graph of the chosen head's mean loss over its valid positions."""
        h0 = ad.Tensor(np.zeros(self.hidden_dim))
        hs = ad.lstm_sequence(ad.Tensor(xs), self.wx, self.wh, self.b, h0, h0)
        if task == "end_of_basket":
            return ad.bce_with_logits(self.end_head(hs), targets.reshape(-1, 1))
        valid = hs[:-1]
        if task == "next_category":
            return ad.cross_entropy(self.category_head(valid), targets)
        if task == "next_price":
            return ad.mse(self.price_head(valid), ad.Tensor(targets.reshape(-1, 1)))
        raise ValueError(f"unknown task {task!r}")


@dataclass
class SequenceTargets:
    xs: np.ndarray
    end_of_basket: np.ndarray
    next_category: np.ndarray
    next_price: np.ndarray

    def for_task(self, task):
        return getattr(self, task)

    def has_targets(self, task):
        return task == "end_of_basket" or len(self.xs) > 1


def build_targets(basket_items, lookup, price_mean, price_std):
    flat = [p for items in basket_items for p in items]
    ends = np.zeros(len(flat))
    pos = 0
    for items in basket_items:
        pos += len(items)
        if items:
            ends[pos - 1] = 1.0
    cats = np.array([lookup.category[p] for p in flat[1:]], dtype=np.int64)
    prices = (np.log1p([lookup.price[p] for p in flat[1:]]) - price_mean) / price_std
    return SequenceTargets(lookup.matrix(flat), ends, cats, np.asarray(prices, dtype=np.float64))


@dataclass
class TrainingLog:
    task_counts: dict = field(default_factory=lambda: {t: 0 for t in TASKS})
    skipped: int = 0
    epoch_losses: list = field(default_factory=list)


def train_multitask(model, histories, lookup, epochs=25, rng=None, task_rng=None, lr=1e-3,
                    clip_norm=5.0, shuffle_within_basket=True):
    """Sequence-level SGD (batch size 1) with one uniformly sampled task per step."""
    histories = [h for h in histories if h.baskets and h.products()]
    if not histories:
        raise EmptyHistoryError("no customer history to train on")
    if all(len(h.products()) < 2 for h in histories):
        raise NoValidTargetsError("every history has a single product; "
                                  "next-category and next-price have no targets")
    rng = np.random.default_rng(rng)
    task_rng = np.random.default_rng(task_rng if task_rng is not None else rng.integers(2**63))

    prices = np.log1p([lookup.price[p] for h in histories for p in h.products()[1:]])
    model.price_mean = float(prices.mean())
    model.price_std = float(prices.std()) or 1.0

    opt = Adam(model.parameters(), lr=lr, betas=(0.9, 0.999))
    result = TrainingLog()
    for epoch in range(epochs):
        totals = {t: [] for t in TASKS}
        for idx in rng.permutation(len(histories)):
            items = model.ordered_products(histories[idx], lookup, shuffle_within_basket, rng)
            targets = build_targets(items, lookup, model.price_mean, model.price_std)
            task = TASKS[int(task_rng.integers(len(TASKS)))]
            result.task_counts[task] += 1
            if not targets.has_targets(task):
                result.skipped += 1
                continue
            opt.zero_grad()
            loss = model.head_loss(task, targets.xs, targets.for_task(task))
            ad.backward(loss)
            if clip_norm:
                ad.clip_grad_norm(model.parameters(), clip_norm)
            opt.step()
            totals[task].append(loss.item())
        summary = {t: float(np.mean(v)) if v else float("nan") for t, v in totals.items()}
        result.epoch_losses.append(summary)
        log.info("lstm epoch %d: %s", epoch, summary)
    return result


def evaluate_heads(model, histories, lookup):
    """Accuracy of the binary and category heads and MSE of the price head."""
    end_hits = end_n = cat_hits = cat_n = 0
    sq = []
    for h in histories:
        items = model.ordered_products(h, lookup)
        t = build_targets(items, lookup, model.price_mean, model.price_std)
        hs, _ = model.run(t.xs)
        pred = model.predict_heads(hs)
        end_hits += int(((pred["end_of_basket"] >= 0.5) == (t.end_of_basket > 0.5)).sum())
        end_n += len(t.end_of_basket)
        if len(t.next_category):
            cat_hits += int((pred["next_category"][:-1].argmax(axis=1) == t.next_category).sum())
            cat_n += len(t.next_category)
            sq.extend((pred["next_price"][:-1] - t.next_price) ** 2)
    return {
        "end_of_basket_accuracy": end_hits / max(end_n, 1),
        "next_category_accuracy": cat_hits / max(cat_n, 1),
        "next_price_mse": float(np.mean(sq)) if sq else float("nan"),
    }
