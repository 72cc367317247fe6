"""Synthetic retail world with planted personas and week-to-week category chains.

Each customer belongs to a persona. Every week the customer sits in a latent
"focus" category that follows the persona's Markov chain; each product in
the basket comes from the focus category with probability ``focus`` and
from the persona's preference weights otherwise. Product text is drawn from
per-category word pools so a skip-gram model has structure to find.
"""
import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .schema import Basket, CatalogRecord, CustomerHistory, atomic_open, write_catalog, write_transactions

CATEGORY_NAMES = [
    "hair care", "skin care", "oral care", "fragrance", "vitamins", "baby care",
    "cosmetics", "shaving", "first aid", "snacks", "beverages", "household",
]
_SYLLABLES = ["ka", "lo", "mi", "ne", "ru", "sa", "ti", "vo", "ze", "bri", "dal", "fen",
              "gor", "hal", "jun", "kel", "lim", "mor", "nid", "pax", "qui", "ros",
              "sul", "tev", "ulm", "vex", "wyn", "yar", "zol", "ber"]
_FILLERS = ["for", "with", "the", "and", "new", "pack", "size"]


@dataclass
class SyntheticWorldConfig:
    customers: int = 1000
    products: int = 50
    categories: int = 8
    personas: int = 3
    weeks: int = 5
    subcategories_per_category: int = 2
    brands: int = 12
    focus: float = 0.8
    support_size: int = 3
    successor_prob: float = 0.6
    background: float = 0.05
    basket_size_means: list = field(default_factory=lambda: [3.0, 4.0, 5.0])
    max_basket_size: int = 30
    price_sigma: float = 0.35
    category_words: int = 10
    subcategory_words: int = 3
    preference_weights: list = None
    transitions: list = None
    seed: int = 0

    def validate(self):
        for name in ("customers", "products", "categories", "personas", "weeks",
                     "subcategories_per_category", "brands", "category_words", "max_basket_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"world.{name} must be positive")
        if self.products < self.categories:
            raise ValueError("world.products must be >= world.categories")
        if not 0.0 <= self.focus <= 1.0:
            raise ValueError("world.focus must lie in [0, 1]")
        if len(self.basket_size_means) not in (1, self.personas):
            raise ValueError("world.basket_size_means needs one entry or one per persona")
        if any(m < 1 for m in self.basket_size_means):
            raise ValueError("world.basket_size_means entries must be >= 1")
        k = self.categories
        if self.preference_weights is not None:
            prefs = np.asarray(self.preference_weights, dtype=float)
            if prefs.shape != (self.personas, k):
                raise ValueError(f"world.preference_weights must be {self.personas}x{k}")
            _check_stochastic(prefs, "world.preference_weights")
        if self.transitions is not None:
            trans = np.asarray(self.transitions, dtype=float)
            if trans.shape != (self.personas, k, k):
                raise ValueError(f"world.transitions must be {self.personas}x{k}x{k}")
            for p in range(self.personas):
                _check_stochastic(trans[p], f"world.transitions[{p}]")
        return self


def _check_stochastic(rows, label):
    if np.any(rows < 0):
        raise ValueError(f"{label} has negative entries")
    sums = rows.sum(axis=-1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > 1e-9)
    if bad.size:
        raise ValueError(f"{label} row {int(bad[0])} sums to {sums[bad[0]]:.6f}, not 1")


@dataclass
class SyntheticWorld:
    catalog: list
    histories: list
    manifest: dict


def _pseudo_words(rng, count, taken):
    words = []
    while len(words) < count:
        n = rng.integers(2, 4)
        w = "".join(rng.choice(_SYLLABLES, size=n))
        if w not in taken:
            taken.add(w)
            words.append(w)
    return words


def _category_names(k):
    return [CATEGORY_NAMES[i] if i < len(CATEGORY_NAMES) else f"category {i + 1}" for i in range(k)]


def default_persona_structure(cfg, rng):
    """Preference weights and transition matrices used when the config leaves them out."""
    k, n_p = cfg.categories, cfg.personas
    order = rng.permutation(k)
    size = min(cfg.support_size, k)
    prefs = np.zeros((n_p, k))
    trans = np.zeros((n_p, k, k))
    for p in range(n_p):
        support = [int(order[(p * size + j) % k]) for j in range(size)]
        w = np.full(k, cfg.background / k)
        w[support] += (1.0 - cfg.background) * rng.dirichlet(np.full(size, 4.0))
        prefs[p] = w / w.sum()
        for a in range(k):
            trans[p, a] = prefs[p]
            if a in support:
                succ = support[(support.index(a) + 1) % size]
                trans[p, a] = (1.0 - cfg.successor_prob) * prefs[p]
                trans[p, a, succ] += cfg.successor_prob
    return prefs, trans


def planted_bigrams(prefs, trans, shares, weeks, top=10):
    """Expected share of consecutive-week focus pairs (a, b), highest first."""
    k = prefs.shape[1]
    score = np.zeros((k, k))
    for p in range(len(prefs)):
        dist = prefs[p].copy()
        for _ in range(weeks - 1):
            score += shares[p] * dist[:, None] * trans[p]
            dist = dist @ trans[p]
    score /= max(weeks - 1, 1)
    pairs = [(float(score[a, b]), a, b) for a in range(k) for b in range(k)]
    pairs.sort(key=lambda t: (-t[0], t[1], t[2]))
    return [(a, b, s) for s, a, b in pairs[:top]]


def generate_synthetic_world(cfg):
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    k = cfg.categories
    names = _category_names(k)
    taken = set(_FILLERS)
    cat_words = [_pseudo_words(rng, cfg.category_words, taken) for _ in range(k)]
    sub_words = [[_pseudo_words(rng, cfg.subcategory_words, taken)
                  for _ in range(cfg.subcategories_per_category)] for _ in range(k)]
    generic = _pseudo_words(rng, 6, taken)
    brand_names = [w.capitalize() for w in _pseudo_words(rng, cfg.brands, taken)]
    price_mu = rng.uniform(np.log(2.0), np.log(15.0), size=k)

    catalog = []
    products_by_cat = [[] for _ in range(k)]
    width = len(str(cfg.products))
    for i in range(cfg.products):
        c = i % k
        s = (i // k) % cfg.subcategories_per_category
        pid = f"P{i + 1:0{width}d}"
        brand = brand_names[rng.integers(cfg.brands)]
        sw = rng.choice(sub_words[c][s], size=2, replace=cfg.subcategory_words < 2)
        cw = rng.choice(cat_words[c], size=5, replace=False if cfg.category_words >= 5 else True)
        name = f"{brand} {sw[0]} {cw[0]}"
        volume = int(rng.integers(1, 20)) * 25
        desc = (f"{cw[1]} {rng.choice(_FILLERS)} {cw[2]} {sw[1]} {cw[3]} "
                f"{rng.choice(generic)} {volume}ml {cw[4]}")
        price = round(float(np.exp(rng.normal(price_mu[c], cfg.price_sigma))), 2)
        catalog.append(CatalogRecord(pid, name, desc, names[c], f"{names[c]} / {s + 1}",
                                     brand, price))
        products_by_cat[c].append(pid)

    if cfg.preference_weights is None or cfg.transitions is None:
        d_prefs, d_trans = default_persona_structure(cfg, rng)
    prefs = (np.asarray(cfg.preference_weights, dtype=float) if cfg.preference_weights is not None
             else d_prefs)
    trans = (np.asarray(cfg.transitions, dtype=float) if cfg.transitions is not None
             else d_trans)
    means = list(cfg.basket_size_means) * (cfg.personas if len(cfg.basket_size_means) == 1 else 1)

    histories = []
    personas = {}
    focus_trace = {}
    cwidth = len(str(cfg.customers))
    for n in range(cfg.customers):
        cid = f"C{n + 1:0{cwidth}d}"
        p = int(rng.integers(cfg.personas))
        personas[cid] = p
        state = int(rng.choice(k, p=prefs[p]))
        baskets = []
        states = []
        for w in range(cfg.weeks):
            if w > 0:
                state = int(rng.choice(k, p=trans[p, state]))
            states.append(state)
            size = min(1 + int(rng.poisson(means[p] - 1.0)), cfg.max_basket_size)
            from_focus = rng.random(size) < cfg.focus
            cats = np.where(from_focus, state, rng.choice(k, size=size, p=prefs[p]))
            items = []
            for c in cats:
                pool = products_by_cat[int(c)]
                items.append(pool[int(rng.integers(len(pool)))])
            baskets.append(Basket(cid, w, items))
        histories.append(CustomerHistory(cid, baskets))
        focus_trace[cid] = states

    shares = np.bincount(list(personas.values()), minlength=cfg.personas) / cfg.customers
    bigrams = planted_bigrams(prefs, trans, shares, cfg.weeks)
    manifest = {
        "config": asdict(cfg),
        "categories": names,
        "category_words": {names[c]: cat_words[c] + [w for ws in sub_words[c] for w in ws]
                           for c in range(k)},
        "preference_weights": prefs.tolist(),
        "transitions": trans.tolist(),
        "persona_shares": shares.tolist(),
        "personas": personas,
        "focus_categories": {cid: [names[s] for s in st] for cid, st in focus_trace.items()},
        "top_planted_bigrams": [{"pattern": [names[a], names[b]], "score": s}
                                for a, b, s in bigrams],
    }
    return SyntheticWorld(catalog, histories, manifest)


def write_world(world, directory):
    """Write catalog.csv, transactions.csv and manifest.json into ``directory``."""
    os.makedirs(directory, exist_ok=True)
    write_catalog(os.path.join(directory, "catalog.csv"), world.catalog)
    write_transactions(os.path.join(directory, "transactions.csv"), world.histories)
    with atomic_open(os.path.join(directory, "manifest.json")) as fh:
        json.dump(world.manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
