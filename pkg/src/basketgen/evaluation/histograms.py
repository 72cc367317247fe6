"""Feature histograms of real and generated baskets and their max deviation."""
from collections import Counter
from dataclasses import dataclass

import numpy as np

FEATURES = ("category", "subcategory", "brand", "price", "basket_size")
PRICE_BINS = 30
TOP_BRANDS = 30
MAX_SIZE_COMPARED = 20


@dataclass
class FeatureHistogram:
    feature: str
    bins: list
    freqs: dict

    def values(self):
        return np.array([self.freqs[b] for b in self.bins])


def price_bin(price):
    """$1-wide bins up to $30, one overflow bin above."""
    b = int(np.floor(price))
    return f"{b:02d}-{b + 1:02d}" if b < PRICE_BINS else f">={PRICE_BINS}"


def _raw_values(baskets, feature, catalog):
    if feature == "basket_size":
        return [len(b.products) for b in baskets]
    if feature == "price":
        return [price_bin(catalog[p].price) for b in baskets for p in b.products]
    return [getattr(catalog[p], feature) for b in baskets for p in b.products]


def _normalise(values, bins):
    counts = dict.fromkeys(bins, 0)
    for v in values:
        if v in counts:
            counts[v] += 1
    total = sum(counts.values())
    return {b: (counts[b] / total if total else 0.0) for b in bins}


def feature_histograms(real_baskets, gen_baskets, feature, catalog):
    """Histograms over the union of observed bins plus the max |difference| in points.

    ``catalog`` maps product id to its record. Brands are limited to the 30
    most frequent brands of the pooled data (renormalised); basket sizes are compared up to
    size 20 only.
    """
    if feature not in FEATURES:
        raise ValueError(f"unknown feature {feature!r}; expected one of {FEATURES}")
    real = _raw_values(real_baskets, feature, catalog)
    gen = _raw_values(gen_baskets, feature, catalog)
    if feature == "brand":
        # pooled counts keep the comparison symmetric in its two arguments
        counts = Counter(real) + Counter(gen)
        ranked = sorted(counts, key=lambda b: (-counts[b], b))[:TOP_BRANDS]
        bins = sorted(ranked)
    else:
        bins = sorted(set(real) | set(gen))
    h_real = FeatureHistogram(feature, bins, _normalise(real, bins))
    h_gen = FeatureHistogram(feature, bins, _normalise(gen, bins))
    compared = [b for b in bins if feature != "basket_size" or b <= MAX_SIZE_COMPARED]
    deviation = max((abs(h_real.freqs[b] - h_gen.freqs[b]) for b in compared), default=0.0)
    return h_real, h_gen, 100.0 * deviation


def mean_basket_size(baskets):
    return float(np.mean([len(b.products) for b in baskets])) if baskets else float("nan")


def mean_basket_price(baskets, catalog):
    if not baskets:
        return float("nan")
    return float(np.mean([sum(catalog[p].price for p in b.products) for b in baskets]))
