"""Evaluation bundle: per-feature histograms, patterns, coverage, separability, projections."""
import os
import warnings

import numpy as np

from ..dataio.schema import atomic_open, write_rows
from .histograms import FEATURES, feature_histograms, mean_basket_price, mean_basket_size
from .patterns import format_pattern, mine_patterns, pattern_coverage, sequence_db
from .projection import project_2d
from .separability import basket_vectors, self_separability, separability

LEVELS = ("category", "subcategory")
REPRESENTATIONS = ("category", "subcategory", "sku")


def _baskets(histories):
    return [b for h in histories for b in h.baskets if b.products]


def evaluate(real, gen, catalog, vectors, cfg, rng):
    """Every metric of the bundle as plain Python data."""
    by_id = {r.product_id: r for r in catalog}
    real_b, gen_b = _baskets(real), _baskets(gen)
    out = {
        "baskets": {"real": len(real_b), "generated": len(gen_b)},
        "mean_basket_size": {"real": mean_basket_size(real_b), "generated": mean_basket_size(gen_b)},
        "mean_basket_price": {"real": mean_basket_price(real_b, by_id),
                              "generated": mean_basket_price(gen_b, by_id)},
        "histograms": {}, "deviation": {}, "patterns": {}, "coverage": {},
        "separability": {}, "self_separability": {}, "projection": {},
    }
    for feature in FEATURES:
        h_real, h_gen, dev = feature_histograms(real_b, gen_b, feature, by_id)
        out["histograms"][feature] = (h_real, h_gen)
        out["deviation"][feature] = dev
    for level in LEVELS:
        real_p = mine_patterns(sequence_db(real, by_id, level), cfg.min_support, cfg.max_length)
        gen_p = mine_patterns(sequence_db(gen, by_id, level), cfg.min_support, cfg.max_length)
        out["patterns"][level] = (real_p, gen_p)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            out["coverage"][level] = {k: pattern_coverage(real_p, gen_p, k) for k in cfg.top_k}
    seeds = [int(s) for s in rng.integers(2**31, size=cfg.separability_seeds)]
    for rep in REPRESENTATIONS:
        vr = basket_vectors(real_b, rep, by_id, vectors)
        vg = basket_vectors(gen_b, rep, by_id, vectors)
        out["separability"][rep] = separability(vr, vg, seed=seeds[0], representation=rep)
        out["self_separability"][rep] = [self_separability(vr, seed=s, representation=rep).accuracy
                                         for s in seeds]
        if rep == "sku":
            proj = project_2d(np.vstack([vr, vg]), rng=seeds[0])
            out["projection"][rep] = (proj, len(vr))
    return out


def write_report(directory, real, gen, catalog, vectors, cfg, rng):
    result = evaluate(real, gen, catalog, vectors, cfg, rng)
    os.makedirs(directory, exist_ok=True)
    path = lambda name: os.path.join(directory, name)  # noqa: E731
    for feature, (h_real, h_gen) in result["histograms"].items():
        write_rows(path(f"hist_{feature}.csv"), ["bin", "real", "generated"],
                   [[b, h_real.freqs[b], h_gen.freqs[b]] for b in h_real.bins])
    for level, (real_p, gen_p) in result["patterns"].items():
        gen_support = {p.itemsets: p.support for p in gen_p}
        write_rows(path(f"patterns_{level}.csv"),
                   ["pattern", "length", "real_support", "generated_support"],
                   [[format_pattern(p.itemsets), p.length, p.support,
                     gen_support.get(p.itemsets, 0)] for p in real_p])
        write_rows(path(f"coverage_{level}.csv"), ["k", "coverage"],
                   sorted(result["coverage"][level].items()))
    write_rows(path("separability.csv"),
               ["representation", "accuracy", "per_class", "n_train", "n_test"],
               [[r.representation, r.accuracy, r.per_class, r.n_train, r.n_test]
                for r in result["separability"].values()])
    write_rows(path("self_separability.csv"), ["representation", "run", "accuracy"],
               [[rep, i, acc] for rep, accs in result["self_separability"].items()
                for i, acc in enumerate(accs)])
    for rep, (proj, n_real) in result["projection"].items():
        labels = ["real"] * n_real + ["generated"] * (len(proj.coords) - n_real)
        write_rows(path(f"projection_{rep}.csv"), ["source", "x", "y"],
                   [[lab, float(x), float(y)] for lab, (x, y) in zip(labels, proj.coords)])
    with atomic_open(path("summary.txt")) as fh:
        fh.write(summary_text(result))
    return result


def summary_text(result):
    lines = ["basket statistics (real / generated)"]
    lines.append(f"  baskets            {result['baskets']['real']} / {result['baskets']['generated']}")
    for key in ("mean_basket_size", "mean_basket_price"):
        r, g = result[key]["real"], result[key]["generated"]
        lines.append(f"  {key:<18} {r:.3f} / {g:.3f}")
    lines.append("max absolute deviation (percentage points)")
    for feature, dev in result["deviation"].items():
        lines.append(f"  {feature:<18} {dev:.2f}")
    lines.append("top-k pattern coverage")
    for level, cov in result["coverage"].items():
        lines.append(f"  {level:<18} " + "  ".join(f"k={k}: {v:.3f}" for k, v in sorted(cov.items())))
    lines.append("real vs generated separability (held-out accuracy)")
    for rep, r in result["separability"].items():
        calib = result["self_separability"][rep]
        lines.append(f"  {rep:<18} {r.accuracy:.3f}   self-vs-self {min(calib):.3f}..{max(calib):.3f}")
    return "\n".join(lines) + "\n"
