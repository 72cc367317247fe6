"""Pipeline stages over a working directory.

Layout::

    data/      catalog.csv, transactions.csv, manifest.json
    models/    product_vectors.csv, word_vectors.csv, customer_lstm.csv,
               gan.csv, gan_metrics.csv
    output/    generated.csv
    report/    evaluation bundle
    provenance/<stage>.toml
"""
import json
import logging
import os
import time
from dataclasses import dataclass

import numpy as np

from .autodiff import load_checkpoint, save_checkpoint
from .customers import CustomerModel, ProductLookup, evaluate_heads, train_multitask
from .dataio.config import stream_rng
from .dataio.schema import (atomic_open, load_transactions, read_catalog, read_generated,
                            read_vectors, write_generated, write_vectors)
from .dataio.synth import generate_synthetic_world, write_world
from .gan import ConditionalWGAN, VectorScaler, make_condition, train_gan
from .products import ProductDocument, ProductVectors, preprocess, train_skipgram
from .seqgen import CustomerIndex, Models, generate_all

log = logging.getLogger(__name__)

STAGES = ("synth-data", "embed-products", "train-lstm", "train-gan", "generate", "evaluate")


class MissingInputError(FileNotFoundError):
    pass


@dataclass
class Paths:
    workdir: str

    def _join(self, *parts):
        return os.path.join(self.workdir, *parts)

    @property
    def catalog(self):
        return self._join("data", "catalog.csv")

    @property
    def transactions(self):
        return self._join("data", "transactions.csv")

    @property
    def manifest(self):
        return self._join("data", "manifest.json")

    @property
    def product_vectors(self):
        return self._join("models", "product_vectors.csv")

    @property
    def word_vectors(self):
        return self._join("models", "word_vectors.csv")

    @property
    def lstm(self):
        return self._join("models", "customer_lstm.csv")

    @property
    def gan(self):
        return self._join("models", "gan.csv")

    @property
    def gan_metrics(self):
        return self._join("models", "gan_metrics.csv")

    @property
    def generated(self):
        return self._join("output", "generated.csv")

    @property
    def report(self):
        return self._join("report")

    def provenance(self, stage):
        return self._join("provenance", f"{stage}.toml")


def require(*paths):
    for p in paths:
        if not os.path.exists(p):
            raise MissingInputError(f"missing input {p}; run the earlier pipeline stage first")


def _provenance(cfg, paths, stage):
    cfg.dump(paths.provenance(stage))


def run_synth(cfg, paths):
    world = generate_synthetic_world(cfg.world_config())
    write_world(world, os.path.dirname(paths.catalog))
    _provenance(cfg, paths, "synth-data")
    return world


def load_data(paths):
    require(paths.transactions, paths.catalog)
    return load_transactions(paths.transactions, paths.catalog)


def product_documents(catalog):
    return [ProductDocument(r.product_id, tuple(preprocess(r.name, r.description)))
            for r in catalog]


def run_embed(cfg, paths):
    require(paths.catalog)
    catalog = read_catalog(paths.catalog)
    docs = product_documents(catalog)
    e = cfg.embed
    table = train_skipgram(docs, window=e.window, dim=e.dim, negatives=e.negatives,
                           epochs=e.epochs, rng=stream_rng(cfg.seed, "corpus"), lr=e.lr,
                           min_lr=e.min_lr, min_count=e.min_count)
    vectors = ProductVectors.from_documents(docs, table)
    write_vectors(paths.product_vectors, vectors.ids, vectors.matrix)
    write_vectors(paths.word_vectors, table.vocab.tokens, table.w_in, id_column="token")
    _provenance(cfg, paths, "embed-products")
    return vectors, table


def load_vectors(paths):
    require(paths.product_vectors)
    return ProductVectors(*read_vectors(paths.product_vectors))


def run_lstm(cfg, paths):
    histories, catalog = load_data(paths)
    vectors = load_vectors(paths)
    lookup = ProductLookup.from_catalog(vectors, catalog)
    rng = stream_rng(cfg.seed, "lstm")
    model = CustomerModel(vectors.dim, cfg.lstm.hidden_dim, len(lookup.category_names), rng)
    train_log = train_multitask(model, histories, lookup, epochs=cfg.lstm.epochs, rng=rng,
                                lr=cfg.lstm.lr, clip_norm=cfg.lstm.clip_norm,
                                shuffle_within_basket=cfg.lstm.shuffle_within_basket)
    meta = {**model.meta(), "categories": lookup.category_names,
            "task_counts": train_log.task_counts, "heads": evaluate_heads(model, histories, lookup)}
    save_checkpoint(paths.lstm, model.state_dict(), meta)
    _provenance(cfg, paths, "train-lstm")
    return model, train_log


def load_lstm(paths):
    require(paths.lstm)
    arrays, meta = load_checkpoint(paths.lstm)
    return CustomerModel.from_checkpoint(arrays, meta)


def horizon_of(histories):
    return max(b.week for h in histories for b in h.baskets) + 1


def gan_training_pairs(histories, model, lookup, scaler, horizon):
    """One (scaled product vector, condition) row per purchased product.

    The condition of a week-w product is the customer state before week w
    (zeros for the first basket) with the one-hot week.
    """
    xs, conds = [], []
    for h in histories:
        states = model.week_states(h, lookup)
        for j, basket in enumerate(h.baskets):
            if not basket.products:
                continue
            cond = make_condition(states[j], basket.week, horizon)
            xs.append(lookup.matrix(basket.products))
            conds.append(np.tile(cond, (len(basket.products), 1)))
    return scaler.transform(np.vstack(xs)), np.vstack(conds)


def run_gan(cfg, paths):
    histories, catalog = load_data(paths)
    vectors = load_vectors(paths)
    model = load_lstm(paths)
    lookup = ProductLookup.from_catalog(vectors, catalog)
    horizon = horizon_of(histories)
    scaler = VectorScaler.fit(vectors.matrix)
    data, conds = gan_training_pairs(histories, model, lookup, scaler, horizon)
    rng = stream_rng(cfg.seed, "gan")
    gan = ConditionalWGAN(data.shape[1], conds.shape[1], cfg.gan, rng)
    started = time.time()
    train_log = train_gan(gan, data, conds, rng=rng, metrics_path=paths.gan_metrics)
    log.info("gan: %d critic steps in %.1fs", train_log.critic_steps, time.time() - started)
    arrays = {**gan.state_dict(), "scaler.low": scaler.low, "scaler.high": scaler.high}
    save_checkpoint(paths.gan, arrays, {**gan.meta(), "horizon": horizon,
                                        "scaler_bound": scaler.bound, "pairs": len(data)})
    _provenance(cfg, paths, "train-gan")
    return gan, scaler, train_log


def load_gan(paths):
    require(paths.gan)
    arrays, meta = load_checkpoint(paths.gan)
    gan = ConditionalWGAN.from_checkpoint(arrays, meta)
    scaler = VectorScaler(arrays["scaler.low"], arrays["scaler.high"], meta["scaler_bound"])
    return gan, scaler, meta["horizon"]


def load_models(paths):
    histories, catalog = load_data(paths)
    vectors = load_vectors(paths)
    model = load_lstm(paths)
    gan, scaler, horizon = load_gan(paths)
    lookup = ProductLookup.from_catalog(vectors, catalog)
    return histories, catalog, vectors, Models(model, gan, scaler, lookup, horizon)


def run_generate(cfg, paths, customers=None):
    """Generate ``generation.weeks`` baskets for every customer (or the listed ids)."""
    histories, catalog, vectors, models = load_models(paths)
    index = CustomerIndex.build(histories, models.customer_model, models.lookup)
    selected = histories
    if customers is not None:
        wanted = set(customers)
        unknown = wanted - {h.customer_id for h in histories}
        if unknown:
            raise ValueError(f"unknown customer id(s): {', '.join(sorted(unknown)[:5])}")
        selected = [h for h in histories if h.customer_id in wanted]
    sequences = generate_all(selected, cfg.generation_config(), models, index, vectors)
    generated = [s.as_history() for s in sequences]
    write_generated(paths.generated, selected, generated)
    _provenance(cfg, paths, "generate")
    return selected, generated


def run_evaluate(cfg, paths):
    from .evaluation.report import write_report

    require(paths.generated, paths.catalog, paths.product_vectors)
    catalog = read_catalog(paths.catalog)
    real, gen = read_generated(paths.generated, catalog)
    vectors = load_vectors(paths)
    summary = write_report(paths.report, real, gen, catalog, vectors, cfg.eval,
                           stream_rng(cfg.seed, "eval"))
    _provenance(cfg, paths, "evaluate")
    return summary


def run_all(cfg, paths):
    timings = {}
    for stage, fn in (("synth-data", run_synth), ("embed-products", run_embed),
                      ("train-lstm", run_lstm), ("train-gan", run_gan),
                      ("generate", run_generate), ("evaluate", run_evaluate)):
        started = time.time()
        result = fn(cfg, paths)
        timings[stage] = time.time() - started
        log.info("%s done in %.1fs", stage, timings[stage])
    with atomic_open(os.path.join(paths.workdir, "timings.json")) as fh:
        json.dump(timings, fh, indent=1)
    return result

