"""Conditional WGAN-GP over product embeddings.

The generator maps noise plus a condition (customer state, one-hot week) to
a product vector in (-1, 1); the critic scores a product vector under the
same condition. Both condition by input concatenation.
"""
import logging
import math
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import MLP, Adam, NonFiniteError, Tensor
from .dataio.schema import write_rows
from .products import nearest_indices

log = logging.getLogger(__name__)

METRIC_COLUMNS = ["step", "critic_loss", "generator_loss", "penalty", "grad_norm"]


class DivergenceError(RuntimeError):
    pass


@dataclass
class GanConfig:
    noise_dim: int = 64
    hidden: tuple = (256, 256)
    batch_size: int = 64
    n_critic: int = 5
    lam: float = 10.0
    lr: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.9
    epochs: int = 100
    weight_clip: float = 0.0
    lr_decay: bool = False
    final_lr_ratio: float = 0.01
    divergence_bound: float = 1e6
    divergence_patience: int = 100

    def validate(self):
        if self.noise_dim < 1 or self.batch_size < 1 or self.n_critic < 1:
            raise ValueError("gan.noise_dim, gan.batch_size and gan.n_critic must be positive")
        if self.lam < 0:
            raise ValueError("gan.lam must be >= 0")
        if not 0.0 < self.final_lr_ratio <= 1.0:
            raise ValueError("gan.final_lr_ratio must lie in (0, 1]")
        if self.epochs < 0:
            raise ValueError("gan.epochs must be >= 0")
        if not self.hidden or any(h < 1 for h in self.hidden):
            raise ValueError("gan.hidden must list positive layer widths")
        return self


def week_one_hot(week, horizon):
    out = np.zeros(horizon)
    out[int(week) % horizon] = 1.0
    return out


def make_condition(hidden, week, horizon):
    return np.concatenate([np.asarray(hidden, dtype=np.float64), week_one_hot(week, horizon)])


class VectorScaler:
    """Per-dimension affine map of product vectors onto [-bound, bound]."""

    def __init__(self, low, high, bound=0.9):
        self.low = np.asarray(low, dtype=np.float64)
        self.high = np.asarray(high, dtype=np.float64)
        self.bound = bound
        span = self.high - self.low
        self.span = np.where(span > 0, span, 1.0)

    @classmethod
    def fit(cls, matrix, bound=0.9):
        matrix = np.asarray(matrix)
        return cls(matrix.min(axis=0), matrix.max(axis=0), bound)

    def transform(self, x):
        unit = (np.asarray(x) - self.low) / self.span
        return np.where(self.high > self.low, self.bound * (2.0 * unit - 1.0), 0.0)

    def inverse(self, y):
        unit = (np.asarray(y) / self.bound + 1.0) / 2.0
        return self.low + unit * np.where(self.high > self.low, self.span, 0.0)


@contextmanager
def frozen(params):
    saved = [p.requires_grad for p in params]
    for p in params:
        p.requires_grad = False
    try:
        yield
    finally:
        for p, flag in zip(params, saved):
            p.requires_grad = flag


@dataclass
class CriticLoss:
    total: Tensor
    wasserstein: float
    penalty: float
    grad_norm: float


class ConditionalWGAN:
    def __init__(self, data_dim, cond_dim, cfg=None, rng=None):
        self.cfg = (cfg or GanConfig()).validate()
        rng = np.random.default_rng(rng)
        self.data_dim = data_dim
        self.cond_dim = cond_dim
        hidden = list(self.cfg.hidden)
        acts = ["relu"] * len(hidden)
        self.generator = MLP([self.cfg.noise_dim + cond_dim, *hidden, data_dim], acts + ["tanh"],
                             rng, name="generator")
        self.critic = MLP([data_dim + cond_dim, *hidden, 1], acts + ["identity"], rng,
                          name="critic")

    @property
    def noise_dim(self):
        return self.cfg.noise_dim

    def _check(self, z, cond):
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        cond = np.atleast_2d(np.asarray(cond, dtype=np.float64))
        if z.shape[1] != self.noise_dim or cond.shape[1] != self.cond_dim or len(z) != len(cond):
            raise ValueError(f"generate: noise {z.shape} / condition {cond.shape} do not match "
                             f"noise_dim={self.noise_dim}, cond_dim={self.cond_dim}")
        return z, cond

    def generate(self, z, cond):
        """Deterministic generator output for noise rows ``z`` and condition rows ``cond``."""
        z, cond = self._check(z, cond)
        return self.generator.predict(np.hstack([z, cond]))

    def sample_noise(self, n, rng):
        return rng.standard_normal((n, self.noise_dim))

    def score(self, x, cond):
        return self.critic.predict(np.hstack([np.atleast_2d(x), np.atleast_2d(cond)]))[:, 0]

    def critic_loss(self, real, fake, cond, lam=None, eps=None, rng=None):
        """mean D(fake) - mean D(real) + lam * mean (||grad D(interp)|| - 1)^2.

        Only critic parameters receive gradients; ``fake`` is treated as data.
        """
        lam = self.cfg.lam if lam is None else lam
        real = np.atleast_2d(np.asarray(real, dtype=np.float64))
        fake = np.atleast_2d(np.asarray(fake, dtype=np.float64))
        cond = np.atleast_2d(np.asarray(cond, dtype=np.float64))
        n = len(real)
        if fake.shape != real.shape or len(cond) != n:
            raise ValueError("critic_loss: real, fake and cond batches must align")
        both = np.vstack([np.hstack([real, cond]), np.hstack([fake, cond])])
        scores = self.critic(Tensor(both))
        w_term = ad.mean(scores[n:]) - ad.mean(scores[:n])
        total = w_term
        penalty = grad_norm = 0.0
        if lam > 0:
            if eps is None:
                eps = rng.random((n, 1))
            eps = np.asarray(eps, dtype=np.float64).reshape(n, 1)
            interp = eps * real + (1.0 - eps) * fake
            pen, grad_norm = ad.gradient_penalty(self.critic, interp, cond)
            penalty = pen.item()
            total = w_term + lam * pen
        if not np.isfinite(total.item()):
            raise NonFiniteError(f"critic loss is {total.item()} (wasserstein term {w_term.item()})")
        return CriticLoss(total, -w_term.item(), penalty, grad_norm)

    def generator_loss(self, z, cond):
        """-mean D(G(z|cond)|cond) with the critic frozen."""
        z, cond = self._check(z, cond)
        c = Tensor(cond)
        fake = self.generator(ad.concat([Tensor(z), c], axis=1))
        with frozen(self.critic.parameters()):
            scores = self.critic(ad.concat([fake, c], axis=1))
            loss = -ad.mean(scores)
        return loss

    def generator_backward(self, loss):
        with frozen(self.critic.parameters()):
            ad.backward(loss)

    def state_dict(self):
        return {**self.generator.state_dict(), **self.critic.state_dict()}

    def load_state_dict(self, state):
        self.generator.load_state_dict(state)
        self.critic.load_state_dict(state)

    def meta(self):
        cfg = asdict(self.cfg)
        cfg["hidden"] = list(cfg["hidden"])
        return {"kind": "conditional-wgan", "data_dim": self.data_dim,
                "cond_dim": self.cond_dim, "config": cfg}

    @classmethod
    def from_checkpoint(cls, arrays, meta):
        cfg = dict(meta["config"])
        cfg["hidden"] = tuple(cfg["hidden"])
        gan = cls(meta["data_dim"], meta["cond_dim"], GanConfig(**cfg), rng=0)
        gan.load_state_dict(arrays)
        return gan


@dataclass
class GanTrainingLog:
    rows: list = field(default_factory=list)
    critic_steps: int = 0
    generator_steps: int = 0

    def write(self, path):
        write_rows(path, METRIC_COLUMNS, self.rows)


def train_gan(gan, data, conds, rng=None, epochs=None, metrics_path=None):
    """Alternate ``n_critic`` critic updates with one generator update.

    An epoch is one shuffled pass of critic batches over ``data``. Raises
    :class:`DivergenceError` when |critic loss| stays above the configured
    bound for ``divergence_patience`` consecutive critic steps.
    """
    cfg = gan.cfg
    epochs = cfg.epochs if epochs is None else epochs
    data = np.asarray(data, dtype=np.float64)
    conds = np.asarray(conds, dtype=np.float64)
    if len(data) == 0:
        raise ValueError("GAN training set is empty")
    if len(data) != len(conds):
        raise ValueError("data and conditions differ in length")
    rng = np.random.default_rng(rng)
    betas = (cfg.beta1, cfg.beta2)
    opt_d = Adam(gan.critic.parameters(), lr=cfg.lr, betas=betas)
    opt_g = Adam(gan.generator.parameters(), lr=cfg.lr, betas=betas)
    result = GanTrainingLog()
    total_steps = epochs * math.ceil(len(data) / cfg.batch_size)
    over_bound = 0
    last = None
    for epoch in range(epochs):
        order = rng.permutation(len(data))
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            if cfg.lr_decay:
                # slowing only the generator lets the critic keep tracking it,
                # which damps the rotation around the target late in training
                opt_g.lr = cfg.lr * cfg.final_lr_ratio ** (result.critic_steps / total_steps)
            real, cond = data[idx], conds[idx]
            fake = gan.generate(gan.sample_noise(len(idx), rng), cond)
            opt_d.zero_grad()
            last = gan.critic_loss(real, fake, cond, rng=rng)
            ad.backward(last.total)
            opt_d.step()
            if cfg.weight_clip > 0:
                ad.clip_weights(gan.critic.parameters(), cfg.weight_clip)
            result.critic_steps += 1
            over_bound = over_bound + 1 if abs(last.total.item()) > cfg.divergence_bound else 0
            if over_bound >= cfg.divergence_patience:
                raise DivergenceError(f"critic loss above {cfg.divergence_bound} for "
                                      f"{over_bound} consecutive steps (epoch {epoch})")
            if result.critic_steps % cfg.n_critic == 0:
                opt_g.zero_grad()
                g_loss = gan.generator_loss(gan.sample_noise(len(idx), rng), cond)
                gan.generator_backward(g_loss)
                opt_g.step()
                result.generator_steps += 1
                result.rows.append([result.generator_steps, last.total.item(), g_loss.item(),
                                    last.penalty, last.grad_norm])
        if last is not None:
            log.info("gan epoch %d: critic %.4f wasserstein %.4f penalty %.4f", epoch,
                     last.total.item(), last.wasserstein, last.penalty)
    if metrics_path is not None:
        result.write(metrics_path)
    return result


def generate_known_product(gan, cond, catalog, scaler, rng):
    """Sample one embedding under ``cond`` and return the nearest catalog product id."""
    y = gan.generate(gan.sample_noise(1, rng), np.atleast_2d(cond))
    return catalog.ids[int(nearest_indices(scaler.inverse(y), catalog)[0])]


def mean_critic_grad_norm(gan, real, fake, cond, rng):
    """Average ||d D / d x|| at random interpolates (Lipschitz diagnostic)."""
    eps = rng.random((len(real), 1))
    interp = eps * real + (1.0 - eps) * fake
    grad = ad.input_gradient(gan.critic, interp, cond)
    return float(np.linalg.norm(grad.data, axis=1).mean())
