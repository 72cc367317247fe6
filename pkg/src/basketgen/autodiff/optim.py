import numpy as np

from .tensor import NonFiniteError


class Adam:
    """Adam with bias correction. Gradients are left for the caller to zero."""

    def __init__(self, params, lr=1e-4, betas=(0.5, 0.9), eps=1e-8):
        if lr <= 0:
            raise ValueError("learning rate must be positive")
        if not (0 < betas[0] < 1 and 0 < betas[1] < 1):
            raise ValueError("betas must lie in (0, 1)")
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad[...] = 0.0

    def step(self):
        self.step_count += 1
        t = self.step_count
        c1 = 1.0 - self.beta1 ** t
        c2 = 1.0 - self.beta2 ** t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
            if not np.all(np.isfinite(p.data)):
                raise NonFiniteError(f"Adam produced non-finite values in {p.name}")


def clip_grad_norm(params, max_norm):
    total = float(np.sqrt(sum(float(np.square(p.grad).sum()) for p in params)))
    if total > max_norm:
        scale = max_norm / (total + 1e-12)
        for p in params:
            p.grad *= scale
    return total


def clip_weights(params, bound):
    for p in params:
        np.clip(p.data, -bound, bound, out=p.data)
