"""Central finite differences, used as the oracle for analytic gradients."""
import numpy as np

from .tensor import backward


def numeric_grad(fn, array, eps=1e-4):
    """d fn() / d array by central differences, perturbing ``array`` in place."""
    grad = np.zeros_like(array)
    it = np.nditer(array, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        old = array[idx]
        array[idx] = old + eps
        up = fn()
        array[idx] = old - eps
        down = fn()
        array[idx] = old
        grad[idx] = (up - down) / (2 * eps)
    return grad


def relative_error(analytic, numeric, floor=1e-6):
    """Largest elementwise relative error; differences below ``floor`` count as 0."""
    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    diff = np.abs(analytic - numeric)
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-300)
    err = np.where(diff <= floor, 0.0, diff / scale)
    return float(err.max()) if err.size else 0.0


def check_gradients(build, params, eps=1e-4, floor=1e-6):
    """Compare backprop with finite differences for every array in ``params``.

    ``build`` returns a fresh scalar Tensor from the current parameter values.
    Returns the worst relative error over all parameters.
    """
    for p in params:
        p.zero_grad()
    backward(build())
    worst = 0.0
    for p in params:
        analytic = p.grad.copy()
        numeric = numeric_grad(lambda: build().item(), p.data, eps)
        worst = max(worst, relative_error(analytic, numeric, floor))
    return worst
