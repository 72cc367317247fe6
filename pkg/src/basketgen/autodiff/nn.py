"""Affine layers, feed-forward nets and the critic input-gradient graph."""
import math

import numpy as np

from . import tensor as T
from .tensor import Parameter, ShapeError


class UnsupportedLayerError(TypeError):
    pass


def glorot_uniform(fan_in, fan_out, rng):
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class Linear:
    def __init__(self, n_in, n_out, rng, name="linear"):
        self.weight = Parameter(glorot_uniform(n_in, n_out, rng), name=f"{name}.weight")
        self.bias = Parameter(np.zeros(n_out), name=f"{name}.bias")

    @property
    def n_in(self):
        return self.weight.shape[0]

    @property
    def n_out(self):
        return self.weight.shape[1]

    def __call__(self, x):
        return T.matmul(x, self.weight) + self.bias

    def parameters(self):
        return [self.weight, self.bias]


_GRAPH_ACTS = {"relu": T.relu, "tanh": T.tanh, "sigmoid": T.sigmoid, "identity": None}


def _np_act(kind, z):
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    if kind == "sigmoid":
        return 1.0 / (1.0 + np.exp(-z))
    if kind == "identity":
        return z
    return kind(T.Tensor(z)).data


class MLP:
    """Affine layers with a pointwise activation after each one.

    ``activations`` has one entry per layer: a name from
    ``relu/tanh/sigmoid/identity`` or any callable on tensors. Callables
    work in the forward pass but are rejected by :func:`input_gradient`.
    """

    def __init__(self, sizes, activations, rng, name="mlp"):
        if len(activations) != len(sizes) - 1:
            raise ValueError("need one activation per layer")
        for act in activations:
            if not callable(act) and act not in _GRAPH_ACTS:
                raise UnsupportedLayerError(f"unknown activation {act!r}")
        self.sizes = list(sizes)
        self.activations = list(activations)
        self.name = name
        self.layers = [Linear(sizes[i], sizes[i + 1], rng, name=f"{name}.{i}")
                       for i in range(len(sizes) - 1)]

    def _apply(self, act, z):
        if callable(act):
            return act(z)
        fn = _GRAPH_ACTS[act]
        return z if fn is None else fn(z)

    def __call__(self, x):
        h = x
        for layer, act in zip(self.layers, self.activations):
            h = self._apply(act, layer(h))
        return h

    def predict(self, x):
        """Graph-free forward pass on a numpy array."""
        h = np.asarray(x, dtype=np.float64)
        for layer, act in zip(self.layers, self.activations):
            h = _np_act(act, h @ layer.weight.data + layer.bias.data)
        return h

    def parameters(self):
        return [p for layer in self.layers for p in layer.parameters()]

    def state_dict(self):
        return {p.name: p.data.copy() for p in self.parameters()}

    def load_state_dict(self, state):
        for p in self.parameters():
            if p.name not in state:
                raise KeyError(f"missing parameter {p.name}")
            value = np.asarray(state[p.name], dtype=np.float64)
            if value.shape != p.shape:
                raise ShapeError(f"{p.name}: expected {p.shape}, got {value.shape}")
            p.data[...] = value


def _activation_derivative(act, pre, post):
    if act == "relu":
        return T.step(pre)
    if act == "tanh":
        return 1.0 - T.square(post)
    if act == "sigmoid":
        return post * (1.0 - post)
    if act == "identity":
        return None
    raise UnsupportedLayerError(f"input_gradient cannot differentiate activation {act!r}")


def input_gradient(net, x, cond=None):
    """Graph for d net(x | cond) / dx, one row per sample.

    The net must end in a single output unit. The result is an ordinary
    graph over the net's parameters (weight transposes times activation
    derivative diagonals), so backpropagating through a function of it gives
    the parameter gradients of e.g. a gradient penalty.
    """
    if net.sizes[-1] != 1:
        raise ShapeError("input_gradient needs a scalar-output network")
    for act in net.activations:
        if callable(act):
            raise UnsupportedLayerError(f"input_gradient cannot differentiate activation {act!r}")
    x = T.as_tensor(x)
    n_x = x.shape[1]
    h = x if cond is None else T.concat([x, T.as_tensor(cond)], axis=1)
    if h.shape[1] != net.sizes[0]:
        raise ShapeError(f"input width {h.shape[1]} does not match network input {net.sizes[0]}")

    derivs = []
    for layer, act in zip(net.layers, net.activations):
        pre = layer(h)
        h = net._apply(act, pre)
        derivs.append(_activation_derivative(act, pre, h))

    g = None
    for idx in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[idx]
        d = derivs[idx]
        if g is None:
            # seed: d out / d pre-activation of the last layer
            g = d if d is not None else T.Tensor(np.ones((x.shape[0], 1)))
        elif d is not None:
            g = g * d
        weight = layer.weight if idx > 0 or cond is None else layer.weight[:n_x]
        g = T.matmul(g, T.transpose(weight))
    return g


def gradient_penalty(net, x, cond=None):
    """mean over rows of (||d net / dx|| - 1)^2, plus the mean gradient norm."""
    grad = input_gradient(net, x, cond)
    norms = T.norm(grad, axis=1)
    penalty = T.mean(T.square(norms - 1.0))
    return penalty, float(norms.data.mean())
