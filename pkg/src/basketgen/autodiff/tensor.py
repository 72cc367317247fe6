"""Reverse-mode differentiation over float64 numpy arrays.

Graphs are built eagerly: every op computes its value when called and keeps
a closure to recompute it, so :func:`forward` can re-evaluate a graph after
leaf values change (handy for finite differences) and :func:`backward`
propagates gradients into leaves that require them.
"""
import numpy as np

from .. import kernels


class ShapeError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    pass


_counter = 0


def _next_id():
    global _counter
    _counter += 1
    return _counter


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "parents", "op", "name",
                 "_fwd", "_bwd", "__weakref__")

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.array(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self.parents = ()
        self.op = "leaf"
        self.name = name
        self._fwd = None
        self._bwd = None

    def __repr__(self):
        label = self.name or self.op
        return f"Tensor({label}, shape={self.shape})"

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def T(self):
        return transpose(self)

    def item(self):
        return float(self.data.reshape(-1)[0])

    def numpy(self):
        return self.data

    def detach(self):
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = np.zeros_like(self.data)

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("division is only supported by constants")
        return mul(self, 1.0 / np.asarray(other, dtype=np.float64))

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)


class Parameter(Tensor):
    """A trainable leaf; its ``grad`` accumulates across backward passes."""

    __slots__ = ()

    def __init__(self, data, name=None):
        super().__init__(data, requires_grad=True, name=name)
        self.grad = np.zeros_like(self.data)

    def __repr__(self):
        return f"Parameter({self.name}, shape={self.shape})"


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _check_finite(data, node_label):
    if not np.all(np.isfinite(data)):
        raise NonFiniteError(f"non-finite value produced by node {node_label}")


def _make(op, parents, fwd, bwd, name=None):
    """Create an op node.

    ``fwd(*parent_data) -> ndarray``;
    ``bwd(grad, needs, out_data, *parent_data) -> sequence of parent grads``
    where ``needs[i]`` tells whether parent ``i`` wants a gradient.
    """
    label = name or f"{op}#{_next_id()}"
    try:
        data = fwd(*[p.data for p in parents])
    except ValueError as exc:
        shapes = ", ".join(str(p.shape) for p in parents)
        raise ShapeError(f"node {label}: incompatible input shapes {shapes}: {exc}") from None
    _check_finite(data, label)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.requires_grad = any(p.requires_grad for p in parents)
    out.parents = tuple(parents)
    out.op = op
    out.name = label
    out._fwd = fwd
    out._bwd = bwd
    return out


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _topo(root):
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def forward(root):
    """Recompute every node reachable from ``root`` from current leaf values."""
    for node in _topo(root):
        if node._fwd is None:
            continue
        try:
            node.data = node._fwd(*[p.data for p in node.parents])
        except ValueError as exc:
            raise ShapeError(f"node {node.name}: {exc}") from None
        _check_finite(node.data, node.name)
    return root.data


def backward(root):
    """Accumulate d(root)/d(leaf) into every reachable leaf requiring grad."""
    if root.data.size != 1:
        raise ShapeError(f"backward needs a scalar root, got shape {root.shape} ({root.name})")
    if not root.requires_grad:
        return
    order = [n for n in _topo(root) if n.requires_grad]
    grads = {id(root): np.ones_like(root.data)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if not node.parents:
            _check_finite(g, node.name or "leaf")
            if node.grad is None:
                node.grad = np.zeros_like(node.data)
            node.grad += g
            continue
        needs = tuple(p.requires_grad for p in node.parents)
        pgrads = node._bwd(g, needs, node.data, *[p.data for p in node.parents])
        for p, need, pg in zip(node.parents, needs, pgrads):
            if not need or pg is None:
                continue
            key = id(p)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg


# --- elementwise ----------------------------------------------------------

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def bwd(g, needs, out, x, y):
        return (_unbroadcast(g, x.shape) if needs[0] else None,
                _unbroadcast(g, y.shape) if needs[1] else None)

    return _make("add", (a, b), np.add, bwd)


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def bwd(g, needs, out, x, y):
        return (_unbroadcast(g, x.shape) if needs[0] else None,
                _unbroadcast(-g, y.shape) if needs[1] else None)

    return _make("sub", (a, b), np.subtract, bwd)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)

    def bwd(g, needs, out, x, y):
        return (_unbroadcast(g * y, x.shape) if needs[0] else None,
                _unbroadcast(g * x, y.shape) if needs[1] else None)

    return _make("mul", (a, b), np.multiply, bwd)


def square(a):
    return _make("square", (a,), np.square, lambda g, n, out, x: (2.0 * x * g,))


def relu(a):
    return _make("relu", (a,), lambda x: np.maximum(x, 0.0),
                 lambda g, n, out, x: (g * (x > 0),))


def step(a):
    """Heaviside mask ``x > 0``; piecewise constant, so it passes no gradient."""
    return _make("step", (a,), lambda x: (x > 0).astype(np.float64),
                 lambda g, n, out, x: (None,))


def tanh(a):
    return _make("tanh", (a,), np.tanh, lambda g, n, out, x: (g * (1.0 - out * out),))


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def sigmoid(a):
    return _make("sigmoid", (a,), _sigmoid, lambda g, n, out, x: (g * out * (1.0 - out),))


# --- structural -----------------------------------------------------------

def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape} "
                         f"(operands {a.name or a.op}, {b.name or b.op})")

    def bwd(g, needs, out, x, y):
        return (g @ y.T if needs[0] else None, x.T @ g if needs[1] else None)

    return _make("matmul", (a, b), np.matmul, bwd)


def transpose(a):
    if a.ndim != 2:
        raise ShapeError(f"transpose needs a matrix, got {a.shape}")
    return _make("transpose", (a,), lambda x: x.T.copy(), lambda g, n, out, x: (g.T,))


def getitem(a, idx):
    def bwd(g, needs, out, x):
        full = np.zeros_like(x)
        np.add.at(full, idx, g)
        return (full,)

    return _make("slice", (a,), lambda x: np.array(x[idx]), bwd)


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    ndim = tensors[0].ndim
    ax = axis % ndim
    sizes = [t.shape[ax] for t in tensors]
    bounds = np.cumsum([0] + sizes)

    def bwd(g, needs, out, *xs):
        parts = []
        for i, need in enumerate(needs):
            if not need:
                parts.append(None)
                continue
            sl = [slice(None)] * ndim
            sl[ax] = slice(bounds[i], bounds[i + 1])
            parts.append(g[tuple(sl)])
        return parts

    return _make("concat", tensors, lambda *xs: np.concatenate(xs, axis=ax), bwd)


# --- reductions -----------------------------------------------------------

def sum(a, axis=None, keepdims=False):  # noqa: A001 - mirrors numpy naming
    def bwd(g, needs, out, x):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _make("sum", (a,), lambda x: np.asarray(x.sum(axis=axis, keepdims=keepdims)), bwd)


def mean(a, axis=None, keepdims=False):
    count = a.size if axis is None else a.shape[axis]

    def bwd(g, needs, out, x):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, x.shape).copy(),)

    return _make("mean", (a,), lambda x: np.asarray(x.mean(axis=axis, keepdims=keepdims)), bwd)


def norm(a, axis=-1):
    """Euclidean norm along ``axis``; the subgradient at zero is taken as 0."""

    def fwd(x):
        return np.sqrt(np.square(x).sum(axis=axis))

    def bwd(g, needs, out, x):
        safe = np.where(out > 0, out, 1.0)
        scale = np.where(out > 0, g / safe, 0.0)
        return (x * np.expand_dims(scale, axis),)

    return _make("norm", (a,), fwd, bwd)


# --- losses ---------------------------------------------------------------

def cross_entropy(logits, targets):
    """Mean softmax cross-entropy; ``targets`` are integer class ids."""
    targets = np.asarray(targets, dtype=np.int64)
    if logits.ndim != 2 or targets.shape != (logits.shape[0],):
        raise ShapeError(f"cross_entropy: logits {logits.shape} vs targets {targets.shape}")
    rows = np.arange(targets.size)

    def fwd(z):
        shifted = z - z.max(axis=1, keepdims=True)
        lse = np.log(np.exp(shifted).sum(axis=1))
        return np.asarray((lse - shifted[rows, targets]).mean())

    def bwd(g, needs, out, z):
        shifted = z - z.max(axis=1, keepdims=True)
        p = np.exp(shifted)
        p /= p.sum(axis=1, keepdims=True)
        p[rows, targets] -= 1.0
        return (g * p / targets.size,)

    return _make("cross_entropy", (logits,), fwd, bwd)


def bce_with_logits(logits, targets):
    """Mean binary cross-entropy on raw scores."""
    targets = np.asarray(targets, dtype=np.float64)
    if logits.shape != targets.shape:
        raise ShapeError(f"bce_with_logits: logits {logits.shape} vs targets {targets.shape}")

    def fwd(z):
        return np.asarray((np.maximum(z, 0) - z * targets + np.log1p(np.exp(-np.abs(z)))).mean())

    def bwd(g, needs, out, z):
        return (g * (_sigmoid(z) - targets) / z.size,)

    return _make("bce_with_logits", (logits,), fwd, bwd)


def mse(pred, target):
    pred, target = as_tensor(pred), as_tensor(target)
    if pred.shape != target.shape:
        raise ShapeError(f"mse: {pred.shape} vs {target.shape}")

    def bwd(g, needs, out, p, t):
        d = 2.0 * g * (p - t) / p.size
        return (d if needs[0] else None, -d if needs[1] else None)

    return _make("mse", (pred, target), lambda p, t: np.asarray(np.square(p - t).mean()), bwd)


# --- fused recurrence -----------------------------------------------------

def lstm_sequence(x, wx, wh, b, h0, c0):
    """Hidden states of an LSTM run over the rows of ``x``.

    Shapes: x (T, D), wx (D, 4H), wh (H, 4H), b (4H,), h0 and c0 (H,).
    Gate blocks are ordered (input, forget, candidate, output).
    """
    x, h0, c0 = as_tensor(x), as_tensor(h0), as_tensor(c0)
    hid = wh.shape[0]
    if (x.ndim != 2 or wx.shape != (x.shape[1], 4 * hid) or wh.shape != (hid, 4 * hid)
            or b.shape != (4 * hid,) or h0.shape != (hid,) or c0.shape != (hid,)):
        raise ShapeError(f"lstm_sequence: x {x.shape}, wx {wx.shape}, wh {wh.shape}, "
                         f"b {b.shape}, h0 {h0.shape}, c0 {c0.shape}")
    cache = {}

    def fwd(xs, wxs, whs, bs, h0s, c0s):
        xz = np.ascontiguousarray(xs @ wxs + bs)
        hs, cs, gates = kernels.lstm_forward(xz, np.ascontiguousarray(whs),
                                             np.ascontiguousarray(h0s), np.ascontiguousarray(c0s))
        cache["cs"] = cs
        cache["gates"] = gates
        return hs

    def bwd(g, needs, hs, xs, wxs, whs, bs, h0s, c0s):
        dz, dh0, dc0 = kernels.lstm_backward(np.ascontiguousarray(g), cache["gates"], cache["cs"],
                                             np.ascontiguousarray(c0s), np.ascontiguousarray(whs))
        h_prev = np.vstack([h0s[None, :], hs[:-1]])
        return (dz @ wxs.T if needs[0] else None,
                xs.T @ dz if needs[1] else None,
                h_prev.T @ dz if needs[2] else None,
                dz.sum(axis=0) if needs[3] else None,
                dh0 if needs[4] else None,
                dc0 if needs[5] else None)

    return _make("lstm", (x, wx, wh, b, h0, c0), fwd, bwd)
