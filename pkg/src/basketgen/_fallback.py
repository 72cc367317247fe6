"""Pure numpy versions of the hot loops in ``_kernels.pyx``.

Both implementations must agree to rounding error; ``tests/test_kernels.py``
compares them whenever the compiled module is importable.
"""
import math

import numpy as np


def _sigmoid(x):
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def _log_sigmoid(x):
    if x >= 0:
        return -math.log1p(math.exp(-x))
    return x - math.log1p(math.exp(x))


def sgns_epoch(w_in, w_out, pairs, negs, lrs):
    """One pass of skip-gram negative-sampling SGD over ``pairs``.

    Updates ``w_in`` and ``w_out`` in place and returns the summed loss.
    Negatives equal to the positive context are skipped.
    """
    total = 0.0
    n_neg = negs.shape[1]
    for p in range(pairs.shape[0]):
        center = pairs[p, 0]
        context = pairs[p, 1]
        lr = lrs[p]
        v = w_in[center]
        grad_v = np.zeros_like(v)
        for j in range(n_neg + 1):
            if j == 0:
                target, label = context, 1.0
            else:
                target, label = negs[p, j - 1], 0.0
                if target == context:
                    continue
            u = w_out[target]
            score = float(v @ u)
            total -= _log_sigmoid(score) if label else _log_sigmoid(-score)
            g = lr * (label - _sigmoid(score))
            grad_v += g * u
            u += g * v
        v += grad_v
    return total


def lstm_forward(xz, wh, h0, c0):
    """Run the LSTM recurrence given precomputed input projections.

    ``xz[t] = x_t @ Wx + b`` with gate blocks ordered (input, forget,
    candidate, output). Returns hidden states, cell states and activated
    gates, each indexed by time.
    """
    steps, four_h = xz.shape
    hid = four_h // 4
    hs = np.empty((steps, hid))
    cs = np.empty((steps, hid))
    gates = np.empty((steps, four_h))
    h = h0
    c = c0
    for t in range(steps):
        z = xz[t] + h @ wh
        ifo = 1.0 / (1.0 + np.exp(-z))
        gates[t] = ifo
        gates[t, 2 * hid:3 * hid] = np.tanh(z[2 * hid:3 * hid])
        i = gates[t, :hid]
        f = gates[t, hid:2 * hid]
        g = gates[t, 2 * hid:3 * hid]
        o = gates[t, 3 * hid:]
        c = f * c + i * g
        h = o * np.tanh(c)
        hs[t] = h
        cs[t] = c
    return hs, cs, gates


def lstm_backward(dhs, gates, cs, c0, wh):
    """Backpropagate through the recurrence.

    Returns the gradient w.r.t. the gate pre-activations (one row per step)
    and the gradients w.r.t. the initial hidden and cell states.
    """
    steps, hid = dhs.shape
    dz = np.empty((steps, 4 * hid))
    dh_next = np.zeros(hid)
    dc_next = np.zeros(hid)
    for t in range(steps - 1, -1, -1):
        i = gates[t, :hid]
        f = gates[t, hid:2 * hid]
        g = gates[t, 2 * hid:3 * hid]
        o = gates[t, 3 * hid:]
        c_prev = cs[t - 1] if t > 0 else c0
        tc = np.tanh(cs[t])
        dh = dhs[t] + dh_next
        dc = dc_next + dh * o * (1.0 - tc * tc)
        dz[t, :hid] = dc * g * i * (1.0 - i)
        dz[t, hid:2 * hid] = dc * c_prev * f * (1.0 - f)
        dz[t, 2 * hid:3 * hid] = dc * i * (1.0 - g * g)
        dz[t, 3 * hid:] = dh * tc * o * (1.0 - o)
        dc_next = dc * f
        dh_next = wh @ dz[t]
    return dz, dh_next, dc_next
