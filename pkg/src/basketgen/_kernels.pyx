# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot loops; see ``_fallback.py`` for the reference."""
import numpy as np

from libc.math cimport exp, log1p, tanh
from scipy.linalg.cython_blas cimport dgemv


cdef inline double _sigmoid(double x) nogil:
    cdef double e
    if x >= 0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


cdef inline double _log_sigmoid(double x) nogil:
    if x >= 0:
        return -log1p(exp(-x))
    return x - log1p(exp(x))


def sgns_epoch(double[:, ::1] w_in, double[:, ::1] w_out,
               long long[:, ::1] pairs, long long[:, ::1] negs, double[::1] lrs):
    cdef Py_ssize_t n_pairs = pairs.shape[0]
    cdef Py_ssize_t n_neg = negs.shape[1]
    cdef Py_ssize_t dim = w_in.shape[1]
    cdef Py_ssize_t p, j, d
    cdef long long center, context, target
    cdef double label, score, g, lr, total = 0.0
    cdef double[::1] grad_v = np.zeros(dim)

    with nogil:
        for p in range(n_pairs):
            center = pairs[p, 0]
            context = pairs[p, 1]
            lr = lrs[p]
            for d in range(dim):
                grad_v[d] = 0.0
            for j in range(n_neg + 1):
                if j == 0:
                    target = context
                    label = 1.0
                else:
                    target = negs[p, j - 1]
                    label = 0.0
                    if target == context:
                        continue
                score = 0.0
                for d in range(dim):
                    score += w_in[center, d] * w_out[target, d]
                if label > 0:
                    total -= _log_sigmoid(score)
                else:
                    total -= _log_sigmoid(-score)
                g = lr * (label - _sigmoid(score))
                for d in range(dim):
                    grad_v[d] += g * w_out[target, d]
                    w_out[target, d] += g * w_in[center, d]
            for d in range(dim):
                w_in[center, d] += grad_v[d]
    return total


def lstm_forward(const double[:, ::1] xz, const double[:, ::1] wh,
                 const double[::1] h0, const double[::1] c0):
    cdef Py_ssize_t steps = xz.shape[0]
    cdef Py_ssize_t four_h = xz.shape[1]
    cdef Py_ssize_t hid = four_h // 4
    hs_arr = np.empty((steps, hid))
    cs_arr = np.empty((steps, hid))
    gates_arr = np.empty((steps, four_h))
    cdef double[:, ::1] hs = hs_arr
    cdef double[:, ::1] cs = cs_arr
    cdef double[:, ::1] gates = gates_arr
    cdef double[::1] h = np.array(h0, dtype=np.float64)
    cdef double[::1] c = np.array(c0, dtype=np.float64)
    cdef double[::1] z = np.empty(four_h)
    cdef Py_ssize_t t, k
    cdef int m = <int>four_h, n = <int>hid, inc = 1
    cdef double one = 1.0, zero = 0.0
    cdef double ig, fg, gg, og

    with nogil:
        for t in range(steps):
            # z = Wh^T-view @ h : Wh is (hid, 4hid) row-major == (4hid, hid) column-major
            dgemv(b"N", &m, &n, &one, <double*>&wh[0, 0], &m, &h[0], &inc, &zero, &z[0], &inc)
            for k in range(four_h):
                z[k] += xz[t, k]
            for k in range(hid):
                ig = _sigmoid(z[k])
                fg = _sigmoid(z[hid + k])
                gg = tanh(z[2 * hid + k])
                og = _sigmoid(z[3 * hid + k])
                gates[t, k] = ig
                gates[t, hid + k] = fg
                gates[t, 2 * hid + k] = gg
                gates[t, 3 * hid + k] = og
                c[k] = fg * c[k] + ig * gg
                h[k] = og * tanh(c[k])
                hs[t, k] = h[k]
                cs[t, k] = c[k]
    return hs_arr, cs_arr, gates_arr


def lstm_backward(const double[:, ::1] dhs, const double[:, ::1] gates,
                  const double[:, ::1] cs, const double[::1] c0, const double[:, ::1] wh):
    cdef Py_ssize_t steps = dhs.shape[0]
    cdef Py_ssize_t hid = dhs.shape[1]
    dz_arr = np.empty((steps, 4 * hid))
    cdef double[:, ::1] dz = dz_arr
    dh_arr = np.zeros(hid)
    dc_arr = np.zeros(hid)
    cdef double[::1] dh_next = dh_arr
    cdef double[::1] dc_next = dc_arr
    cdef Py_ssize_t t, k
    cdef int m = <int>(4 * hid), n = <int>hid, inc = 1
    cdef double one = 1.0, zero = 0.0
    cdef double ig, fg, gg, og, tc, dh, dc, c_prev

    with nogil:
        for t in range(steps - 1, -1, -1):
            for k in range(hid):
                ig = gates[t, k]
                fg = gates[t, hid + k]
                gg = gates[t, 2 * hid + k]
                og = gates[t, 3 * hid + k]
                c_prev = cs[t - 1, k] if t > 0 else c0[k]
                tc = tanh(cs[t, k])
                dh = dhs[t, k] + dh_next[k]
                dc = dc_next[k] + dh * og * (1.0 - tc * tc)
                dz[t, k] = dc * gg * ig * (1.0 - ig)
                dz[t, hid + k] = dc * c_prev * fg * (1.0 - fg)
                dz[t, 2 * hid + k] = dc * ig * (1.0 - gg * gg)
                dz[t, 3 * hid + k] = dh * tc * og * (1.0 - og)
                dc_next[k] = dc * fg
            # dh_prev = Wh @ dz[t]
            dgemv(b"T", &m, &n, &one, <double*>&wh[0, 0], &m, &dz[t, 0], &inc, &zero, &dh_next[0], &inc)
    return dz_arr, dh_arr, dc_arr
