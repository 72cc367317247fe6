"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeats 5]

Prints the best-of-N wall time per kernel and the speedup. Skip-gram uses
128-d vectors; the LSTM kernels run at 16 and 128 units. At 128 units the
recurrence is dominated by the BLAS matrix-vector product that both versions
share, so the compiled loop only pays off on the element-wise gate work.
"""
import argparse
import time

import numpy as np

from basketgen import _fallback, kernels


def _best(fn, make_args, repeats):
    fn(*make_args())  # warm-up
    times = []
    for _ in range(repeats):
        args = make_args()
        start = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - start)
    return min(times)


def sgns_args(rng, vocab=400, dim=128, pairs=5000, negatives=5):
    w_in = rng.uniform(-0.5 / dim, 0.5 / dim, size=(vocab, dim))
    w_out = np.zeros((vocab, dim))
    p = np.ascontiguousarray(rng.integers(vocab, size=(pairs, 2)), dtype=np.int64)
    n = np.ascontiguousarray(rng.integers(vocab, size=(pairs, negatives)), dtype=np.int64)
    lrs = np.full(pairs, 0.025)
    return lambda: (w_in.copy(), w_out.copy(), p, n, lrs)


def lstm_args(rng, steps=40, hid=128):
    xz = np.ascontiguousarray(rng.normal(size=(steps, 4 * hid)))
    wh = np.ascontiguousarray(rng.normal(scale=0.1, size=(hid, 4 * hid)))
    h0, c0 = np.zeros(hid), np.zeros(hid)
    return lambda: (xz, wh, h0, c0)


def lstm_backward_args(rng, impl, steps=40, hid=128):
    xz, wh, h0, c0 = lstm_args(rng, steps, hid)()
    hs, cs, gates = impl.lstm_forward(xz, wh, h0, c0)
    dhs = rng.normal(size=hs.shape)
    return lambda: (dhs, gates, cs, c0, wh)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args(argv)
    compiled = kernels.compiled_module()
    if compiled is None:
        print("compiled kernels are not built; only the fallback can be timed")
    rows = []
    cases = [("sgns_epoch", None)] + [(k, h) for k in ("lstm_forward", "lstm_backward")
                                      for h in (16, 128)]
    for name, hid in cases:
        timings = {}
        for label, impl in (("python", _fallback), ("cython", compiled)):
            if impl is None:
                continue
            rng = np.random.default_rng(0)
            if name == "sgns_epoch":
                make = sgns_args(rng)
            elif name == "lstm_forward":
                make = lstm_args(rng, hid=hid)
            else:
                make = lstm_backward_args(rng, impl, hid=hid)
            timings[label] = _best(getattr(impl, name), make, args.repeats)
        rows.append((name if hid is None else f"{name} h={hid}", timings))
    print(f"{'kernel':<20} {'python (ms)':>12} {'cython (ms)':>12} {'speedup':>8}")
    for name, t in rows:
        py = t["python"] * 1e3
        cy = t.get("cython")
        if cy is None:
            print(f"{name:<20} {py:>12.2f} {'-':>12} {'-':>8}")
        else:
            print(f"{name:<20} {py:>12.2f} {cy * 1e3:>12.2f} {t['python'] / cy:>7.1f}x")


if __name__ == "__main__":
    main()
