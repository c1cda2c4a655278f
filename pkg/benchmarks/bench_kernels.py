"""Compiled vs numpy kernels at the shapes one training step uses.

    python3 benchmarks/bench_kernels.py [--repeat N]

Prints one line per kernel with the median time of each backend and the
speedup. Outputs of both backends are compared before timing.
"""

import argparse
import statistics
import sys
import time

import numpy as np

from promptsched import _kernels_py as py

try:
    from promptsched import _kernels as cy
except ImportError:
    cy = None


def cases(rng):
    B, N, d, H, V = 16, 16, 32, 4, 64
    x = rng.normal(size=(B * N, d))
    gain, bias = rng.normal(size=d), rng.normal(size=d)
    scores = rng.normal(size=(B * H * N, N))
    logits = rng.normal(size=(B, 2))
    labels = rng.integers(0, 2, size=B).astype(np.int64)
    ids = rng.integers(0, V, size=B * 12).astype(np.int64)
    gy_emb = rng.normal(size=(B * 12, d))

    saved = {}

    def prep(k):
        # forward results feeding the backward kernels, computed once per backend
        if k not in saved:
            _, xhat, rstd = k.layer_norm_forward(x, gain, bias, 1e-5)
            sm = k.softmax_forward(scores, 2.0)
            _, probs = k.cross_entropy_forward(logits, labels)
            saved[k] = xhat, rstd, sm, probs
        return saved[k]

    return {
        "layer_norm_forward": lambda k: k.layer_norm_forward(x, gain, bias, 1e-5),
        "layer_norm_backward": lambda k: k.layer_norm_backward(x, *prep(k)[:2], gain),
        "softmax_forward": lambda k: k.softmax_forward(scores, 2.0),
        "softmax_backward": lambda k: k.softmax_backward(prep(k)[2], scores, 2.0),
        "cross_entropy_forward": lambda k: k.cross_entropy_forward(logits, labels),
        "cross_entropy_backward": lambda k: k.cross_entropy_backward(prep(k)[3], labels, 1.0),
        "embedding_backward": lambda k: k.embedding_backward(ids, gy_emb, V),
    }


def _flatten(out):
    if isinstance(out, tuple):
        return [np.asarray(o, dtype=np.float64).ravel() for o in out]
    return [np.asarray(out, dtype=np.float64).ravel()]


def timeit(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        for _ in range(20):
            fn()
        times.append((time.perf_counter() - t0) / 20)
    return statistics.median(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=15)
    args = ap.parse_args(argv)
    if cy is None:
        print("compiled kernels not built; only the numpy backend is available", file=sys.stderr)
        return 1
    rng = np.random.default_rng(0)
    print(f"{'kernel':24s} {'numpy us':>10s} {'compiled us':>12s} {'speedup':>8s}")
    for name, call in cases(rng).items():
        for a, b in zip(_flatten(call(py)), _flatten(call(cy))):
            np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12, err_msg=name)
        tp = timeit(lambda: call(py), args.repeat)
        tc = timeit(lambda: call(cy), args.repeat)
        print(f"{name:24s} {tp * 1e6:10.1f} {tc * 1e6:12.1f} {tp / tc:8.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
