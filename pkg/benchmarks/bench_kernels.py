"""Time each hot kernel under the numba and pure-numpy backends.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--scale 1.0]

Numba compilation is excluded (one warm-up call per kernel). Outputs are
compared between backends before timing.
"""

import argparse
import time

import numpy as np

from spsk.kernels import _nb, _np


def _csr(rng, n, d, nnz):
    indptr = np.arange(n + 1, dtype=np.int64) * nnz
    indices = np.sort(rng.integers(0, d, size=(n, nnz)), axis=1).ravel().astype(np.int64)
    return indptr, indices


def cases(scale, rng):
    n = max(1, int(20_000 * scale))
    d, psi, N = 10_000, 50, 3200
    indptr, indices = _csr(rng, n, d, psi)
    assign1 = rng.integers(0, N, size=(d, 1))
    assign3 = rng.integers(0, N, size=(d, 3))
    values = rng.standard_normal(indices.size)
    signs = rng.choice(np.array([-1, 1], dtype=np.int8), size=d)
    packed = _np.parity_pack_batch(indptr[: 501], indices[: indptr[500]], assign1, N)
    trials = max(1, int(100_000 * scale))
    t_assign = rng.integers(0, 200, size=(trials, 20))
    t_signs = rng.choice(np.array([-1, 1], dtype=np.int8), size=(trials, 20))
    t_vals = rng.standard_normal((4, 20))
    return [
        ("parity_pack_batch R=1", "parity_pack_batch", (indptr, indices, assign1, N)),
        ("parity_pack_batch R=3", "parity_pack_batch", (indptr, indices, assign3, N)),
        ("signed_sums_batch", "signed_sums_batch", (indptr[: n // 4 + 1], indices, values, assign1[:, 0] % 640, signs, 640)),
        ("pairwise_popcount xor 500x500", "pairwise_popcount", (packed, packed, 0)),
        ("rowwise_popcount and", "rowwise_popcount", (packed, packed[::-1].copy(), 1)),
        ("odd_counts_trials", "odd_counts_trials", (t_assign, 200)),
        ("collided_positions_trials", "collided_positions_trials", (t_assign, 200)),
        ("product_sums_trials k=4", "product_sums_trials", (t_assign, t_signs, t_vals, 200)),
    ]


def best_of(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--scale", type=float, default=1.0)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"{'kernel':34s} {'numba_ms':>10s} {'numpy_ms':>10s} {'speedup':>8s}")
    for label, name, kargs in cases(args.scale, rng):
        f_nb, f_np = getattr(_nb, name), getattr(_np, name)
        a, b = f_nb(*kargs), f_np(*kargs)  # warm-up + agreement check
        if not np.array_equal(a, b):
            raise SystemExit(f"{label}: backends disagree")
        t_nb = best_of(f_nb, kargs, args.repeat)
        t_np = best_of(f_np, kargs, args.repeat)
        print(f"{label:34s} {t_nb * 1e3:10.2f} {t_np * 1e3:10.2f} {t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()
