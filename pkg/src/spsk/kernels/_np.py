"""Pure-numpy kernels.

Every reduction here runs in the same order as its twin in ``_nb`` so the
two backends agree bit for bit. That rules out ``np.sum`` over float axes
(pairwise summation); float reductions over buckets are done column by
column instead.
"""

import numpy as np

# Cap on the scratch matrix (rows * buckets) materialized per chunk.
_CHUNK_CELLS = 1 << 22


def _chunk_rows(n_buckets):
    return max(1, _CHUNK_CELLS // max(1, n_buckets))


def parity_pack_batch(indptr, indices, assign, n_buckets):
    n = indptr.shape[0] - 1
    n_bytes = (n_buckets + 7) // 8
    out = np.zeros((n, n_bytes), dtype=np.uint8)
    reps = assign.shape[1]
    step = _chunk_rows(n_buckets)
    for lo in range(0, n, step):
        hi = min(n, lo + step)
        seg = indices[indptr[lo]:indptr[hi]]
        lengths = np.diff(indptr[lo:hi + 1])
        rows = np.repeat(np.arange(hi - lo, dtype=np.int64), lengths * reps)
        flat = rows * n_buckets + assign[seg].ravel()
        counts = np.bincount(flat, minlength=(hi - lo) * n_buckets)
        odd = (counts & 1).astype(np.uint8).reshape(hi - lo, n_buckets)
        out[lo:hi] = np.packbits(odd, axis=1, bitorder="little")
    return out


def signed_sums_batch(indptr, indices, values, assign, signs, n_buckets):
    n = indptr.shape[0] - 1
    out = np.zeros((n, n_buckets), dtype=np.float64)
    step = _chunk_rows(n_buckets)
    for lo in range(0, n, step):
        hi = min(n, lo + step)
        a, b = indptr[lo], indptr[hi]
        seg = indices[a:b]
        rows = np.repeat(np.arange(hi - lo, dtype=np.int64), np.diff(indptr[lo:hi + 1]))
        flat = rows * n_buckets + assign[seg]
        # bincount accumulates weights in input order, i.e. ascending index.
        w = values[a:b] * signs[seg]
        out[lo:hi] = np.bincount(flat, weights=w, minlength=(hi - lo) * n_buckets).reshape(
            hi - lo, n_buckets
        )
    return out


def _op(a, b, op):
    return np.bitwise_xor(a, b) if op == 0 else np.bitwise_and(a, b)


def pairwise_popcount(a, b, op):
    n, m = a.shape[0], b.shape[0]
    out = np.empty((n, m), dtype=np.int64)
    step = max(1, _CHUNK_CELLS // max(1, m * a.shape[1]))
    for lo in range(0, n, step):
        hi = min(n, lo + step)
        mixed = _op(a[lo:hi, None, :], b[None, :, :], op)
        out[lo:hi] = np.bitwise_count(mixed).sum(axis=2, dtype=np.int64)
    return out


def rowwise_popcount(a, b, op):
    return np.bitwise_count(_op(a, b, op)).sum(axis=1, dtype=np.int64)


def odd_counts_trials(assign, n_buckets):
    t, m = assign.shape
    out = np.empty(t, dtype=np.int64)
    step = _chunk_rows(n_buckets)
    for lo in range(0, t, step):
        hi = min(t, lo + step)
        rows = np.repeat(np.arange(hi - lo, dtype=np.int64), m)
        flat = rows * n_buckets + assign[lo:hi].ravel()
        counts = np.bincount(flat, minlength=(hi - lo) * n_buckets).reshape(hi - lo, n_buckets)
        out[lo:hi] = (counts & 1).sum(axis=1)
    return out


def collided_positions_trials(assign, n_buckets):
    t, m = assign.shape
    if m < 2:
        return np.zeros(t, dtype=np.int64)
    s = np.sort(assign, axis=1)
    eq = s[:, 1:] == s[:, :-1]
    hit = np.zeros((t, m), dtype=bool)
    hit[:, 1:] |= eq
    hit[:, :-1] |= eq
    return hit.sum(axis=1, dtype=np.int64)


def product_sums_trials(assign, signs, vals, n_buckets):
    t, m = assign.shape
    k = vals.shape[0]
    out = np.empty(t, dtype=np.float64)
    step = max(1, _CHUNK_CELLS // max(1, n_buckets * k))
    for lo in range(0, t, step):
        hi = min(t, lo + step)
        c = hi - lo
        rows = np.repeat(np.arange(c, dtype=np.int64), m)
        flat = rows * n_buckets + assign[lo:hi].ravel()
        sg = signs[lo:hi].astype(np.float64)
        prod = None
        for q in range(k):
            w = (vals[q][None, :] * sg).ravel()
            sums = np.bincount(flat, weights=w, minlength=c * n_buckets).reshape(c, n_buckets)
            prod = sums if prod is None else prod * sums
        acc = np.zeros(c, dtype=np.float64)
        for j in range(n_buckets):
            acc += prod[:, j]
        out[lo:hi] = acc
    return out
