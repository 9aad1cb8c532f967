"""numba kernels. Signatures and results mirror ``_np`` exactly."""

import numpy as np
from numba import njit

_POP8 = np.array([bin(i).count("1") for i in range(256)], dtype=np.int64)


@njit(cache=True)
def parity_pack_batch(indptr, indices, assign, n_buckets):
    n = indptr.shape[0] - 1
    reps = assign.shape[1]
    out = np.zeros((n, (n_buckets + 7) // 8), dtype=np.uint8)
    for row in range(n):
        for p in range(indptr[row], indptr[row + 1]):
            i = indices[p]
            for c in range(reps):
                j = assign[i, c]
                out[row, j >> 3] ^= np.uint8(1 << (j & 7))
    return out


@njit(cache=True)
def signed_sums_batch(indptr, indices, values, assign, signs, n_buckets):
    n = indptr.shape[0] - 1
    out = np.zeros((n, n_buckets), dtype=np.float64)
    for row in range(n):
        for p in range(indptr[row], indptr[row + 1]):
            i = indices[p]
            out[row, assign[i]] += values[p] * signs[i]
    return out


@njit(cache=True)
def _popcount_rows(x, y, op, pop8):
    total = 0
    for q in range(x.shape[0]):
        if op == 0:
            total += pop8[x[q] ^ y[q]]
        else:
            total += pop8[x[q] & y[q]]
    return total


@njit(cache=True)
def _pairwise(a, b, op, pop8):
    out = np.empty((a.shape[0], b.shape[0]), dtype=np.int64)
    for i in range(a.shape[0]):
        for j in range(b.shape[0]):
            out[i, j] = _popcount_rows(a[i], b[j], op, pop8)
    return out


@njit(cache=True)
def _rowwise(a, b, op, pop8):
    out = np.empty(a.shape[0], dtype=np.int64)
    for i in range(a.shape[0]):
        out[i] = _popcount_rows(a[i], b[i], op, pop8)
    return out


def pairwise_popcount(a, b, op):
    return _pairwise(a, b, op, _POP8)


def rowwise_popcount(a, b, op):
    return _rowwise(a, b, op, _POP8)


@njit(cache=True)
def odd_counts_trials(assign, n_buckets):
    t, m = assign.shape
    out = np.empty(t, dtype=np.int64)
    parity = np.zeros(n_buckets, dtype=np.uint8)
    for r in range(t):
        odd = 0
        for p in range(m):
            j = assign[r, p]
            parity[j] ^= 1
            odd += 1 if parity[j] else -1
        out[r] = odd
        for p in range(m):
            parity[assign[r, p]] = 0
    return out


@njit(cache=True)
def collided_positions_trials(assign, n_buckets):
    t, m = assign.shape
    out = np.empty(t, dtype=np.int64)
    load = np.zeros(n_buckets, dtype=np.int64)
    for r in range(t):
        for p in range(m):
            load[assign[r, p]] += 1
        hit = 0
        for p in range(m):
            if load[assign[r, p]] >= 2:
                hit += 1
        out[r] = hit
        for p in range(m):
            load[assign[r, p]] = 0
    return out


@njit(cache=True)
def product_sums_trials(assign, signs, vals, n_buckets):
    t, m = assign.shape
    k = vals.shape[0]
    out = np.empty(t, dtype=np.float64)
    sums = np.zeros((k, n_buckets), dtype=np.float64)
    for r in range(t):
        sums[:, :] = 0.0
        for q in range(k):
            for p in range(m):
                sums[q, assign[r, p]] += vals[q, p] * np.float64(signs[r, p])
        acc = 0.0
        for j in range(n_buckets):
            prod = sums[0, j]
            for q in range(1, k):
                prod = prod * sums[q, j]
            acc += prod
        out[r] = acc
    return out


