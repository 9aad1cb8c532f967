"""Reference schemes: +-1 random projection, minwise hashing, exact oracles."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .bcs import SparseBinaryVector
from .errors import DimensionMismatch, ParameterError
from .mapping import TAG_JL, TAG_MINHASH, check_seed, raw_words
from .rcs import SparseRealVector


@dataclass(frozen=True)
class JlMatrixSpec:
    """A d x k matrix of uniform +-1 entries scaled by 1/sqrt(k).

    Row i is regenerated from (seed, i) whenever it is needed, never stored.
    """

    d: int
    k: int
    seed: int = 0

    def __post_init__(self):
        if self.d < 1 or self.k < 1:
            raise ParameterError(f"need d >= 1 and k >= 1, got d={self.d}, k={self.k}")
        check_seed(self.seed)

    def row_signs(self, i: int) -> np.ndarray:
        return _jl_row(self.seed, self.k, int(i))

    @property
    def randomness_bits(self) -> int:
        return self.d * self.k


@lru_cache(maxsize=4096)
def _jl_row(seed, k, i):
    words = raw_words(seed, TAG_JL, k, i)
    row = (words >> np.uint64(63)).astype(np.float64) * 2.0 - 1.0
    row.flags.writeable = False
    return row


def jl_project_with_signs(a: SparseRealVector, sign_rows: np.ndarray) -> np.ndarray:
    """Projection with an explicit (d, k) sign matrix."""
    if sign_rows.shape[0] != a.d:
        raise DimensionMismatch(f"vector has d={a.d}, sign matrix has {sign_rows.shape[0]} rows")
    k = sign_rows.shape[1]
    out = np.zeros(k, dtype=np.float64)
    for i, v in zip(a.indices.tolist(), a.values.tolist()):
        out += v * sign_rows[i]
    return out / math.sqrt(k)


def jl_project(a: SparseRealVector, spec: JlMatrixSpec) -> np.ndarray:
    if a.d != spec.d:
        raise DimensionMismatch(f"vector has d={a.d}, projection expects d={spec.d}")
    out = np.zeros(spec.k, dtype=np.float64)
    for i, v in zip(a.indices.tolist(), a.values.tolist()):
        out += v * spec.row_signs(i)
    return out / math.sqrt(spec.k)


def jl_dimension(n: int, eps: float) -> int:
    """k = ceil(8 ln n / eps^2)."""
    return math.ceil(8.0 * math.log(n) / eps ** 2)


@dataclass(frozen=True, eq=False)
class MinhashSignature:
    values: np.ndarray = field(repr=False)
    seed: int = 0

    @property
    def t(self) -> int:
        return int(self.values.shape[0])

    def __eq__(self, other):
        if not isinstance(other, MinhashSignature):
            return NotImplemented
        return self.seed == other.seed and np.array_equal(self.values, other.values)

    __hash__ = None


def minhash_signature(u: SparseBinaryVector, t: int, seed: int = 0) -> MinhashSignature:
    """Per hash function, the set element with the smallest hash value.

    Each element draws t independent 64-bit hash values from a Philox stream
    keyed by (seed, element), so hash function h ranks elements by their h-th
    word. This approximates t random permutations of [0, d) without
    materializing any of them; ties occur with probability ~ 2^-64.
    """
    if t < 1:
        raise ParameterError(f"t must be >= 1, got {t}")
    if u.popcount == 0:
        raise ParameterError("minhash of the empty set is undefined")
    check_seed(seed)
    ones = u.ones.tolist()
    hashes = np.stack([raw_words(seed, TAG_MINHASH, t, e) for e in ones])
    winners = np.asarray(ones, dtype=np.int64)[np.argmin(hashes, axis=0)]
    winners.flags.writeable = False
    return MinhashSignature(winners, seed)


def minhash_match_fraction(a: MinhashSignature, b: MinhashSignature) -> float:
    if a.t != b.t or a.seed != b.seed:
        raise ParameterError("signatures differ in length or seed")
    return float(np.mean(a.values == b.values))


def jaccard(u: SparseBinaryVector, v: SparseBinaryVector) -> float:
    if u.d != v.d:
        raise DimensionMismatch(f"d={u.d} vs d={v.d}")
    union = np.union1d(u.ones, v.ones).size
    if union == 0:
        return 1.0
    return np.intersect1d(u.ones, v.ones, assume_unique=True).size / union


def _same_d(u, v):
    if u.d != v.d:
        raise DimensionMismatch(f"d={u.d} vs d={v.d}")


def _merge(u: SparseRealVector, v: SparseRealVector):
    """Sorted merge of two supports -> aligned dense values over the union."""
    union = np.union1d(u.indices, v.indices)
    a = np.zeros(union.size)
    b = np.zeros(union.size)
    a[np.searchsorted(union, u.indices)] = u.values
    b[np.searchsorted(union, v.indices)] = v.values
    return a, b


def exact_hamming(u: SparseBinaryVector, v: SparseBinaryVector) -> int:
    _same_d(u, v)
    return int(np.setxor1d(u.ones, v.ones, assume_unique=True).size)


def exact_ip(u, v):
    _same_d(u, v)
    if isinstance(u, SparseBinaryVector) and isinstance(v, SparseBinaryVector):
        return int(np.intersect1d(u.ones, v.ones, assume_unique=True).size)
    a, b = _merge(_as_real(u), _as_real(v))
    return math.fsum((a * b).tolist())


def exact_sq_euclidean(u, v):
    _same_d(u, v)
    if isinstance(u, SparseBinaryVector) and isinstance(v, SparseBinaryVector):
        return exact_hamming(u, v)
    a, b = _merge(_as_real(u), _as_real(v))
    return math.fsum(((a - b) ** 2).tolist())


def _as_real(x) -> SparseRealVector:
    if isinstance(x, SparseRealVector):
        return x
    return SparseRealVector(x.d, x.ones, np.ones(x.popcount))
