"""Binary compression: bucket-parity sketches of sparse 0/1 vectors.

Bucket j of a sketch is the parity of the set coordinates mapped to j.
Sketch Hamming distance never exceeds R times the true distance, and for
well-chosen N it is close to it; the planners pick N (and the replication
factor R) from the dataset sparsity psi, the radius r and accuracy eps.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import kernels
from .errors import DimensionMismatch, DomainError, ParameterError, ProvenanceMismatch
from .mapping import BucketMap, bits_for


class Regime(str, Enum):
    LARGE_DEVIATION = "LargeDeviation"
    REPLICATED = "Replicated"
    PAIRWISE_EXPECTATION = "PairwiseExpectation"


@dataclass(frozen=True, eq=False)
class SparseBinaryVector:
    """A 0/1 vector of dimension ``d`` stored as its ascending set-bit indices."""

    d: int
    ones: np.ndarray

    def __post_init__(self):
        ones = np.asarray(self.ones, dtype=np.int64).reshape(-1)
        if self.d < 1:
            raise ParameterError(f"dimension must be >= 1, got {self.d}")
        if ones.size:
            if ones[0] < 0 or ones[-1] >= self.d:
                raise ParameterError(f"indices must lie in [0, {self.d})")
            if np.any(np.diff(ones) <= 0):
                raise ParameterError("indices must be strictly ascending")
        ones.flags.writeable = False
        object.__setattr__(self, "ones", ones)

    @classmethod
    def from_dense(cls, bits) -> SparseBinaryVector:
        bits = np.asarray(bits)
        return cls(bits.shape[0], np.flatnonzero(bits))

    @classmethod
    def from_indices(cls, d: int, indices) -> SparseBinaryVector:
        """Build from unsorted, possibly repeated indices."""
        return cls(d, np.unique(np.asarray(indices, dtype=np.int64)))

    @property
    def popcount(self) -> int:
        return int(self.ones.size)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.d, dtype=np.uint8)
        out[self.ones] = 1
        return out

    def toggled(self, i: int) -> SparseBinaryVector:
        return SparseBinaryVector(self.d, np.setxor1d(self.ones, [i]))

    def __eq__(self, other):
        if not isinstance(other, SparseBinaryVector):
            return NotImplemented
        return self.d == other.d and np.array_equal(self.ones, other.ones)

    __hash__ = None


@dataclass(frozen=True)
class BinaryPlan:
    n_buckets: int
    replication: int
    regime: Regime
    n: int | None = None
    psi: int | None = None
    r: int | None = None
    eps: float | None = None
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True, eq=False)
class BinarySketch:
    """N-bit parity vector, packed LSB-first (bucket j at byte j//8, bit j%8)."""

    n_buckets: int
    bits: np.ndarray = field(repr=False)
    replication: int = 1
    map_seed: int | None = None

    def __post_init__(self):
        bits = np.ascontiguousarray(self.bits, dtype=np.uint8)
        if bits.shape != ((self.n_buckets + 7) // 8,):
            raise ParameterError(f"packed length {bits.shape} does not match N={self.n_buckets}")
        tail = self.n_buckets % 8
        if tail and bits[-1] >> tail:
            raise ParameterError("padding bits past N must be zero")
        bits.flags.writeable = False
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_bits(cls, bits, replication=1, map_seed=None) -> BinarySketch:
        bits = np.asarray(bits, dtype=np.uint8)
        packed = np.packbits(bits, bitorder="little")
        return cls(bits.shape[0], packed, replication, map_seed)

    @property
    def scale(self) -> int:
        return self.replication

    def provenance(self):
        return (self.n_buckets, self.replication, self.map_seed)

    def to_bits(self) -> np.ndarray:
        return np.unpackbits(self.bits, count=self.n_buckets, bitorder="little")

    def __eq__(self, other):
        if not isinstance(other, BinarySketch):
            return NotImplemented
        return self.provenance() == other.provenance() and np.array_equal(self.bits, other.bits)

    __hash__ = None


def _check_comparable(a: BinarySketch, b: BinarySketch):
    if a.provenance() != b.provenance():
        raise ProvenanceMismatch(
            f"sketches are not comparable: {a.provenance()} vs {b.provenance()}"
        )


def _check_map(sketch: BinarySketch, bucket_map: BucketMap):
    if sketch.provenance() != bucket_map.provenance():
        raise ProvenanceMismatch(
            f"sketch {sketch.provenance()} was not built with map {bucket_map.provenance()}"
        )


def _pos(name, value):
    if value is None or value <= 0:
        raise ParameterError(f"{name} must be positive, got {value}")


def plan_binary(n: int, psi: int, r: int, eps: float, for_inner_product: bool = False) -> BinaryPlan:
    """Bucket count and replication for an n-vector dataset of sparsity psi.

    When eps*r > 3*log2(n) one pass with N = 16 psi^2 suffices. Otherwise
    every coordinate is replicated R = 3*ceil(log2 n) times and
    N = 144 psi^2 ceil(log2 n)^2; sketch distances then come out scaled by R.
    """
    if n < 2:
        raise ParameterError(f"n must be >= 2, got {n}")
    _pos("psi", psi)
    _pos("r", r)
    _pos("eps", eps)
    log_n = bits_for(n)
    notes = []
    if eps * r > 3 * math.log2(n):
        plan = BinaryPlan(16 * psi * psi, 1, Regime.LARGE_DEVIATION, n, psi, r, eps)
    else:
        if for_inner_product:
            notes.append(
                "replicated plan: sketch inner products are not R-scaled copies of the "
                "originals; use an R=1 plan for inner-product workloads"
            )
            warnings.warn(notes[-1], stacklevel=2)
        plan = BinaryPlan(
            144 * psi * psi * log_n * log_n, 3 * log_n, Regime.REPLICATED, n, psi, r, eps, tuple(notes)
        )
    return plan


def plan_pairwise_hamming(r: int) -> BinaryPlan:
    """N = 8 r^2: a single pair at distance >= 4r keeps expected sketch distance > 2r."""
    if isinstance(r, bool) or not isinstance(r, (int, np.integer)):
        raise ParameterError(f"r must be an integer, got {r!r}")
    if r < 2:
        raise DomainError(f"r must be >= 2 (the expectation bound needs r >= 2), got {r}")
    return BinaryPlan(8 * r * r, 1, Regime.PAIRWISE_EXPECTATION, r=int(r))


def _to_csr(vectors: Sequence[SparseBinaryVector], d: int):
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    for k, v in enumerate(vectors):
        if v.d != d:
            raise DimensionMismatch(f"vector {k} has d={v.d}, map has d={d}")
        indptr[k + 1] = indptr[k] + v.popcount
    if vectors:
        indices = np.concatenate([v.ones for v in vectors]).astype(np.int64)
    else:
        indices = np.zeros(0, dtype=np.int64)
    return indptr, indices


def compress_binary_packed(vectors: Sequence[SparseBinaryVector], bucket_map: BucketMap) -> np.ndarray:
    """Packed sketches of many vectors as an (n, ceil(N/8)) uint8 matrix."""
    indptr, indices = _to_csr(vectors, bucket_map.d)
    return kernels.parity_pack_batch(
        indptr, indices, np.ascontiguousarray(bucket_map.assignment), bucket_map.n_buckets
    )


def compress_binary_batch(vectors, bucket_map: BucketMap) -> list[BinarySketch]:
    packed = compress_binary_packed(vectors, bucket_map)
    return [
        BinarySketch(bucket_map.n_buckets, row, bucket_map.replication, bucket_map.seed)
        for row in packed
    ]


def compress_binary(u: SparseBinaryVector, bucket_map: BucketMap) -> BinarySketch:
    return compress_binary_batch([u], bucket_map)[0]


def update_binary(sketch: BinarySketch, bucket_map: BucketMap, i: int) -> BinarySketch:
    """Sketch of the vector with coordinate i flipped. Returns a new sketch."""
    _check_map(sketch, bucket_map)
    if not 0 <= i < bucket_map.d:
        raise ParameterError(f"index {i} outside [0, {bucket_map.d})")
    bits = sketch.bits.copy()
    for j in bucket_map.assignment[i]:
        bits[j >> 3] ^= np.uint8(1 << (j & 7))
    return BinarySketch(sketch.n_buckets, bits, sketch.replication, sketch.map_seed)


def hamming(a: BinarySketch, b: BinarySketch) -> int:
    """Raw sketch Hamming distance (in replicated units)."""
    _check_comparable(a, b)
    return int(np.bitwise_count(a.bits ^ b.bits).sum())


def hamming_rescaled(a: BinarySketch, b: BinarySketch) -> float:
    """Sketch distance divided by R, comparable with pre-compression radii."""
    return hamming(a, b) / a.replication


def inner_product_binary(a: BinarySketch, b: BinarySketch) -> int:
    """popcount(a AND b). Meaningful for R = 1 sketches; otherwise divide by R yourself."""
    _check_comparable(a, b)
    return int(np.bitwise_count(a.bits & b.bits).sum())


def stack(sketches: Sequence[BinarySketch]) -> np.ndarray:
    if not sketches:
        raise ParameterError("no sketches given")
    first = sketches[0]
    for s in sketches[1:]:
        _check_comparable(first, s)
    return np.stack([s.bits for s in sketches])


def pairwise_hamming(a: Sequence[BinarySketch], b: Sequence[BinarySketch]) -> np.ndarray:
    sa, sb = stack(a), stack(b)
    _check_comparable(a[0], b[0])
    return kernels.pairwise_popcount(sa, sb, 0)


def pairwise_inner_product(a: Sequence[BinarySketch], b: Sequence[BinarySketch]) -> np.ndarray:
    sa, sb = stack(a), stack(b)
    _check_comparable(a[0], b[0])
    return kernels.pairwise_popcount(sa, sb, 1)


def unmatched_count(u: SparseBinaryVector, v: SparseBinaryVector) -> int:
    """Coordinates where exactly one vector is set, i.e. the exact Hamming distance."""
    if u.d != v.d:
        raise DimensionMismatch(f"d={u.d} vs d={v.d}")
    return int(np.setxor1d(u.ones, v.ones, assume_unique=True).size)


def odd_bucket_probability(psi_u: int, n_buckets: int, exact: bool = False):
    """P[a fixed bucket receives an odd number of the psi_u unmatched coordinates].

    Equals (1 - (1 - 2/N)^psi_u) / 2. With ``exact=True`` the value is a
    ``Fraction``.
    """
    if psi_u < 0:
        raise ParameterError(f"psi_u must be >= 0, got {psi_u}")
    if n_buckets < 1:
        raise ParameterError(f"N must be >= 1, got {n_buckets}")
    if exact:
        return (1 - (1 - Fraction(2, n_buckets)) ** psi_u) / 2
    return (1.0 - (1.0 - 2.0 / n_buckets) ** psi_u) / 2.0


def expected_compressed_hamming(psi_u: int, n_buckets: int, exact: bool = False):
    """Exact expected sketch distance for a pair with psi_u unmatched coordinates (R = 1)."""
    return n_buckets * odd_bucket_probability(psi_u, n_buckets, exact=exact)


def expected_hamming_lower_bound(psi_u: int, n_buckets: int) -> float:
    """(N/2)(1 - exp(-2 psi_u / N)); never exceeds ``expected_compressed_hamming``.

    Needs N >= 2: with a single bucket 1 - 2/N is negative and an even
    psi_u gives expected distance 0, below this bound.
    """
    if n_buckets < 2:
        raise DomainError(f"the lower bound needs N >= 2, got {n_buckets}")
    return n_buckets / 2.0 * (1.0 - math.exp(-2.0 * psi_u / n_buckets))


def corruption_bound(psi: int, n_buckets: int, eps: float, r: int) -> float:
    """Upper bound min(1, (2 psi / sqrt N)^(eps r)) on sharing > eps*r corrupted positions.

    This is a bound, not a probability; it is clamped to 1 when vacuous.
    """
    for name, val in (("psi", psi), ("N", n_buckets), ("eps", eps), ("r", r)):
        _pos(name, val)
    base = 2.0 * psi / math.sqrt(n_buckets)
    if base >= 1.0:
        return 1.0
    return min(1.0, base ** (eps * r))
