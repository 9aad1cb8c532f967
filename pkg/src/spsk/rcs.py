"""Real-valued compression: signed bucket sums.

Bucket j holds sum(a[i] * x_i) over the coordinates i mapped to j, with
independent uniform signs x_i. Inner products, squared distances and
k-way inner products of the sketches estimate the originals.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import kernels
from .errors import DimensionMismatch, ParameterError, ProvenanceMismatch
from .mapping import BucketMap, SignVector

ODD_K_WARNING = (
    "k-way estimate with odd k: every sign enters an odd number of times, so the "
    "estimator has mean 0 rather than the k-way inner product"
)


@dataclass(frozen=True, eq=False)
class SparseRealVector:
    d: int
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).reshape(-1)
        val = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if self.d < 1:
            raise ParameterError(f"dimension must be >= 1, got {self.d}")
        if idx.shape != val.shape:
            raise ParameterError("indices and values differ in length")
        if idx.size:
            if idx[0] < 0 or idx[-1] >= self.d:
                raise ParameterError(f"indices must lie in [0, {self.d})")
            if np.any(np.diff(idx) <= 0):
                raise ParameterError("indices must be strictly ascending")
        if not np.all(np.isfinite(val)):
            raise ParameterError("values must be finite")
        if np.any(val == 0.0):
            raise ParameterError("stored values must be nonzero")
        idx.flags.writeable = False
        val.flags.writeable = False
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    @classmethod
    def from_dense(cls, values) -> SparseRealVector:
        values = np.asarray(values, dtype=np.float64)
        nz = np.flatnonzero(values)
        return cls(values.shape[0], nz, values[nz])

    @classmethod
    def from_pairs(cls, d: int, pairs) -> SparseRealVector:
        """Build from (index, value) pairs; zero values are dropped."""
        pairs = sorted((int(i), float(v)) for i, v in pairs if v != 0)
        return cls(d, [i for i, _ in pairs], [v for _, v in pairs])

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def sq_norm(self) -> float:
        return math.fsum(v * v for v in self.values.tolist())

    def sq_norm_exact(self) -> Fraction:
        return sum((Fraction(v) ** 2 for v in self.values.tolist()), Fraction(0))

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.d, dtype=np.float64)
        out[self.indices] = self.values
        return out

    def __add__(self, other: SparseRealVector) -> SparseRealVector:
        if self.d != other.d:
            raise DimensionMismatch(f"d={self.d} vs d={other.d}")
        return SparseRealVector.from_dense(self.to_dense() + other.to_dense())

    def __sub__(self, other: SparseRealVector) -> SparseRealVector:
        if self.d != other.d:
            raise DimensionMismatch(f"d={self.d} vs d={other.d}")
        return SparseRealVector.from_dense(self.to_dense() - other.to_dense())

    def __eq__(self, other):
        if not isinstance(other, SparseRealVector):
            return NotImplemented
        return (
            self.d == other.d
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


@dataclass(frozen=True)
class RealPlan:
    n_buckets: int
    k: int
    cap_psi: float
    eps: float
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True, eq=False)
class RealSketch:
    n_buckets: int
    values: np.ndarray = field(repr=False)
    map_seed: int | None = None
    sign_seed: int | None = None

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64)
        if vals.shape != (self.n_buckets,):
            raise ParameterError(f"sketch length {vals.shape} does not match N={self.n_buckets}")
        if not np.all(np.isfinite(vals)):
            raise ParameterError("sketch values must be finite")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def provenance(self):
        return (self.n_buckets, self.map_seed, self.sign_seed)

    def __sub__(self, other: RealSketch) -> RealSketch:
        _check_comparable(self, other)
        return RealSketch(self.n_buckets, self.values - other.values, self.map_seed, self.sign_seed)

    def __add__(self, other: RealSketch) -> RealSketch:
        _check_comparable(self, other)
        return RealSketch(self.n_buckets, self.values + other.values, self.map_seed, self.sign_seed)

    def __eq__(self, other):
        if not isinstance(other, RealSketch):
            return NotImplemented
        return self.provenance() == other.provenance() and np.array_equal(self.values, other.values)

    __hash__ = None


def _check_comparable(*sketches: RealSketch):
    first = sketches[0].provenance()
    for s in sketches[1:]:
        if s.provenance() != first:
            raise ProvenanceMismatch(f"sketches are not comparable: {first} vs {s.provenance()}")


def _exact(x) -> Fraction:
    return Fraction(x) if isinstance(x, (int, Fraction)) else Fraction(str(x))


def plan_real(cap_psi: float, eps: float, k: int = 2) -> RealPlan:
    """N = ceil(10 * Psi^k / eps^2) for k-way inner products of vectors with squared norm <= Psi."""
    if not cap_psi > 0:
        raise ParameterError(f"Psi must be positive, got {cap_psi}")
    if not eps > 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    if isinstance(k, bool) or int(k) != k or k < 2:
        raise ParameterError(f"k must be an integer >= 2, got {k}")
    k = int(k)
    n = math.ceil(10 * _exact(cap_psi) ** k / _exact(eps) ** 2)
    notes = ()
    if k % 2:
        notes = (ODD_K_WARNING,)
        warnings.warn(ODD_K_WARNING, stacklevel=2)
    return RealPlan(max(1, n), k, float(cap_psi), float(eps), notes)


def max_sq_norm(vectors: Sequence[SparseRealVector]) -> float:
    """Psi for a dataset: the largest squared norm."""
    return max((v.sq_norm() for v in vectors), default=0.0)


def _check_inputs(d, bucket_map: BucketMap, signs: SignVector):
    if bucket_map.replication != 1:
        raise ParameterError("real sketches need an unreplicated map (R = 1)")
    if bucket_map.d != signs.d:
        raise DimensionMismatch(f"map has d={bucket_map.d}, signs have d={signs.d}")
    if d is not None and d != bucket_map.d:
        raise DimensionMismatch(f"vector has d={d}, map has d={bucket_map.d}")


def compress_real_matrix(vectors: Sequence[SparseRealVector], bucket_map: BucketMap, signs: SignVector):
    """Sketches of many vectors as an (n, N) float64 matrix."""
    _check_inputs(None, bucket_map, signs)
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    for k, v in enumerate(vectors):
        if v.d != bucket_map.d:
            raise DimensionMismatch(f"vector {k} has d={v.d}, map has d={bucket_map.d}")
        indptr[k + 1] = indptr[k] + v.nnz
    if vectors:
        indices = np.concatenate([v.indices for v in vectors])
        values = np.concatenate([v.values for v in vectors])
    else:
        indices = np.zeros(0, dtype=np.int64)
        values = np.zeros(0, dtype=np.float64)
    return kernels.signed_sums_batch(
        indptr,
        indices,
        values,
        np.ascontiguousarray(bucket_map.assignment[:, 0]),
        np.ascontiguousarray(signs.signs),
        bucket_map.n_buckets,
    )


def compress_real_batch(vectors, bucket_map: BucketMap, signs: SignVector) -> list[RealSketch]:
    mat = compress_real_matrix(vectors, bucket_map, signs)
    return [RealSketch(bucket_map.n_buckets, row, bucket_map.seed, signs.seed) for row in mat]


def compress_real(a: SparseRealVector, bucket_map: BucketMap, signs: SignVector) -> RealSketch:
    """Bucket sums accumulate in ascending coordinate order."""
    _check_inputs(a.d, bucket_map, signs)
    return compress_real_batch([a], bucket_map, signs)[0]


def update_real(
    sketch: RealSketch, bucket_map: BucketMap, signs: SignVector, i: int, delta: float
) -> RealSketch:
    """Sketch after a[i] += delta. Returns a new sketch."""
    _check_inputs(None, bucket_map, signs)
    if sketch.provenance() != (bucket_map.n_buckets, bucket_map.seed, signs.seed):
        raise ProvenanceMismatch("sketch was not built with this map and sign vector")
    if not 0 <= i < bucket_map.d:
        raise ParameterError(f"index {i} outside [0, {bucket_map.d})")
    if not math.isfinite(delta):
        raise ParameterError("delta must be finite")
    vals = sketch.values.copy()
    vals[bucket_map.assignment[i, 0]] += delta * float(signs.signs[i])
    return RealSketch(sketch.n_buckets, vals, sketch.map_seed, sketch.sign_seed)


def ip(alpha: RealSketch, beta: RealSketch) -> float:
    _check_comparable(alpha, beta)
    return float(np.dot(alpha.values, beta.values))


def sq_euclidean(alpha: RealSketch, beta: RealSketch) -> float:
    _check_comparable(alpha, beta)
    diff = alpha.values - beta.values
    return float(np.dot(diff, diff))


def kway_ip(sketches: Sequence[RealSketch]) -> float:
    """sum_j prod_m sketch_m[j]. For k = 2 this is ``ip``."""
    if len(sketches) < 2:
        raise ParameterError("k-way inner product needs at least two sketches")
    _check_comparable(*sketches)
    if len(sketches) == 2:
        return ip(sketches[0], sketches[1])
    if len(sketches) % 2:
        warnings.warn(ODD_K_WARNING, stacklevel=2)
    prod = sketches[0].values.copy()
    for s in sketches[1:]:
        prod *= s.values
    return float(prod.sum())


def exact_kway(vectors: Sequence[SparseRealVector]) -> float:
    """<a_1 a_2 ... a_k> on uncompressed vectors."""
    d = vectors[0].d
    if any(v.d != d for v in vectors):
        raise DimensionMismatch("vectors differ in dimension")
    prod = vectors[0].to_dense()
    for v in vectors[1:]:
        prod = prod * v.to_dense()
    return float(prod.sum())
