"""Bit-sampling LSH over binary sketches for c-approximate near neighbors.

Each of L tables keys a sketch by K sketch bits sampled uniformly with
replacement. Two sketches at raw distance t collide in one sampled bit with
probability 1 - t/N, which gives the usual (r, cr, p1, p2) family.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bcs import BinarySketch, stack
from .errors import ParameterError, ProvenanceMismatch
from .mapping import TAG_LSH, raw_words, uniform_below


@dataclass(frozen=True)
class LshParams:
    K: int
    L: int
    rho: float
    p1: float
    p2: float
    r: float
    c: float
    n: int
    n_buckets: int
    replication: int = 1

    def __post_init__(self):
        if not 0 < self.p2 < self.p1 < 1:
            raise ParameterError(f"need 0 < p2 < p1 < 1, got p1={self.p1}, p2={self.p2}")
        if self.K < 1 or self.L < 1:
            raise ParameterError("K and L must be >= 1")

    @property
    def candidate_cap(self) -> int:
        return 3 * self.L


def lsh_params(n: int, r: float, c: float, n_buckets: int, replication: int = 1) -> LshParams:
    """K = ceil(ln n / ln(1/p2)), L = ceil(n^rho * log2 n), rho = ln p1 / ln p2.

    ``r`` is in rescaled units (raw sketch distance divided by R); the
    collision probabilities use the raw radii R*r and R*c*r.
    """
    if n < 2:
        raise ParameterError(f"n must be >= 2, got {n}")
    if not r > 0:
        raise ParameterError(f"r must be positive, got {r}")
    if not c > 1:
        raise ParameterError(f"c must be > 1, got {c}")
    if replication * c * r >= n_buckets:
        raise ParameterError(
            f"c*r = {replication * c * r} must be below the sketch length {n_buckets}"
        )
    p1 = 1.0 - replication * r / n_buckets
    p2 = 1.0 - replication * c * r / n_buckets
    # Round-off guard so exact integer ratios do not ceil up by one.
    K = max(1, math.ceil(math.log(n) / math.log(1.0 / p2) - 1e-9))
    rho = math.log(p1) / math.log(p2)
    L = max(1, math.ceil(n ** rho * math.log2(n) - 1e-9))
    return LshParams(K, L, rho, p1, p2, r, c, n, n_buckets, replication)


@dataclass(eq=False)
class HashTableSet:
    params: LshParams
    seed: int
    positions: np.ndarray = field(repr=False)  # (L, K) sampled sketch-bit indices
    tables: list = field(repr=False)  # L dicts: key bytes -> list of ids
    packed: np.ndarray | None = field(repr=False, default=None)
    provenance: tuple | None = None

    @classmethod
    def empty(cls, params: LshParams, seed: int = 0) -> HashTableSet:
        return cls(params, seed, sample_positions(params, seed), [{} for _ in range(params.L)])

    @property
    def size(self) -> int:
        return 0 if self.packed is None else int(self.packed.shape[0])


def sample_positions(params: LshParams, seed: int) -> np.ndarray:
    words = raw_words(seed, TAG_LSH, params.L * params.K)
    return uniform_below(words, params.n_buckets).reshape(params.L, params.K)


def _keys(packed: np.ndarray, positions: np.ndarray, n_buckets: int) -> np.ndarray:
    """(n, L) array of key byte strings."""
    bits = np.unpackbits(packed, axis=1, count=n_buckets, bitorder="little")
    sampled = bits[:, positions]  # (n, L, K)
    keys = np.packbits(sampled, axis=2, bitorder="little")
    n, L, width = keys.shape
    return keys.reshape(n * L, width).view(f"V{width}").reshape(n, L)


def build_index(sketches: Sequence[BinarySketch], params: LshParams, seed: int = 0) -> HashTableSet:
    if not sketches:
        raise ParameterError("cannot index an empty sketch list")
    packed = stack(sketches)
    first = sketches[0]
    if first.n_buckets != params.n_buckets or first.replication != params.replication:
        raise ProvenanceMismatch(
            f"params are for N={params.n_buckets}, R={params.replication}; "
            f"sketches have N={first.n_buckets}, R={first.replication}"
        )
    positions = sample_positions(params, seed)
    keys = _keys(packed, positions, params.n_buckets)
    tables = [{} for _ in range(params.L)]
    for ident in range(keys.shape[0]):
        for t in range(params.L):
            tables[t].setdefault(keys[ident, t].tobytes(), []).append(ident)
    return HashTableSet(params, seed, positions, tables, packed, first.provenance())


def query_with_stats(index: HashTableSet, q: BinarySketch, r: float, c: float):
    """(id or None, number of candidates distance-checked)."""
    if index.packed is None:
        return None, 0
    if q.provenance() != index.provenance:
        raise ProvenanceMismatch(f"query {q.provenance()} vs index {index.provenance}")
    qkeys = _keys(q.bits[None, :], index.positions, index.params.n_buckets)[0]
    limit = c * r * q.replication
    cap = index.params.candidate_cap
    seen = set()
    for t, table in enumerate(index.tables):
        for ident in table.get(qkeys[t].tobytes(), ()):
            if ident in seen:
                continue
            seen.add(ident)
            dist = int(np.bitwise_count(index.packed[ident] ^ q.bits).sum())
            if dist <= limit:
                return ident, len(seen)
            if len(seen) >= cap:
                return None, len(seen)
    return None, len(seen)


def query(index: HashTableSet, q: BinarySketch, r: float, c: float) -> int | None:
    """First candidate within rescaled sketch distance c*r, or None.

    At most 3L distinct candidates are checked.
    """
    return query_with_stats(index, q, r, c)[0]
