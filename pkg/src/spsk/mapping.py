"""Seeded randomness: bucket maps, sign vectors and randomness accounting.

All randomness comes from numpy's Philox counter-based generator, keyed by
``SeedSequence(entropy=seed, spawn_key=(tag,))``. Only the raw 64-bit output
(``Philox.random_raw``) is consumed, which numpy keeps stable across
releases, so a map rebuilt from ``(d, N, R, seed)`` on another machine is
identical. Each purpose uses its own tag so the bucket map and the signs
never share a stream even when they share a seed.

Buckets are 0-based here: bucket ``j`` is bucket ``j + 1`` in 1-based
notation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError

SEED_MAX = (1 << 64) - 1

TAG_BUCKETS = 0x42554B54
TAG_SIGNS = 0x5349474E
TAG_TRIALS = 0x5452494C
TAG_TRIAL_SIGNS = 0x54534947
TAG_JL = 0x4A4C4A4C
TAG_MINHASH = 0x4D494E48
TAG_LSH = 0x4C534831
TAG_CORPUS = 0x434F5250


def check_seed(seed) -> int:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise ParameterError(f"seed must be an integer, got {seed!r}")
    seed = int(seed)
    if not 0 <= seed <= SEED_MAX:
        raise ParameterError(f"seed must fit in 64 unsigned bits, got {seed}")
    return seed


def philox(seed: int, tag: int, *extra: int) -> np.random.Philox:
    """Philox bit generator for one (seed, purpose) pair."""
    ss = np.random.SeedSequence(entropy=check_seed(seed), spawn_key=(tag, *extra))
    return np.random.Philox(ss)


def raw_words(seed: int, tag: int, size, *extra: int) -> np.ndarray:
    """Uniform uint64 words from the tagged stream."""
    return philox(seed, tag, *extra).random_raw(size)


def generator(seed: int, tag: int, *extra: int) -> np.random.Generator:
    """A full Generator on the tagged stream.

    Distribution methods of ``Generator`` are not guaranteed stable across
    numpy releases; use it only for data that is never persisted
    (synthetic corpora, harness draws).
    """
    return np.random.Generator(philox(seed, tag, *extra))


def uniform_below(words: np.ndarray, n: int) -> np.ndarray:
    # Modulo bias is at most n / 2**64.
    return (words % np.uint64(n)).astype(np.int64)


def bits_for(n_buckets: int) -> int:
    """ceil(log2 N), the bits needed to name one of N buckets."""
    if n_buckets < 1:
        raise ParameterError(f"N must be >= 1, got {n_buckets}")
    return (int(n_buckets) - 1).bit_length()


def _positive_int(name, value, minimum=1):
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise ParameterError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ParameterError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


@dataclass(frozen=True)
class RandomnessReceipt:
    bucket_bits: int
    sign_bits: int = 0

    @property
    def total_bits(self) -> int:
        return self.bucket_bits + self.sign_bits


@dataclass(frozen=True, eq=False)
class BucketMap:
    """Assignment of every replicated position ``(i, c)`` to a bucket.

    ``assignment[i, c]`` is the bucket of copy ``c`` of coordinate ``i``.
    Replication is virtual: the vector itself is never expanded.
    """

    d: int
    n_buckets: int
    replication: int
    seed: int | None
    assignment: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = self.assignment
        if a.shape != (self.d, self.replication):
            raise ParameterError(
                f"assignment shape {a.shape} != ({self.d}, {self.replication})"
            )
        if a.size and (a.min() < 0 or a.max() >= self.n_buckets):
            raise ParameterError("assignment refers to a bucket outside [0, N)")
        a.flags.writeable = False
        receipt = randomness_bits(self)
        assert receipt.bucket_bits == self.d * self.replication * bits_for(self.n_buckets)

    @classmethod
    def from_assignment(cls, assignment, n_buckets: int, seed: int | None = None) -> BucketMap:
        """Wrap an explicit assignment (for enumeration and tests)."""
        a = np.array(assignment, dtype=np.int64)
        if a.ndim == 1:
            a = a[:, None]
        _positive_int("N", n_buckets)
        return cls(a.shape[0], int(n_buckets), a.shape[1], seed, a)

    def bucket(self, i: int, c: int = 0) -> int:
        return int(self.assignment[i, c])

    def indicator(self, i: int, k: int) -> int:
        """1 when coordinate i (first copy) lands in bucket k."""
        return int(self.assignment[i, 0] == k)

    def provenance(self):
        return (self.n_buckets, self.replication, self.seed)

    def __eq__(self, other):
        if not isinstance(other, BucketMap):
            return NotImplemented
        return (
            (self.d, self.n_buckets, self.replication, self.seed)
            == (other.d, other.n_buckets, other.replication, other.seed)
            and np.array_equal(self.assignment, other.assignment)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class SignVector:
    d: int
    seed: int | None
    signs: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.signs.shape != (self.d,):
            raise ParameterError(f"signs shape {self.signs.shape} != ({self.d},)")
        if not np.all(np.abs(self.signs) == 1):
            raise ParameterError("signs must be exactly -1 or +1")
        self.signs.flags.writeable = False

    @classmethod
    def from_signs(cls, signs, seed: int | None = None) -> SignVector:
        s = np.array(signs, dtype=np.int8)
        return cls(s.shape[0], seed, s)

    def __eq__(self, other):
        if not isinstance(other, SignVector):
            return NotImplemented
        return (self.d, self.seed) == (other.d, other.seed) and np.array_equal(
            self.signs, other.signs
        )

    __hash__ = None


def new_bucket_map(d: int, n_buckets: int, replication: int = 1, seed: int = 0) -> BucketMap:
    """Uniform, independent assignment of all d*R replicated positions."""
    d = _positive_int("d", d)
    n_buckets = _positive_int("N", n_buckets)
    replication = _positive_int("R", replication)
    seed = check_seed(seed)
    words = raw_words(seed, TAG_BUCKETS, d * replication)
    a = uniform_below(words, n_buckets).reshape(d, replication)
    return BucketMap(d, n_buckets, replication, seed, a)


def new_sign_vector(d: int, seed: int = 0) -> SignVector:
    d = _positive_int("d", d)
    seed = check_seed(seed)
    words = raw_words(seed, TAG_SIGNS, d)
    signs = ((words >> np.uint64(63)).astype(np.int8) * 2 - 1).astype(np.int8)
    return SignVector(d, seed, signs)


def randomness_bits(bucket_map: BucketMap, with_signs: bool = False) -> RandomnessReceipt:
    """Exact random bits consumed: d*R*ceil(log2 N) for buckets, d for signs."""
    m = bucket_map
    return RandomnessReceipt(
        bucket_bits=m.d * m.replication * bits_for(m.n_buckets),
        sign_bits=m.d if with_signs else 0,
    )


def trial_assignments(seed: int, trials: int, positions: int, n_buckets: int, *extra: int):
    """Independent bucket draws for ``positions`` coordinates in each of ``trials`` maps.

    Row t has the same distribution as ``new_bucket_map`` restricted to
    those coordinates; harness experiments use it to avoid drawing the
    inactive coordinates, which never affect a sketch comparison.
    """
    words = raw_words(seed, TAG_TRIALS, trials * positions, *extra)
    return uniform_below(words, n_buckets).reshape(trials, positions)


def trial_signs(seed: int, trials: int, positions: int, *extra: int):
    words = raw_words(seed, TAG_TRIAL_SIGNS, trials * positions, *extra)
    return ((words >> np.uint64(63)).astype(np.int8) * 2 - 1).astype(np.int8).reshape(
        trials, positions
    )
