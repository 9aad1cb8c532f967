"""Sparse-vector text files and binary sketch-set files.

Sparse vector file (text)::

    d=<dimension>
    0 3 17          # BIN: ascending indices, empty line = zero vector
    2:0.5 9:-1.25   # REAL: ascending index:value pairs

Sketch set file (binary, all integers little-endian u64)::

    magic  b"SPSK"
    version
    scheme b"BIN " | b"REAL"
    d, N, R, map_seed, sign_seed (0 for BIN), n
    n records   BIN: ceil(N/8) packed bytes (bucket j at byte j//8, bit j%8)
                REAL: N float64 LE
    n ids       u64 byte length + UTF-8
"""

from __future__ import annotations

import math
import os
import struct
import tempfile
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bcs import BinarySketch, SparseBinaryVector
from .errors import DataError, FormatError, ParameterError, TruncatedError, VersionError
from .mapping import BucketMap, SignVector, new_bucket_map, new_sign_vector
from .rcs import RealSketch, SparseRealVector

MAGIC = b"SPSK"
FORMAT_VERSION = 1
SCHEMES = {"BIN": b"BIN ", "REAL": b"REAL"}
_HEADER = struct.Struct("<4sQ4s6Q")
_U64 = struct.Struct("<Q")
_U64_MAX = 2**64 - 1


def _scheme(scheme: str) -> str:
    key = str(scheme).upper()
    if key not in SCHEMES:
        raise ParameterError(f"scheme must be BIN or REAL, got {scheme!r}")
    return key


# ------------------------------------------------------------ vector files


@dataclass
class ParsedVectors:
    """Vectors read from a sparse file plus the realized sparsity/norm bound.

    ``bound`` is psi (max popcount) for BIN and Psi (max squared norm) for REAL.
    """

    scheme: str
    d: int
    vectors: list
    bound: float


def _parse_index(tok: str, d: int, prev: int, lineno: int) -> int:
    try:
        idx = int(tok)
    except ValueError:
        raise DataError(f"malformed index {tok!r}", lineno) from None
    if idx < 0 or idx >= d:
        raise DataError(f"index {idx} out of range for d={d}", lineno)
    if idx <= prev:
        raise DataError(f"indices must be strictly ascending ({idx} after {prev})", lineno)
    return idx


def parse_sparse_text(text: str, scheme: str) -> ParsedVectors:
    scheme = _scheme(scheme)
    lines = text.splitlines()
    if not lines:
        raise DataError("empty file; expected a 'd=<dimension>' header", 1)
    head = lines[0].strip()
    if not head.startswith("d="):
        raise DataError(f"expected 'd=<dimension>', got {head!r}", 1)
    try:
        d = int(head[2:])
    except ValueError:
        raise DataError(f"malformed dimension {head[2:]!r}", 1) from None
    if d < 1:
        raise DataError(f"dimension must be positive, got {d}", 1)

    vectors = []
    for lineno, line in enumerate(lines[1:], start=2):
        toks = line.split()
        prev = -1
        if scheme == "BIN":
            idx = []
            for tok in toks:
                prev = _parse_index(tok, d, prev, lineno)
                idx.append(prev)
            vectors.append(SparseBinaryVector(d, np.array(idx, dtype=np.int64)))
        else:
            pairs = []
            for tok in toks:
                key, sep, val = tok.partition(":")
                if not sep:
                    raise DataError(f"expected index:value, got {tok!r}", lineno)
                prev = _parse_index(key, d, prev, lineno)
                try:
                    x = float(val)
                except ValueError:
                    raise DataError(f"malformed value {val!r}", lineno) from None
                if not math.isfinite(x):
                    raise DataError(f"non-finite value {val!r} at index {prev}", lineno)
                pairs.append((prev, x))
            vectors.append(SparseRealVector.from_pairs(d, pairs))

    if scheme == "BIN":
        bound = max((v.popcount for v in vectors), default=0)
    else:
        bound = max((v.sq_norm() for v in vectors), default=0.0)
    return ParsedVectors(scheme, d, vectors, bound)


def parse_sparse_file(path, scheme: str) -> ParsedVectors:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except UnicodeDecodeError as exc:
        raise DataError(f"{path}: not UTF-8 text ({exc.reason})") from None
    return parse_sparse_text(text, scheme)


def format_sparse_text(vectors: Sequence, d: int) -> str:
    """Inverse of ``parse_sparse_text`` (REAL values use repr, so they round-trip)."""
    out = [f"d={d}"]
    for v in vectors:
        if isinstance(v, SparseBinaryVector):
            out.append(" ".join(str(int(i)) for i in v.ones))
        else:
            out.append(" ".join(f"{int(i)}:{float(x)!r}" for i, x in zip(v.indices, v.values)))
    return "\n".join(out) + "\n"


# ------------------------------------------------------------ sketch files


@dataclass(eq=False)
class SketchSetFile:
    scheme: str
    d: int
    n_buckets: int
    replication: int
    map_seed: int
    sign_seed: int
    sketches: list = field(repr=False)
    ids: list = field(default_factory=list)

    def __post_init__(self):
        self.scheme = _scheme(self.scheme)
        if not self.ids:
            self.ids = [str(i) for i in range(len(self.sketches))]
        if len(self.ids) != len(self.sketches):
            raise ParameterError(f"{len(self.ids)} ids for {len(self.sketches)} sketches")
        if self.scheme == "REAL" and self.replication != 1:
            raise ParameterError("real sketches do not use replication")

    @property
    def record_width(self) -> int:
        return (self.n_buckets + 7) // 8 if self.scheme == "BIN" else 8 * self.n_buckets

    def bucket_map(self) -> BucketMap:
        return new_bucket_map(self.d, self.n_buckets, self.replication, self.map_seed)

    def sign_vector(self) -> SignVector:
        return new_sign_vector(self.d, self.sign_seed)

    def __eq__(self, other):
        if not isinstance(other, SketchSetFile):
            return NotImplemented
        return (
            self.header() == other.header()
            and self.ids == other.ids
            and all(a == b for a, b in zip(self.sketches, other.sketches))
        )

    def header(self):
        return (self.scheme, self.d, self.n_buckets, self.replication, self.map_seed, self.sign_seed, len(self.sketches))


def sketch_set(sketches: Sequence, d: int, ids=None) -> SketchSetFile:
    """Wrap a provenance-consistent list of sketches for saving."""
    if not sketches:
        raise ParameterError("cannot store an empty sketch set")
    first = sketches[0]
    if isinstance(first, BinarySketch):
        scheme, R, sign_seed = "BIN", first.replication, 0
    elif isinstance(first, RealSketch):
        scheme, R, sign_seed = "REAL", 1, first.sign_seed
    else:
        raise ParameterError(f"not a sketch: {type(first).__name__}")
    for s in sketches:
        if type(s) is not type(first) or s.provenance() != first.provenance():
            raise ParameterError("all sketches in a set must share scheme and provenance")
    if first.map_seed is None or sign_seed is None:
        raise ParameterError("sketches built from explicit maps have no seed to persist")
    return SketchSetFile(scheme, d, first.n_buckets, R, first.map_seed, sign_seed, list(sketches), list(ids or []))


def _u64(name, value):
    if not 0 <= value <= _U64_MAX:
        raise ParameterError(f"{name}={value} does not fit in an unsigned 64-bit field")
    return value


def encode_sketch_set(fs: SketchSetFile) -> bytes:
    parts = [
        _HEADER.pack(
            MAGIC,
            FORMAT_VERSION,
            SCHEMES[fs.scheme],
            _u64("d", fs.d),
            _u64("N", fs.n_buckets),
            _u64("R", fs.replication),
            _u64("map_seed", fs.map_seed),
            _u64("sign_seed", fs.sign_seed),
            len(fs.sketches),
        )
    ]
    for s in fs.sketches:
        if fs.scheme == "BIN":
            parts.append(s.bits.tobytes())
        else:
            parts.append(s.values.astype("<f8").tobytes())
    for ident in fs.ids:
        raw = str(ident).encode("utf-8")
        parts.append(_U64.pack(len(raw)))
        parts.append(raw)
    return b"".join(parts)


def decode_sketch_set(data: bytes) -> SketchSetFile:
    if len(data) < 4 or data[:4] != MAGIC:
        raise FormatError("bad magic; not a sketch-set file")
    if len(data) < _HEADER.size:
        raise TruncatedError(f"header needs {_HEADER.size} bytes, file has {len(data)}")
    _, version, tag, d, N, R, map_seed, sign_seed, n = _HEADER.unpack_from(data)
    if version != FORMAT_VERSION:
        raise VersionError(f"format version {version} is not supported (expected {FORMAT_VERSION})")
    schemes = {v: k for k, v in SCHEMES.items()}
    if tag not in schemes:
        raise FormatError(f"unknown scheme tag {tag!r}")
    scheme = schemes[tag]
    if N < 1 or d < 1 or R < 1:
        raise FormatError(f"invalid header d={d}, N={N}, R={R}")
    width = (N + 7) // 8 if scheme == "BIN" else 8 * N
    pos = _HEADER.size
    body_end = pos + n * width
    if len(data) < body_end:
        raise TruncatedError(f"body needs {n * width} bytes for {n} records, file has {len(data) - pos}")
    sketches = []
    try:
        for i in range(n):
            chunk = data[pos + i * width : pos + (i + 1) * width]
            if scheme == "BIN":
                sketches.append(BinarySketch(N, np.frombuffer(chunk, dtype=np.uint8), R, map_seed))
            else:
                vals = np.frombuffer(chunk, dtype="<f8").astype(np.float64)
                sketches.append(RealSketch(N, vals, map_seed, sign_seed))
    except ParameterError as exc:
        raise FormatError(f"record {i}: {exc}") from None
    pos = body_end
    ids = []
    for i in range(n):
        if len(data) < pos + _U64.size:
            raise TruncatedError(f"id table ends before id {i}")
        (length,) = _U64.unpack_from(data, pos)
        pos += _U64.size
        if len(data) < pos + length:
            raise TruncatedError(f"id {i} is cut short")
        try:
            ids.append(data[pos : pos + length].decode("utf-8"))
        except UnicodeDecodeError:
            raise FormatError(f"id {i} is not UTF-8") from None
        pos += length
    if pos != len(data):
        raise FormatError(f"{len(data) - pos} unexpected trailing bytes")
    return SketchSetFile(scheme, d, N, R, map_seed, sign_seed, sketches, ids)


def save_sketch_set(path, fs: SketchSetFile) -> None:
    """Write atomically: a complete file appears at ``path`` or nothing changes."""
    data = encode_sketch_set(fs)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".spsk-", dir=directory)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_sketch_set(path) -> SketchSetFile:
    with open(path, "rb") as fh:
        return decode_sketch_set(fh.read())
