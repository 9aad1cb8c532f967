"""Similarity-preserving sketches for sparse binary and real vectors."""

from .bcs import (
    BinaryPlan,
    BinarySketch,
    Regime,
    SparseBinaryVector,
    compress_binary,
    compress_binary_batch,
    corruption_bound,
    expected_compressed_hamming,
    hamming,
    hamming_rescaled,
    inner_product_binary,
    odd_bucket_probability,
    plan_binary,
    plan_pairwise_hamming,
    unmatched_count,
    update_binary,
)
from .errors import (
    DataError,
    DimensionMismatch,
    DomainError,
    FormatError,
    ParameterError,
    ProvenanceMismatch,
    SketchError,
    TruncatedError,
    VersionError,
)
from .kernels import BACKEND
from .mapping import (
    BucketMap,
    RandomnessReceipt,
    SignVector,
    new_bucket_map,
    new_sign_vector,
    randomness_bits,
)
from .rcs import (
    RealPlan,
    RealSketch,
    SparseRealVector,
    compress_real,
    compress_real_batch,
    ip,
    kway_ip,
    plan_real,
    sq_euclidean,
    update_real,
)

__version__ = "0.1.0"
