"""Hot inner loops, with a numba path and a pure-numpy fallback.

The backend is picked once at import time from ``SPSK_BACKEND``
(``numba`` or ``numpy``). When unset, numba is used if it imports.
Both backends return identical results, including floating-point
accumulation order.
"""

import os

from . import _np

BACKEND_ENV = "SPSK_BACKEND"


def _select():
    wanted = os.environ.get(BACKEND_ENV, "").strip().lower()
    if wanted not in ("", "numba", "numpy"):
        raise ImportError(f"{BACKEND_ENV} must be 'numba' or 'numpy', got {wanted!r}")
    if wanted == "numpy":
        return _np, "numpy"
    try:
        from . import _nb
    except ImportError:
        if wanted == "numba":
            raise
        return _np, "numpy"
    return _nb, "numba"


_impl, BACKEND = _select()

parity_pack_batch = _impl.parity_pack_batch
signed_sums_batch = _impl.signed_sums_batch
pairwise_popcount = _impl.pairwise_popcount
rowwise_popcount = _impl.rowwise_popcount
odd_counts_trials = _impl.odd_counts_trials
collided_positions_trials = _impl.collided_positions_trials
product_sums_trials = _impl.product_sums_trials

__all__ = [
    "BACKEND",
    "BACKEND_ENV",
    "parity_pack_batch",
    "signed_sums_batch",
    "pairwise_popcount",
    "rowwise_popcount",
    "odd_counts_trials",
    "collided_positions_trials",
    "product_sums_trials",
]
