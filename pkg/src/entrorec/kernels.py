"""Disagreement-count kernels.

Every similarity decision in the package reduces to counting the positions
where two binary page-view rows differ. The numba path is used when numba
imports cleanly and ``ENTROREC_DISABLE_NUMBA`` is unset; otherwise the numpy
path runs. Both return identical int64 arrays, so results never depend on the
backend.

The numba kernel packs rows into 64-bit words and counts set bits of their
XOR; the numpy kernel expresses the count as two BLAS matrix products.
"""

import os

import numpy as np

try:
    import numba
    from numba import njit, prange

    # an old system TBB only produces a warning; skip straight to the others
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]
except ImportError:  # pragma: no cover - numba is optional
    njit = None

_DISABLED = os.environ.get("ENTROREC_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")
NUMBA_AVAILABLE = njit is not None
BACKEND = "numba" if NUMBA_AVAILABLE and not _DISABLED else "numpy"


# float32 holds every integer up to 2**24 exactly, and BLAS is far faster than integer matmul
_FLOAT_EXACT = 1 << 24


def _cross_numpy(a, b):
    dtype = np.float32 if a.shape[1] < _FLOAT_EXACT else np.int64
    a = a.astype(dtype)
    b = b.astype(dtype)
    # |x - y| for x, y in {0, 1} is x(1-y) + (1-x)y
    out = a @ (1 - b).T + (1 - a) @ b.T
    return np.rint(out).astype(np.int64) if dtype is np.float32 else out


def _pack(cells):
    """Rows as uint64 bit words, zero-padded so padding never counts as a disagreement."""
    packed = np.packbits(cells, axis=1)
    pad = (-packed.shape[1]) % 8
    if pad:
        packed = np.pad(packed, ((0, 0), (0, pad)))
    return np.ascontiguousarray(packed).view(np.uint64)


if NUMBA_AVAILABLE:

    @njit(inline="always")
    def _popcount(x):
        x = x - ((x >> np.uint64(1)) & np.uint64(0x5555555555555555))
        x = (x & np.uint64(0x3333333333333333)) + ((x >> np.uint64(2)) & np.uint64(0x3333333333333333))
        x = (x + (x >> np.uint64(4))) & np.uint64(0x0F0F0F0F0F0F0F0F)
        return (x * np.uint64(0x0101010101010101)) >> np.uint64(56)

    @njit(parallel=True, nogil=True, cache=True)
    def _cross_packed(a, b):
        n_a, n_words = a.shape
        n_b = b.shape[0]
        out = np.zeros((n_a, n_b), dtype=np.int64)
        for i in prange(n_a):
            for j in range(n_b):
                k = 0
                for w in range(n_words):
                    k += _popcount(a[i, w] ^ b[j, w])
                out[i, j] = k
        return out

    def _cross_numba(a, b):
        return _cross_packed(_pack(a), _pack(b))

else:  # pragma: no cover
    _cross_numba = None


def cross_disagreements(a, b, backend=None):
    """Count differing columns for every (row of ``a``, row of ``b``) pair.

    Returns an int64 array of shape ``(len(a), len(b))``.
    """
    a = np.ascontiguousarray(a, dtype=np.uint8)
    b = np.ascontiguousarray(b, dtype=np.uint8)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ValueError(f"incompatible shapes {a.shape} and {b.shape}")
    backend = backend or BACKEND
    if backend == "numba":
        if not NUMBA_AVAILABLE:
            raise RuntimeError("numba backend requested but numba is not importable")
        return _cross_numba(a, b)
    if backend == "numpy":
        return _cross_numpy(a, b)
    raise ValueError(f"unknown backend {backend!r}")


def pairwise_disagreements(cells, backend=None):
    """Symmetric user-by-user disagreement counts for one matrix."""
    return cross_disagreements(cells, cells, backend=backend)
