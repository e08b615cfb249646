"""Hamming-distance kernels over bit-packed signatures.

The numba-compiled path is used whenever numba imports cleanly; set
WEBCURATE_NO_NUMBA=1 to force the pure-numpy path. Both return identical
results (benchmarks/bench_hamming.py times them side by side).

Signatures are rows of uint8, most-significant-bit first, so a width-W
signature occupies W // 8 bytes.
"""

from __future__ import annotations

import os

import numpy as np

POPCOUNT8 = np.array([bin(i).count("1") for i in range(256)], dtype=np.uint8)

_FORCE_NUMPY = os.environ.get("WEBCURATE_NO_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}


def _hamming_one_to_many_numpy(probe: np.ndarray, packed: np.ndarray) -> np.ndarray:
    """Distances from one packed probe to every row of ``packed``."""
    return POPCOUNT8[np.bitwise_xor(packed, probe)].sum(axis=1, dtype=np.int64)


def _hamming_gather_numpy(probe: np.ndarray, packed: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """Distances from the probe to the rows selected by ``idx``."""
    return POPCOUNT8[np.bitwise_xor(packed[idx], probe)].sum(axis=1, dtype=np.int64)


try:
    if _FORCE_NUMPY:
        raise ImportError("WEBCURATE_NO_NUMBA set")
    from numba import njit
except ImportError:
    njit = None

if njit is not None:

    @njit(cache=True)
    def _hamming_one_to_many_jit(probe, packed, pop):  # pragma: no cover - thin jit wrapper
        n, nbytes = packed.shape
        out = np.empty(n, dtype=np.int64)
        for i in range(n):
            acc = 0
            for j in range(nbytes):
                acc += pop[packed[i, j] ^ probe[j]]
            out[i] = acc
        return out

    @njit(cache=True)
    def _hamming_gather_jit(probe, packed, idx, pop):  # pragma: no cover - thin jit wrapper
        m = idx.shape[0]
        nbytes = probe.shape[0]
        out = np.empty(m, dtype=np.int64)
        for k in range(m):
            i = idx[k]
            acc = 0
            for j in range(nbytes):
                acc += pop[packed[i, j] ^ probe[j]]
            out[k] = acc
        return out

    def hamming_one_to_many(probe: np.ndarray, packed: np.ndarray) -> np.ndarray:
        return _hamming_one_to_many_jit(probe, packed, POPCOUNT8)

    def hamming_gather(probe: np.ndarray, packed: np.ndarray, idx: np.ndarray) -> np.ndarray:
        return _hamming_gather_jit(probe, packed, idx, POPCOUNT8)

    BACKEND = "numba"
else:
    hamming_one_to_many = _hamming_one_to_many_numpy
    hamming_gather = _hamming_gather_numpy
    BACKEND = "numpy"


def hamming_distance(a: np.ndarray, b: np.ndarray) -> int:
    """Distance between two packed signatures of equal width."""
    if a.shape != b.shape:
        raise ValueError(f"width mismatch: {a.shape[0] * 8} vs {b.shape[0] * 8} bits")
    return int(POPCOUNT8[np.bitwise_xor(a, b)].sum())
