#!/usr/bin/env python3
"""Time the Hamming kernels: numba JIT vs the pure-numpy fallback.

Run as: python3 benchmarks/bench_hamming.py [N] [WIDTH]
Set WEBCURATE_NO_NUMBA=1 to check what the fallback-only configuration
would look like (the numba column then disappears).
"""

import sys
import time

import numpy as np

from webcurate.dedup import kernels


def time_fn(fn, *args, repeats=5):
    fn(*args)  # warm up (and JIT-compile, for the numba path)
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 200_000
    width = int(sys.argv[2]) if len(sys.argv) > 2 else 256
    rng = np.random.default_rng(0)
    packed = rng.integers(0, 256, size=(n, width // 8), dtype=np.uint8)
    probe = np.array(packed[0])
    idx = rng.choice(n, size=max(n // 20, 1), replace=False).astype(np.int64)

    rows = []
    numpy_scan = time_fn(kernels._hamming_one_to_many_numpy, probe, packed)
    numpy_gather = time_fn(kernels._hamming_gather_numpy, probe, packed, idx)
    rows.append(("numpy", numpy_scan, numpy_gather))

    if kernels.BACKEND == "numba":
        jit_scan = time_fn(kernels.hamming_one_to_many, probe, packed)
        jit_gather = time_fn(kernels.hamming_gather, probe, packed, idx)
        assert np.array_equal(kernels.hamming_one_to_many(probe, packed),
                              kernels._hamming_one_to_many_numpy(probe, packed))
        rows.append(("numba", jit_scan, jit_gather))
    else:
        print("numba path unavailable (WEBCURATE_NO_NUMBA set or numba missing); "
              "timing the numpy fallback only\n")

    print(f"one probe vs {n:,} signatures of {width} bits "
          f"(gather of {len(idx):,} candidates)\n")
    print(f"{'backend':<8} {'full scan':>12} {'gather':>12}")
    for name, scan, gather in rows:
        print(f"{name:<8} {scan * 1e3:>10.2f}ms {gather * 1e3:>10.2f}ms")
    if len(rows) == 2:
        print(f"\nspeedup: {rows[0][1] / rows[1][1]:.1f}x scan, "
              f"{rows[0][2] / rows[1][2]:.1f}x gather")


if __name__ == "__main__":
    main()
