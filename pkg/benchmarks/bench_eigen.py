"""Time the Jacobi eigensolver's compiled kernel against the numpy fallback.

Usage: python benchmarks/bench_eigen.py [--sizes 16,32,64,128] [--repeats 5]

Both paths run the same sweep schedule and produce bit-identical output, so
the only difference worth reporting is wall time.  The first compiled call
pays JIT compilation; a warmup run is excluded from the timings.
"""

import argparse
import os
import time

import numpy as np


def time_backend(disable: bool, matrices, repeats: int) -> list[float]:
    if disable:
        os.environ["MSLKIT_DISABLE_NUMBA"] = "1"
    else:
        os.environ.pop("MSLKIT_DISABLE_NUMBA", None)
    from mslkit import sym_eig

    sym_eig(matrices[0][:4, :4].copy())  # warmup (and JIT compile)
    out = []
    for c in matrices:
        times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            sym_eig(c)
            times.append(time.perf_counter() - t0)
        out.append(min(times))
    return out


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="16,32,64,128")
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    rng = np.random.default_rng(0)
    matrices = []
    for n in sizes:
        a = rng.standard_normal((n, n))
        matrices.append(a + a.T)

    from mslkit import sym_eig
    from mslkit._kernels import HAS_NUMBA

    if not HAS_NUMBA:
        print("numba is not installed; only the numpy path is available")

    numpy_times = time_backend(True, matrices, args.repeats)
    numba_times = (
        time_backend(False, matrices, args.repeats) if HAS_NUMBA else None
    )

    os.environ.pop("MSLKIT_DISABLE_NUMBA", None)
    print(f"{'size':>6} {'numpy':>12} {'numba':>12} {'speedup':>9}  agree")
    for i, n in enumerate(sizes):
        os.environ["MSLKIT_DISABLE_NUMBA"] = "1"
        slow = sym_eig(matrices[i])
        os.environ.pop("MSLKIT_DISABLE_NUMBA", None)
        fast = sym_eig(matrices[i])
        agree = (
            slow.values.tobytes() == fast.values.tobytes()
            and slow.vectors.tobytes() == fast.vectors.tobytes()
        )
        if numba_times is None:
            print(f"{n:>6} {numpy_times[i] * 1e3:>10.2f}ms {'-':>12} {'-':>9}  -")
        else:
            speedup = numpy_times[i] / numba_times[i]
            print(
                f"{n:>6} {numpy_times[i] * 1e3:>10.2f}ms "
                f"{numba_times[i] * 1e3:>10.2f}ms {speedup:>8.1f}x  {agree}"
            )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
