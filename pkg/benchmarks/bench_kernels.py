"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from crave import kernels


def cases(rng):
    prev = rng.integers(0, 256, (64, 64), dtype=np.int32)
    nxt = np.roll(prev, 2, axis=1)
    x, y = rng.integers(0, 20, 400).astype(float), rng.normal(size=400)
    return {
        "block_match 64x64 b8 r3": lambda impl: kernels.block_match(prev, nxt, 8, 3, impl=impl),
        "kendall_counts n=400": lambda impl: kernels.kendall_counts(x, y, impl=impl),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    backends = kernels.available_backends()
    print(f"selected backend: {kernels.BACKEND}; available: {', '.join(sorted(backends))}")
    for name, fn in cases(np.random.default_rng(0)).items():
        times = {}
        for label, impl in sorted(backends.items()):
            fn(impl)
            times[label] = min(timeit.repeat(lambda: fn(impl), number=1, repeat=args.repeat))
        line = "  ".join(f"{label} {t * 1e3:8.3f} ms" for label, t in times.items())
        if len(times) == 2:
            fast, slow = times.get("cython"), times.get("python")
            line += f"  speedup {slow / fast:6.1f}x"
        print(f"{name:26s} {line}")


if __name__ == "__main__":
    main()
