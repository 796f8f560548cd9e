"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from riskhte import _kernels_py

try:
    from riskhte import _kernels as compiled
except ImportError:
    compiled = None


def cases():
    rng = np.random.default_rng(0)
    for n in (1_000, 10_000, 100_000):
        xs = np.sort(rng.standard_normal(n))
        ys = (rng.random(n) < 0.3).astype(float) - (rng.random(n) < 0.25).astype(float)
        ev = np.quantile(xs, np.linspace(0, 1, 100))
        q = int(0.75 * n)
        yield f"loess n={n} (100 vertices)", lambda m, a=(xs, ys, ev, q): m.loess_local_linear(*a)
        vals = rng.standard_normal(n)
        yield f"count_less_equal n={n}", lambda m, a=(xs, vals): m.count_less_equal(*a)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if compiled is None:
        print("compiled kernels not built; run: python setup.py build_ext --inplace")
    print(f"{'kernel':<36}{'python ms':>12}{'cython ms':>12}{'speedup':>10}")
    for label, fn in cases():
        py = min(timeit.repeat(lambda: fn(_kernels_py), number=1, repeat=args.repeat)) * 1e3
        if compiled is None:
            print(f"{label:<36}{py:>12.2f}{'-':>12}{'-':>10}")
            continue
        cy = min(timeit.repeat(lambda: fn(compiled), number=1, repeat=args.repeat)) * 1e3
        print(f"{label:<36}{py:>12.2f}{cy:>12.2f}{py / cy:>9.1f}x")


if __name__ == "__main__":
    main()
