"""Time the compiled tree kernels against the pure-Python fallback.

Both backends grow identical trees from the same seeds, so the comparison
is like for like. Typical use::

    python3 benchmarks/bench_kernels.py --repeat 5
"""

import argparse
import time

import numpy as np

from regde import _pykernels
from regde._backend import compiled_kernels


def _workloads(rng):
    # the shapes the optimiser actually fits: 10 samples x 10 features
    X = rng.normal(size=(10, 10))
    y = rng.normal(size=10)
    boot = rng.integers(0, 10, size=(40, 10))
    full = np.broadcast_to(np.arange(10), (40, 10)).copy()
    seeds = rng.integers(0, 2**63, size=40).astype(np.uint64)
    Q = rng.normal(size=(10, 10))
    return {
        "random forest (40 trees)": lambda k: k.predict_trees(*k.build_trees(X, y, boot, seeds, -1, 2, False, 10)[:5], Q),
        "extra trees (40 trees)": lambda k: k.predict_trees(*k.build_trees(X, y, full, seeds, -1, 2, True, 10)[:5], Q),
        "boosting (100 stages)": lambda k: k.boost(X, y, 100, 0.1, 3, 2),
    }


def _time(fn, kernels, repeat, number):
    best = np.inf
    for _ in range(repeat):
        start = time.perf_counter()
        for _ in range(number):
            fn(kernels)
        best = min(best, (time.perf_counter() - start) / number)
    return best


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--number", type=int, default=20, help="calls per timing for the compiled kernel")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    if compiled_kernels is None:
        print("compiled kernels are not built; run `pip install -e . --no-build-isolation` first")
        return 1
    work = _workloads(np.random.default_rng(args.seed))
    print(f"{'workload':<28}{'python ms':>12}{'compiled ms':>14}{'speedup':>10}")
    for name, fn in work.items():
        slow = _time(fn, _pykernels, args.repeat, max(1, args.number // 20))
        fast = _time(fn, compiled_kernels, args.repeat, args.number)
        print(f"{name:<28}{slow * 1e3:>12.3f}{fast * 1e3:>14.3f}{slow / fast:>9.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
