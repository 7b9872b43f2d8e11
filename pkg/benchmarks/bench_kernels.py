"""Compare the numba and numpy disagreement-count kernels.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--sizes 122x43,1000x200,4000x500]

Timings are the best of ``--repeat`` runs after one warm-up call (which also
absorbs numba's compile or cache-load cost). Results of both backends are
checked for equality before timing.
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from entrorec import kernels


def parse_sizes(text):
    return [tuple(int(v) for v in item.split("x")) for item in text.split(",")]


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--sizes", type=parse_sizes, default=parse_sizes("122x43,1000x200,4000x500"))
    parser.add_argument("--density", type=float, default=0.3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    backends = ["numpy"] + (["numba"] if kernels.NUMBA_AVAILABLE else [])
    if len(backends) == 1:
        print("numba not importable; timing the numpy kernel only")
    rng = np.random.default_rng(args.seed)
    print(f"{'users x pages':>14}  " + "  ".join(f"{b:>10}" for b in backends) + ("  speedup" if len(backends) == 2 else ""))
    for users, pages in args.sizes:
        cells = (rng.random((users, pages)) < args.density).astype(np.uint8)
        results = {b: kernels.pairwise_disagreements(cells, backend=b) for b in backends}
        ref = results["numpy"]
        assert all(np.array_equal(ref, r) for r in results.values()), "backends disagree"
        times = {
            b: min(timeit.repeat(lambda b=b: kernels.pairwise_disagreements(cells, backend=b), number=1, repeat=args.repeat))
            for b in backends
        }
        row = f"{users:>7} x {pages:<5}  " + "  ".join(f"{times[b] * 1000:>8.2f}ms" for b in backends)
        if len(backends) == 2:
            row += f"  {times['numpy'] / times['numba']:>6.2f}x"
        print(row)


if __name__ == "__main__":
    main()
