"""Compare the compiled and numpy scan kernels.

    python benchmarks/bench_scan.py --n 1000000 --q 48 --queries 20

Each row is the median wall time per query over ``--repeat`` passes.
"""

import argparse
import statistics
import time

import numpy as np

from qadwh import scan
from qadwh.index import BitCodeSet, pack_codes, query_words, rank_exact, rank_hamming, rank_two_phase


def _median_ms(fn, queries, repeat):
    runs = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        for q in queries:
            fn(q)
        runs.append((time.perf_counter() - t0) / len(queries) * 1e3)
    return statistics.median(runs)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1_000_000)
    ap.add_argument("--q", type=int, default=48)
    ap.add_argument("--queries", type=int, default=20)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--radius", type=int, default=2)
    ap.add_argument("--k", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    codes = BitCodeSet(pack_codes(rng.integers(0, 2, size=(args.n, args.q), dtype=np.uint8)), args.q)
    bits = rng.integers(0, 2, size=(args.queries, args.q), dtype=np.uint8)
    words = [query_words(b, args.q) for b in bits]
    w = rng.uniform(0.5, 1.5, size=args.q)
    w2 = w * w

    cases = {
        "hamming_scan": (lambda be: lambda qw: scan.hamming(codes.words, qw, be), words),
        "radius_filter": (lambda be: lambda qw: scan.within_radius(codes.words, qw, args.radius, be), words),
        "weighted_scan": (lambda be: lambda qw: scan.weighted(codes.words, qw, w2, backend=be), words),
        "rank_hamming": (lambda be: lambda b: rank_hamming(codes, b, k=args.k, backend=be), bits),
        "rank_exact": (lambda be: lambda b: rank_exact(codes, b, w, k=args.k, backend=be), bits),
        "rank_two_phase": (lambda be: lambda b: rank_two_phase(codes, b, w, args.radius, args.k, backend=be), bits),
    }
    backends = sorted(scan.BACKENDS)
    print(f"n={args.n} q={args.q} queries={args.queries} radius={args.radius} k={args.k}; ms per query (median)")
    print(f"{'case':<16}" + "".join(f"{b:>12}" for b in backends) + ("     speedup" if len(backends) > 1 else ""))
    for name, (make, queries) in cases.items():
        times = [_median_ms(make(be), queries, args.repeat) for be in backends]
        row = f"{name:<16}" + "".join(f"{t:12.3f}" for t in times)
        if len(times) > 1:
            row += f"{times[1] / times[0]:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
