"""Time the numba and numpy kernel backends on MAG-sized inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--out results.csv]

Both backends are imported directly, so the GLPOS_NUMBA flag does not matter
here. The numba kernels are called once before timing to exclude JIT cost.
"""
import argparse
import csv
import sys
import time

import numpy as np

from glpos.graph_features import _csr
from glpos.kernels import _numpy

try:
    from glpos.kernels import _numba
except ImportError:
    _numba = None


def mag_like_graphs(count, rng):
    """Random graphs shaped like 6-language verse graphs (~50 nodes)."""
    out = []
    for _ in range(count):
        n = int(rng.integers(30, 70))
        p = 4.0 / n
        iu = np.triu_indices(n, 1)
        keep = rng.random(len(iu[0])) < p
        out.append(_csr(n, np.column_stack([iu[0][keep], iu[1][keep]])))
    return out


def ibm1_inputs(rng, n_tok=200_000, n_pairs=50_000):
    lens = rng.integers(1, 12, size=n_tok)
    seg = np.repeat(np.arange(n_tok), lens)
    flat = rng.integers(0, n_pairs, size=len(seg))
    return rng.uniform(0.01, 1.0, size=n_pairs), flat, seg, lens.astype(float), n_tok


def cases(rng):
    graphs = mag_like_graphs(200, rng)
    ibm = ibm1_inputs(rng)
    vals = rng.normal(size=(200_000, 4, 16))
    seg = np.sort(rng.integers(0, 20_000, size=200_000))
    return {
        "path_centralities x200": lambda be: [be.path_centralities(ip, ix) for ip, ix in graphs],
        "ibm1_expectation": lambda be: be.ibm1_expectation(*ibm),
        "segment_sum": lambda be: be.segment_sum(vals, seg, 20_000),
        "segment_max": lambda be: be.segment_max(vals, seg, 20_000),
    }


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", help="also write the table as CSV")
    args = ap.parse_args(argv)
    rows = []
    for name, fn in cases(np.random.default_rng(args.seed)).items():
        t_np = best_of(lambda: fn(_numpy), args.repeat)
        t_nb = float("nan")
        if _numba is not None:
            fn(_numba)    # JIT warm-up
            t_nb = best_of(lambda: fn(_numba), args.repeat)
        rows.append((name, t_np, t_nb, t_np / t_nb))
    print(f"{'kernel':26s} {'numpy s':>10s} {'numba s':>10s} {'speedup':>8s}")
    for name, a, b, s in rows:
        print(f"{name:26s} {a:10.4f} {b:10.4f} {s:8.1f}")
    if args.out:
        with open(args.out, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["kernel", "numpy_seconds", "numba_seconds", "speedup"])
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
