"""Time the compiled and pure-Python kernel backends on the same inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--points 2000]

Prints one line per (kernel, backend) with the best wall time and the
speed-up of the compiled backend. Outputs of the two backends are checked
for bitwise equality before timing.
"""
import argparse
import time

import numpy as np
import scipy.sparse as sp

from xreg.kernels import available_backends, load_backend
from xreg.sparse import csr_arrays


def best_of(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(n_points, seed):
    rng = np.random.default_rng(seed)
    X = sp.random(n_points, 500, density=0.02, random_state=rng, format="csr")
    X.sort_indices()
    indptr, indices, data = csr_arrays(X)
    rows = np.arange(n_points, dtype=np.int64)
    z = rng.uniform(size=n_points)
    pos, neg = 10 * z, 10 * (1 - z)
    vec = rng.standard_normal(500)
    a = np.unique(rng.integers(0, 100_000, 2000))
    b = np.unique(rng.integers(0, 100_000, 2000))
    av, bv = rng.standard_normal(a.size), rng.standard_normal(b.size)
    return {
        "dual_cd_logistic": lambda k: k.dual_cd_logistic(indptr, indices, data, rows, pos, neg,
                                                         500, 0.1, 100, 1, False)[0],
        "rows_dot_dense": lambda k: k.rows_dot_dense(indptr, indices, data, rows, vec),
        "sparse_dot": lambda k: k.sparse_dot(a, av, b, bv),
        "shuffle_inplace": lambda k: _shuffled(k, n_points),
    }


def _shuffled(k, n):
    arr = np.arange(n, dtype=np.int64)
    k.shuffle_inplace(arr, 42)
    return arr


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--points", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    names = available_backends()
    if "compiled" not in names:
        print("compiled backend not built; timing the python backend only")
    backends = {n: load_backend(n) for n in names}
    print(f"{'kernel':<18} {'backend':<9} {'best_s':>10} {'speedup':>8}")
    for kernel, fn in cases(args.points, args.seed).items():
        outs = {n: np.asarray(fn(b)) for n, b in backends.items()}
        if len(outs) == 2 and not np.array_equal(outs["compiled"], outs["python"]):
            raise SystemExit(f"{kernel}: backends disagree")
        times = {n: best_of(lambda b=b: fn(b), args.repeat) for n, b in backends.items()}
        for n, t in times.items():
            ratio = times["python"] / t if n == "compiled" else 1.0
            print(f"{kernel:<18} {n:<9} {t:>10.5f} {ratio:>7.1f}x")


if __name__ == "__main__":
    main()
