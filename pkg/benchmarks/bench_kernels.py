"""Time the compiled and NumPy kernels on representative problem sizes.

Usage: ``python benchmarks/bench_kernels.py [--repeat R]``
"""
import argparse
import timeit

import numpy as np

from nlmc import _backend


def cases(rng):
    B, K = 64, 4096
    P = rng.normal(size=(B, 2))
    X = rng.normal(size=(B, K, 2)) + 3.0
    NW = rng.normal(size=(B, K, 2))
    M = 4000
    Q = rng.normal(size=(M, 2))
    H = rng.normal(size=M)
    R = np.linalg.qr(rng.normal(size=(256, 3, 3)))[0]
    L = rng.normal(size=(2000, 3))
    return {
        "flux_sum_batched": (P, X, NW, 2.5),
        "flux_sum_shared": (P, X[0], NW[0], 2.5),
        "lipschitz_sup": (Q, H, 0.01),
        "rotate_nodes": (R, L),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    backends = ["python"] + (["cython"] if _backend.compiled_available() else [])
    rng = np.random.default_rng(0)
    print(f"{'kernel':<18}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for name, a in cases(rng).items():
        t = {}
        for b in backends:
            fn = _backend.get(name, b)
            fn(*a)
            t[b] = min(timeit.repeat(lambda: fn(*a), number=1, repeat=args.repeat))
        sp = t["python"] / t["cython"] if "cython" in t else float("nan")
        print(f"{name:<18}" + "".join(f"{t[b] * 1e3:>10.2f}ms" for b in backends) + f"{sp:>9.1f}x")


if __name__ == "__main__":
    main()
