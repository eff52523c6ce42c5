"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--n 10000] [--k 16 64] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from fyvi import _pykernels

try:
    from fyvi import _ckernels
except ImportError:
    _ckernels = None


def cases(eta):
    yield "softmax", lambda m: m.softmax_rows(eta)
    yield "sparsemax", lambda m: m.sparsemax_rows(eta)
    yield "entmax 1.5", lambda m: m.entmax_bisect_rows(eta, 1.5, 1e-10, 200)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=10000)
    parser.add_argument("--k", type=int, nargs="+", default=[4, 16, 64])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if _ckernels is None:
        print("compiled extension not built; run `python setup.py build_ext --inplace` first")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<12} {'K':>4} {'python ms':>10} {'cython ms':>10} {'speedup':>8}")
    for k in args.k:
        eta = rng.standard_normal((args.n, k))
        for name, fn in cases(eta):
            t_py = min(timeit.repeat(lambda: fn(_pykernels), number=1, repeat=args.repeat)) * 1e3
            if _ckernels is None:
                print(f"{name:<12} {k:>4} {t_py:>10.2f} {'-':>10} {'-':>8}")
                continue
            t_c = min(timeit.repeat(lambda: fn(_ckernels), number=1, repeat=args.repeat)) * 1e3
            print(f"{name:<12} {k:>4} {t_py:>10.2f} {t_c:>10.2f} {t_py / t_c:>7.1f}x")


if __name__ == "__main__":
    main()
