"""Time the compiled core against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--modes 32 64 128]
"""
import argparse
import timeit

import numpy as np

from stochheat import _backend, _fallback
from stochheat.covariance import Kernel, assemble_covariance, factorize
from stochheat.noise import ou_path_exact, sample_brownian


def _cases(n):
    steps = n * n
    ou = ou_path_exact(sample_brownian(factorize(assemble_covariance(Kernel.q2(0.1), n)), steps, 1.0, 0))
    decay = np.exp(-np.arange(1, n + 1.0) ** 2 / steps)
    y0 = np.zeros(n)
    y0[0] = 0.5
    grid = 4 * n - 1
    return {
        "exp_euler/rational5": lambda k: k.exp_euler(
            y0, decay, 1 / steps, ou.coefficients, grid, _fallback.VARIANT_RATIONAL5, 0.0, 500.0),
        "exp_euler/cubic": lambda k: k.exp_euler(
            y0, decay, 1 / steps, ou.coefficients, grid, _fallback.VARIANT_CUBIC, 0.0, 500.0),
        "linear_recursion": lambda k: k.linear_recursion(decay, ou.increments, y0),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--modes", type=int, nargs="+", default=[32, 64, 128])
    args = ap.parse_args()
    names = [b for b in ("python", "compiled") if b in _backend.AVAILABLE]
    print(f"{'case':24s} {'N':>4s} " + " ".join(f"{b:>12s}" for b in names) + "   speedup")
    for n in args.modes:
        for case, fn in _cases(n).items():
            best = {}
            for b in names:
                kern = _backend.get(b)
                best[b] = min(timeit.repeat(lambda: fn(kern), number=1, repeat=args.repeat))
            row = " ".join(f"{best[b]:12.4f}" for b in names)
            ratio = best["python"] / best["compiled"] if "compiled" in best else float("nan")
            print(f"{case:24s} {n:4d} {row}   {ratio:6.1f}x")


if __name__ == "__main__":
    main()
