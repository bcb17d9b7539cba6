"""Compare the compiled and pure-numpy kernels.

    python benchmarks/bench_kernels.py [--sizes 501 1001 2001] [--repeat 5]

Times the lower-triangular row sums, the windowed modulus, and one
application of ``T`` with a kernel that does not factor (so the row sums
are on the hot path). Every timing is checked for agreement between the
two backends first.
"""

import argparse
import timeit

import numpy as np

from voltfix import kernels
from voltfix.comparison import EXAMPLE32_PROBLEM, preset_triple
from voltfix.grid import KernelQuadrature
from voltfix.problem import IntegralProblem

NONSEPARABLE_G = "exp(0-(t-s)^2)*cos(x+t)/(1+t*s)"


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def bench_rowsum(n, repeat):
    G = np.random.default_rng(n).normal(size=(n, n))
    out = {}
    for backend in ("cython", "python"):
        for simpson in (False, True):
            out[backend, simpson] = kernels.tri_rowsum(G, 0.01, simpson, backend=backend)
    for simpson in (False, True):
        assert np.allclose(out["cython", simpson], out["python", simpson], rtol=1e-12, atol=1e-12)
    return {b: best_of(lambda b=b: kernels.tri_rowsum(G, 0.01, True, backend=b), repeat) for b in ("cython", "python")}


def bench_modulus(n, repeat, divisor=256):
    X = np.random.default_rng(n).normal(size=(64, n))
    w = max(1, n // divisor)
    a = kernels.window_modulus(X, w, backend="cython")
    b = kernels.window_modulus(X, w, backend="python")
    assert np.array_equal(a, b)
    return {bk: best_of(lambda bk=bk: kernels.window_modulus(X, w, backend=bk), repeat) for bk in ("cython", "python")}


def bench_apply(n, repeat):
    spec = dict(EXAMPLE32_PROBLEM, g=NONSEPARABLE_G)
    p = IntegralProblem.from_strings(**spec, triple=preset_triple("example32"))
    grid = p.grid(n)
    x = np.sin(grid.t)
    quads = {b: KernelQuadrature(p.g, grid, "trapezoid", backend=b) for b in ("cython", "python")}
    assert not quads["cython"].separable
    assert np.allclose(quads["cython"](x), quads["python"](x), rtol=1e-12, atol=1e-13)
    return {b: best_of(lambda q=q: q(x), repeat) for b, q in quads.items()}


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", type=int, nargs="+", default=[501, 1001, 2001])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    if kernels.BACKEND != "cython":
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation` with Cython available")
    print(f"{'kernel':<22}{'n':>7}{'cython ms':>12}{'python ms':>12}{'speedup':>9}")
    cases = (
        ("tri_rowsum (simpson)", bench_rowsum),
        ("modulus w = n/256", bench_modulus),
        ("modulus w = n/4", lambda n, r: bench_modulus(n, r, 4)),
        ("apply T, non-separable", bench_apply),
    )
    for name, fn in cases:
        for n in args.sizes:
            t = fn(n, args.repeat)
            print(f"{name:<22}{n:>7}{1e3 * t['cython']:>12.2f}{1e3 * t['python']:>12.2f}{t['python'] / t['cython']:>9.1f}")


if __name__ == "__main__":
    main()
