"""Compare the compiled kernel backend against the pure-Python fallback.

Times the three hot paths (stencil application, gradient inner products,
the shifted solve) plus one short end-to-end blow-up run per backend.

Usage: python3 benchmarks/bench_kernels.py [--cells 512] [--repeats 50]
"""

import argparse
import math
import time

import numpy as np

from sdwave import Field, SolverConfig, build_domain, run, zeros
from sdwave import _kernels
from sdwave.mesh import norm_grad_sq, solve_shifted_arr
from sdwave.nonlinearity import power


def timeit(fn, repeats):
    fn()  # warm up
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_backend(name, cells, repeats):
    _kernels.use(name)
    rows = {}

    d1 = build_domain(1, 1.0, cells * cells)  # same dof count as the square
    d2 = build_domain(2, 1.0, cells)
    u1 = Field(d1, np.sin(math.pi * d1.coords["x"]))
    u2 = Field(d2, np.sin(math.pi * d2.coords["x"])
               * np.sin(math.pi * d2.coords["y"]))
    h = d1.spacing[0]

    rows["laplacian 1d"] = timeit(
        lambda: _kernels.laplacian_1d(u1.values, h), repeats)
    rows["laplacian 2d"] = timeit(
        lambda: _kernels.laplacian_2d(u2.values, cells - 1, cells - 1,
                                      d2.spacing[0], d2.spacing[1]), repeats)
    rows["grad inner 1d"] = timeit(lambda: norm_grad_sq(u1), repeats)
    rows["grad inner 2d"] = timeit(lambda: norm_grad_sq(u2), repeats)
    rows["shifted solve 1d"] = timeit(
        lambda: solve_shifted_arr(d1, 1.0, 0.5, u1.values), repeats)
    rows["shifted solve 2d"] = timeit(
        lambda: solve_shifted_arr(d2, 1.0, 0.5, u2.values), repeats)

    d, nl = build_domain(1, 1.0, 256), power(4.0)
    u0 = Field(d, 6.0 * np.sin(math.pi * d.coords["x"]))

    def blowup_run():
        run(SolverConfig(t_end=5.0), u0, zeros(d), nl)

    rows["blow-up run n=256"] = timeit(blowup_run, max(1, repeats // 10))
    return rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--cells", type=int, default=512)
    ap.add_argument("--repeats", type=int, default=50)
    args = ap.parse_args()

    backends = _kernels.available_backends()
    print(f"backends: {', '.join(backends)}  "
          f"(grid {args.cells}^2 and {args.cells ** 2} in 1d)")
    results = {b: bench_backend(b, args.cells, args.repeats) for b in backends}
    _kernels.use(backends[-1])

    width = max(len(k) for k in next(iter(results.values())))
    header = f"{'kernel':<{width}}" + "".join(f"{b:>14}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for key in next(iter(results.values())):
        line = f"{key:<{width}}"
        for b in backends:
            line += f"{results[b][key] * 1e3:>12.3f}ms"
        if len(backends) == 2:
            line += f"{results['python'][key] / results['cython'][key]:>9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
