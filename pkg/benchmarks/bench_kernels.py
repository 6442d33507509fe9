"""Time the compiled and pure-Python coordinate-descent sweeps.

Usage: python3 benchmarks/bench_kernels.py [--p 4 8 12] [--repeat 5]

Each row times full sweeps on the same Gram system and a full lasso path,
once per available kernel, and checks that both kernels land on the same
solution.
"""
import argparse
import time

import numpy as np

from lyaplasso import _kernels
from lyaplasso.lasso import fit_path, lambda_max, solve_lasso
from lyaplasso.linalg import solve_lyapunov
from lyaplasso.model import GramSystem
from lyaplasso.simulation import RngSeed, sample_stable_dominant


def _gram(p, seed):
    m = sample_stable_dominant(p, 2.0 / p, RngSeed(seed))
    return GramSystem.from_covariance(solve_lyapunov(m, 2.0 * np.eye(p)))


def _best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_sweeps(gs, kernel, sweeps, repeat):
    gamma = np.ascontiguousarray(gs.gamma)
    coords = np.arange(gamma.shape[0], dtype=np.intp)
    lam = 0.1 * np.abs(gs.g).max()

    def run():
        v = np.zeros(gamma.shape[0])
        grad = -gs.g.copy()
        for _ in range(sweeps):
            kernel(gamma, v, grad, lam, coords)

    return _best_of(run, repeat) / sweeps


def bench_path(gs, kernel, repeat, grid_size):
    lam_max = lambda_max(gs)
    saved = _kernels.cd_sweep
    _kernels.cd_sweep = kernel
    try:
        return _best_of(lambda: fit_path(gs, grid_size=grid_size, lam_max=lam_max), repeat)
    finally:
        _kernels.cd_sweep = saved


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--p", type=int, nargs="+", default=[4, 8, 12, 16])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--sweeps", type=int, default=20)
    parser.add_argument("--grid-size", type=int, default=30)
    args = parser.parse_args()

    names = list(_kernels.KERNELS)
    print(f"default backend: {_kernels.BACKEND}; available: {', '.join(names)}")
    header = f"{'p':>4} {'kernel':>8} {'sweep ms':>10} {'path s':>9}"
    print(header)
    print("-" * len(header))
    for p in args.p:
        gs = _gram(p, seed=p)
        sols = {}
        for name in names:
            kern = _kernels.KERNELS[name]
            per_sweep = bench_sweeps(gs, kern, args.sweeps, args.repeat)
            path_s = bench_path(gs, kern, args.repeat, args.grid_size)
            sols[name] = solve_lasso(gs, 0.05 * np.abs(gs.g).max(), kernel=kern, tol=1e-10).v
            print(f"{p:>4} {name:>8} {1e3 * per_sweep:>10.3f} {path_s:>9.3f}")
        if len(sols) > 1:
            gap = max(np.abs(a - b).max() for a in sols.values() for b in sols.values())
            print(f"{'':>4} {'max gap':>8} {gap:>10.1e}")


if __name__ == "__main__":
    main()
