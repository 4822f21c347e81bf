"""Compare the numba kernels with their pure-numpy fallbacks.

    python benchmarks/bench_kernels.py [--n 80] [--repeat 20]

Each kernel is timed on inputs the size of an ``n x n`` simulation, after one
warm-up call so that JIT compilation is excluded. A full time step is timed
with each kernel set as well. Results are printed in microseconds per call.
"""

import argparse
import timeit

import numpy as np

from membrane_patterns import kernels
from membrane_patterns.diagnostics import pattern_metrics
from membrane_patterns.mesh import assemble_stiffness, build_torus_mesh
from membrane_patterns.model import ModelParams, Operators, SimState
from membrane_patterns.scheme import advance


def kernel_cases(n, rng):
    mesh = build_torus_mesh(n)
    K = assemble_stiffness(mesh)
    x = rng.normal(size=n * n)
    s = rng.uniform(-1.2, 1.2, n * n)
    mask = rng.uniform(size=(n, n)) > 0.6
    A = np.array([[1.0, 0.2], [0.2, 0.5]])
    return {
        "csr_matvec": lambda k: k.csr_matvec(K.indptr, K.indices, K.data, x),
        "log_convex": lambda k: k.log_convex(s, 4.0, 0.98),
        "log_resolvent": lambda k: k.log_resolvent(s, 0.01, 4.0, 1e-12, 200),
        "p1_local_matrices": lambda k: k.p1_local_matrices(mesh.local_xy, A),
        "label_periodic": lambda k: k.label_periodic(mask),
    }


def time_call(fn, repeat):
    fn()
    return min(timeit.repeat(fn, number=1, repeat=repeat)) * 1e6


def time_step(n, ks, repeat):
    saved = kernels.K
    kernels.K = ks
    try:
        params = ModelParams.isotropic(eps=0.01, kappa=0.01, tau=1e-4, sigma=1.0, lam=0.6)
        ops = Operators(build_torus_mesh(n), params)
        rng = np.random.default_rng(0)
        u = 0.1 + 0.2 * rng.uniform(-1, 1, n * n)
        state = SimState(u, np.zeros(n * n), np.zeros(n * n), np.zeros(n * n))
        step = time_call(lambda: advance(state, params, ops), max(3, repeat // 4))
        labels = time_call(lambda: pattern_metrics(u), max(3, repeat // 4))
        return step, labels
    finally:
        kernels.K = saved


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=80)
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args(argv)
    if not kernels.HAVE_NUMBA:
        print("numba is not installed; only the numpy kernels are available")
        return
    rng = np.random.default_rng(1)
    cases = kernel_cases(args.n, rng)
    print(f"n = {args.n}, best of {args.repeat}, microseconds per call")
    print(f"{'kernel':20s} {'numpy':>12s} {'numba':>12s} {'speedup':>8s}")
    for name, fn in cases.items():
        t_np = time_call(lambda: fn(kernels.NUMPY_KERNELS), args.repeat)
        t_nb = time_call(lambda: fn(kernels.NUMBA_KERNELS), args.repeat)
        print(f"{name:20s} {t_np:12.1f} {t_nb:12.1f} {t_np / t_nb:8.2f}")
    for label, ks in (("numpy", kernels.NUMPY_KERNELS), ("numba", kernels.NUMBA_KERNELS)):
        step, pat = time_step(args.n, ks, args.repeat)
        print(f"time step ({label}) {step:12.1f}   pattern metrics ({label}) {pat:10.1f}")


if __name__ == "__main__":
    main()
