"""Timing comparison of the compiled Gibbs-sweep kernel vs the plain-python
path (the one selected by GLDAKIT_NUMBA=0).

Usage:
    python3 benchmarks/bench_sweep.py [--n 20000] [--m 45] [--k 3] [--v 4]
                                      [--sweeps 5]
"""

import argparse
import time

import numpy as np

from gldakit import _compat
from gldakit._kernels import (component_stats, gibbs_sweep,
                              subject_label_counts)
from gldakit.core import PriorConfig


def build_state(rng, n, m, k, v):
    values = rng.standard_normal((n, v))
    subjects = rng.integers(0, m, n).astype(np.int64)
    labels = rng.integers(0, k, n).astype(np.int64)
    comp_n, comp_s1, comp_s2 = component_stats(values, labels, k)
    subj_counts = subject_label_counts(subjects, labels, m, k)
    return [values, subjects, labels, subj_counts, comp_n, comp_s1, comp_s2]


def time_sweeps(fn, state, prior, sweeps, rng):
    times = []
    for _ in range(sweeps):
        uniforms = rng.random(state[0].shape[0])
        start = time.perf_counter()
        fn(*state, 1.0, prior.mu0, float(prior.lam), float(prior.nu),
           prior.psi, uniforms)
        times.append(time.perf_counter() - start)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=20000)
    parser.add_argument("--m", type=int, default=45)
    parser.add_argument("--k", type=int, default=3)
    parser.add_argument("--v", type=int, default=4)
    parser.add_argument("--sweeps", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    prior = PriorConfig.default(args.v)
    rng = np.random.default_rng(args.seed)
    print(f"N={args.n} M={args.m} K={args.k} V={args.v}, "
          f"best of {args.sweeps} sweeps")

    if not _compat.NUMBA_ENABLED or not hasattr(gibbs_sweep, "py_func"):
        print("compiled path unavailable (GLDAKIT_NUMBA=0 or numba missing); "
              "timing the python path only")
        state = build_state(rng, args.n, args.m, args.k, args.v)
        t = time_sweeps(gibbs_sweep, state, prior, args.sweeps, rng)
        print(f"python  : {t * 1e3:9.2f} ms/sweep")
        return

    # warm up the compiled kernel outside the timed region
    warm = build_state(np.random.default_rng(1), 50, 2, args.k, args.v)
    gibbs_sweep(*warm, 1.0, prior.mu0, float(prior.lam), float(prior.nu),
                prior.psi, np.random.default_rng(1).random(50))

    state = build_state(rng, args.n, args.m, args.k, args.v)
    t_jit = time_sweeps(gibbs_sweep, state, prior, args.sweeps, rng)
    state = build_state(np.random.default_rng(args.seed), args.n, args.m,
                        args.k, args.v)
    t_py = time_sweeps(gibbs_sweep.py_func, state, prior, args.sweeps,
                       np.random.default_rng(args.seed + 1))
    print(f"compiled: {t_jit * 1e3:9.2f} ms/sweep")
    print(f"python  : {t_py * 1e3:9.2f} ms/sweep")
    print(f"speedup : {t_py / t_jit:9.1f}x")


if __name__ == "__main__":
    main()
