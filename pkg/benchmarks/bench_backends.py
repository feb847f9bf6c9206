#!/usr/bin/env python3
"""Compare the compiled solve kernel against the pure-Python fallback.

Both backends run the identical lattice-of-Nelder-Mead algorithm and return
bit-identical results; this script measures the throughput gap on the two
workloads that dominate runtime: single transition-layer solves and a
sampling batch.

Usage:
    python benchmarks/bench_backends.py [--solves N] [--batch N]
"""

import argparse
import time

import numpy as np


def time_solves(kernel, deltas, v=0.1):
    start = time.perf_counter()
    for d in deltas:
        kernel.solve_lattice(v, float(d), 2, 2, 1e-8, 1e-13, 1200)
    return time.perf_counter() - start


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--solves", type=int, default=300,
                        help="single-solve repetitions per backend")
    parser.add_argument("--batch", type=int, default=200,
                        help="sampling-batch size per backend")
    args = parser.parse_args()

    try:
        from shockbound import _kernel
    except ImportError:
        raise SystemExit("compiled kernel not built; run pip install -e . first")
    from shockbound import _kernel_py

    rng = np.random.default_rng(1)
    deltas = rng.uniform(0.0, 0.1, args.solves)

    # correctness first: identical bits on a shared workload
    for d in deltas[:25]:
        a = _kernel.solve_lattice(0.1, float(d), 2, 2, 1e-8, 1e-13, 1200)
        b = _kernel_py.solve_lattice(0.1, float(d), 2, 2, 1e-8, 1e-13, 1200)
        assert a == b, f"backend mismatch at delta={d}"

    t_c = time_solves(_kernel, deltas)
    t_p = time_solves(_kernel_py, deltas)
    per_c = t_c / args.solves * 1e6
    per_p = t_p / args.solves * 1e6

    print(f"single solves        x{args.solves}")
    print(f"  compiled kernel    {per_c:10.1f} us/solve")
    print(f"  pure python        {per_p:10.1f} us/solve")
    print(f"  speedup            {per_p / per_c:10.1f}x")

    import os
    from shockbound import sampling

    for name, env in (("compiled", None), ("python", "1")):
        if env is None:
            os.environ.pop("SHOCKBOUND_PURE_PYTHON", None)
        else:
            os.environ["SHOCKBOUND_PURE_PYTHON"] = env
        # re-dispatch through a fresh interpreter state
        import importlib
        from shockbound import _backend

        importlib.reload(_backend)
        importlib.reload(sampling)
        start = time.perf_counter()
        run = sampling.mc_run(0.1, 0.1, args.batch, dist="uniform", seed=3)
        elapsed = time.perf_counter() - start
        print(f"mc_run n={args.batch} [{name:8s}] {elapsed:8.2f} s "
              f"(z_mean={run.z.mean():.6f})")
    os.environ.pop("SHOCKBOUND_PURE_PYTHON", None)


if __name__ == "__main__":
    main()
