"""Benchmark the jit-compiled hot kernels against the pure-numpy fallback.

Usage:
    python benchmarks/bench_kernels.py [--nodes 4096] [--particles 4] [--repeat 5]

Both implementations are imported directly (the env flag only controls the
in-package dispatch), so one process measures both paths.  The first numba
call compiles; a warmup round keeps that out of the timings.
"""

import argparse
import time

import numpy as np

from tdks import _kernels


def _time(fn, *args, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--nodes", type=int, default=4096)
    parser.add_argument("--particles", type=int, default=4)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    pts = rng.random((args.nodes, 3))
    psi = rng.standard_normal((args.nodes, args.particles)) + 1j * rng.standard_normal(
        (args.nodes, args.particles)
    )
    v = rng.random(args.nodes)

    if not _kernels.HAVE_NUMBA:
        print("numba path unavailable (TDKS_PURE_NUMPY set or numba missing); "
              "only the numpy fallback will be timed")

    cases = [
        (
            "coulomb kernel assembly",
            lambda: _kernels.pairwise_inverse_distance(pts, 0.1, 5.0),
            lambda: _kernels.pairwise_inverse_distance_numpy(pts, 0.1, 5.0),
        ),
        (
            "density from channels",
            lambda: _kernels.density_from_channels(psi),
            lambda: _kernels.density_numpy(psi),
        ),
        (
            "potential phase apply",
            lambda: _kernels.phase_apply(psi, v, 1e-3),
            lambda: _kernels.phase_apply_numpy(psi, v, 1e-3),
        ),
    ]

    print(f"nodes={args.nodes} particles={args.particles} repeat={args.repeat}")
    print(f"{'kernel':<26}{'dispatch':>12}{'numpy':>12}{'speedup':>10}")
    for name, fast, plain in cases:
        fast()  # warmup / jit compile
        plain()
        t_fast = _time(fast, repeat=args.repeat)
        t_plain = _time(plain, repeat=args.repeat)
        print(f"{name:<26}{t_fast * 1e3:>10.2f}ms{t_plain * 1e3:>10.2f}ms{t_plain / t_fast:>9.1f}x")


if __name__ == "__main__":
    main()
