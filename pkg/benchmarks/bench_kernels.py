"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--rows 2000] [--cols 256] [--repeat 20] [--excluded 0.0]

``--excluded`` sets the fraction of grid points with ``h = -inf``.  The numba
bound kernels stop a row at the first such point, so any positive fraction
mostly measures that shortcut; the default 0 times a full scan.

Both paths are checked for identical output before timing.
"""

import argparse
import time

import numpy as np

from posslib import _kernels as K


def _inputs(rows, cols, seed, excluded):
    rng = np.random.default_rng(seed)
    h = -rng.uniform(0, 5, cols)
    h[rng.random(cols) < excluded] = -np.inf
    g = rng.random((rows, cols))
    g[rng.random((rows, cols)) < 0.2] = 0.0
    g /= g.max(axis=1, keepdims=True)
    f = rng.random(cols)
    f /= f.max()
    return h, K.safe_log(g), K.safe_log(f), g


def _best(fn, args, repeat):
    fn(*args)  # warm-up (and compilation for numba)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--rows", type=int, default=2000)
    p.add_argument("--cols", type=int, default=256)
    p.add_argument("--repeat", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--excluded", type=float, default=0.0)
    args = p.parse_args()
    if not hasattr(K, "lower_rows_nb"):
        raise SystemExit("numba is not available; nothing to compare")

    h, lg, lf, g = _inputs(args.rows, args.cols, args.seed, args.excluded)
    lf2 = np.ascontiguousarray(np.broadcast_to(lf, lg.shape))
    cases = {
        "lower_cbo": (K.lower_rows_np, K.lower_rows_nb, (h, lg)),
        "upper_cbo": (K.upper_rows_np, K.upper_rows_nb, (h, lg)),
        "d_max": (K.dmax_rows_np, K.dmax_rows_nb, (lg, lf2)),
        "leq": (K.leq_rows_np, K.leq_rows_nb, (g, np.ascontiguousarray(np.broadcast_to(g[0], g.shape)), 1e-12)),
    }
    print(f"{args.rows} candidates x {args.cols} grid points, best of {args.repeat}")
    print(f"{'kernel':<10} {'numpy [ms]':>11} {'numba [ms]':>11} {'speed-up':>9}")
    for name, (f_np, f_nb, a) in cases.items():
        np.testing.assert_array_equal(f_np(*a), f_nb(*a))
        t_np = _best(f_np, a, args.repeat)
        t_nb = _best(f_nb, a, args.repeat)
        print(f"{name:<10} {1e3 * t_np:>11.3f} {1e3 * t_nb:>11.3f} {t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
