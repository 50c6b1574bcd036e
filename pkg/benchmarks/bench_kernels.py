"""Compare the numba-compiled and pure-numpy tent-mass kernels.

Run with ``python3 benchmarks/bench_kernels.py``.  Setting ``HOMFISHER_NUMBA=0``
makes the package itself use the numpy path; this script times both paths
side by side regardless, plus one end-to-end optimal-delay search.
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from homfisher import kernels


def best_of(fn, repeats):
    fn()  # warm up (triggers compilation on the numba path)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def end_to_end(numba_flag):
    code = ("import time; from homfisher import PhysicalParams, measurement_for, optimal_delta;"
            "m = measurement_for('NRTR-HOM', 0.1); p = PhysicalParams(0, 0.9, 4.6, 0.4);"
            "optimal_delta(m, p); t = time.perf_counter(); optimal_delta(m, p);"
            "print(time.perf_counter() - t)")
    env = dict(os.environ, HOMFISHER_NUMBA=numba_flag)
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rows", type=int, default=2000)
    parser.add_argument("--bins", type=int, default=60)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    mu = np.linspace(-8.0, 8.0, args.rows)
    s, width = 0.5, 0.25
    print(f"folded tent masses: {args.rows} delays x {args.bins + 1} separations")
    t_np = best_of(lambda: kernels.np_folded_tent_mass_grid(mu, s, width, args.bins), args.repeats)
    print(f"  numpy  {1e3 * t_np:9.3f} ms")
    if kernels.HAVE_NUMBA:
        t_nb = best_of(lambda: kernels.folded_tent_mass_grid(mu, s, width, args.bins), args.repeats)
        diff = np.max(np.abs(kernels.np_folded_tent_mass_grid(mu, s, width, args.bins)
                             - kernels.folded_tent_mass_grid(mu, s, width, args.bins)))
        print(f"  numba  {1e3 * t_nb:9.3f} ms   speedup {t_np / t_nb:5.2f}x   max |diff| {diff:.1e}")
    else:
        print("  numba  unavailable (not installed or disabled by HOMFISHER_NUMBA)")

    print("optimal-delay search, NRTR-HOM at T*sigma = 0.46")
    for flag in ("0", "1"):
        label = "numba" if flag == "1" else "numpy"
        print(f"  {label:<6} {1e3 * end_to_end(flag):9.3f} ms")


if __name__ == "__main__":
    main()
