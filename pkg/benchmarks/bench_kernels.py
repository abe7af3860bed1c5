"""Timing comparison of the JIT-compiled and pure-Python kernel paths.

The path is chosen at import time from FLOWERID_PURE_NUMPY, so each variant
runs in its own subprocess.  Run without arguments to print a table:

    python3 benchmarks/bench_kernels.py
"""

import argparse
import json
import os
import statistics
import subprocess
import sys
import time

import numpy as np


def make_workloads(seed=0):
    rng = np.random.default_rng(seed)

    # blobby mask with a long, wiggly outer boundary
    yy, xx = np.mgrid[0:400, 0:400]
    r = np.hypot(yy - 200.0, xx - 200.0)
    theta = np.arctan2(yy - 200.0, xx - 200.0)
    mask = (r < 150.0 + 30.0 * np.sin(7.0 * theta)).astype(np.uint8)

    codes = rng.integers(0, 8, size=(400, 400)).astype(np.int32)

    # linearly separable two-class blob pair for the SMO solver
    n = 300
    x = np.vstack([rng.normal(-1.0, 1.0, (n // 2, 5)),
                   rng.normal(+1.0, 1.0, (n // 2, 5))])
    y = np.repeat([-1.0, 1.0], n // 2)
    k = np.exp(-0.5 * ((x[:, None, :] - x[None, :, :]) ** 2).sum(-1))
    return mask, codes, k, y


def run_benchmarks(repeats):
    from flowerid import kernels

    mask, codes, k, y = make_workloads()
    cases = {
        "trace_boundary": lambda: kernels.trace_boundary(mask),
        "label_regions": lambda: kernels.label_regions(codes),
        "solve_smo": lambda: kernels.solve_smo(k, y, 10.0, 1e-3, 2_000_000),
    }
    out = {}
    for name, fn in cases.items():
        fn()  # warm-up; also triggers JIT compilation on the numba path
        samples = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            fn()
            samples.append(time.perf_counter() - t0)
        out[name] = statistics.median(samples)
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=7)
    ap.add_argument("--worker", action="store_true",
                    help="time the current import path and emit JSON")
    args = ap.parse_args()

    if args.worker:
        json.dump(run_benchmarks(args.repeats), sys.stdout)
        return 0

    results = {}
    for label, flag in (("numba", "0"), ("pure", "1")):
        env = dict(os.environ, FLOWERID_PURE_NUMPY=flag)
        r = subprocess.run(
            [sys.executable, __file__, "--worker",
             "--repeats", str(args.repeats)],
            env=env, capture_output=True, text=True, check=True)
        results[label] = json.loads(r.stdout)

    print(f"{'kernel':<16} {'numba (ms)':>12} {'pure (ms)':>12} {'speedup':>9}")
    for name in results["numba"]:
        tn = results["numba"][name] * 1e3
        tp = results["pure"][name] * 1e3
        print(f"{name:<16} {tn:>12.2f} {tp:>12.2f} {tp / tn:>8.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
