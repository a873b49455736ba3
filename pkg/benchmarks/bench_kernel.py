"""Wall-clock comparison of the compiled and pure-Python integration kernels.

Usage: python3 benchmarks/bench_kernel.py [--seconds 1.0] [--repeat 3]
"""
import argparse
import math
import time

import numpy as np

from eaholab.emt import kernel
from eaholab.emt.network import InverterSpec, assemble
from eaholab.emt.simulate import Scenario, simulate
from eaholab.model import TABLE1_PARAMS, GridSource, LoadProfile, table1_setpoints

CASES = {
    "single eaho, grid": (("eaho",), LoadProfile(), GridSource(220.0, 2 * math.pi * 50), 5e-5),
    "eaho+droop, island": (("eaho", "droop"), LoadProfile(94.0), GridSource(220.0, 2 * math.pi * 50, connected=False), 5e-5),
}


def bench(backend, kinds, load, grid, dt, seconds, repeat):
    invs = [InverterSpec(TABLE1_PARAMS[k], table1_setpoints(1000.0, 0.0), 7e-3, 0.3) for k in kinds]
    system = assemble(invs, load, grid, 1e-3, 1.0)
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        ts = simulate(system, Scenario(seconds, dt), decimation=10, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, ts


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seconds", type=float, default=1.0, help="simulated time per run")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    print(f"backends available: {', '.join(sorted(kernel.BACKENDS))}")
    for name, (kinds, load, grid, dt) in CASES.items():
        steps = round(args.seconds / dt)
        res = {b: bench(b, kinds, load, grid, dt, args.seconds, args.repeat) for b in kernel.BACKENDS}
        line = [f"{name:22s} {steps} steps"]
        for b, (t, _) in res.items():
            line.append(f"{b}: {t * 1e3:8.1f} ms ({steps / t / 1e3:8.1f} ksteps/s)")
        if len(res) == 2:
            (tc, a), (tp, b) = res["compiled"], res["python"]
            dev = max(np.max(np.abs(a[c] - b[c])) for c in a.names)
            line.append(f"speed-up {tp / tc:6.1f}x, max channel difference {dev:.2e}")
        print("  ".join(line))


if __name__ == "__main__":
    main()
