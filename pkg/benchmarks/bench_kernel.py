#!/usr/bin/env python3
"""Compare the compiled stepping kernel against the pure-Python fallback.

Both run the same scenario; results must agree bit-for-bit, so the only
difference worth reporting is wall time.

Usage: python benchmarks/bench_kernel.py [--repeat N]
"""

import argparse
import time

import numpy as np

from snapnet import _core
from snapnet.netsim import simulate
from snapnet.scenario import load_scenario

CASES = [
    ("single_dome", "single_dome", 2.2),
    ("quadruped_1hz", "quadruped_1hz", 2.0),
]


def run(backend, network, solver, t_end, repeat):
    best = np.inf
    trace = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        trace = simulate(network, solver, t_end, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, trace


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    backends = _core.available_backends()
    if "compiled" not in backends:
        print("compiled kernel not available; install with a C compiler to compare")
    print(f"{'case':<16} {'backend':<10} {'steps':>8} {'best wall':>12} {'speedup':>9}")
    for label, preset, t_end in CASES:
        sc, _ = load_scenario(preset)
        results = {}
        for backend in ("python", "compiled") if "compiled" in backends else ("python",):
            wall, trace = run(backend, sc.network, sc.solver, t_end, args.repeat)
            results[backend] = (wall, trace)
            speedup = (
                f"{results['python'][0] / wall:8.1f}x" if backend == "compiled" else ""
            )
            print(
                f"{label:<16} {backend:<10} {trace.stats['naccept']:>8} "
                f"{wall * 1e3:>10.1f}ms {speedup:>9}"
            )
        if "compiled" in results:
            a, b = results["python"][1], results["compiled"][1]
            same = (
                np.array_equal(a.pressures, b.pressures)
                and np.array_equal(a.volumes, b.volumes)
                and a.events == b.events
            )
            print(f"{'':<16} results bit-identical: {same}")


if __name__ == "__main__":
    main()
