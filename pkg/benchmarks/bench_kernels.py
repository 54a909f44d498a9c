"""Compare the compiled and pure-Python propagation kernels.

    python benchmarks/bench_kernels.py [--repeat 3]

Times a single-momentum run and a thermal batch for both the 2-level dark
model and the 4-level family model, on every available backend, and checks
that the backends agree on the final populations.  The speedup column is
pure-Python time over compiled time.
"""

import argparse
import time

import numpy as np

from georamsey import kernels
from georamsey.baremodel import INITIAL_STATE, evolve_family_batch
from georamsey.core import PulseSchedule
from georamsey.darkspace import evolve_dark_batch
from georamsey.ensemble import thermal_grid


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def cases(schedule):
    p1 = np.zeros((1, 2))
    pth = thermal_grid(50e-9, order=12).momenta

    def dark(p):
        return lambda backend: evolve_dark_batch(schedule, p, np.tile([0.0, 1.0], (len(p), 1)),
                                                 backend=backend)[1]

    def bare(p):
        return lambda backend: evolve_family_batch(schedule, p, np.tile(INITIAL_STATE, (len(p), 1)),
                                                   backend=backend)[1]

    return [("dark, 1 momentum", dark(p1)), (f"dark, {len(pth)} momenta", dark(pth)),
            ("bare, 1 momentum", bare(p1)), (f"bare, {len(pth)} momenta", bare(pth))]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    backends = list(kernels.BACKENDS)
    print(f"backends: {', '.join(backends)} (default {kernels.BACKEND})")
    print(f"{'case':<24}" + "".join(f"{b:>14}" for b in backends) + f"{'speedup':>10}{'max diff':>12}")
    for name, fn in cases(PulseSchedule()):
        row, outs = [], []
        for b in backends:
            t, out = _best(lambda: fn(b), args.repeat)
            row.append(t)
            outs.append(np.abs(out) ** 2)
        diff = max(float(np.max(np.abs(o - outs[0]))) for o in outs)
        speed = row[0] / row[-1] if len(row) > 1 else 1.0
        print(f"{name:<24}" + "".join(f"{t * 1e3:>12.1f}ms" for t in row) + f"{speed:>9.1f}x{diff:>12.1e}")


if __name__ == "__main__":
    main()
