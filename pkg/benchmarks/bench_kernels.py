"""Wall-clock comparison of the simulation backends on scenario A.

    python benchmarks/bench_kernels.py --t-end 2 --repeat 3

The generic object-level stepper is much slower, so it runs a shorter horizon
(``--generic-t-end``) and is reported per step.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from dto_sim import kernels, scenario_a
from dto_sim.sim import SimConfig, run


def bench(backend: str, t_end: float, repeat: int, dt: float):
    cfg = SimConfig(scenario_a(), dt=dt, t_end=t_end, backend=backend)
    best = np.inf
    traj = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        traj = run(cfg)
        best = min(best, time.perf_counter() - t0)
    return best, cfg.n_steps, traj


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--t-end", type=float, default=2.0)
    p.add_argument("--generic-t-end", type=float, default=0.2)
    p.add_argument("--dt", type=float, default=1e-4)
    p.add_argument("--repeat", type=int, default=3)
    a = p.parse_args(argv)

    rows = []
    ref = None
    for backend in ("cython", "python"):
        if backend not in kernels.BACKENDS:
            print(f"{backend:8s} unavailable")
            continue
        secs, steps, traj = bench(backend, a.t_end, a.repeat, a.dt)
        same = "" if ref is None else ("  bit-identical" if np.array_equal(ref.states, traj.states) else "  DIFFERS")
        if ref is None:
            ref = traj
        rows.append((backend, secs, steps))
        print(f"{backend:8s} {secs:9.4f} s  {steps} steps  {1e6 * secs / steps:8.3f} us/step{same}")
    secs, steps, _ = bench("generic", a.generic_t_end, 1, a.dt)
    rows.append(("generic", secs, steps))
    print(f"{'generic':8s} {secs:9.4f} s  {steps} steps  {1e6 * secs / steps:8.3f} us/step")
    base = rows[0][1] / rows[0][2]
    for name, s, n in rows[1:]:
        print(f"{name} / {rows[0][0]} per-step ratio: {(s / n) / base:.1f}x")


if __name__ == "__main__":
    main()
