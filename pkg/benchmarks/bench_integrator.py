#!/usr/bin/env python3
"""Benchmark the compiled Euler-Maruyama kernel against the numpy fallback.

Both backends consume the identical Philox draw sequence, so the run also
cross-checks their outputs. The draw stage itself is timed separately to
show how much of the budget the RNG takes on this machine.
"""

import argparse
import math
import time

import numpy as np

from levspec.params import OscillatorParams, SimulationConfig
from levspec import sde


def time_backend(osc, cfg, backend, repeats):
    best = math.inf
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = sde.simulate_trajectory(osc, cfg, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--duration", type=float, default=0.05,
                    help="simulated seconds at 10 MS/s (default 0.05)")
    ap.add_argument("--dt", type=float, default=1e-9)
    ap.add_argument("--repeats", type=int, default=3)
    ns = ap.parse_args()

    osc = OscillatorParams(omega=2 * math.pi * 1e5, gamma=2e4,
                           temperature=300.0, mass=1e-18)
    cfg = SimulationConfig(dt=ns.dt, sample_rate=1e7, duration=ns.duration,
                           seed=12345)
    n_steps = (cfg.n_samples - 1) * cfg.decimation
    print(f"{n_steps:.3g} integrator steps -> {cfg.n_samples:.3g} samples "
          f"(decimation {cfg.decimation})")

    # RNG-only baseline: the draws both backends consume
    gen = np.random.Generator(np.random.Philox(np.random.SeedSequence(1)))
    t0 = time.perf_counter()
    done = 0
    while done < n_steps:
        m = min(n_steps - done, 1 << 22)
        gen.standard_normal(m, dtype=np.float32)
        done += m
    t_rng = time.perf_counter() - t0
    print(f"{'draws only':>12}: {t_rng:8.3f} s  ({n_steps / t_rng / 1e6:7.1f} Msteps/s)")

    results = {}
    backends = ["numpy"] + (["cython"] if sde.DEFAULT_BACKEND == "cython" else [])
    for backend in backends:
        t, out = time_backend(osc, cfg, backend, ns.repeats)
        results[backend] = out
        print(f"{backend:>12}: {t:8.3f} s  ({n_steps / t / 1e6:7.1f} Msteps/s)")

    if len(results) == 2:
        a, b = results["cython"].samples, results["numpy"].samples
        rms = math.sqrt(float(np.mean(a * a)))
        dev = float(np.max(np.abs(a - b))) / rms
        print(f"cross-backend max deviation: {dev:.2e} of rms "
              f"({'OK' if dev < 1e-8 else 'MISMATCH'})")


if __name__ == "__main__":
    main()
