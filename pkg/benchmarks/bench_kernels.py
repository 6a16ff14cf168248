"""Compare the numba and pure-numpy backends on the two hot paths.

    python benchmarks/bench_kernels.py [--frames N] [--repeat R]

Reports the best of R wall times for the level-wise GTH solve of the
reference CAC chain and for a simulator run on the fast desk config,
and checks that both backends agree.
"""

import argparse
import time
from pathlib import Path

import numpy as np

from ofdma_cac import SimConfig, build_transition_matrix, load_config, reference_config, simulate, solve_stationary

FAST = Path(__file__).resolve().parent.parent / "configs" / "fast_desk.cfg"


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--frames", type=int, default=300_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    P = build_transition_matrix(reference_config())
    cfg = load_config(FAST)
    sim = SimConfig(seed=1, frames=args.frames, warmup=1_000, batches=10)

    # warm the JIT cache so compile time is not measured
    solve_stationary(P, "direct", backend="numba")
    simulate(cfg, SimConfig(seed=1, frames=2_000, warmup=100, batches=2), backend="numba")

    results = {}
    print(f"{'kernel':<28}{'backend':<9}{'seconds':>10}")
    for backend in ("numba", "numpy"):
        t_solve, dist = best_of(lambda: solve_stationary(P, "direct", backend=backend), args.repeat)
        t_sim, rep = best_of(lambda: simulate(cfg, sim, backend=backend), args.repeat)
        results[backend] = (dist, rep)
        print(f"{'GTH solve, 3322 states':<28}{backend:<9}{t_solve:>10.3f}")
        print(f"{f'simulate, {args.frames} frames':<28}{backend:<9}{t_sim:>10.3f}"
              f"   ({1e6 * t_sim / args.frames:.2f} us/frame)")

    (d1, r1), (d2, r2) = results["numba"], results["numpy"]
    print(f"max |pi_numba - pi_numpy| = {np.abs(d1.pi - d2.pi).max():.2e}")
    print(f"simulator reports identical: {np.array_equal(r1.batches, r2.batches)}")


if __name__ == "__main__":
    main()
