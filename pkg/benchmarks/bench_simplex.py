"""Benchmark the compiled transportation-simplex kernel against its
pure-python twin.

Both kernels implement the same deterministic pivot rule, so besides the
timing table this script asserts that their flows are bit-for-bit equal on
every instance.

Usage:
    python3 benchmarks/bench_simplex.py [--sizes 30,60,120] [--repeats 3]
"""

import argparse
import time

import numpy as np

from kpg_ot import _simplex_py

try:
    from kpg_ot import _simplex as _compiled
except ImportError:
    _compiled = None


def make_instance(n, seed):
    rng = np.random.default_rng(seed)
    cost = rng.uniform(0.0, 1.0, size=(n, n))
    supply = rng.uniform(0.5, 1.5, size=n)
    demand = rng.uniform(0.5, 1.5, size=n)
    demand *= supply.sum() / demand.sum()
    return cost, supply, demand


def best_time(fn, repeats):
    best = float("inf")
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return best, result


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="30,60,120",
                        help="comma-separated square problem sizes")
    parser.add_argument("--repeats", type=int, default=3,
                        help="timing repeats per size (best is reported)")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    sizes = [int(tok) for tok in args.sizes.split(",")]

    if _compiled is None:
        print("compiled kernel not available; timing the pure-python kernel only")
        print(f"{'size':>6} {'pure (ms)':>12} {'pivots':>8}")
        for n in sizes:
            cost, supply, demand = make_instance(n, args.seed)
            t, (flows, pivots) = best_time(
                lambda: _simplex_py.solve_transportation(cost, supply, demand),
                args.repeats,
            )
            print(f"{n:>6} {t * 1e3:>12.2f} {pivots:>8}")
        return

    print(f"{'size':>6} {'compiled (ms)':>14} {'pure (ms)':>12} {'speedup':>8} {'pivots':>8}")
    for n in sizes:
        cost, supply, demand = make_instance(n, args.seed)
        tc, (flows_c, pivots_c) = best_time(
            lambda: _compiled.solve_transportation(cost, supply, demand),
            args.repeats,
        )
        tp, (flows_p, pivots_p) = best_time(
            lambda: _simplex_py.solve_transportation(cost, supply, demand),
            args.repeats,
        )
        if not np.array_equal(flows_c, flows_p):
            raise SystemExit(f"kernel mismatch at size {n}: flows differ")
        if pivots_c != pivots_p:
            raise SystemExit(
                f"kernel mismatch at size {n}: pivots {pivots_c} vs {pivots_p}"
            )
        print(f"{n:>6} {tc * 1e3:>14.2f} {tp * 1e3:>12.2f} "
              f"{tp / tc:>7.1f}x {pivots_c:>8}")
    print("flows and pivot counts identical across kernels on every instance")


if __name__ == "__main__":
    main()
