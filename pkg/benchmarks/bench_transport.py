"""Time the compiled and pure-Python transport simplex on random dense problems.

    python benchmarks/bench_transport.py --sizes 16 64 128 --repeats 3
"""

import argparse
import time

import numpy as np

from statcoupling.transport import available_backends, solve_exact


def problem(k, rng):
    C = rng.random((k, k))
    a = rng.random(k)
    b = rng.random(k)
    return C, a / a.sum(), b / b.sum()


def best_time(C, a, b, backend, repeats):
    best = np.inf
    plan = None
    for _ in range(repeats):
        start = time.perf_counter()
        plan = solve_exact(C, a, b, backend=backend)
        best = min(best, time.perf_counter() - start)
    return best, plan.cost


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[16, 32, 64, 128])
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    backends = available_backends()
    rng = np.random.default_rng(args.seed)
    print(f"{'size':>6} " + " ".join(f"{b + ' [s]':>14}" for b in backends) + f" {'speedup':>9} {'cost diff':>10}")
    for k in args.sizes:
        C, a, b = problem(k, rng)
        rows = {be: best_time(C, a, b, be, args.repeats) for be in backends}
        speed = rows["python"][0] / rows["cython"][0] if "cython" in rows else float("nan")
        diff = max(v[1] for v in rows.values()) - min(v[1] for v in rows.values())
        print(f"{k:>6} " + " ".join(f"{rows[be][0]:>14.5f}" for be in backends) + f" {speed:>9.1f} {diff:>10.1e}")


if __name__ == "__main__":
    main()
