"""Compare the compiled simplex kernel against the pure-Python fallback.

    python3 benchmarks/bench_kernel.py [--repeat N] [--trials N]
"""

import argparse
import time

import numpy as np

from frpdispatch import lp_core
from frpdispatch.config import case_study_config, compute_requirements
from frpdispatch.engine import monte_carlo
from frpdispatch.market_model import FrpRequirement, WindowInput, build_window_lp


def case_lp(cfg):
    win = WindowInput(0, (0, 1), [[100, 85]], [40, 40],
                      [FrpRequirement(), FrpRequirement(5.6451, 5.7503)], (60, 0))
    return build_window_lp(cfg.system_spec(), win)[0]


def random_lp(n, m, seed):
    rng = np.random.default_rng(seed)
    a = rng.uniform(0, 1, (m, n))
    x0 = rng.uniform(0, 1, n)
    return lp_core.StandardLp.create(c=-rng.uniform(0, 1, n), a_ub=a, b_ub=a @ x0 + 0.1,
                                     lower=np.zeros(n), upper=np.full(n, 10.0))


def clock(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--trials", type=int, default=200)
    args = ap.parse_args()

    cfg = case_study_config()
    reqs = compute_requirements(cfg).requirements
    case = case_lp(cfg)
    big = [random_lp(n, m, s) for s, (n, m) in enumerate([(40, 30), (80, 60), (150, 100)])]
    jobs = {
        "case-study window LP x200": lambda: [lp_core.solve(case) for _ in range(200)],
        **{f"random LP {lp.c.size}x{lp.b_ub.size}": (lambda lp=lp: lp_core.solve(lp)) for lp in big},
        f"Monte Carlo FBD, {args.trials} trials": lambda: monte_carlo(
            cfg.system_spec(), cfg.dispatch_mode("FBD"), cfg.forecast_series(), args.trials,
            cfg.sampling.master_seed, reqs["FBD"], cfg.initial_dispatch("FBD")),
    }

    backends = lp_core.available_backends()
    previous = lp_core.get_backend()
    times = {}
    try:
        for b in backends:
            lp_core.set_backend(b)
            times[b] = {name: clock(fn, args.repeat) for name, fn in jobs.items()}
    finally:
        lp_core.set_backend(previous)

    print(f"{'job':36s}" + "".join(f"{b:>12s}" for b in backends) +
          ("     speedup" if len(backends) > 1 else ""))
    for name in jobs:
        row = f"{name:36s}" + "".join(f"{times[b][name] * 1e3:10.1f}ms" for b in backends)
        if "compiled" in times and "python" in times:
            row += f"{times['python'][name] / times['compiled'][name]:11.1f}x"
        print(row)
    if len(backends) == 1:
        print("compiled kernel not built; only the Python fallback was timed")


if __name__ == "__main__":
    main()
