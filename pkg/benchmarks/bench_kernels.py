"""Compiled RK4 kernels against the pure-Python fallback.

Run ``python benchmarks/bench_kernels.py``; prints best-of-``repeat``
wall times and the speedup for each kernel, and checks that both
backends agree.
"""
import argparse
import time

import numpy as np

from pulseforge import kernels
from pulseforge.invariants import reverse_engineer
from pulseforge.verify import random_trajectory


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=4001, help="grid points per trace")
    ap.add_argument("--batch", type=int, default=16, help="traces in the batched kernel")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    if "compiled" not in kernels.IMPLEMENTATIONS:
        print("compiled extension not built; only the fallback is available")
        return 1
    pulse = reverse_engineer(random_trajectory(0, n_points=args.points))
    st = [kernels.stages(a) for a in pulse.fields()]
    dt = pulse.grid.dt
    batch = [np.repeat(s[None, :], args.batch, axis=0) for s in st]
    cases = {
        "rk4_invariants": lambda impl: kernels.rk4_invariants(*st, dt, 1.4, 0.2, -0.2,
                                                              impl=impl)[:3],
        "rk4_unitaries": lambda impl: kernels.rk4_unitaries(*st, dt, impl=impl),
        "rk4_final_batch": lambda impl: kernels.rk4_final_batch(*batch, dt, impl=impl),
    }
    print(f"{'kernel':<18}{'compiled [s]':>14}{'python [s]':>14}{'speedup':>10}{'max diff':>11}")
    for name, fn in cases.items():
        tc, a = _best(lambda: fn(kernels.IMPLEMENTATIONS["compiled"]), args.repeat)
        tp, b = _best(lambda: fn(kernels.IMPLEMENTATIONS["python"]), args.repeat)
        diff = max(float(np.max(np.abs(np.asarray(x) - np.asarray(y)))) for x, y in
                   zip(a if isinstance(a, tuple) else (a,), b if isinstance(b, tuple) else (b,)))
        print(f"{name:<18}{tc:>14.4g}{tp:>14.4g}{tp / tc:>10.1f}{diff:>11.1e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
