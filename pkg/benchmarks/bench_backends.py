"""Compare the compiled and pure-Python simulation cores.

    python3 benchmarks/bench_backends.py [--horizon 1000] [--reps 200]

Both cores draw the same uniforms, so each case also checks that the two
outputs are bit-identical.
"""

from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from lamp import _backend, rng


def cases(horizon):
    knots, values = np.array([0.0, 1.0, 3.0, 6.0]), np.array([0.2, 0.1, 0.05])
    src = _backend.load("python").simulate_poisson(rng.split(0, 0), 1.0, horizon)
    return {
        "poisson": lambda c, g: c.simulate_poisson(g, 1.0, horizon),
        "hawkes exp (thinning)": lambda c, g: c.simulate_exp(g, 1.0, 0.5, 1.0, horizon),
        "hawkes exp (exact)": lambda c, g: c.simulate_exp_exact(g, 1.0, 0.5, 1.0, horizon),
        "hawkes step": lambda c, g: c.simulate_step(g, 1.0, knots, values, horizon),
        "driven exp": lambda c, g: c.simulate_driven_exp(g, 1.0, 0.5, 1.0, src, horizon),
        "excitation exp": lambda c, g: c.excite_exp(src, src, 0.5, 0.5),
        "excitation step": lambda c, g: c.excite_step(src, src, knots, values),
    }


def bench(fn, core, reps):
    start = time.perf_counter()
    for i in range(reps):
        fn(core, rng.split(1, i))
    return (time.perf_counter() - start) / reps


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--horizon", type=float, default=1000.0)
    parser.add_argument("--reps", type=int, default=200)
    args = parser.parse_args(argv)

    py = _backend.load("python")
    cy = _backend.load("cython")
    if cy.BACKEND != "cython":
        print("compiled core not available; build with `pip install -e . --no-build-isolation`", file=sys.stderr)
        return 1

    print(f"horizon={args.horizon:g}, reps={args.reps}")
    print(f"{'case':<24}{'python us':>12}{'cython us':>12}{'speedup':>10}  identical")
    for name, fn in cases(args.horizon).items():
        same = all(np.array_equal(fn(py, rng.split(2, i)), fn(cy, rng.split(2, i))) for i in range(3))
        t_py = bench(fn, py, max(1, args.reps // 10))
        t_cy = bench(fn, cy, args.reps)
        print(f"{name:<24}{t_py * 1e6:12.1f}{t_cy * 1e6:12.1f}{t_py / t_cy:10.1f}  {same}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
