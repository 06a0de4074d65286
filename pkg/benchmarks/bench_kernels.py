"""Compare the compiled and pure-Python kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from atomstress import _backend
from atomstress.core import Snapshot, build_fcc_lattice
from atomstress.dynamics import initialize_velocities
from atomstress.estimators import FieldGrid, hardy_stress
from atomstress.potentials import LennardJones, evaluate
from atomstress.weighting import WeightingFunction


def cases():
    lj = LennardJones()
    s = initialize_velocities(build_fcc_lattice(8, 8, 8, 1.5565), 0.1, 1)
    snap = Snapshot(0.0, s, evaluate(s, lj))
    wf = WeightingFunction("constant-mollified", 3.0, epsilon=1.0)
    grid = FieldGrid(np.random.default_rng(0).uniform(3, 9, (8, 3)))
    rng = np.random.default_rng(1)
    a = rng.normal(size=(20, 3))
    b = a + rng.normal(scale=0.5, size=(20, 3))
    u = rng.normal(size=(20000, 3)) * 2
    v = u + rng.normal(size=(20000, 3))
    radii = wf.radii_of_interest()
    return {
        "lj forces, 2048 atoms": lambda: evaluate(s, lj),
        "bond function, 20000 bonds": lambda: _backend.kernels.bond_function(wf.params, radii, np.zeros(3), u, v),
        "hardy stress, 8 points": lambda: hardy_stress(snap, wf, grid, lj),
        "DA integrals, 20 bonds": lambda: _backend.kernels.da_integrals(wf.params, radii, a, b),
    }


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args()
    try:
        _backend.use("compiled")
    except ImportError:
        raise SystemExit("compiled extension not built; run pip install -e . --no-build-isolation")
    work = cases()
    print(f"{'case':32s} {'python [s]':>12s} {'compiled [s]':>13s} {'speedup':>8s}")
    for name, fn in work.items():
        t = {}
        for backend in ("python", "compiled"):
            _backend.use(backend)
            fn()  # warm-up
            t[backend] = min(timeit.repeat(fn, number=1, repeat=args.repeat))
        print(f"{name:32s} {t['python']:12.4f} {t['compiled']:13.4f} {t['python'] / t['compiled']:8.1f}x")


if __name__ == "__main__":
    main()
