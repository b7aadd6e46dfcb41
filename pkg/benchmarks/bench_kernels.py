"""Compiled vs pure-numpy kernels: per-kernel timings and one end-to-end solve.

    python3 benchmarks/bench_kernels.py [--repeat 5]

The end-to-end rows run in subprocesses so the backend switch
(PULSEFRONT_PURE_PYTHON=1) takes effect at import.
"""
from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from pulsefront import _kernels_py as py

try:
    from pulsefront import _kernels_ext as ext
except ImportError:  # pragma: no cover
    ext = None

E2E = """
import time
from pulsefront import kernels
from pulsefront.cylinder import CylinderGrid
from pulsefront.front import solve_front
from pulsefront.medium import make_cubic_medium
m = make_cubic_medium(0.3, [((1, 0), 0.08, 0.0), ((0, 1), 0.05, 0.0)])
g = CylinderGrid(30, 1201, 16, 2)
solve_front(m, [1.0, 0.0], g)
t = time.perf_counter()
fr = solve_front(m, [0.6, 0.8], g)
print(kernels.BACKEND, time.perf_counter() - t, repr(fr.c))
"""


def cases(rng):
    n_xi, m = 1201, 256
    theta = rng.uniform(0.2, 0.4, (n_xi, m))
    u = rng.uniform(-0.2, 1.2, (n_xi, m))
    sub = rng.normal(size=(n_xi, m)) + 1j * rng.normal(size=(n_xi, m))
    sup = rng.normal(size=(n_xi, m)) + 1j * rng.normal(size=(n_xi, m))
    diag = 4 + np.abs(sub) + np.abs(sup) + 0j
    rhs = rng.normal(size=(n_xi, m)) + 0j
    box = 512
    x = np.linspace(-40, 40, box)
    X, Y = np.meshgrid(x, x, indexing="ij")
    field = 1 / (1 + np.exp(np.hypot(X, Y) - 20))
    ang = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    h = x[1] - x[0]
    yield "cubic_reaction 1201x256", lambda k: k.cubic_reaction(theta, u, 0.1, 0.05)
    yield "tridiag_factor 1201x256", lambda k: k.tridiag_factor(sub, diag, sup)
    fac = py.tridiag_factor(sub, diag, sup)
    yield "tridiag_solve 1201x256", lambda k: k.tridiag_solve(*fac, sup, rhs)
    yield "ray_crossings 512^2, 64 rays", lambda k: k.ray_crossings(field, (-40.0, -40.0), h, ang, h / 2, 900, [0.5])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--no-e2e", action="store_true")
    args = ap.parse_args(argv)
    if ext is None:
        print("compiled extension not built; nothing to compare")
        return 1
    rng = np.random.default_rng(0)
    print(f"{'kernel':34s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speedup':>8s}")
    for name, fn in cases(rng):
        tp = min(timeit.repeat(lambda: fn(py), number=1, repeat=args.repeat)) * 1e3
        tc = min(timeit.repeat(lambda: fn(ext), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:34s} {tp:12.2f} {tc:12.2f} {tp / tc:8.1f}")
    if not args.no_e2e:
        rows = {}
        for flag in ("1", "0"):
            env = dict(os.environ, PULSEFRONT_PURE_PYTHON=flag)
            out = subprocess.run([sys.executable, "-c", E2E], env=env, capture_output=True, text=True, check=True)
            backend, secs, c = out.stdout.split()
            rows[backend] = (float(secs), float(c))
        print()
        print("solve_front, N = 2, 1201 x 16 cylinder (warm start excluded):")
        for b, (secs, c) in rows.items():
            print(f"  {b:7s} {secs:7.2f} s   c = {c:.12f}")
        print(f"  speedup {rows['python'][0] / rows['cython'][0]:.2f}x, |dc| = {abs(rows['python'][1] - rows['cython'][1]):.1e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
