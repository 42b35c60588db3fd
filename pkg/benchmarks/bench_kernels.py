"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--n 16] [--cells 32] [--repeat 5]

Kernel calls are timed in-process on both implementations. The full solver
step is timed in a child process per backend, since the backend is chosen
once at import.
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from mixbgk._kernels import _fallback

try:
    from mixbgk._kernels import _core
except ImportError:
    _core = None

STEP_SNIPPET = """
import json, time
from mixbgk import _kernels
from mixbgk.grid import PhaseGrid, SpatialGrid, VelocityGrid
from mixbgk.mixture import MixtureParams
from mixbgk.scenarios import initial_state
from mixbgk.solver import SolverConfig, step
p = MixtureParams(m1=2.0)
grid = PhaseGrid(SpatialGrid({cells}, 1.0, 1 if {cells} > 1 else 0), VelocityGrid(6.0 / p.m2 ** 0.5, {n}))
cfg = SolverConfig(dt=0.05, t_max=1.0)
F = initial_state("random-smooth", p, grid, 1e-3, 0)
F = step(F, p, grid, cfg)
t0 = time.perf_counter()
for _ in range({repeat}):
    F = step(F, p, grid, cfg)
print(json.dumps([_kernels.BACKEND, (time.perf_counter() - t0) / {repeat}]))
"""


def _inputs(n: int, cells: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    axis = np.linspace(-6.0, 6.0, n)
    nodes = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), -1).reshape(-1, 3)
    weights = np.full(len(nodes), (axis[1] - axis[0]) ** 3)
    speed2 = np.einsum("ij,ij->i", nodes, nodes)
    temp = 1.0 + 0.05 * rng.standard_normal(cells)
    F = np.exp(-speed2[None, :] / (2 * temp[:, None])) / (2 * np.pi * temp[:, None]) ** 1.5
    targets = _fallback.velocity_moments(F, nodes, weights)
    params0 = np.tile([-1.5 * np.log(2 * np.pi), 0.0, 0.0, 0.0, -0.5], (cells, 1))
    return F, nodes, weights, targets, params0


def _best(fn, repeat: int) -> float:
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def bench_kernels(n: int, cells: int, repeat: int) -> list[tuple[str, str, float]]:
    F, nodes, weights, targets, params0 = _inputs(n, cells)
    rows = []
    for name, mod in (("python", _fallback), ("cython", _core)):
        if mod is None:
            continue
        rows.append((name, "velocity_moments", _best(lambda: mod.velocity_moments(F, nodes, weights), repeat)))
        rows.append((name, "expquad_solve", _best(lambda: mod.expquad_solve(targets, params0, nodes, weights), repeat)))
    return rows


def bench_step(n: int, cells: int, repeat: int) -> list[tuple[str, str, float]]:
    rows = []
    for backend in ("python", "cython"):
        env = dict(os.environ, MIXBGK_BACKEND=backend)
        code = STEP_SNIPPET.format(n=n, cells=cells, repeat=repeat)
        res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        got, seconds = json.loads(res.stdout.strip().splitlines()[-1])
        if got == backend:
            rows.append((backend, "solver step", seconds))
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=16, help="velocity nodes per axis")
    ap.add_argument("--cells", type=int, default=32, help="spatial cells")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    if _core is None:
        print("compiled core not built; only the fallback is timed")
    rows = bench_kernels(args.n, args.cells, args.repeat) + bench_step(args.n, args.cells, args.repeat)
    print(f"{args.n}^3 velocity nodes, {args.cells} cells, best of {args.repeat}")
    print(f"{'kernel':<18s} {'python [ms]':>12s} {'cython [ms]':>12s} {'speedup':>8s}")
    by = {(b, k): s for b, k, s in rows}
    for kernel in ("velocity_moments", "expquad_solve", "solver step"):
        py, cy = by.get(("python", kernel)), by.get(("cython", kernel))
        cy_txt = f"{1e3 * cy:12.3f}" if cy else f"{'-':>12s}"
        ratio = f"{py / cy:8.2f}" if cy else f"{'-':>8s}"
        print(f"{kernel:<18s} {1e3 * py:12.3f} {cy_txt} {ratio}")


if __name__ == "__main__":
    main()
