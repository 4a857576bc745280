"""Benchmark of the hot geometry kernels: compiled core vs NumPy reference.

Also times a few full flow steps per backend on the heaviest built-in
initial data.  Run as:  python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from lagflow import families
from lagflow.backends import reference
from lagflow.flow import cfl_dt, step
from lagflow.geometry import geometry


def timeit(fn, repeat=5):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def kernel_inputs():
    imm = families.clifford_torus(64)
    from lagflow.geometry import frame_and_second_derivatives
    e, d2 = frame_and_second_derivatives(imm)
    jet = imm.space.jet(imm.flat_coords)
    m = imm.flat_coords.shape[0]
    return (e.reshape(m, 2, 4), d2.reshape(m, 2, 2, 4),
            jet.gamma, jet.J, jet.g), imm.flat_coords


def bench_backend(name, mod, tab_args, pts):
    t_tab = timeit(lambda: mod.fundamental_tables(*tab_args))
    t_jet = timeit(lambda: mod.fubini_study_jet(pts, 1.0, False))
    print(f"{name:10s} fundamental_tables: {1e3 * t_tab:8.2f} ms   "
          f"fs_jet: {1e3 * t_jet:8.2f} ms   (4096 nodes)")
    return t_tab + t_jet


def bench_flow_steps(nsteps=20):
    imm = families.clifford_torus(64)
    state = imm
    dt = cfl_dt(geometry(state), 0.5)
    t0 = time.perf_counter()
    for _ in range(nsteps):
        state = step(state, dt)
    per = (time.perf_counter() - t0) / nsteps
    print(f"full flow step (active backend): {1e3 * per:8.2f} ms/step")
    return per


def main():
    tab_args, pts = kernel_inputs()
    compiled_total = None
    try:
        from lagflow.backends import _fastcore
        compiled_total = bench_backend("compiled", _fastcore, tab_args, pts)
    except ImportError:
        print("compiled core not built; only the reference backend timed")
    ref_total = bench_backend("numpy", reference, tab_args, pts)
    if compiled_total is not None:
        print(f"speedup (kernels, Clifford-torus sized): "
              f"{ref_total / compiled_total:5.1f}x")
    bench_flow_steps()


if __name__ == "__main__":
    main()
