"""Time the numba kernels against their numpy twins and check they agree.

    python3 benchmarks/bench_kernels.py [--nx 256 --nv 256 --repeat 20]

Also times one full solver step under each backend.
"""

import argparse
import time

import numpy as np

from pftraffic import kernels
from pftraffic.phase import PhaseGrid, init_rectangle
from pftraffic.solver import Model, step


def best_of(fn, repeat):
    fn()  # warm-up (JIT compile for numba)
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def kernel_cases(nx, nv, n_particles, rng):
    g = PhaseGrid(0.0, 1.0, 2.0, nx, nv)
    f = rng.random((nx, nv))
    rho = f.sum(axis=1) * g.dv
    u = (f * g.v).sum(axis=1) * g.dv / rho
    active = np.ones(nx, dtype=bool)
    xp = rng.random(n_particles)
    wp = rng.random(n_particles) / n_particles
    vp = rng.random(n_particles) * 2.0
    fld = rng.random(nx)
    per = rng.random(n_particles)  # fields already gathered to the particles
    dt = 0.5 * g.dx / g.v_max
    return {
        "transport_upwind": (f, g.v, dt, g.dx, True),
        "velocity_remap": (f, g.v, g.dv, active, u * 0.9, u, rho, 1.0, dt, True),
        "deposit_cic": (xp, wp, 0.0, g.dx, nx, True),
        "gather_cic": (fld, xp, 0.0, g.dx, True),
        "particle_velocity_update": (vp, wp, per, per * 1.1, per, 1.0, dt),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--nx", type=int, default=256)
    ap.add_argument("--nv", type=int, default=256)
    ap.add_argument("--particles", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    if not kernels.HAVE_NUMBA:
        print("numba not importable; nothing to compare")
        return
    rng = np.random.default_rng(0)
    cases = kernel_cases(args.nx, args.nv, args.particles, rng)
    print(f"{'kernel':<26}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}{'max |diff|':>13}")
    for name, a in cases.items():
        f_np = getattr(kernels, name + "_numpy")
        f_nb = getattr(kernels, name + "_numba")
        t_np = best_of(lambda: f_np(*a), args.repeat)
        t_nb = best_of(lambda: f_nb(*a), args.repeat)
        r_np, r_nb = f_np(*a), f_nb(*a)
        if not isinstance(r_np, tuple):
            r_np, r_nb = (r_np,), (r_nb,)
        diff = max(float(np.abs(p - q).max()) for p, q in zip(r_np, r_nb))
        print(f"{name:<26}{1e3 * t_np:12.3f}{1e3 * t_nb:12.3f}{t_np / t_nb:10.1f}{diff:13.2e}")

    g = PhaseGrid(-1.0, 5.4, 2.56, args.nx, args.nv)
    f0 = init_rectangle(g, (0.0, 1.0), (1.0, 2.0), 1.0)
    model = Model("regularized", eps_reg=0.1, cfl=0.5)
    dt = 0.5 * g.dx / g.v_max
    times = {}
    for use in (False, True):
        kernels.set_backend(use)
        times[use] = best_of(lambda: step(f0, dt, model), max(3, args.repeat // 4))
    kernels.set_backend(kernels.USE_NUMBA)
    print(f"{'full step (regularized)':<26}{1e3 * times[False]:12.3f}{1e3 * times[True]:12.3f}"
          f"{times[False] / times[True]:10.1f}")


if __name__ == "__main__":
    main()
