"""Weighted-particle solver built on the characteristic formulation.

Particles carry (X, V, w). Each step mirrors the grid scheme: half drift in x,
deposit (rho, m) with cloud-in-cell weights, mollify, then relax V towards the
mollified velocity exactly while the weights pick up the interaction source,
then the second half drift.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import kernels
from .operators import DiagnosticsReport
from .phase import DistributionState, MollifierSpec, mollify
from .solver import Model

RNG_NAME = "numpy.random.PCG64"


@dataclass
class ParticleEnsemble:
    x: np.ndarray
    v: np.ndarray
    w: np.ndarray
    t: float = 0.0

    @property
    def n(self):
        return self.x.size

    def copy(self):
        return ParticleEnsemble(self.x.copy(), self.v.copy(), self.w.copy(), self.t)


@dataclass
class ParticleTrajectory:
    snapshots: List[ParticleEnsemble] = field(default_factory=list)
    reports: List[DiagnosticsReport] = field(default_factory=list)
    rho: List[np.ndarray] = field(default_factory=list)


def sample_particles(f0: DistributionState, n: int, seed: int = 0) -> ParticleEnsemble:
    """Stratified sampling: particles allotted to cells in proportion to mass,
    positioned uniformly inside their cell, sharing the cell mass equally."""
    if n < 1000:
        raise ValueError("need at least 1000 particles")
    g = f0.grid
    rng = np.random.Generator(np.random.PCG64(seed))
    mass = f0.values.ravel() * g.cell_area
    total = mass.sum()
    if total <= 0:
        raise ValueError("cannot sample particles from a zero distribution")
    target = mass / total * n
    counts = np.floor(target).astype(np.int64)
    # largest remainders, ties broken by index for reproducibility
    rem = n - counts.sum()
    if rem > 0:
        order = np.lexsort((np.arange(target.size), -(target - counts)))
        counts[order[:rem]] += 1
    cells = np.repeat(np.arange(mass.size), counts)
    ix, iv = np.divmod(cells, g.nv)
    x = g.x_min + (ix + rng.random(cells.size)) * g.dx
    v = (iv + rng.random(cells.size)) * g.dv
    w = (mass / np.maximum(counts, 1))[cells]
    return ParticleEnsemble(x, v, w, f0.t)


def _wrap(x, g):
    return g.x_min + np.mod(x - g.x_min, g.length)


def deposit(ens: ParticleEnsemble, grid, periodic):
    rho = kernels.deposit_cic(ens.x, ens.w, grid.x_min, grid.dx, grid.nx, periodic)
    m = kernels.deposit_cic(ens.x, ens.w * ens.v, grid.x_min, grid.dx, grid.nx, periodic)
    return rho, m


def particle_diagnostics(ens: ParticleEnsemble, grid, periodic) -> DiagnosticsReport:
    rho, m = deposit(ens, grid, periodic)
    u = np.divide(m, rho, out=np.zeros_like(m), where=rho > 0)
    up = kernels.gather_cic(u, ens.x, grid.x_min, grid.dx, periodic)
    rp = kernels.gather_cic(rho, ens.x, grid.x_min, grid.dx, periodic)
    live = ens.w > 0
    dev = (up - ens.v) ** 2 * ens.w
    return DiagnosticsReport(
        t=float(ens.t),
        mass=float(ens.w.sum()),
        momentum=float((ens.w * ens.v).sum()),
        energy=0.5 * float((ens.w * ens.v**2).sum()),
        linf=float(rho.max()),
        rX_min=float(ens.x[live].min()),
        rX_max=float(ens.x[live].max()),
        rV_min=float(ens.v[live].min()),
        rV_max=float(ens.v[live].max()),
        diss_Qi=float((rp * dev).sum()),
        diss_Qr=float(dev.sum()),
    )


def particle_step(ens: ParticleEnsemble, dt: float, model: Model, grid, moll: MollifierSpec,
                  freeze_weights: bool = False, weight_floor: float = 0.0) -> ParticleEnsemble:
    periodic = model.periodic
    x = ens.x + 0.5 * dt * ens.v
    if periodic:
        x = _wrap(x, grid)
    mid = ParticleEnsemble(x, ens.v, ens.w, ens.t)
    rho, m = deposit(mid, grid, periodic)
    rho_s = np.maximum(mollify(rho, moll, grid.dx, periodic), 0.0)
    m_s = np.maximum(mollify(m, moll, grid.dx, periodic), 0.0)
    reg = model.eps_reg if model.variant == "regularized" else 0.0
    ubar = np.divide(m_s, reg + rho_s, out=np.zeros_like(m_s), where=(reg + rho_s) > 0)
    usm = np.divide(m_s, rho_s, out=np.zeros_like(m_s), where=rho_s > 0)
    if model.variant == "regularized":
        coef = rho_s / (1.0 + model.eps_reg * rho_s * (1.0 + usm))
    else:
        coef = rho_s
    if freeze_weights:
        coef = np.zeros_like(coef)
    gat = lambda fld: kernels.gather_cic(fld, x, grid.x_min, grid.dx, periodic)
    v_new, w_new = kernels.particle_velocity_update(ens.v, ens.w, gat(ubar), gat(usm), gat(coef),
                                                    model.kappa, dt)
    if weight_floor > 0 and not np.any(w_new > weight_floor):
        raise FloatingPointError("all particle weights collapsed below the floor")
    x = x + 0.5 * dt * v_new
    if periodic:
        x = _wrap(x, grid)
    return ParticleEnsemble(x, v_new, w_new, ens.t + dt)


def particle_run(f0: DistributionState, model: Model, t_final: float, n_particles: int,
                 dt: Optional[float] = None, seed: int = 0, eps_moll: Optional[float] = None,
                 n_outputs: int = 10, freeze_weights: bool = False) -> ParticleTrajectory:
    """Evolve a particle sample of ``f0`` to ``t_final``.

    The force always uses the mollified velocity; the mollifier width defaults
    to ``max(model mollifier, 2 dx)``.
    """
    from .solver import output_steps

    g = f0.grid
    if dt is None:
        dt = model.cfl * g.dx / g.v_max
    n_steps = max(1, int(np.ceil(t_final / dt - 1e-9)))
    dt = t_final / n_steps
    width = eps_moll
    if width is None:
        width = max(model.eps_moll or 0.0, model.eps_reg if model.variant == "regularized" else 0.0, 2 * g.dx)
    moll = MollifierSpec(width)
    ens = sample_particles(f0, n_particles, seed)
    floor = 1e-300
    traj = ParticleTrajectory()
    marks = output_steps(n_steps, n_outputs)

    def emit(e):
        traj.snapshots.append(e.copy())
        traj.reports.append(particle_diagnostics(e, g, model.periodic))
        traj.rho.append(deposit(e, g, model.periodic)[0])

    emit(ens)
    for k in range(1, n_steps + 1):
        ens = particle_step(ens, dt, model, g, moll, freeze_weights, floor)
        if k in marks:
            emit(ens)
    return traj
