"""Grid solver for the kinetic traffic equation and its regularised/scaled forms.

One step is Strang-split: half x-transport, local velocity dynamics, half
x-transport. The local substep integrates relaxation and interaction exactly
along velocity characteristics with the macroscopic fields frozen, then
remaps the moved cell masses back onto the grid with linear weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from . import kernels
from .config import ScenarioConfig
from .operators import (
    DiagnosticsReport,
    MacroFields,
    compute_moments,
    diagnostics,
    mollified_velocity,
    vacuum_floor,
)
from .phase import DistributionState, MollifierSpec


class CFLError(ValueError):
    pass


class NumericalError(RuntimeError):
    def __init__(self, message, dump=None):
        super().__init__(message)
        self.dump = dump or {}


@dataclass(frozen=True)
class Model:
    """Which equation to integrate and its parameters."""

    variant: str = "unscaled"
    eps_reg: float = 0.1
    eps_scale: float = 1.0
    eps_moll: Optional[float] = None
    periodic: bool = False
    cfl: float = 1.0
    rho_floor: Optional[float] = None

    @property
    def kappa(self) -> float:
        return 1.0 / self.eps_scale if self.variant == "scaled" else 1.0

    def mollifier(self) -> MollifierSpec:
        return MollifierSpec(self.eps_moll if self.eps_moll is not None else self.eps_reg)

    @classmethod
    def from_config(cls, cfg: ScenarioConfig) -> "Model":
        return cls(cfg.variant, cfg.eps_reg, cfg.eps_scale, cfg.eps_moll, cfg.periodic, cfg.cfl, cfg.rho_floor)


@dataclass(frozen=True)
class LocalCoefficients:
    """Frozen per-x-cell coefficients of the velocity substep."""

    active: np.ndarray
    ubar: np.ndarray  # relaxation target
    uint: np.ndarray  # velocity inside the interaction term
    coef: np.ndarray  # rho * interaction prefactor


def local_coefficients(f: DistributionState, model: Model, floor: float) -> LocalCoefficients:
    macro = compute_moments(f, floor)
    return coefficients_from_macro(macro, model, f.grid.dx)


def coefficients_from_macro(macro: MacroFields, model: Model, dx: float) -> LocalCoefficients:
    active = ~macro.vacuum
    u = macro.u
    rho = np.where(active, macro.rho, 0.0)
    if model.variant == "regularized":
        ubar = mollified_velocity(macro, model.mollifier(), model.eps_reg, dx, model.periodic)
        coef = rho / (1.0 + model.eps_reg * rho * (1.0 + u))
    else:
        ubar = u
        coef = rho
    return LocalCoefficients(active, ubar.astype(float), u.astype(float), coef.astype(float))


def _transport(vals, grid, dt, periodic):
    return kernels.transport_upwind(vals, grid.v, dt, grid.dx, periodic)


def _local(vals, grid, lc: LocalCoefficients, kappa, dt, renormalize):
    return kernels.velocity_remap(vals, grid.v, grid.dv, lc.active, lc.ubar, lc.uint, lc.coef,
                                  kappa, dt, renormalize)


def check_cfl(grid, dt, cfl):
    bound = cfl * grid.dx / grid.v_max
    if dt > bound * (1 + 1e-12):
        raise CFLError(f"dt={dt:.6g} violates the CFL bound dt <= cfl*dx/v_max = {bound:.6g}")


def _check_finite(vals, t, stage):
    if not np.isfinite(vals).all():
        bad = np.argwhere(~np.isfinite(vals))
        raise NumericalError(
            f"non-finite values after {stage} at t={t:.6g}",
            dump={"t": t, "stage": stage, "first_bad_cells": bad[:10].tolist(), "n_bad": int(len(bad))},
        )


def step(f: DistributionState, dt: float, model: Model, floor: Optional[float] = None,
         coefficients: Optional[LocalCoefficients] = None, renormalize: bool = True) -> DistributionState:
    """Advance ``f`` by one Strang step of length ``dt``.

    ``coefficients`` overrides the self-consistent macroscopic fields (used by
    the Picard iteration, which also turns off the per-cell mass renormalisation).
    """
    g = f.grid
    check_cfl(g, dt, model.cfl)
    if floor is None:
        floor = vacuum_floor(f) if model.rho_floor is None else model.rho_floor
    vals = _transport(f.values, g, 0.5 * dt, model.periodic)
    if coefficients is None:
        coefficients = local_coefficients(DistributionState(g, np.maximum(vals, 0.0)), model, floor)
    vals = _local(vals, g, coefficients, model.kappa, dt, renormalize)
    vals = _transport(vals, g, 0.5 * dt, model.periodic)
    vals = np.maximum(vals, 0.0)
    _check_finite(vals, f.t + dt, "step")
    return DistributionState(g, vals, f.t + dt)


def output_steps(n_steps: int, n_outputs: int):
    """Step indices (0..n_steps) at which diagnostics are reported."""
    k = np.unique(np.round(np.linspace(0, n_steps, min(n_outputs, n_steps) + 1)).astype(int))
    return set(int(i) for i in k)


def run(config: ScenarioConfig, on_output: Optional[Callable] = None, f0: Optional[DistributionState] = None):
    """Integrate the configured scenario; returns (final state, diagnostics rows).

    ``on_output(state, report)`` is called at every reporting time.
    """
    model = Model.from_config(config)
    f = config.initial_state() if f0 is None else f0
    dt, n = config.time_step()
    floor = vacuum_floor(f) if config.rho_floor is None else config.rho_floor
    marks = output_steps(n, config.n_outputs)
    reports: List[DiagnosticsReport] = []

    def emit(state):
        rep = diagnostics(state, compute_moments(state, floor))
        reports.append(rep)
        if on_output is not None:
            on_output(state, rep)

    emit(f)
    for k in range(1, n + 1):
        f = step(f, dt, model, floor)
        if k == n:
            f = f.replace(t=config.t_final)
        if k in marks:
            emit(f)
    return f, reports


# ---------------------------------------------------------------------------
# run-level invariants


@dataclass
class InvariantCheck:
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""


def check_run_invariants(reports: List[DiagnosticsReport], grid, dt, mass_tol=1e-8, energy_rel_tol=1e-3,
                         kappa=1.0):
    """Mass drift, energy monotonicity and the velocity-support envelope.

    The lower envelope decays like exp(-kappa t), kappa being the relaxation rate.
    """
    out = []
    m0 = reports[0].mass
    drift = max(abs(r.mass - m0) for r in reports) / m0 if m0 > 0 else max(abs(r.mass) for r in reports)
    out.append(InvariantCheck("mass_drift", drift <= mass_tol, drift, mass_tol))
    e0 = reports[0].energy
    tol_e = energy_rel_tol * e0
    worst = 0.0
    for a, b in zip(reports, reports[1:]):
        worst = max(worst, b.energy - a.energy)
    out.append(InvariantCheck("energy_nonincreasing", worst <= tol_e, worst, tol_e))
    if m0 > 0:
        rv0, Rv0 = reports[0].rV_min, reports[0].rV_max
        up = max(r.rV_max - (Rv0 + grid.dv) for r in reports)
        low = max(math.exp(-kappa * r.t) * rv0 - grid.dv - r.rV_min for r in reports)
        out.append(InvariantCheck("support_RV_upper", up <= 1e-12, up, 0.0))
        out.append(InvariantCheck("support_rV_lower", low <= 1e-12, low, 0.0))
    return out


# ---------------------------------------------------------------------------
# Picard iteration for the regularised equation


@dataclass
class PicardTrace:
    d: List[float]
    final: DistributionState
    diverging: bool = False
    history: List[DistributionState] = field(default_factory=list, repr=False)

    @property
    def n(self):
        return len(self.d)

    def tail_decreasing(self, start=2):
        """d_n strictly decreasing for n >= start (all-zero tails count as decreasing)."""
        tail = self.d[start:]
        return all(b < a or a == b == 0.0 for a, b in zip(tail, tail[1:]))


def picard_run(f0: DistributionState, model: Model, n_iters: int, t_final: float,
               dt: Optional[float] = None) -> PicardTrace:
    """Iterate the linearised regularised equation.

    Iterate ``n + 1`` is solved with the macroscopic fields of iterate ``n``
    frozen at each time level; iterate 0 is ``f0`` for all times.
    ``d[n] = max_t ||f^{n+1} - f^n||_inf`` over the time levels.
    """
    if n_iters < 2:
        raise ValueError("n_iters must be >= 2")
    g = f0.grid
    if dt is None:
        dt = model.cfl * g.dx / g.v_max
    n_steps = max(1, int(math.ceil(t_final / dt - 1e-9)))
    dt = t_final / n_steps
    floor = vacuum_floor(f0) if model.rho_floor is None else model.rho_floor

    prev_states = [f0] * (n_steps + 1)
    # coefficients of iterate 0: frozen at f0
    c0 = local_coefficients(f0, model, floor)
    prev_coefs = [c0] * n_steps
    d = []
    diverging = False
    for _ in range(n_iters):
        states = [f0]
        coefs = []
        f = f0
        for k in range(n_steps):
            half = _transport(f.values, g, 0.5 * dt, model.periodic)
            # record this iterate's own coefficients for the next sweep
            coefs.append(local_coefficients(DistributionState(g, np.maximum(half, 0.0)), model, floor))
            vals = _local(half, g, prev_coefs[k], model.kappa, dt, renormalize=False)
            vals = np.maximum(_transport(vals, g, 0.5 * dt, model.periodic), 0.0)
            _check_finite(vals, f.t + dt, "picard")
            f = DistributionState(g, vals, (k + 1) * dt)
            states.append(f)
        diff = max(float(np.abs(a.values - b.values).max(initial=0.0)) for a, b in zip(states, prev_states))
        d.append(diff)
        if len(d) >= 4 and d[-1] > d[-2] > d[-3] > d[-4]:
            diverging = True
        prev_states, prev_coefs = states, coefs
    return PicardTrace(d, prev_states[-1], diverging, prev_states)
