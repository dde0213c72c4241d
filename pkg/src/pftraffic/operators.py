"""Moments, collision operators and diagnostic functionals on the phase grid.

Velocity integrals use the midpoint rule on cell averages throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import Optional

import numpy as np

from .phase import DistributionState, MollifierSpec, mollify

SUPPORT_THRESHOLD = 1e-10
VACUUM_FACTOR = 1e-12


@dataclass(frozen=True)
class MacroFields:
    rho: np.ndarray
    momentum: np.ndarray
    u: np.ndarray
    energy_density: np.ndarray
    vacuum: np.ndarray


def vacuum_floor(f: DistributionState) -> float:
    """Default floor: 1e-12 x mean density over the x-domain."""
    return VACUUM_FACTOR * f.mass() / f.grid.length


def compute_moments(f: DistributionState, rho_floor: Optional[float] = None) -> MacroFields:
    g = f.grid
    v = g.v
    vals = f.values
    rho = vals.sum(axis=1) * g.dv
    mom = vals @ v * g.dv
    energy = vals @ (v * v) * g.dv
    floor = vacuum_floor(f) if rho_floor is None else rho_floor
    vac = rho <= floor
    u = np.zeros_like(rho)
    np.divide(mom, rho, out=u, where=~vac)
    mom = np.where(vac, 0.0, mom)
    return MacroFields(rho, mom, u, energy, vac)


def interaction_term(f: DistributionState, macro: MacroFields) -> np.ndarray:
    """Reformulated interaction operator rho (u - v) f."""
    v = f.grid.v
    out = (macro.rho * 1.0)[:, None] * (macro.u[:, None] - v[None, :]) * f.values
    out[macro.vacuum] = 0.0
    return out


def interaction_gain_loss(f: DistributionState):
    """Gain and loss parts of the interaction operator.

    gain(v) = f(v) int_{v* > v} (v* - v) f(v*) dv*,
    loss(v) = f(v) int_{v* < v} (v - v*) f(v*) dv*,
    evaluated with the midpoint rule (the diagonal term vanishes identically).
    """
    g = f.grid
    v = g.v
    vals = f.values
    dv = g.dv
    m0 = np.cumsum(vals, axis=1)
    m1 = np.cumsum(vals * v, axis=1)
    tot0 = m0[:, -1:]
    tot1 = m1[:, -1:]
    # strictly below / strictly above the current cell
    below0 = m0 - vals
    below1 = m1 - vals * v
    above0 = tot0 - m0
    above1 = tot1 - m1
    gain = vals * dv * (above1 - v * above0)
    loss = vals * dv * (v * below0 - below1)
    return np.maximum(gain, 0.0), np.maximum(loss, 0.0)


def mollified_velocity(macro: MacroFields, moll: MollifierSpec, eps_reg: float, dx: float,
                       periodic: bool = False) -> np.ndarray:
    """Regularised velocity (m * theta) / (eps_reg + rho * theta)."""
    if eps_reg < 0:
        raise ValueError("eps_reg must be nonnegative")
    num = np.maximum(mollify(macro.momentum, moll, dx, periodic), 0.0)
    den = eps_reg + np.maximum(mollify(macro.rho, moll, dx, periodic), 0.0)
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=den > 0)
    return out


def relaxation_divergence(f: DistributionState, u_field) -> np.ndarray:
    """Conservative upwind discretisation of d/dv((v - u) f).

    Interface speeds are u - v_{j+1/2}; zero flux through v = 0 and v = v_max.
    """
    g = f.grid
    vals = f.values
    u = np.asarray(u_field, dtype=float)[:, None]
    vf = g.v_edges[1:-1][None, :]
    a = u - vf
    left = vals[:, :-1]
    right = vals[:, 1:]
    up = np.where(a > 0, left, np.where(a < 0, right, 0.5 * (left + right)))
    flux = a * up
    nx = g.nx
    full = np.concatenate([np.zeros((nx, 1)), flux, np.zeros((nx, 1))], axis=1)
    # df/dt = -d/dv((u - v) f) = d/dv((v - u) f)
    return -(full[:, 1:] - full[:, :-1]) / g.dv


@dataclass(frozen=True)
class DiagnosticsReport:
    t: float
    mass: float
    momentum: float
    energy: float
    linf: float
    rX_min: float
    rX_max: float
    rV_min: float
    rV_max: float
    diss_Qi: float
    diss_Qr: float

    FIELDS = ("t", "mass", "momentum", "energy", "linf", "rX_min", "rX_max",
              "rV_min", "rV_max", "diss_Qi", "diss_Qr")

    def row(self):
        return [getattr(self, k) for k in self.FIELDS]

    def as_dict(self):
        return asdict(self)


def support_box(f: DistributionState, threshold: float = SUPPORT_THRESHOLD):
    """Edges of the smallest box holding every cell with f > threshold * max f."""
    g = f.grid
    vals = f.values
    top = vals.max() if vals.size else 0.0
    if top <= 0:
        return (0.0, 0.0, 0.0, 0.0)
    mask = vals > threshold * top
    ix = np.flatnonzero(mask.any(axis=1))
    iv = np.flatnonzero(mask.any(axis=0))
    xe, ve = g.x_edges, g.v_edges
    return (float(xe[ix[0]]), float(xe[ix[-1] + 1]), float(ve[iv[0]]), float(ve[iv[-1] + 1]))


def diagnostics(f: DistributionState, macro: Optional[MacroFields] = None) -> DiagnosticsReport:
    g = f.grid
    if macro is None:
        macro = compute_moments(f)
    v = g.v
    vals = f.values
    area = g.cell_area
    mass = vals.sum() * area
    mom = float((vals @ v).sum() * area)
    energy = 0.5 * float((vals @ (v * v)).sum() * area)
    spread = (macro.u[:, None] - v[None, :]) ** 2 * vals
    spread[macro.vacuum] = 0.0
    per_x = spread.sum(axis=1)
    d_qr = float(per_x.sum() * area)
    d_qi = float((macro.rho * per_x).sum() * area)
    box = support_box(f)
    return DiagnosticsReport(float(f.t), float(mass), mom, energy, float(vals.max(initial=0.0)),
                             *box, d_qi, d_qr)
