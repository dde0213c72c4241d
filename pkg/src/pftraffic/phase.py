"""Phase-space grid, distribution states, mollifier and initial data."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


@dataclass(frozen=True)
class PhaseGrid:
    """Uniform cell-centred grid on [x_min, x_max] x [0, v_max]."""

    x_min: float
    x_max: float
    v_max: float
    nx: int
    nv: int

    def __post_init__(self):
        if self.nx < 2 or self.nv < 2:
            raise ValueError(f"need nx >= 2 and nv >= 2, got nx={self.nx}, nv={self.nv}")
        if not self.x_max > self.x_min:
            raise ValueError(f"x_max must exceed x_min, got [{self.x_min}, {self.x_max}]")
        if not self.v_max > 0:
            raise ValueError(f"v_max must be positive, got {self.v_max}")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.nx

    @property
    def dv(self) -> float:
        return self.v_max / self.nv

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def x(self) -> np.ndarray:
        return self.x_min + (np.arange(self.nx) + 0.5) * self.dx

    @property
    def v(self) -> np.ndarray:
        return (np.arange(self.nv) + 0.5) * self.dv

    @property
    def x_edges(self) -> np.ndarray:
        return self.x_min + np.arange(self.nx + 1) * self.dx

    @property
    def v_edges(self) -> np.ndarray:
        return np.arange(self.nv + 1) * self.dv

    @property
    def cell_area(self) -> float:
        return self.dx * self.dv


def build_grid(bounds, nx: int, nv: int) -> PhaseGrid:
    """``bounds = ((x_min, x_max), (0, v_max))``; the velocity axis starts at 0."""
    (x_min, x_max), (v_lo, v_max) = bounds
    if v_lo != 0:
        raise ValueError("velocity domain must start at v = 0")
    return PhaseGrid(float(x_min), float(x_max), float(v_max), int(nx), int(nv))


@dataclass(frozen=True)
class DistributionState:
    grid: PhaseGrid
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=float)
        if vals.shape != (self.grid.nx, self.grid.nv):
            raise ValueError(f"values shape {vals.shape} does not match grid {(self.grid.nx, self.grid.nv)}")
        if vals.size and vals.min() < 0:
            raise ValueError("distribution values must be nonnegative")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def mass(self) -> float:
        return float(self.values.sum() * self.grid.cell_area)

    def replace(self, values=None, t=None) -> "DistributionState":
        return DistributionState(self.grid, self.values if values is None else values,
                                 self.t if t is None else t)


def zero_state(grid: PhaseGrid, t: float = 0.0) -> DistributionState:
    return DistributionState(grid, np.zeros((grid.nx, grid.nv)), t)


def _overlap(edges, lo, hi):
    """Fraction of each cell [edges[i], edges[i+1]] covered by [lo, hi]."""
    a = np.clip(edges[:-1], lo, hi)
    b = np.clip(edges[1:], lo, hi)
    return (b - a) / np.diff(edges)


def init_rectangle(grid: PhaseGrid, x_box, v_box, height: float) -> DistributionState:
    """Constant ``height`` on ``x_box x v_box``, stored as exact cell averages."""
    (x0, x1), (v0, v1) = x_box, v_box
    if v0 <= 0:
        raise ValueError("velocity box must stay away from v = 0 (f0(x, 0) = 0)")
    if x0 >= x1 or v0 >= v1:
        raise ValueError("empty box")
    if x0 < grid.x_min or x1 > grid.x_max or v1 > grid.v_max:
        raise ValueError("box lies outside the grid")
    fx = _overlap(grid.x_edges, x0, x1)
    fv = _overlap(grid.v_edges, v0, v1)
    return DistributionState(grid, height * np.outer(fx, fv))


# compactly supported quartic (biweight) kernel on (-1, 1); variance 1/7
_BIWEIGHT_VAR = 1.0 / 7.0


def _biweight_cdf(s):
    s = np.clip(s, -1.0, 1.0)
    return 0.5 + 15.0 / 16.0 * (s - 2.0 * s**3 / 3.0 + s**5 / 5.0)


def biweight_halfwidth(sigma: float) -> float:
    """Support half-width of the quartic bump with standard deviation ``sigma``."""
    return sigma / math.sqrt(_BIWEIGHT_VAR)


def init_well_prepared(
    grid: PhaseGrid,
    rho0: Callable,
    u0: Callable,
    eps_scale: float,
    spread: float = 1.0,
    shift: float = 0.0,
    sigma: Optional[float] = None,
) -> DistributionState:
    """Near-monokinetic data ``rho0(x - d) * g_sigma(v - u0(x - d))``.

    ``g_sigma`` is the quartic bump with standard deviation
    ``sigma = spread * sqrt(eps_scale)`` (or the explicit ``sigma``), integrated
    exactly over each velocity cell. ``d = shift * sqrt(eps_scale)`` offsets the
    data in x; with ``shift != 0`` both well-preparedness quantities are of
    exact order eps and the initial density distance is of exact order sqrt(eps).
    """
    if eps_scale <= 0:
        raise ValueError("eps_scale must be positive")
    root = math.sqrt(eps_scale)
    sig = spread * root if sigma is None else float(sigma)
    if sig <= 0:
        raise ValueError("velocity spread must be positive")
    d = shift * root
    xs = grid.x - d
    rho = np.asarray(rho0(xs), dtype=float) * np.ones(grid.nx)
    u = np.asarray(u0(xs), dtype=float) * np.ones(grid.nx)
    if rho.min() < 0:
        raise ValueError("rho0 must be nonnegative")
    h = biweight_halfwidth(sig)
    occupied = rho > 0
    if occupied.any():
        if (u[occupied] - h).min() <= 0.0:
            raise ValueError(f"velocity bump (half-width {h:.4g}) leaks past v = 0")
        if (u[occupied] + h).max() >= grid.v_max:
            raise ValueError(f"velocity bump (half-width {h:.4g}) leaks past v_max = {grid.v_max}")
    edges = grid.v_edges
    cdf = _biweight_cdf((edges[None, :] - u[:, None]) / h)
    cell_prob = np.diff(cdf, axis=1) / grid.dv
    return DistributionState(grid, rho[:, None] * cell_prob)


def well_prepared_quantities(f: DistributionState, rho0: Callable, u0: Callable):
    """The two well-preparedness integrals of f against (rho0, u0).

    Returns ``(int rho_eps (u0 - u_eps)^2 dx, int (int v^2 f dv - rho0 u0^2) dx)``.
    """
    g = f.grid
    v = g.v
    rho_e = f.values.sum(axis=1) * g.dv
    m_e = (f.values * v).sum(axis=1) * g.dv
    e_e = (f.values * v**2).sum(axis=1) * g.dv
    u_e = np.divide(m_e, rho_e, out=np.zeros_like(m_e), where=rho_e > 0)
    r0 = np.asarray(rho0(g.x), dtype=float) * np.ones(g.nx)
    uu = np.asarray(u0(g.x), dtype=float) * np.ones(g.nx)
    q1 = float(np.sum(rho_e * (uu - u_e) ** 2) * g.dx)
    q2 = float(np.sum(e_e - r0 * uu**2) * g.dx)
    return q1, q2


# ---------------------------------------------------------------------------
# mollifier


def standard_bump(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


@dataclass(frozen=True)
class MollifierSpec:
    eps: float
    profile: Callable = field(default=standard_bump, compare=False)

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("mollifier width must be positive")

    def weights(self, dx: float) -> np.ndarray:
        """Discrete kernel on offsets k*dx, |k dx| < eps, normalised to sum 1."""
        k = int(math.ceil(self.eps / dx))
        s = np.arange(-k, k + 1) * dx / self.eps
        w = self.profile(s)
        w[np.abs(s) >= 1.0] = 0.0
        tot = w.sum()
        if tot <= 0:
            return np.array([1.0])
        return w / tot

    def __call__(self, x):
        """Continuous theta_eps(x) = theta(x / eps) / eps with unit integral."""
        return self.profile(np.asarray(x) / self.eps) / (self.eps * _BUMP_MASS)


_BUMP_MASS = 0.44399381616807865  # integral of exp(-1/(1-s^2)) over (-1, 1)


def mollify(field_x, moll: MollifierSpec, dx: float, periodic: bool = False) -> np.ndarray:
    """Discrete convolution with the mollifier; zero padding unless periodic."""
    field_x = np.asarray(field_x, dtype=float)
    if moll.eps < dx:
        warnings.warn(f"mollifier width {moll.eps} below grid spacing {dx}; using identity", RuntimeWarning)
        return field_x.copy()
    w = moll.weights(dx)
    k = (w.size - 1) // 2
    n = field_x.size
    if periodic:
        if w.size > n:
            # kernel wider than the period: fold it
            folded = np.zeros(n)
            np.add.at(folded, np.arange(-k, k + 1) % n, w)
            khat = np.fft.rfft(folded)
            return np.fft.irfft(np.fft.rfft(field_x) * khat, n)
        padded = np.concatenate([field_x[n - k:], field_x, field_x[:k]]) if k else field_x
        return np.convolve(padded, w, mode="valid")
    return np.convolve(field_x, w, mode="same")
