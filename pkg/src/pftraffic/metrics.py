"""Distances and entropy functionals used in the hydrodynamic-limit study."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from .phase import DistributionState


@dataclass(frozen=True)
class Measure1D:
    """Nonnegative measure on the line: point atoms plus uniformly filled cells."""

    atom_x: np.ndarray = field(default_factory=lambda: np.zeros(0))
    atom_w: np.ndarray = field(default_factory=lambda: np.zeros(0))
    cell_lo: np.ndarray = field(default_factory=lambda: np.zeros(0))
    cell_hi: np.ndarray = field(default_factory=lambda: np.zeros(0))
    cell_w: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @classmethod
    def atoms(cls, x, w=None) -> "Measure1D":
        x = np.asarray(x, dtype=float).ravel()
        w = np.ones_like(x) if w is None else np.asarray(w, dtype=float).ravel()
        return cls(atom_x=x, atom_w=w)

    @classmethod
    def histogram(cls, edges, density) -> "Measure1D":
        """Piecewise-constant density on the cells delimited by ``edges``."""
        edges = np.asarray(edges, dtype=float)
        dens = np.asarray(density, dtype=float)
        return cls(cell_lo=edges[:-1], cell_hi=edges[1:], cell_w=dens * np.diff(edges))

    @property
    def total(self) -> float:
        return float(self.atom_w.sum() + self.cell_w.sum())

    def shifted(self, a) -> "Measure1D":
        return Measure1D(self.atom_x + a, self.atom_w, self.cell_lo + a, self.cell_hi + a, self.cell_w)

    def breakpoints(self):
        return np.concatenate([self.atom_x, self.cell_lo, self.cell_hi])

    def cdf(self, x):
        """Right-continuous CDF (unnormalised) at the points ``x``."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        if self.atom_x.size:
            o = np.argsort(self.atom_x, kind="stable")
            cum = np.concatenate([[0.0], np.cumsum(self.atom_w[o])])
            out += cum[np.searchsorted(self.atom_x[o], x, side="right")]
        if self.cell_w.size:
            width = self.cell_hi - self.cell_lo
            # contributions of fully passed cells plus the partial fraction
            frac = np.clip((x[:, None] - self.cell_lo[None, :]) / np.where(width > 0, width, 1.0)[None, :], 0.0, 1.0)
            frac = np.where(width[None, :] > 0, frac, (x[:, None] >= self.cell_lo[None, :]).astype(float))
            out += frac @ self.cell_w
        return out

    def atom_mass_at(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        if self.atom_x.size:
            o = np.argsort(self.atom_x, kind="stable")
            ax, aw = self.atom_x[o], self.atom_w[o]
            cum = np.concatenate([[0.0], np.cumsum(aw)])
            out = cum[np.searchsorted(ax, x, side="right")] - cum[np.searchsorted(ax, x, side="left")]
        zero_cells = self.cell_hi == self.cell_lo
        if zero_cells.any():
            for lo, w in zip(self.cell_lo[zero_cells], self.cell_w[zero_cells]):
                out = out + np.where(x == lo, w, 0.0)
        return out


def _as_measure(mu) -> Measure1D:
    if isinstance(mu, Measure1D):
        return mu
    x, w = mu
    return Measure1D.atoms(x, w)


def _abs_linear_integral(a, b, h):
    """Exact integral of |linear| over an interval of length h with end values a, b."""
    same = a * b >= 0
    s = np.abs(a) + np.abs(b)
    opp = np.divide(a * a + b * b, s, out=np.zeros_like(s), where=s > 0)
    return np.where(same, 0.5 * s, 0.5 * opp) * h


def wasserstein1_1d(mu1, mu2) -> float:
    """W1 between two measures after normalising each to unit mass.

    Computed as the integral of |F1 - F2| over the union of breakpoints; exact
    for any mixture of atoms and piecewise-constant densities. Plain
    ``(positions, weights)`` tuples are accepted as atomic measures.
    """
    m1, m2 = _as_measure(mu1), _as_measure(mu2)
    t1, t2 = m1.total, m2.total
    if t1 <= 0 or t2 <= 0:
        raise ValueError("W1 needs measures of positive mass")
    b = np.unique(np.concatenate([m1.breakpoints(), m2.breakpoints()]))
    if b.size < 2:
        return 0.0
    d_right = m1.cdf(b) / t1 - m2.cdf(b) / t2
    jump = m1.atom_mass_at(b) / t1 - m2.atom_mass_at(b) / t2
    d_left = d_right - jump
    # on (b_k, b_{k+1}) the difference is linear from d_right[k] to d_left[k+1]
    return float(_abs_linear_integral(d_right[:-1], d_left[1:], np.diff(b)).sum())


def wasserstein1_oracle_lp(x1, w1, x2, w2) -> float:
    """Transport LP over all plans between two small atomic measures."""
    from scipy.optimize import linprog

    x1, x2 = np.asarray(x1, float), np.asarray(x2, float)
    w1 = np.asarray(w1, float) / np.sum(w1)
    w2 = np.asarray(w2, float) / np.sum(w2)
    n, m = x1.size, x2.size
    cost = np.abs(x1[:, None] - x2[None, :]).ravel()
    a_eq = np.zeros((n + m, n * m))
    for i in range(n):
        a_eq[i, i * m:(i + 1) * m] = 1.0
    for j in range(m):
        a_eq[n + j, j::m] = 1.0
    res = linprog(cost, A_eq=a_eq, b_eq=np.concatenate([w1, w2]), bounds=(0, None), method="highs")
    if not res.success:
        raise RuntimeError(res.message)
    return float(res.fun)


def _check_pair(rho_eps, rho, u):
    rho_eps = np.asarray(rho_eps, float)
    rho = np.asarray(rho, float)
    bad = (rho_eps > 0) & ~(rho > 0)
    if bad.any():
        raise ValueError("reference density vanishes where the kinetic density is positive")
    return rho_eps, rho, np.asarray(u, float)


def relative_entropy(rho_eps, u_eps, rho, u, dx) -> float:
    """int rho_eps (u - u_eps)^2 / 2 dx with the midpoint rule."""
    rho_eps, rho, u = _check_pair(rho_eps, rho, u)
    return float(0.5 * np.sum(rho_eps * (u - np.asarray(u_eps, float)) ** 2) * dx)


def relative_entropy_threeterm(rho_eps, m_eps, rho, m, dx) -> float:
    """E(Ub) - E(U) - DE(U)(Ub - U) with E = m^2 / (2 rho), summed over cells."""
    rho_eps, m_eps = np.asarray(rho_eps, float), np.asarray(m_eps, float)
    rho, m = np.asarray(rho, float), np.asarray(m, float)
    e_bar = np.divide(m_eps**2, 2 * rho_eps, out=np.zeros_like(rho_eps), where=rho_eps > 0)
    e = m**2 / (2 * rho)
    de_rho = -(m**2) / (2 * rho**2)
    de_m = m / rho
    h = e_bar - e - de_rho * (rho_eps - rho) - de_m * (m_eps - m)
    return float(np.sum(h) * dx)


def relative_flux_norm(rho_eps, u_eps, rho, u, dx) -> float:
    """int |A(U_eps | U)| dx = int rho_eps (u_eps - u)^2 dx."""
    rho_eps, rho, u = _check_pair(rho_eps, rho, u)
    return float(np.sum(rho_eps * (np.asarray(u_eps, float) - u) ** 2) * dx)


def relative_flux_direct(rho_eps, m_eps, rho, m, dx) -> float:
    """Componentwise |A(Ub) - A(U) - DA(U)(Ub - U)| with A(U) = (m, m^2/rho)."""
    rho_eps, m_eps = np.asarray(rho_eps, float), np.asarray(m_eps, float)
    rho, m = np.asarray(rho, float), np.asarray(m, float)
    u = m / rho
    a2_bar = np.divide(m_eps**2, rho_eps, out=np.zeros_like(rho_eps), where=rho_eps > 0)
    # DA(U) = [[0, 1], [-u^2, 2u]]
    r1 = m_eps - m - (m_eps - m)
    r2 = a2_bar - m * u - (-(u**2) * (rho_eps - rho) + 2 * u * (m_eps - m))
    return float(np.sum(np.abs(r1) + np.abs(r2)) * dx)


def lipschitz_constant(u, dx, periodic=False) -> float:
    du = np.diff(u)
    if periodic:
        du = np.append(du, u[0] - u[-1])
    return float(np.abs(du).max(initial=0.0) / dx)


def monokinetic_deviation(f: DistributionState, rho, u, periodic: bool = False) -> Tuple[float, float, float]:
    """Upper-bound pieces for the distance of f to rho (x) delta_u.

    term1 = int int |v - u(x)| f / mass(f), term2 = W1 of the normalised
    densities, bound = term1 + (1 + Lip u) term2.
    """
    g = f.grid
    u = np.asarray(u, float)
    mass = f.values.sum() * g.cell_area
    if mass <= 0:
        return 0.0, 0.0, 0.0
    term1 = float((np.abs(g.v[None, :] - u[:, None]) * f.values).sum() * g.cell_area / mass)
    rho_eps = f.values.sum(axis=1) * g.dv
    term2 = wasserstein1_1d(Measure1D.histogram(g.x_edges, rho_eps), Measure1D.histogram(g.x_edges, rho))
    bound = term1 + (1.0 + lipschitz_constant(u, g.dx, periodic)) * term2
    return term1, term2, bound


def fit_loglog_slope(pairs: Sequence[Tuple[float, float]]):
    """Least-squares slope of log(error) against log(eps); returns (slope, rms residual)."""
    pairs = list(pairs)
    if len(pairs) < 2:
        raise ValueError("need at least two (eps, error) pairs")
    e = np.array([p[0] for p in pairs], float)
    err = np.array([p[1] for p in pairs], float)
    if np.any(e <= 0) or np.any(err <= 0):
        raise ValueError("eps and error values must be positive")
    lx, ly = np.log(e), np.log(err)
    slope, icpt = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + icpt)
    return float(slope), float(np.sqrt(np.mean(resid**2)))


@dataclass
class ConvergenceRecord:
    eps: List[float] = field(default_factory=list)
    w1_sup: List[float] = field(default_factory=list)
    re_sup: List[float] = field(default_factory=list)
    mono_sup: List[float] = field(default_factory=list)

    def add(self, eps, w1, re, mono):
        if self.eps and not eps < self.eps[-1]:
            raise ValueError("eps values must be strictly decreasing")
        if min(w1, re, mono) < 0:
            raise ValueError("errors must be nonnegative")
        self.eps.append(float(eps))
        self.w1_sup.append(float(w1))
        self.re_sup.append(float(re))
        self.mono_sup.append(float(mono))

    def slopes(self):
        out = {}
        for name in ("w1_sup", "re_sup", "mono_sup"):
            vals = getattr(self, name)
            if len(vals) >= 2 and min(vals) > 0:
                s, r = fit_loglog_slope(zip(self.eps, vals))
                out[name] = {"slope": s, "residual": r}
            else:
                out[name] = {"slope": None, "residual": None}
        return out

    def rows(self):
        return list(zip(self.eps, self.w1_sup, self.re_sup, self.mono_sup))
