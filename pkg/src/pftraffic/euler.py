"""Pressureless Euler references: sticky particles and first-order finite volumes."""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np


@dataclass
class StickyState:
    """Particle form of a pressureless Euler state, sorted by position."""

    x: np.ndarray
    m: np.ndarray
    v: np.ndarray
    t: float

    @property
    def mass(self):
        return float(self.m.sum())

    @property
    def momentum(self):
        return float((self.m * self.v).sum())


@dataclass
class FVState:
    x: np.ndarray
    rho: np.ndarray
    m: np.ndarray
    t: float
    shock: bool = False

    @property
    def u(self):
        return np.divide(self.m, self.rho, out=np.zeros_like(self.m), where=self.rho > 0)


def sticky_evolve(x, m, v, times: Sequence[float], period: Optional[float] = None,
                  x_min: float = 0.0) -> List[StickyState]:
    """Exact event-driven sticky-particle dynamics.

    Particles fly freely and merge on contact, conserving mass and momentum.
    With ``period`` set the line is the circle [x_min, x_min + period).
    Returns the state at each of the (nondecreasing) ``times``.
    """
    order = np.argsort(x, kind="stable")
    xr = np.asarray(x, dtype=float)[order].copy()
    mm = np.asarray(m, dtype=float)[order].copy()
    vv = np.asarray(v, dtype=float)[order].copy()
    n = xr.size
    if n == 0:
        raise ValueError("need at least one particle")
    if np.any(mm <= 0):
        raise ValueError("particle masses must be positive")
    tr = np.zeros(n)
    alive = np.ones(n, dtype=bool)
    ver = np.zeros(n, dtype=np.int64)
    nxt = np.arange(1, n + 1)
    prv = np.arange(-1, n - 1)
    periodic = period is not None
    if periodic:
        nxt[-1] = 0
        prv[0] = n - 1
    else:
        nxt[-1] = -1
    head = 0
    heap = []

    def pos(i, t):
        return xr[i] + vv[i] * (t - tr[i])

    def push(i, t_now):
        j = nxt[i]
        if j < 0 or j == i:
            return
        rel = vv[i] - vv[j]
        if rel <= 0:
            return
        gap = pos(j, t_now) - pos(i, t_now)
        if j == head:
            gap += period
        heapq.heappush(heap, (t_now + max(gap, 0.0) / rel, int(i), int(j), int(ver[i]), int(ver[j])))

    for i in range(n):
        push(i, 0.0)

    out = []
    for t_out in times:
        while heap and heap[0][0] <= t_out:
            tc, i, j, vi, vj = heapq.heappop(heap)
            if not (alive[i] and alive[j]) or ver[i] != vi or ver[j] != vj or nxt[i] != j:
                continue
            xi = pos(i, tc)
            mtot = mm[i] + mm[j]
            vv[i] = (mm[i] * vv[i] + mm[j] * vv[j]) / mtot
            mm[i] = mtot
            xr[i] = xi
            tr[i] = tc
            ver[i] += 1
            alive[j] = False
            k = nxt[j]
            if k == i:
                nxt[i] = i
                prv[i] = i
            else:
                nxt[i] = k
                if k >= 0:
                    prv[k] = i
            if j == head:
                # the merged particle now sits one period to the right of the old head
                head = nxt[i] if nxt[i] >= 0 else i
            p = prv[i]
            if p >= 0 and p != i:
                push(p, tc)
            push(i, tc)
        # walk from head in order
        idx = []
        i = head
        while True:
            idx.append(i)
            i = nxt[i]
            if i < 0 or i == head:
                break
        idx = np.array(idx, dtype=np.int64)
        xs = xr[idx] + vv[idx] * (t_out - tr[idx])
        ms, vs = mm[idx].copy(), vv[idx].copy()
        if periodic:
            xs = x_min + np.mod(xs - x_min, period)
            o = np.argsort(xs, kind="stable")
            xs, ms, vs = xs[o], ms[o], vs[o]
        out.append(StickyState(xs, ms, vs, float(t_out)))
    return out


def discretize_profiles(rho0: Callable, u0: Callable, x_min, x_max, n_particles):
    """Equal-width particles at sub-cell midpoints with mass rho0 * h."""
    h = (x_max - x_min) / n_particles
    xs = x_min + (np.arange(n_particles) + 0.5) * h
    m = np.asarray(rho0(xs), dtype=float) * np.ones(n_particles) * h
    v = np.asarray(u0(xs), dtype=float) * np.ones(n_particles)
    keep = m > 0
    return xs[keep], m[keep], v[keep]


def sticky_run(rho0: Callable, u0: Callable, t_final: float, x_min: float, x_max: float,
               n_particles: int = 4096, times: Optional[Sequence[float]] = None,
               periodic: bool = True) -> List[StickyState]:
    x, m, v = discretize_profiles(rho0, u0, x_min, x_max, n_particles)
    if times is None:
        times = [0.0, t_final]
    return sticky_evolve(x, m, v, times, period=(x_max - x_min) if periodic else None, x_min=x_min)


def sticky_to_grid(state: StickyState, x_min: float, dx: float, nx: int):
    """Cell-averaged density and mass-weighted cell velocity (0 in empty cells)."""
    k = np.clip(np.floor((state.x - x_min) / dx).astype(np.int64), 0, nx - 1)
    mass = np.bincount(k, weights=state.m, minlength=nx)
    mom = np.bincount(k, weights=state.m * state.v, minlength=nx)
    u = np.divide(mom, mass, out=np.zeros(nx), where=mass > 0)
    return mass / dx, u, mass > 0


# ---------------------------------------------------------------------------
# finite volumes


def _fv_flux(rho, m, periodic):
    u = np.divide(m, rho, out=np.zeros_like(m), where=rho > 0)
    up = np.maximum(u, 0.0)
    um = np.minimum(u, 0.0)
    if periodic:
        rr, mr, umr = np.roll(rho, -1), np.roll(m, -1), np.roll(um, -1)
    else:
        rr = np.append(rho[1:], 0.0)
        mr = np.append(m[1:], 0.0)
        umr = np.append(um[1:], 0.0)
    # flux through the right face of each cell
    fr = rho * up + rr * umr
    fm = m * up + mr * umr
    return fr, fm, u


def fv_run(rho0: Callable, u0: Callable, t_final: float, x_min: float, x_max: float, nx: int,
           periodic: bool = True, cfl: float = 0.5, times: Optional[Sequence[float]] = None
           ) -> List[FVState]:
    """Upwind flux-vector-split finite volumes for (rho, rho u).

    The trusted window ends (``shock=True`` on later states) at the first
    crossing time 1 / max(-du0/dx), estimated from the sampled initial
    velocity. Upwind smearing hides the jump itself, so it is not used.
    """
    dx = (x_max - x_min) / nx
    x = x_min + (np.arange(nx) + 0.5) * dx
    rho = np.asarray(rho0(x), dtype=float) * np.ones(nx)
    u_init = np.asarray(u0(x), dtype=float) * np.ones(nx)
    m = rho * u_init
    slope = np.diff(np.append(u_init, u_init[0]) if periodic else u_init) / dx
    steepest = float(-slope.min()) if slope.size else 0.0
    t_cross = 1.0 / steepest if steepest > 0 else np.inf
    if times is None:
        times = [0.0, t_final]
    out = []
    t = 0.0
    shock = False
    for t_out in times:
        while t < t_out - 1e-14:
            fr, fm, u = _fv_flux(rho, m, periodic)
            umax = float(np.abs(u).max())
            dt = cfl * dx / umax if umax > 0 else t_out - t
            dt = min(dt, t_out - t)
            lam = dt / dx
            if periodic:
                fr_l, fm_l = np.roll(fr, 1), np.roll(fm, 1)
            else:
                fr_l = np.concatenate([[0.0], fr[:-1]])
                fm_l = np.concatenate([[0.0], fm[:-1]])
            rho = rho - lam * (fr - fr_l)
            m = m - lam * (fm - fm_l)
            rho = np.maximum(rho, 0.0)
            m = np.where(rho > 0, m, 0.0)
            t += dt
            if t >= t_cross:
                shock = True
        out.append(FVState(x.copy(), rho.copy(), m.copy(), float(t_out), shock))
    return out
