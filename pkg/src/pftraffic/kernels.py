"""Hot numeric kernels.

Each kernel has a numba implementation and a pure-numpy one with the same
signature. The public names dispatch to numba unless the environment
variable ``PFTRAFFIC_NUMBA`` is set to ``0`` (or numba is not importable).
Both variants are always importable as ``<name>_numba`` / ``<name>_numpy``
so they can be compared directly.
"""

import os

import numpy as np

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("PFTRAFFIC_NUMBA", "1") not in ("0", "false", "off")


def _njit(fn):
    if not HAVE_NUMBA:
        return fn
    return numba.njit(cache=True)(fn)


# ---------------------------------------------------------------------------
# x-transport: first-order upwind, all velocities positive


def transport_upwind_numpy(f, v, dt, dx, periodic):
    nu = (v * dt / dx)[None, :]
    if periodic:
        left = np.roll(f, 1, axis=0)
    else:
        left = np.empty_like(f)
        left[0] = 0.0
        left[1:] = f[:-1]
    return f - nu * (f - left)


@_njit
def transport_upwind_numba(f, v, dt, dx, periodic):
    nx, nv = f.shape
    out = np.empty_like(f)
    for j in range(nv):
        nu = v[j] * dt / dx
        if periodic:
            prev = f[nx - 1, j]
        else:
            prev = 0.0
        for i in range(nx):
            cur = f[i, j]
            out[i, j] = cur - nu * (cur - prev)
            prev = cur
    return out


# ---------------------------------------------------------------------------
# local velocity step: exact frozen-coefficient characteristics + linear remap
#
# Along v(s) = ub + (v0 - ub) e^{-kappa s} the mass of a parcel is multiplied by
# exp(kappa * int S ds) with S = coef * (ui - v(s)); the integral is closed form.


def velocity_remap_numpy(f, v, dv, active, ubar, uint, coef, kappa, dt, renormalize):
    nx, nv = f.shape
    decay = np.exp(-kappa * dt)
    ub = ubar[:, None]
    p = ub + (v[None, :] - ub) * decay
    logw = coef[:, None] * ((uint - ubar)[:, None] * kappa * dt - (v[None, :] - ub) * (1.0 - decay))
    mass = f * np.exp(logw)
    s = (p - v[0]) / dv
    k = np.floor(s)
    frac = s - k
    k = k.astype(np.int64)
    low = k < 0
    high = k >= nv - 1
    frac[low] = 0.0
    k[low] = 0
    frac[high] = 0.0
    k[high] = nv - 1
    rows = np.repeat(np.arange(nx, dtype=np.int64), nv).reshape(nx, nv)
    base = rows * nv
    out = np.bincount((base + k).ravel(), weights=(mass * (1.0 - frac)).ravel(), minlength=nx * nv)
    kp = np.minimum(k + 1, nv - 1)
    out = out + np.bincount((base + kp).ravel(), weights=(mass * frac).ravel(), minlength=nx * nv)
    out = out.reshape(nx, nv)
    if renormalize:
        before = f.sum(axis=1)
        after = out.sum(axis=1)
        scale = np.where(after > 0.0, before / np.where(after > 0.0, after, 1.0), 1.0)
        out = out * scale[:, None]
    out[~active] = f[~active]
    return out


@_njit
def velocity_remap_numba(f, v, dv, active, ubar, uint, coef, kappa, dt, renormalize):
    nx, nv = f.shape
    out = np.zeros_like(f)
    decay = np.exp(-kappa * dt)
    for i in range(nx):
        if not active[i]:
            for j in range(nv):
                out[i, j] = f[i, j]
            continue
        ub = ubar[i]
        shift = (uint[i] - ub) * kappa * dt
        before = 0.0
        after = 0.0
        for j in range(nv):
            fij = f[i, j]
            if fij == 0.0:
                continue
            before += fij
            p = ub + (v[j] - ub) * decay
            m = fij * np.exp(coef[i] * (shift - (v[j] - ub) * (1.0 - decay)))
            after += m
            s = (p - v[0]) / dv
            k = int(np.floor(s))
            if k < 0:
                out[i, 0] += m
            elif k >= nv - 1:
                out[i, nv - 1] += m
            else:
                fr = s - k
                out[i, k] += m * (1.0 - fr)
                out[i, k + 1] += m * fr
        if renormalize and after > 0.0:
            sc = before / after
            for j in range(nv):
                out[i, j] *= sc
    return out


# ---------------------------------------------------------------------------
# particle <-> grid (cloud-in-cell on cell centres)


def deposit_cic_numpy(xp, wp, x_min, dx, nx, periodic):
    s = (xp - x_min) / dx - 0.5
    k = np.floor(s)
    fr = s - k
    k = k.astype(np.int64)
    kp = k + 1
    if periodic:
        k %= nx
        kp %= nx
        w0 = wp * (1.0 - fr)
        w1 = wp * fr
    else:
        w0 = np.where((k >= 0) & (k < nx), wp * (1.0 - fr), 0.0)
        w1 = np.where((kp >= 0) & (kp < nx), wp * fr, 0.0)
        k = np.clip(k, 0, nx - 1)
        kp = np.clip(kp, 0, nx - 1)
    out = np.bincount(k, weights=w0, minlength=nx) + np.bincount(kp, weights=w1, minlength=nx)
    return out / dx


@_njit
def deposit_cic_numba(xp, wp, x_min, dx, nx, periodic):
    out = np.zeros(nx)
    for p in range(xp.size):
        s = (xp[p] - x_min) / dx - 0.5
        k = int(np.floor(s))
        fr = s - k
        kp = k + 1
        if periodic:
            k %= nx
            kp %= nx
            out[k] += wp[p] * (1.0 - fr)
            out[kp] += wp[p] * fr
        else:
            if 0 <= k < nx:
                out[k] += wp[p] * (1.0 - fr)
            if 0 <= kp < nx:
                out[kp] += wp[p] * fr
    return out / dx


def gather_cic_numpy(field, xp, x_min, dx, periodic):
    nx = field.size
    s = (xp - x_min) / dx - 0.5
    k = np.floor(s)
    fr = s - k
    k = k.astype(np.int64)
    kp = k + 1
    if periodic:
        return field[k % nx] * (1.0 - fr) + field[kp % nx] * fr
    k = np.clip(k, 0, nx - 1)
    kp = np.clip(kp, 0, nx - 1)
    return field[k] * (1.0 - fr) + field[kp] * fr


@_njit
def gather_cic_numba(field, xp, x_min, dx, periodic):
    nx = field.size
    out = np.empty(xp.size)
    for p in range(xp.size):
        s = (xp[p] - x_min) / dx - 0.5
        k = int(np.floor(s))
        fr = s - k
        kp = k + 1
        if periodic:
            k %= nx
            kp %= nx
        else:
            k = min(max(k, 0), nx - 1)
            kp = min(max(kp, 0), nx - 1)
        out[p] = field[k] * (1.0 - fr) + field[kp] * fr
    return out


def particle_velocity_update_numpy(vp, wp, ubar, uint, coef, kappa, dt):
    decay = np.exp(-kappa * dt)
    logw = coef * ((uint - ubar) * kappa * dt - (vp - ubar) * (1.0 - decay))
    return ubar + (vp - ubar) * decay, wp * np.exp(logw)


@_njit
def particle_velocity_update_numba(vp, wp, ubar, uint, coef, kappa, dt):
    decay = np.exp(-kappa * dt)
    vn = np.empty_like(vp)
    wn = np.empty_like(wp)
    for p in range(vp.size):
        ub = ubar[p]
        vn[p] = ub + (vp[p] - ub) * decay
        wn[p] = wp[p] * np.exp(coef[p] * ((uint[p] - ub) * kappa * dt - (vp[p] - ub) * (1.0 - decay)))
    return vn, wn


_KERNELS = ("transport_upwind", "velocity_remap", "deposit_cic", "gather_cic", "particle_velocity_update")


def _select(use_numba):
    suffix = "_numba" if use_numba and HAVE_NUMBA else "_numpy"
    g = globals()
    for name in _KERNELS:
        g[name] = g[name + suffix]


def set_backend(use_numba):
    """Switch the dispatched kernels at runtime (tests and benchmarks)."""
    global USE_NUMBA
    USE_NUMBA = bool(use_numba) and HAVE_NUMBA
    _select(USE_NUMBA)


def backend():
    return "numba" if USE_NUMBA else "numpy"


_select(USE_NUMBA)
