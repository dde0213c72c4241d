"""The canonical experiments, decoupled from argument parsing and file output."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .config import ConfigError, Profile, ScenarioConfig, preshock_time
from .euler import fv_run, sticky_run, sticky_to_grid
from .metrics import (
    ConvergenceRecord,
    Measure1D,
    monokinetic_deviation,
    relative_entropy,
    wasserstein1_1d,
)
from .operators import compute_moments
from .particles import particle_run
from .solver import Model, check_run_invariants, picard_run, run


@dataclass
class Assertion:
    name: str
    passed: bool
    value: object = None
    bound: object = None

    def as_dict(self):
        return {"name": self.name, "passed": bool(self.passed), "value": self.value, "bound": self.bound}


@dataclass
class ExperimentResult:
    assertions: List[Assertion] = field(default_factory=list)
    tables: Dict[str, tuple] = field(default_factory=dict)  # name -> (header, rows)
    summary: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(a.passed for a in self.assertions)


def _pop(d, key, default=None, required=False):
    if key in d:
        return d.pop(key)
    if required:
        raise ConfigError(f"missing config field {key!r}")
    return default


# ---------------------------------------------------------------------------
# simulate


def simulate(cfg: ScenarioConfig, snapshot_every: int = 10, mass_tol=1e-8, energy_rel_tol=1e-3):
    snaps = []
    count = [0]

    def grab(state, rep):
        if count[0] % snapshot_every == 0:
            snaps.append(state)
        count[0] += 1

    final, reports = run(cfg, on_output=grab)
    if snaps[-1].t != final.t:
        snaps.append(final)
    dt, _ = cfg.time_step()
    res = ExperimentResult()
    kappa = Model.from_config(cfg).kappa
    for chk in check_run_invariants(reports, cfg.grid, dt, mass_tol, energy_rel_tol, kappa):
        res.assertions.append(Assertion(chk.name, chk.passed, chk.value, chk.tolerance))
    res.summary = {"dt": dt, "final_mass": reports[-1].mass, "initial_mass": reports[0].mass}
    return res, reports, snaps


# ---------------------------------------------------------------------------
# hydrodynamic sweep


@dataclass
class SweepConfig:
    eps: List[float]
    rho0: Profile
    u0: Profile
    x_min: float = 0.0
    x_max: float = 1.0
    v_max: float = 2.4
    nx: int = 256
    nv: int = 192
    t_final: float = 0.2
    cfl: float = 0.9
    n_outputs: int = 50
    spread: float = 0.3
    shift: float = 0.3
    sigma: Optional[float] = None  # fixed spread: breaks well-preparedness on purpose
    n_sticky: int = 4096
    w1_window: tuple = (0.3, 0.8)
    re_window: tuple = (0.7, 1.3)

    @classmethod
    def from_dict(cls, d) -> "SweepConfig":
        d = dict(d)
        try:
            eps = [float(e) for e in _pop(d, "eps", required=True)]
            rho0 = Profile.from_dict(_pop(d, "rho0", required=True))
            u0 = Profile.from_dict(_pop(d, "u0", required=True))
            for key in ("w1_window", "re_window"):
                if key in d:
                    d[key] = tuple(float(x) for x in d[key])
            cfg = cls(eps=eps, rho0=rho0, u0=u0, **d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        cfg.validate()
        return cfg

    def validate(self):
        if len(self.eps) < 4:
            raise ConfigError("a sweep needs at least 4 eps values to fit a slope")
        if any(e <= 0 for e in self.eps) or any(b >= a for a, b in zip(self.eps, self.eps[1:])):
            raise ConfigError("eps values must be positive and strictly decreasing")
        tc = preshock_time(self.u0)
        if not self.t_final < tc:
            raise ConfigError(f"t_final={self.t_final} is not before the first crossing time {tc:.4g}")

    def scenario(self, eps) -> ScenarioConfig:
        init = {"kind": "well_prepared", "rho0": self.rho0.__dict__, "u0": self.u0.__dict__, "eps": eps,
                "spread": self.spread, "shift": self.shift, "sigma": self.sigma}
        return ScenarioConfig(x_min=self.x_min, x_max=self.x_max, v_max=self.v_max, nx=self.nx, nv=self.nv,
                              initial=init, variant="scaled", eps_scale=eps, t_final=self.t_final,
                              cfl=self.cfl, n_outputs=self.n_outputs, boundary="periodic")


def _sweep_one(sc: SweepConfig, eps):
    cfg = sc.scenario(eps)
    g = cfg.grid
    states = []
    run(cfg, on_output=lambda s, r: states.append(s))
    times = [s.t for s in states]
    refs = sticky_run(sc.rho0, sc.u0, sc.t_final, sc.x_min, sc.x_max, sc.n_sticky, times=times)
    rows = []
    for s, ref in zip(states, refs):
        macro = compute_moments(s, 0.0)
        rho_r, u_r, _ = sticky_to_grid(ref, g.x_min, g.dx, g.nx)
        w1 = wasserstein1_1d(Measure1D.histogram(g.x_edges, macro.rho), Measure1D.atoms(ref.x, ref.m))
        re = relative_entropy(macro.rho, macro.u, rho_r, u_r, g.dx)
        t1, t2, bound = monokinetic_deviation(s, rho_r, u_r, periodic=True)
        rows.append((s.t, w1, re, t1, t2, bound))
    masses = (float(states[0].mass()), float(refs[0].mass))
    return rows, masses


def sweep(sc: SweepConfig, log=None) -> ExperimentResult:
    rec = ConvergenceRecord()
    res = ExperimentResult()
    traces = []
    masses = {}
    for eps in sc.eps:
        rows, m = _sweep_one(sc, eps)
        masses[str(eps)] = {"kinetic": m[0], "euler": m[1]}
        arr = np.array(rows)
        rec.add(eps, arr[:, 1].max(), arr[:, 2].max(), arr[:, 5].max())
        traces.extend((eps,) + r for r in rows)
        if log:
            log(f"eps={eps:g}  w1_sup={rec.w1_sup[-1]:.4e}  re_sup={rec.re_sup[-1]:.4e}  mono_sup={rec.mono_sup[-1]:.4e}")
    slopes = rec.slopes()
    w1s, res_ = slopes["w1_sup"]["slope"], slopes["re_sup"]["slope"]
    res.assertions.append(Assertion("w1_slope_window", w1s is not None and sc.w1_window[0] <= w1s <= sc.w1_window[1],
                                    w1s, list(sc.w1_window)))
    res.assertions.append(Assertion("re_slope_window", res_ is not None and sc.re_window[0] <= res_ <= sc.re_window[1],
                                    res_, list(sc.re_window)))
    res.tables["convergence"] = (("eps", "w1_sup", "re_sup", "mono_sup"), rec.rows())
    res.tables["sweep_trace"] = (("eps", "t", "w1", "re", "mono_term1", "mono_term2", "mono_bound"), traces)
    res.summary = {"slopes": slopes, "masses": masses, "record": rec,
                   "preshock_time": preshock_time(sc.u0), "preshock_note":
                   "Euler reference trusted on [0, 1/max(-u0')); the window is a heuristic."}
    return res


# ---------------------------------------------------------------------------
# picard


def picard(cfg: ScenarioConfig, n_iters: int = 6, start: int = 2) -> ExperimentResult:
    model = Model("regularized", cfg.eps_reg, 1.0, cfg.eps_moll, cfg.periodic, cfg.cfl, cfg.rho_floor)
    dt, _ = cfg.time_step()
    trace = picard_run(cfg.initial_state(), model, n_iters, cfg.t_final, dt)
    res = ExperimentResult()
    res.assertions.append(Assertion("d_n_tail_decreasing", trace.tail_decreasing(start), list(trace.d), start))
    res.tables["picard_trace"] = (("n", "d_n"), list(enumerate(trace.d)))
    res.summary = {"d": list(trace.d), "diverging": trace.diverging, "final": trace.final}
    return res


# ---------------------------------------------------------------------------
# compare


def _w1_hist(edges, a, b):
    if a.sum() <= 0 and b.sum() <= 0:
        return 0.0
    return wasserstein1_1d(Measure1D.histogram(edges, a), Measure1D.histogram(edges, b))


def compare_kinetic(cfg: ScenarioConfig, n_particles: int, seed: int, bound: float,
                    n_outputs: int = 10, self_check: bool = False) -> ExperimentResult:
    """Grid solver versus the weighted-particle solver on one scenario."""
    g = cfg.grid
    model = Model.from_config(cfg)
    grid_states = []
    dt, n_steps = cfg.time_step()
    cfg_out = ScenarioConfig(**{**cfg.to_dict(), "n_outputs": n_outputs})
    run(cfg_out, on_output=lambda s, r: grid_states.append(s))
    res = ExperimentResult()
    rho_grid = [s.values.sum(axis=1) * g.dv for s in grid_states]
    if self_check:
        rho_other = rho_grid
        dumps = []
    else:
        traj = particle_run(cfg.initial_state(), model, cfg.t_final, n_particles, dt=dt, seed=seed,
                            n_outputs=n_outputs)
        rho_other = traj.rho
        dumps = [(e.t, x, w, v) for e in traj.snapshots for x, w, v in zip(e.x, e.w, e.v)]
    gaps = [_w1_hist(g.x_edges, a, b) for a, b in zip(rho_grid, rho_other)]
    worst = max(gaps)
    res.assertions.append(Assertion("w1_grid_vs_particle", worst <= bound, worst, bound))
    res.tables["compare_w1"] = (("t", "w1"), [(s.t, w) for s, w in zip(grid_states, gaps)])
    res.tables["particles"] = (("t", "x", "m", "v"), dumps)
    res.tables["grid_density"] = (("t", "x", "rho"),
                                  [(s.t, x, r) for s, rr in zip(grid_states, rho_grid) for x, r in zip(g.x, rr)])
    res.summary = {"w1_max": worst, "bound": bound, "n_particles": n_particles}
    return res


def compare_euler(rho0: Profile, u0: Profile, x_min, x_max, nx, t_final, n_sticky, bound_factor,
                  n_outputs=10, cfl=0.5) -> ExperimentResult:
    """Finite volumes versus sticky particles inside the smooth window."""
    tc = preshock_time(u0)
    if not t_final < tc:
        raise ConfigError(f"t_final={t_final} is not before the first crossing time {tc:.4g}")
    times = list(np.linspace(0.0, t_final, n_outputs + 1))
    dx = (x_max - x_min) / nx
    fv = fv_run(rho0, u0, t_final, x_min, x_max, nx, cfl=cfl, times=times)
    st = sticky_run(rho0, u0, t_final, x_min, x_max, n_sticky, times=times)
    edges = x_min + dx * np.arange(nx + 1)
    gaps, traj = [], []
    for a, b in zip(fv, st):
        gaps.append(wasserstein1_1d(Measure1D.histogram(edges, a.rho), Measure1D.atoms(b.x, b.m)))
        traj.extend((a.t, x, r, u) for x, r, u in zip(a.x, a.rho, a.u))
    worst = max(gaps)
    bound = bound_factor * dx
    res = ExperimentResult()
    res.assertions.append(Assertion("w1_fv_vs_sticky", worst <= bound, worst, bound))
    res.assertions.append(Assertion("fv_no_shock", not fv[-1].shock, fv[-1].shock, False))
    res.tables["euler_fv"] = (("t", "x", "rho", "u"), traj)
    res.tables["euler_sticky"] = (("t", "x", "m", "v"),
                                  [(b.t, x, m, v) for b in st for x, m, v in zip(b.x, b.m, b.v)])
    res.tables["compare_w1"] = (("t", "w1"), [(a.t, w) for a, w in zip(fv, gaps)])
    res.summary = {"w1_max": worst, "bound": bound, "dx": dx, "preshock_time": tc}
    return res
