"""Command-line driver: ``pftraffic simulate|sweep|picard|compare``.

Exit codes: 0 all assertions pass, 1 an assertion failed, 2 bad config,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from . import __version__, kernels
from .config import ConfigError, Profile, ScenarioConfig, load_json, save_json
from .experiments import SweepConfig, compare_euler, compare_kinetic, picard, simulate, sweep
from .io import write_csv, write_diagnostics, write_snapshot
from .particles import RNG_NAME
from .solver import CFLError, NumericalError

log = logging.getLogger("pftraffic")

SCHEME_VERSION = "strang-upwind-remap/1"
EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

# grid-vs-particle W1 <= C (dx + dv + N^-1/2); C calibrated on the rectangle scenario
COMPARE_C = 0.5


class Run:
    """Collects outputs and writes manifest.json once at the end."""

    def __init__(self, command, out, seed):
        self.command = command
        self.out = Path(out)
        self.seed = seed
        self.outputs = []
        self.t0 = time.perf_counter()
        self.manifest = {"command": command, "version": __version__, "scheme": SCHEME_VERSION,
                         "backend": kernels.backend(), "rng": {"name": RNG_NAME, "seed": seed},
                         "config": None, "tolerances": {}, "assertions": [], "summary": {}}

    def path(self, name):
        p = self.out / name
        self.outputs.append(name)
        return p

    def table(self, name, header, rows):
        write_csv(self.path(name), header, rows)

    def finish(self, code, error=None):
        self.manifest["exit_code"] = code
        self.manifest["wall_time_s"] = time.perf_counter() - self.t0
        if error is not None:
            self.manifest["error"] = error
        self.manifest["outputs"] = [o for o in self.outputs if (self.out / o).exists()]
        try:
            self.out.mkdir(parents=True, exist_ok=True)
            save_json(self.manifest, self.out / "manifest.json")
        except OSError as exc:
            log.error("cannot write manifest: %s", exc)
        return code


def _scenario(d):
    return ScenarioConfig.from_dict(d)


def cmd_simulate(cfg_dict, run: Run):
    d = dict(cfg_dict)
    every = int(d.pop("snapshot_every", 10))
    mass_tol = float(d.pop("mass_tol", 1e-8))
    energy_tol = float(d.pop("energy_rel_tol", 1e-3))
    cfg = _scenario(d)
    run.manifest["config"] = {**cfg.to_dict(), "snapshot_every": every}
    run.manifest["tolerances"] = {"mass_rel": mass_tol, "energy_rel": energy_tol}
    res, reports, snaps = simulate(cfg, every, mass_tol, energy_tol)
    write_diagnostics(run.path("diagnostics.csv"), reports)
    for i, s in enumerate(snaps):
        write_snapshot(run.path(f"snapshot_{i:04d}.csv"), s)
    return res


def cmd_sweep(cfg_dict, run: Run):
    sc = SweepConfig.from_dict(cfg_dict)
    run.manifest["config"] = {**sc.__dict__, "rho0": sc.rho0.__dict__, "u0": sc.u0.__dict__}
    run.manifest["tolerances"] = {"w1_slope": list(sc.w1_window), "re_slope": list(sc.re_window)}
    res = sweep(sc, log=log.info)
    rec = res.summary.pop("record")
    run.table("convergence.csv", *res.tables["convergence"])
    run.table("sweep_trace.csv", *res.tables["sweep_trace"])
    save_json({"slopes": res.summary["slopes"], "eps": rec.eps, "w1_sup": rec.w1_sup, "re_sup": rec.re_sup,
               "mono_sup": rec.mono_sup}, run.path("convergence_summary.json"))
    return res


def cmd_picard(cfg_dict, run: Run):
    d = dict(cfg_dict)
    n_iters = int(d.pop("n_iters", 6))
    start = int(d.pop("tail_start", 2))
    d["variant"] = "regularized"
    cfg = _scenario(d)
    if n_iters < start + 2:
        raise ConfigError("n_iters must leave at least two iterates in the checked tail")
    run.manifest["config"] = {**cfg.to_dict(), "n_iters": n_iters, "tail_start": start}
    run.manifest["tolerances"] = {"tail_start": start, "strict_decrease": True}
    res = picard(cfg, n_iters, start)
    run.table("picard_trace.csv", *res.tables["picard_trace"])
    res.summary.pop("final")
    return res


def cmd_compare(cfg_dict, run: Run):
    d = dict(cfg_dict)
    mode = d.pop("mode", "kinetic")
    if mode == "kinetic":
        n_particles = int(d.pop("n_particles", 100_000))
        c = float(d.pop("bound_C", COMPARE_C))
        self_check = bool(d.pop("self_check", False))
        n_out = int(d.pop("n_compare_outputs", 10))
        fixed = d.pop("bound", None)
        cfg = _scenario(d)
        g = cfg.grid
        bound = float(fixed) if fixed is not None else c * (g.dx + g.dv + n_particles ** -0.5)
        run.manifest["config"] = {**cfg.to_dict(), "mode": mode, "n_particles": n_particles, "bound_C": c,
                                  "self_check": self_check}
        run.manifest["tolerances"] = {"w1_bound": bound}
        res = compare_kinetic(cfg, n_particles, run.seed, bound, n_out, self_check)
        run.table("compare_w1.csv", *res.tables["compare_w1"])
        run.table("grid_density.csv", *res.tables["grid_density"])
        if res.tables["particles"][1]:
            run.table("particles.csv", *res.tables["particles"])
        return res
    if mode == "euler":
        try:
            rho0 = Profile.from_dict(d.pop("rho0"))
            u0 = Profile.from_dict(d.pop("u0"))
            kw = dict(x_min=float(d.pop("x_min", 0.0)), x_max=float(d.pop("x_max", 1.0)), nx=int(d.pop("nx")),
                      t_final=float(d.pop("t_final")), n_sticky=int(d.pop("n_sticky", 8192)),
                      bound_factor=float(d.pop("bound_factor", 2.0)), n_outputs=int(d.pop("n_outputs", 10)),
                      cfl=float(d.pop("cfl", 0.5)))
        except KeyError as exc:
            raise ConfigError(f"missing config field {exc}") from None
        if d:
            raise ConfigError(f"unknown config fields: {sorted(d)}")
        run.manifest["config"] = {"mode": mode, "rho0": rho0.__dict__, "u0": u0.__dict__, **kw}
        run.manifest["tolerances"] = {"w1_bound_factor_dx": kw["bound_factor"]}
        res = compare_euler(rho0, u0, **kw)
        run.table("euler_fv.csv", *res.tables["euler_fv"])
        run.table("euler_sticky.csv", *res.tables["euler_sticky"])
        run.table("compare_w1.csv", *res.tables["compare_w1"])
        return res
    raise ConfigError(f"compare mode must be 'kinetic' or 'euler', got {mode!r}")


COMMANDS = {"simulate": cmd_simulate, "sweep": cmd_sweep, "picard": cmd_picard, "compare": cmd_compare}


def build_parser():
    p = argparse.ArgumentParser(prog="pftraffic", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="JSON config file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=_u64, default=0, help="RNG seed (unsigned 64-bit)")
    p.add_argument("-q", "--quiet", action="store_true")
    return p


def _u64(s):
    v = int(s, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    run = Run(args.command, args.out, args.seed)
    try:
        cfg_dict = load_json(args.config)
        if not isinstance(cfg_dict, dict):
            raise ConfigError("config must be a JSON object")
        run.out.mkdir(parents=True, exist_ok=True)
        res = COMMANDS[args.command](cfg_dict, run)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return run.finish(EXIT_CONFIG, str(exc))
    except NumericalError as exc:
        log.error("numerical failure: %s", exc)
        run.manifest["failure_dump"] = exc.dump
        return run.finish(EXIT_NUMERIC, str(exc))
    except (CFLError, FloatingPointError, ArithmeticError) as exc:
        log.error("numerical failure: %s", exc)
        return run.finish(EXIT_NUMERIC, str(exc))
    except (ValueError, TypeError, KeyError) as exc:
        # badly typed config values surface here
        log.error("config error: %s", exc)
        return run.finish(EXIT_CONFIG, str(exc))
    run.manifest["assertions"] = [a.as_dict() for a in res.assertions]
    run.manifest["summary"] = res.summary
    for a in res.assertions:
        log.info("%-24s %s  value=%s bound=%s", a.name, "PASS" if a.passed else "FAIL", _short(a.value), a.bound)
    return run.finish(EXIT_OK if res.passed else EXIT_FAIL)


def _short(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    if isinstance(v, list):
        return "[" + ", ".join(_short(x) for x in v) + "]"
    return v


if __name__ == "__main__":
    sys.exit(main())
