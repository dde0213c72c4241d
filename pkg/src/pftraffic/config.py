"""Scenario configuration and its JSON form."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Optional

import numpy as np

from .phase import PhaseGrid, DistributionState, init_rectangle, init_well_prepared, zero_state

VARIANTS = ("unscaled", "regularized", "scaled")
BOUNDARIES = ("free", "periodic")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Profile:
    """Scalar profile in x, built from a small JSON description.

    kinds: ``constant`` (value), ``sine`` (base + amp sin(2 pi k x / period)),
    ``box`` (value on [lo, hi], 0 elsewhere).
    """

    kind: str = "constant"
    value: float = 1.0
    base: float = 1.0
    amp: float = 0.0
    k: float = 1.0
    period: float = 1.0
    lo: float = 0.0
    hi: float = 1.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full_like(x, self.value)
        if self.kind == "sine":
            return self.base + self.amp * np.sin(2 * np.pi * self.k * x / self.period)
        if self.kind == "box":
            return np.where((x >= self.lo) & (x <= self.hi), self.value, 0.0)
        raise ConfigError(f"unknown profile kind {self.kind!r}")

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "sine":
            w = 2 * np.pi * self.k / self.period
            return self.amp * w * np.cos(w * x)
        return np.zeros_like(x)

    def lipschitz(self) -> float:
        if self.kind == "sine":
            return abs(self.amp) * 2 * np.pi * abs(self.k) / self.period
        return 0.0

    @classmethod
    def from_dict(cls, d) -> "Profile":
        if isinstance(d, (int, float)):
            return cls(kind="constant", value=float(d))
        try:
            p = cls(**d)
        except TypeError as exc:
            raise ConfigError(f"bad profile {d!r}: {exc}") from None
        if p.kind not in ("constant", "sine", "box"):
            raise ConfigError(f"unknown profile kind {p.kind!r}")
        return p


def preshock_time(u0: Profile) -> float:
    """First crossing time 1 / max(-u0') of the characteristics (inf if none)."""
    if u0.kind != "sine" or u0.amp == 0:
        return math.inf
    return 1.0 / u0.lipschitz()


@dataclass
class ScenarioConfig:
    x_min: float = 0.0
    x_max: float = 1.0
    v_max: float = 2.0
    nx: int = 128
    nv: int = 128
    initial: dict = field(default_factory=lambda: {"kind": "zero"})
    variant: str = "unscaled"
    eps_reg: float = 0.1
    eps_scale: float = 1.0
    eps_moll: Optional[float] = None
    t_final: float = 1.0
    dt: Optional[float] = None
    cfl: float = 0.5
    n_outputs: int = 50
    rho_floor: Optional[float] = None
    boundary: str = "free"

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.boundary not in BOUNDARIES:
            raise ConfigError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")
        if not self.t_final > 0:
            raise ConfigError("t_final must be positive")
        if not (0 < self.cfl <= 1):
            raise ConfigError(f"CFL number must lie in (0, 1], got {self.cfl}")
        if self.variant == "regularized" and not self.eps_reg > 0:
            raise ConfigError("regularized variant needs eps_reg > 0")
        if self.variant == "scaled" and not self.eps_scale > 0:
            raise ConfigError("scaled variant needs eps_scale > 0")
        if self.n_outputs < 1:
            raise ConfigError("n_outputs must be >= 1")
        try:
            self.grid
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.dt is not None:
            bound = self.cfl * self.grid.dx / self.v_max
            if not (0 < self.dt <= bound * (1 + 1e-12)):
                raise ConfigError(f"dt={self.dt} violates the CFL bound dt <= cfl*dx/v_max = {bound:.6g}")

    @property
    def grid(self) -> PhaseGrid:
        return PhaseGrid(self.x_min, self.x_max, self.v_max, self.nx, self.nv)

    @property
    def periodic(self) -> bool:
        return self.boundary == "periodic"

    def time_step(self):
        """(dt, n_steps) with n_steps * dt == t_final exactly."""
        target = self.dt if self.dt is not None else self.cfl * self.grid.dx / self.v_max
        n = max(1, int(math.ceil(self.t_final / target - 1e-9)))
        return self.t_final / n, n

    def initial_state(self) -> DistributionState:
        return build_initial(self.grid, self.initial)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d) -> "ScenarioConfig":
        d = dict(d)
        grid = d.pop("grid", None)
        if grid is not None:
            d.update(grid)
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config fields: {sorted(extra)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def build_initial(grid: PhaseGrid, desc: dict) -> DistributionState:
    kind = desc.get("kind", "zero")
    try:
        if kind == "zero":
            return zero_state(grid)
        if kind == "rectangle":
            return init_rectangle(grid, desc["x_box"], desc["v_box"], desc.get("height", 1.0))
        if kind == "well_prepared":
            return init_well_prepared(
                grid,
                Profile.from_dict(desc["rho0"]),
                Profile.from_dict(desc["u0"]),
                desc["eps"],
                spread=desc.get("spread", 1.0),
                shift=desc.get("shift", 0.0),
                sigma=desc.get("sigma"),
            )
        if kind == "two_level":
            # homogeneous: mass fraction w at v_lo, 1 - w at v_hi, density rho
            vals = np.zeros((grid.nx, grid.nv))
            rho = desc.get("rho", 1.0)
            w = desc.get("weight_lo", 0.5)
            for vel, frac in ((desc["v_lo"], w), (desc["v_hi"], 1.0 - w)):
                j = int(np.clip(np.floor(vel / grid.dv), 0, grid.nv - 1))
                vals[:, j] += rho * frac / grid.dv
            return DistributionState(grid, vals)
    except KeyError as exc:
        raise ConfigError(f"initial data {kind!r} missing field {exc}") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    raise ConfigError(f"unknown initial data kind {kind!r}")


def load_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None


def save_json(obj, path):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serialisable: {type(o)}")
