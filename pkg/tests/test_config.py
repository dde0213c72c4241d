import json
import math

import numpy as np
import pytest

from pftraffic.config import ConfigError, Profile, ScenarioConfig, build_initial, load_json, preshock_time
from pftraffic.phase import PhaseGrid


def test_profiles():
    x = np.linspace(0, 1, 5)
    np.testing.assert_allclose(Profile.from_dict(2.5)(x), 2.5)
    s = Profile("sine", base=1.0, amp=0.2)
    np.testing.assert_allclose(s(x), 1 + 0.2 * np.sin(2 * np.pi * x))
    np.testing.assert_allclose(s.derivative(x), 0.4 * np.pi * np.cos(2 * np.pi * x))
    assert s.lipschitz() == pytest.approx(0.4 * np.pi)
    b = Profile("box", value=3.0, lo=0.2, hi=0.6)
    np.testing.assert_array_equal(b(x), [0, 3, 3, 0, 0])


def test_profile_errors():
    with pytest.raises(ConfigError):
        Profile.from_dict({"kind": "spline"})
    with pytest.raises(ConfigError):
        Profile.from_dict({"kind": "sine", "phase": 1})


def test_preshock_time():
    assert preshock_time(Profile("sine", amp=0.1)) == pytest.approx(1 / (0.2 * math.pi))
    assert preshock_time(Profile("constant")) == math.inf


@pytest.mark.parametrize("bad", [
    {"variant": "viscous"},
    {"boundary": "reflecting"},
    {"t_final": 0.0},
    {"cfl": 1.5},
    {"variant": "regularized", "eps_reg": 0.0},
    {"variant": "scaled", "eps_scale": -1.0},
    {"n_outputs": 0},
    {"nx": 1},
    {"colour": "red"},
    {"nx": "many"},
])
def test_from_dict_rejects(bad):
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict(bad)


def test_cfl_message_names_bound():
    with pytest.raises(ConfigError, match="CFL bound"):
        ScenarioConfig(nx=64, v_max=2.0, dt=0.1)


def test_nested_grid_block():
    cfg = ScenarioConfig.from_dict({"grid": {"nx": 16, "nv": 8}, "t_final": 0.3})
    assert (cfg.nx, cfg.nv) == (16, 8)


@pytest.mark.parametrize("t_final", [1.0, 0.37, 1e-3])
def test_time_step_hits_final_time(t_final):
    cfg = ScenarioConfig(nx=64, t_final=t_final, cfl=0.5)
    dt, n = cfg.time_step()
    assert dt * n == pytest.approx(t_final, rel=1e-14)
    assert dt <= 0.5 * cfg.grid.dx / cfg.v_max * (1 + 1e-12)


def test_build_initial_kinds():
    g = PhaseGrid(0, 1, 3.0, 4, 30)
    two = build_initial(g, {"kind": "two_level", "v_lo": 1.0, "v_hi": 2.0})
    assert two.mass() == pytest.approx(1.0)
    assert build_initial(g, {"kind": "zero"}).mass() == 0.0
    with pytest.raises(ConfigError):
        build_initial(g, {"kind": "rectangle"})
    with pytest.raises(ConfigError):
        build_initial(g, {"kind": "gaussian"})


def test_load_json_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_json(bad)
    with pytest.raises(ConfigError):
        load_json(tmp_path / "missing.json")


def test_roundtrip(tmp_path):
    cfg = ScenarioConfig(nx=16, nv=16, variant="regularized", eps_reg=0.2)
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg.to_dict()))
    assert ScenarioConfig.from_dict(load_json(p)) == cfg
