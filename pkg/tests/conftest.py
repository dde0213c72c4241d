import json
from pathlib import Path

import numpy as np
import pytest

from pftraffic import kernels
from pftraffic.phase import PhaseGrid, init_rectangle

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"

# criterion number -> (passed, message); filled by test_acceptance
CRITERIA = {}


def load_config(name):
    return json.loads((CONFIGS / name).read_text())


@pytest.fixture
def rect_grid():
    # dx = 0.05, dv = 0.02: the box [0,1]x[1,2] sits exactly on cell edges
    return PhaseGrid(-1.0, 5.4, 2.56, 128, 128)


@pytest.fixture
def rect_state(rect_grid):
    return init_rectangle(rect_grid, (0.0, 1.0), (1.0, 2.0), 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=["numba", "numpy"])
def backend(request):
    if request.param == "numba" and not kernels.HAVE_NUMBA:
        pytest.skip("numba not available")
    prev = kernels.backend() == "numba"
    kernels.set_backend(request.param == "numba")
    yield request.param
    kernels.set_backend(prev)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(CRITERIA):
        ok, msg = CRITERIA[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {msg}")
