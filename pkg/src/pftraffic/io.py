"""Plain CSV writers. Floats use repr so reruns are byte-identical."""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .operators import DiagnosticsReport
from .phase import DistributionState


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def read_csv(path):
    """(header, float array) for a file written by ``write_csv``."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


def write_diagnostics(path, reports: Sequence[DiagnosticsReport]) -> Path:
    return write_csv(path, DiagnosticsReport.FIELDS, (r.row() for r in reports))


def write_snapshot(path, f: DistributionState) -> Path:
    g = f.grid
    xx, vv = np.meshgrid(g.x, g.v, indexing="ij")
    return write_csv(path, ("x", "v", "f"), zip(xx.ravel(), vv.ravel(), f.values.ravel()))
