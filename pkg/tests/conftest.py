import math

import numpy as np
import pytest

from aclab.dynamics import PhaseState
from aclab.grid import ScalarField, make_grid
from aclab.measures import DensityField, energy_measure
from aclab.potential import standard_potential

ALPHA = 4.0 / 3.0
CIRCLE_ENTROPY = math.sqrt(2 * math.pi / math.e)


def wave_state(grid, r, eps, scale=1.0):
    """tanh profile of the signed distance ``r`` (array on the grid)."""
    return PhaseState(ScalarField(grid, np.tanh(scale * r / eps)), 0.0, eps, standard_potential())


def line_measure(grid, eps, axis=0, offset=None, mult=1.0):
    """Unit-multiplicity flat line: energy measure of a standing wave divided by alpha."""
    c = 0.5 * grid.extent[axis] if offset is None else offset
    r = grid.mesh()[axis] - c
    return energy_measure(wave_state(grid, r, eps)).scaled(mult / ALPHA)


def circle_measure(grid, R, eps, center=None):
    """Unit-multiplicity circle of radius ``R``."""
    c = grid.center() if center is None else np.asarray(center)
    pts = np.stack(grid.mesh(), axis=-1)
    r = R - grid.distance(pts, c)
    return energy_measure(wave_state(grid, r, eps)).scaled(1 / ALPHA)


def zero_measure(grid):
    return DensityField(grid, np.zeros(grid.shape))


@pytest.fixture(scope="session")
def line_grid():
    # Neumann normal axis, periodic along the line.
    return make_grid(2, [4.0, 4.0], [512, 64], ["neumann", "periodic"])


@pytest.fixture(scope="session")
def circle_grid():
    return make_grid(2, [3.0, 3.0], [512, 512], "neumann")


# -- acceptance summary ------------------------------------------------------

_CRITERIA: dict[int, dict] = {}


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None or call.when != "call":
        return
    num, title = mark.args
    entry = _CRITERIA.setdefault(num, {"title": title, "ok": True, "notes": []})
    entry["ok"] &= call.excinfo is None
    entry["notes"] += [f"{k}={v}" for k, v in item.user_properties]


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        e = _CRITERIA[num]
        status = "PASS" if e["ok"] else "FAIL"
        line = f"criterion {num:2d} {status}  {e['title']}"
        if e["notes"]:
            line += "  [" + ", ".join(e["notes"]) + "]"
        terminalreporter.write_line(line)
