"""End-to-end acceptance experiments.

Each test carries a ``criterion`` mark; the session summary prints one
PASS/FAIL line per criterion.  The shared circle run (N = 512) dominates the
runtime.
"""

import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from aclab.density import unit_density_report
from aclab.dynamics import default_control, energy, run
from aclab.entropy import EntropySearchConfig, area_ratio_sup, entropy
from aclab.grid import make_grid
from aclab.lab.config import RunConfig
from aclab.lab.pipeline import (area_radii, convergence_configs, convergence_report,
                                convergence_row, diagnose, prepare, simulate)
from aclab.measures import energy_measure
from aclab.potential import alpha_by_level_sets, alpha_by_profile, energy_constant, standard_potential
from aclab.reports import PASS
from aclab.scenarios import Scenario, locate_interface, make_initial

from conftest import ALPHA, CIRCLE_ENTROPY, circle_measure, line_measure

TESTS = Path(__file__).parent

# Observed entropy / area-ratio factors, max(l/A, A/l).
SANDWICH_GOLDEN = {"line": 2.12102186000813, "circle": 2.755510775176071,
                   "double_line": 1.939009615579819}

CIRCLE = RunConfig(scenario="shrinking-circle", n=512, extent=2.56, eps=0.02, r0=0.8,
                   t_end=0.2, snapshots=9, gronwall_t1=0.05, horizon=0.1,
                   huisken_centers="1.28 1.28 0.37")


def criterion(num, title):
    return pytest.mark.criterion(num, title)


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


@pytest.fixture(scope="module")
def circle_run():
    sc, ctrl = prepare(CIRCLE)
    traj, t_sim = _timed(lambda: simulate(CIRCLE, sc, ctrl))
    diag, t_diag = _timed(lambda: diagnose(CIRCLE, sc, traj))
    return traj, diag, t_sim, t_diag


@pytest.fixture(scope="module")
def ill_prepared_run():
    cfg = RunConfig(scenario="shrinking-circle", n=512, extent=2.56, eps=0.02, r0=0.8,
                    steepness=2.0, t_end=0.2, snapshots=5, gronwall_t1=0.05,
                    huisken_centers="1.28 1.28 0.37", suites="discrepancy,gronwall")
    sc, ctrl = prepare(cfg)
    return diagnose(cfg, sc, simulate(cfg, sc, ctrl))


@criterion(1, "energy constant")
def test_energy_constant(record_property):
    p = standard_potential()
    (a, b, c), dt = _timed(lambda: (energy_constant(p), alpha_by_profile(p), alpha_by_level_sets(p)))
    record_property("alpha", a)
    assert abs(a - 4 / 3) <= 1e-6
    assert abs(b - c) <= 1e-6
    assert dt < 1.0


@criterion(2, "standing-wave fidelity")
def test_standing_wave(record_property):
    t0 = time.perf_counter()
    g = make_grid(1, [4.0], [4096], "neumann")
    eps, h = 0.05, g.spacing[0]
    s0 = make_initial(Scenario("planar", eps, g))
    mass = energy_measure(s0).mass()
    assert mass == pytest.approx(ALPHA, rel=0.01)

    energies = [energy(s0)]
    end = run(s0, 0.1, default_control(g, eps), [0.1], on_step=lambda s: energies.append(energy(s)))[-1]
    moved = abs(locate_interface(end)[0, 0] - locate_interface(s0)[0, 0])
    rises = np.diff(energies)
    # A stationary profile: energy changes are at rounding level, so allow a few ulps.
    floor = 8 * np.spacing(max(energies))
    elapsed = time.perf_counter() - t0
    record_property("steps", len(energies) - 1)
    record_property("moved/h", moved / h)
    record_property("max_rise", float(rises.max()))
    record_property("seconds", round(elapsed, 1))
    assert moved < h
    assert rises.max() <= floor
    assert elapsed < 30


@criterion(3, "discrepancy sign")
def test_discrepancy_sign(circle_run, record_property):
    traj, diag, t_sim, _ = circle_run
    rep = diag.by_check()["discrepancy_sign"]
    record_property("worst_slack", rep.worst_slack)
    record_property("sim_seconds", round(t_sim, 1))
    assert len(rep.rows) == len(traj) and traj[-1].t == pytest.approx(0.2)
    assert rep.status == PASS
    assert all(row[1] <= 1e-6 / 0.02 for row in rep.rows)
    assert t_sim < 600


@criterion(4, "Soner bound")
def test_soner_bound(circle_run, record_property):
    _, diag, _, _ = circle_run
    rep = diag.by_check()["soner_bound"]
    record_property("worst_slack", rep.worst_slack)
    assert rep.status == PASS and rep.worst_slack >= 0
    checked = [row for row in rep.rows if row[0] >= 0.01]
    assert checked and all(row[2] >= 0 for row in checked)


@criterion(5, "Huisken monotonicity")
def test_huisken(circle_run, record_property):
    _, diag, _, _ = circle_run
    rep = diag.by_check()["huisken"]
    record_property("worst_slack", rep.worst_slack)
    assert "s=0.37" in rep.reason
    assert rep.status == PASS


@criterion(6, "Gronwall inequality")
def test_gronwall(circle_run, ill_prepared_run, record_property):
    _, diag, _, _ = circle_run
    well = diag.by_check()["gronwall"]
    ill = ill_prepared_run.by_check()["gronwall"]
    # The compressed profile really violates the sign condition.
    assert ill_prepared_run.by_check()["discrepancy_sign"].worst_slack < 0
    record_property("well_slack", well.worst_slack)
    record_property("ill_slack", ill.worst_slack)
    for rep in (well, ill):
        assert rep.status == PASS and rep.worst_slack >= -1e-6


@criterion(7, "entropy monotonicity")
def test_entropy_monotonicity(circle_run, record_property):
    traj, diag, _, t_diag = circle_run
    assert len(traj) >= 8
    full = diag.by_check()["entropy_monotonicity"]
    local = diag.by_check()["local_entropy_monotonicity"]
    record_property("slack", full.worst_slack)
    record_property("local_slack", local.worst_slack)
    record_property("diag_seconds", round(t_diag, 1))
    assert full.status == PASS and local.status == PASS


@criterion(8, "entropy oracles")
def test_line_oracle(line_grid, record_property):
    res, dt = _timed(lambda: entropy(line_measure(line_grid, 0.04), EntropySearchConfig.for_grid(line_grid)))
    record_property("line", res.value)
    assert res.value == pytest.approx(1.0, rel=0.02)
    assert dt < 60


@criterion(8, "entropy oracles")
def test_circle_oracle(circle_grid, record_property):
    mu = circle_measure(circle_grid, 1.0, 0.02)
    res, dt = _timed(lambda: entropy(mu, EntropySearchConfig.for_grid(circle_grid)))
    record_property("circle", res.value)
    record_property("argmax_s", res.argmax_s)
    assert res.value == pytest.approx(CIRCLE_ENTROPY, rel=0.02)
    assert res.argmax_s == pytest.approx(0.5, rel=0.2)
    assert dt < 60


@criterion(9, "entropy and area-ratio sandwich")
@pytest.mark.parametrize("name", list(SANDWICH_GOLDEN))
def test_sandwich(name, line_grid, circle_grid, record_property):
    if name == "line":
        mu, g, eps = line_measure(line_grid, 0.04), line_grid, 0.04
    elif name == "circle":
        mu, g, eps = circle_measure(circle_grid, 1.0, 0.02), circle_grid, 0.02
    else:
        mu = line_measure(line_grid, 0.04, offset=1.5) + line_measure(line_grid, 0.04, offset=2.5)
        g, eps = line_grid, 0.04
    lam = entropy(mu, EntropySearchConfig.for_grid(g)).value
    A = area_ratio_sup(mu, area_radii(g, eps))
    factor = max(lam / A, A / lam)
    record_property(name, round(factor, 4))
    assert factor <= 10
    assert factor == pytest.approx(SANDWICH_GOLDEN[name], rel=1e-6)


SCENARIO_RUNS = {
    "planar": dict(scenario="planar", dim=2, topology="neumann,periodic", n=64, eps=0.08),
    "shrinking-sphere": dict(scenario="shrinking-sphere", n=64, extent=1.6, eps=0.06, r0=0.5),
    "double-interface": dict(scenario="double-interface", n=128, eps=0.04, d=0.8),
    "torus-band": dict(scenario="torus-band", n=128, eps=0.04, d=0.8),
}


@criterion(10, "density bounded by local entropy")
@pytest.mark.parametrize("name", ["shrinking-circle", *SCENARIO_RUNS])
def test_density_entropy_bound(name, circle_run, record_property):
    if name == "shrinking-circle":
        rep = circle_run[1].by_check()["density_entropy_bound"]
    else:
        cfg = RunConfig(t_end=0.05, snapshots=3, suites="density_bound", **SCENARIO_RUNS[name])
        sc, ctrl = prepare(cfg)
        rep = diagnose(cfg, sc, simulate(cfg, sc, ctrl)).by_check()["density_entropy_bound"]
    record_property(name, rep.worst_slack)
    assert rep.status == PASS


@criterion(11, "unit density")
def test_unit_density_circle(circle_run, record_property):
    traj, diag, _, _ = circle_run
    rep = diag.by_check()["unit_density"]
    # Initial local entropy below 2 alpha - 0.3 alpha: the hypothesis applies.
    assert "hypothesis not met" not in rep.reason
    row = next(r for r in rep.rows if r[0] == pytest.approx(0.1))
    record_property("median_at_0.1", row[2])
    assert 0.9 <= row[2] <= 1.1


@criterion(11, "unit density")
def test_double_sheet_witness(record_property):
    eps = 0.02
    d = 3 * eps
    g = make_grid(2, [2.56, 1.28], [256, 128], ["neumann", "periodic"])
    s0 = make_initial(Scenario("double-interface", eps, g, d=d, strict=False))
    traj = run(s0, 0.01, default_control(g, eps), [0.0, 0.005, 0.01])
    best = []
    for s in traj:
        rep = unit_density_report(energy_measure(s), eps, ALPHA, 16, u=s.u, r_min=2 * d)
        best.append(max(rep.normalized, default=0.0))
    record_property("max_theta_over_alpha", [round(b, 3) for b in best])
    assert max(best) > 1.6


@criterion(12, "sharp-interface radius trend")
def test_convergence(record_property):
    t0 = time.perf_counter()
    base = RunConfig(scenario="shrinking-circle", extent=2.56, r0=0.8, t_end=0.1)
    cfgs = convergence_configs(base, [0.08, 0.04, 0.02], [128, 256, 512])
    rows = [convergence_row(c) for c in cfgs]
    rep = convergence_report(rows)
    elapsed = time.perf_counter() - t0
    for r in rows:
        assert r.t == pytest.approx(0.1)
        assert r.reference == pytest.approx(math.sqrt(0.64 - 0.2))
        record_property(f"err_eps{r.eps}", r.error)
    assert rep.status == PASS
    assert elapsed < 1800


PROPERTY_TESTS = [
    "test_grid.py::test_summation_by_parts",
    "test_grid.py::test_stencil_order",
    "test_grid.py::test_laplacian_linearity",
    "test_entropy.py::test_scaling_linearity",
    "test_entropy.py::test_scaling_by_powers_of_two_is_exact",
    "test_kernel.py::test_normalization_on_torus",
    "test_dynamics.py::test_maximum_principle",
]


@criterion(13, "numerical hygiene")
def test_property_suite(record_property):
    t0 = time.perf_counter()
    proc = subprocess.run([sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
                           *[str(TESTS / t) for t in PROPERTY_TESTS]],
                          cwd=TESTS.parent, capture_output=True, text=True)
    elapsed = time.perf_counter() - t0
    record_property("seconds", round(elapsed, 1))
    assert proc.returncode == 0, proc.stdout[-2000:]
    assert elapsed < 300
