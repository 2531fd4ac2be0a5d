"""(n-1)-dimensional density of an energy measure and unit-density verdicts."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .entropy import EntropySearchConfig, local_entropy
from .grid import ScalarField, ball_sum
from .measures import DensityField
from .reports import FAIL, NA, PASS, Report

UNIT = "UNIT"
NOT_UNIT = "NOT-UNIT"
VACUOUS = "VACUOUS"
INCONCLUSIVE = "INCONCLUSIVE"

N_RADII = 8
WINDOW = 8.0
AGREE_TOL = 0.10


class DensityWindowError(ValueError):
    """No admissible radius between the resolution floor and R_max."""


def omega(k: int) -> float:
    """Volume of the unit ball in R^k."""
    return math.pi ** (k / 2) / math.gamma(k / 2 + 1)


def radius_floor(grid, eps: float) -> float:
    return max(2 * grid.min_spacing, 2 * eps)


@dataclass(frozen=True)
class DensityProbe:
    x: np.ndarray
    radii: np.ndarray
    ratios: np.ndarray
    theta: float | None
    fit_quality: float
    reliable: bool


def density_at(mu: DensityField, x, eps: float, r_min: float | None = None,
               r_max: float | None = None, n_radii: int = N_RADII) -> DensityProbe:
    """Ratios mu(B_r(x)) / (omega_{n-1} r^{n-1}) on a geometric radius ladder.

    The density is the intercept at r = 0 of a least-squares line through
    the ratios.  ``r_min`` may raise the floor max(2h, 2 eps) but never lower
    it; ``r_max`` defaults to 8 r_min.  If the two smallest radii disagree by
    more than 10% the probe is marked unreliable and carries no density.
    ``fit_quality`` is the RMS residual of the line relative to its intercept.
    """
    g = mu.grid
    floor = radius_floor(g, eps)
    lo = floor if r_min is None else max(r_min, floor)
    hi = WINDOW * lo if r_max is None else r_max
    if hi < lo:
        raise DensityWindowError(f"radius window [{lo}, {hi}] is empty")
    radii = np.geomspace(hi, lo, n_radii)
    w = ScalarField(g, mu.density)
    ratios = np.array([ball_sum(w, x, r) / (omega(g.dim - 1) * r ** (g.dim - 1)) for r in radii])
    slope, theta = np.polyfit(radii, ratios, 1)
    resid = ratios - (theta + slope * radii)
    quality = float(np.sqrt(np.mean(resid**2)) / max(abs(theta), 1e-300))
    a, b = ratios[-1], ratios[-2]
    reliable = bool(abs(a - b) <= AGREE_TOL * max(abs(a), abs(b)))
    return DensityProbe(np.asarray(x, dtype=float), radii, ratios,
                        float(theta) if reliable else None, quality, reliable)


def interface_cells(mu: DensityField, u: ScalarField | None = None, level: float = 0.5) -> np.ndarray:
    """Flat indices of cells in the core of the diffuse interface.

    With the phase field these are the cells with |u| < level; without it,
    cells carrying at least half the peak density.  Probes further out see
    a lopsided share of the layer in their smallest balls.
    """
    if u is not None:
        mask = np.abs(u.values) < level
    else:
        peak = float(np.max(mu.density)) if mu.density.size else 0.0
        mask = mu.density >= 0.5 * peak if peak > 0 else np.zeros(mu.grid.shape, bool)
    return np.flatnonzero(mask)


def sample_probes(mu: DensityField, count: int, u: ScalarField | None = None) -> list[np.ndarray]:
    cells = interface_cells(mu, u)
    if cells.size == 0 or count <= 0:
        return []
    picks = cells[np.unique(np.linspace(0, cells.size - 1, count).round().astype(int))]
    mesh = mu.grid.mesh()
    return [np.array([m.ravel()[i] for m in mesh]) for i in picks]


@dataclass
class UnitDensityReport:
    verdict: str
    probes: list[DensityProbe]
    normalized: list[float]
    median: float | None
    threshold: float
    r_floor: float

    def as_report(self, name: str = "unit_density") -> Report:
        rep = Report(name, "unit density below twice the energy constant",
                     ("x", "theta_over_alpha", "quality", "reliable"))
        k = 0
        for p in self.probes:
            val = None
            if p.reliable:
                val = self.normalized[k]
                k += 1
            rep.rows.append((p.x, val, p.fit_quality, p.reliable))
        rep.status = {UNIT: PASS, NOT_UNIT: FAIL}.get(self.verdict, NA)
        rep.reason = f"{self.verdict}; radius floor {self.r_floor!r}"
        if self.median is not None:
            rep.worst_slack = min(1.1 - self.median, self.median - 0.9,
                                  self.threshold - max(self.normalized))
        return rep


def unit_density_report(mu: DensityField, eps: float, alpha: float, probe_count: int,
                        u: ScalarField | None = None, kappa: float | None = None,
                        r_min: float | None = None, r_max: float | None = None) -> UnitDensityReport:
    """UNIT iff the median theta/alpha lies in [0.9, 1.1] and none exceeds 2 - kappa/alpha.

    ``kappa`` defaults to 0.3 alpha.
    """
    kappa = 0.3 * alpha if kappa is None else kappa
    threshold = 2.0 - kappa / alpha
    floor = radius_floor(mu.grid, eps) if r_min is None else max(r_min, radius_floor(mu.grid, eps))
    points = sample_probes(mu, probe_count, u)
    if not points:
        return UnitDensityReport(VACUOUS, [], [], None, threshold, floor)
    probes = [density_at(mu, x, eps, r_min, r_max) for x in points]
    norm = [p.theta / alpha for p in probes if p.reliable]
    if not norm:
        return UnitDensityReport(INCONCLUSIVE, probes, [], None, threshold, floor)
    med = float(np.median(norm))
    unit = 0.9 <= med <= 1.1 and max(norm) <= threshold
    return UnitDensityReport(UNIT if unit else NOT_UNIT, probes, norm, med, threshold, floor)


def density_entropy_bound(mu: DensityField, probes: Sequence[DensityProbe], T: float,
                          cfg: EntropySearchConfig | None = None, rel_slack: float = 0.05) -> Report:
    """Every reliable probe density stays below the local entropy over scales (0, T)."""
    cfg = cfg or EntropySearchConfig.for_grid(mu.grid)
    lam = local_entropy(mu, None, (0.0, T), cfg)
    rep = Report("density_entropy_bound", "density bounded by local entropy",
                 ("x", "theta", "local_entropy", "slack", "pass"))
    slacks = []
    for p in probes:
        if not p.reliable:
            rep.rows.append((p.x, None, lam.value, None, NA))
            continue
        slack = lam.value * (1 + rel_slack) - p.theta
        slacks.append(slack)
        rep.rows.append((p.x, p.theta, lam.value, slack, slack >= 0))
    if not slacks:
        rep.status, rep.reason = NA, "no reliable probes"
        return rep
    rep.worst_slack = float(min(slacks))
    rep.status = PASS if rep.worst_slack >= 0 else FAIL
    rep.reason = f"local entropy {lam.value!r} over scales {lam.s_range}"
    return rep
