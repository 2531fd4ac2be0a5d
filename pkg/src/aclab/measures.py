"""Energy and discrepancy measures of a phase field, and the profile coordinate r."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dynamics import PhaseState
from .grid import GRADIENT_STENCILS, GridSpec, ScalarField, integrate
from .potential import wave_inverse
from .reports import FAIL, NA, PASS, Report

ENERGY = "energy"
DISCREPANCY = "discrepancy"
MASK_FLOOR = 1e-14
CLAMP = 1e-12


@dataclass(frozen=True)
class DensityField:
    """A measure given by a cell density on a grid."""

    grid: GridSpec
    density: np.ndarray = field(repr=False)
    label: str = ENERGY

    def __post_init__(self):
        d = np.array(self.density, dtype=float).reshape(self.grid.shape)
        if not np.all(np.isfinite(d)):
            raise ValueError("density must be finite")
        if self.label == ENERGY and d.size and d.min() < -1e-14:
            raise ValueError(f"energy density is negative ({d.min()})")
        d.flags.writeable = False
        object.__setattr__(self, "density", d)

    def mass(self) -> float:
        return integrate(ScalarField(self.grid, self.density))

    def scaled(self, c: float) -> "DensityField":
        return DensityField(self.grid, self.density * c, self.label)

    def __add__(self, other: "DensityField") -> "DensityField":
        return DensityField(self.grid, self.density + other.density, self.label)

    def as_field(self) -> ScalarField:
        return ScalarField(self.grid, self.density)


def _halves(s: PhaseState, stencil: str) -> tuple[np.ndarray, np.ndarray]:
    g2 = GRADIENT_STENCILS[stencil](s.u).values
    return 0.5 * s.eps * g2, s.potential.F(s.u.values) / s.eps


def energy_measure(s: PhaseState, stencil: str = "centered") -> DensityField:
    kin, pot = _halves(s, stencil)
    return DensityField(s.grid, kin + pot, ENERGY)


def discrepancy_measure(s: PhaseState, stencil: str = "centered") -> DensityField:
    kin, pot = _halves(s, stencil)
    return DensityField(s.grid, kin - pot, DISCREPANCY)


def r_profile(s: PhaseState) -> ScalarField:
    """r with u = q^eps(r), clamping u away from the wells."""
    u = np.clip(s.u.values, -1.0 + CLAMP, 1.0 - CLAMP)
    return ScalarField(s.grid, s.eps * wave_inverse(s.potential, u))


@dataclass(frozen=True)
class MaskedField:
    field: ScalarField
    valid: np.ndarray

    def max(self) -> float:
        return float(self.field.values[self.valid].max()) if self.valid.any() else float("nan")


def dr_squared(s: PhaseState, stencil: str = "centered") -> MaskedField:
    """|Dr|^2 as the ratio of the gradient and potential energy halves.

    Cells where F(u)/eps < 1e-14 are masked and hold 0.
    """
    kin, pot = _halves(s, stencil)
    valid = pot >= MASK_FLOOR
    ratio = np.zeros_like(kin)
    ratio[valid] = kin[valid] / pot[valid]
    return MaskedField(ScalarField(s.grid, ratio), valid)


def check_discrepancy_sign(traj: Sequence[PhaseState], tol: float | None = None,
                           stencil: str = "product") -> Report:
    """Does xi <= tol persist along the trajectory when it holds initially?

    The verdict uses the forward-backward product stencil, whose discrete
    equilibrium profiles have exactly zero discrepancy in their tails; the
    centered-difference maximum is reported alongside for comparison.
    ``tol`` defaults to 1e-6 / eps.
    """
    rep = Report("discrepancy_sign", "Ilmanen discrepancy sign preservation",
                 ("t", "max_discrepancy", "max_discrepancy_centered", "tol", "pass"))
    if not traj:
        rep.status, rep.reason = NA, "empty trajectory"
        return rep
    slacks = []
    for s in traj:
        limit = 1e-6 / s.eps if tol is None else tol
        xi = float(discrepancy_measure(s, stencil).density.max())
        xi_c = float(discrepancy_measure(s, "centered").density.max())
        ok = xi <= limit
        rep.rows.append((s.t, xi, xi_c, limit, ok))
        slacks.append(limit - xi)
    rep.worst_slack = float(min(slacks))
    if slacks[0] < 0:
        rep.status, rep.reason = NA, "initial discrepancy is positive; hypothesis not met"
    else:
        rep.status = PASS if rep.worst_slack >= 0 else FAIL
    return rep


SONER_EPS_MAX = 0.2


def soner_excess(s: PhaseState, stencil: str = "centered") -> float:
    """max over unmasked cells of |Dr|^2 - 1 - (2/log(1/eps)) ((eps r)^2 + 1)/t."""
    if not s.eps < SONER_EPS_MAX:
        raise ValueError(f"gradient bound needs eps < {SONER_EPS_MAX}, got {s.eps}")
    if not s.t > 0:
        raise ValueError("gradient bound is stated for t > 0")
    dr2 = dr_squared(s, stencil)
    if not dr2.valid.any():
        return float("-inf")
    r = r_profile(s).values
    bound = 1.0 + (2.0 / math.log(1.0 / s.eps)) * ((s.eps * r) ** 2 + 1.0) / s.t
    excess = dr2.field.values - bound
    return float(excess[dr2.valid].max())


def check_soner_bound(traj: Sequence[PhaseState], tol: float = 1e-6, t_min: float = 0.0,
                      stencil: str = "centered") -> Report:
    """Soner's gradient bound on every snapshot with t > t_min."""
    rep = Report("soner_bound", "Soner gradient bound", ("t", "excess", "slack", "pass"))
    for s in traj:
        if not s.eps < SONER_EPS_MAX:
            raise ValueError(f"gradient bound needs eps < {SONER_EPS_MAX}, got {s.eps}")
    slacks = []
    for s in traj:
        if s.t <= max(t_min, 0.0):
            rep.rows.append((s.t, None, None, NA))
            continue
        ex = soner_excess(s, stencil)
        slack = -ex
        slacks.append(slack)
        rep.rows.append((s.t, ex, slack, ex <= tol))
    if not slacks:
        rep.status, rep.reason = NA, "no snapshot with t > t_min"
        rep.worst_slack = float("nan")
        return rep
    rep.worst_slack = float(min(slacks))
    rep.status = PASS if rep.worst_slack >= -tol else FAIL
    return rep
