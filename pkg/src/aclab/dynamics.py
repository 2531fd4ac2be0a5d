"""Explicit time stepping of  u_t = Lap u - f(u) / eps^2."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numba
import numpy as np

from .grid import GRADIENT_STENCILS, GridSpec, ScalarField, laplacian
from .potential import Potential, standard_potential

SCHEMES = ("explicit-euler",)


class StepError(RuntimeError):
    pass


class StabilityError(StepError):
    pass


class NonFiniteError(StepError):
    pass


@dataclass(frozen=True)
class PhaseState:
    u: ScalarField
    t: float
    eps: float
    potential: Potential

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")

    @property
    def grid(self) -> GridSpec:
        return self.u.grid


@dataclass(frozen=True)
class StepControl:
    dt: float
    safety: float = 1.0
    scheme: str = "explicit-euler"

    def __post_init__(self):
        if not 0 < self.safety <= 1:
            raise ValueError(f"safety must lie in (0, 1], got {self.safety}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")


def _step_limits(grid: GridSpec, eps: float, potential: Potential | None) -> tuple[float, float]:
    p = potential or standard_potential()
    h = grid.min_spacing
    fp = p.max_abs_f_prime()
    return h * h / (2 * grid.dim), (eps * eps / fp if fp > 0 else math.inf)


def stable_dt(grid: GridSpec, eps: float, safety: float = 1.0,
              potential: Potential | None = None) -> float:
    """safety * min(h^2 / (2n), eps^2 / max|f'|); the reaction bound is eps^2/4 for the standard well."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    if not 0 < safety <= 1:
        raise ValueError(f"safety must lie in (0, 1], got {safety}")
    diff, reac = _step_limits(grid, eps, potential)
    return safety * min(diff, reac)


def max_principle_safety(grid: GridSpec, eps: float, potential: Potential | None = None) -> float:
    """Largest safety factor for which the update stays in [-1, 1].

    The Euler update is a convex combination of neighbour values plus the
    reaction only when dt * (2n/h^2 + max|f'|/eps^2) <= 1, which is
    ``max(a, b) / (a + b)`` of ``min(a, b)``; always at least 1/2.
    """
    a, b = _step_limits(grid, eps, potential)
    if math.isinf(b):
        return 1.0
    return max(a, b) / (a + b)


def default_control(grid: GridSpec, eps: float, potential: Potential | None = None) -> StepControl:
    safety = max_principle_safety(grid, eps, potential)
    return StepControl(stable_dt(grid, eps, safety, potential), safety)


# -- kernels ----------------------------------------------------------------

def neighbour_tables(grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Flat indices of the +1 / -1 neighbours along every axis.

    Neumann walls point back at the cell itself (mirrored ghost value).
    """
    idx = np.arange(grid.size).reshape(grid.shape)
    plus = np.empty((grid.dim, grid.size), dtype=np.int64)
    minus = np.empty_like(plus)
    for a in range(grid.dim):
        up = np.roll(idx, -1, axis=a)
        dn = np.roll(idx, 1, axis=a)
        if not grid.periodic[a]:
            last = [slice(None)] * grid.dim
            last[a] = -1
            up[tuple(last)] = idx[tuple(last)]
            first = [slice(None)] * grid.dim
            first[a] = 0
            dn[tuple(first)] = idx[tuple(first)]
        plus[a] = up.ravel()
        minus[a] = dn.ravel()
    return plus, minus


@numba.njit
def _euler_chunk(u, plus, minus, inv_h2, dt, inv_eps2, nsteps, f):
    n = u.size
    dim = plus.shape[0]
    cur = u.copy()
    nxt = np.empty_like(cur)
    for _ in range(nsteps):
        for i in range(n):
            ui = cur[i]
            lap = 0.0
            for a in range(dim):
                lap += (cur[plus[a, i]] - 2.0 * ui + cur[minus[a, i]]) * inv_h2[a]
            nxt[i] = ui + dt * (lap - f(ui) * inv_eps2)
        cur, nxt = nxt, cur
    return cur


class _Stepper:
    """Advances raw arrays; fused numba loop when the potential offers ``f_jit``."""

    def __init__(self, grid: GridSpec, eps: float, potential: Potential):
        self.grid = grid
        self.eps = eps
        self.potential = potential
        self.inv_h2 = np.array([1.0 / h**2 for h in grid.spacing])
        if potential.f_jit is not None:
            self.plus, self.minus = neighbour_tables(grid)

    def advance(self, values: np.ndarray, dt: float, nsteps: int) -> np.ndarray:
        if nsteps <= 0:
            return values
        if self.potential.f_jit is not None:
            flat = _euler_chunk(values.ravel(), self.plus, self.minus, self.inv_h2,
                                dt, 1.0 / self.eps**2, nsteps, self.potential.f_jit)
            out = flat.reshape(self.grid.shape)
        else:
            out = values
            for _ in range(nsteps):
                lap = laplacian(ScalarField(self.grid, out)).values
                out = out + dt * (lap - self.potential.f(out) / self.eps**2)
        if not np.all(np.isfinite(out)):
            raise NonFiniteError("non-finite values produced by time stepping")
        return out


def _check_control(s: PhaseState, ctrl: StepControl, dt: float) -> None:
    limit = stable_dt(s.grid, s.eps, ctrl.safety, s.potential)
    if dt > limit * (1 + 1e-12):
        raise StabilityError(f"dt={dt} exceeds the stable limit {limit}")


def step(s: PhaseState, ctrl: StepControl) -> PhaseState:
    _check_control(s, ctrl, ctrl.dt)
    new = _Stepper(s.grid, s.eps, s.potential).advance(np.asarray(s.u.values), ctrl.dt, 1)
    return replace(s, u=ScalarField(s.grid, new), t=s.t + ctrl.dt)


def run(s0: PhaseState, t_end: float, ctrl: StepControl, snapshot_times: Sequence[float],
        on_step: Callable[[PhaseState], None] | None = None) -> list[PhaseState]:
    """Integrate from ``s0`` and return the states at ``snapshot_times``.

    The last step before each snapshot is shortened to land on it exactly.
    Integration stops at the last snapshot.  ``on_step`` (slow) is called
    with every intermediate state.
    """
    times = [float(t) for t in snapshot_times]
    if any(b < a for a, b in zip(times, times[1:])):
        raise ValueError("snapshot times must be sorted")
    if times and (times[0] < s0.t - 1e-12 or times[-1] > t_end + 1e-12):
        raise ValueError(f"snapshot times must lie in [{s0.t}, {t_end}]")
    _check_control(s0, ctrl, ctrl.dt)

    stepper = _Stepper(s0.grid, s0.eps, s0.potential)
    values = np.asarray(s0.u.values)
    t = s0.t
    out = []
    for target in times:
        if target - t > 1e-13 * max(1.0, abs(target)):
            n_full = int(math.floor((target - t) / ctrl.dt * (1 + 1e-12)))
            if on_step is None:
                values = stepper.advance(values, ctrl.dt, n_full)
                t += n_full * ctrl.dt
            else:
                for _ in range(n_full):
                    values = stepper.advance(values, ctrl.dt, 1)
                    t += ctrl.dt
                    on_step(replace(s0, u=ScalarField.trusted(s0.grid, values), t=t))
            rem = target - t
            if rem > 1e-13 * max(1.0, abs(target)):
                values = stepper.advance(values, rem, 1)
                if on_step is not None:
                    on_step(replace(s0, u=ScalarField.trusted(s0.grid, values), t=target))
            t = target
        out.append(replace(s0, u=ScalarField.trusted(s0.grid, values), t=t))
    return out


def energy(s: PhaseState, stencil: str = "centered") -> float:
    """Allen-Cahn energy  int (eps/2)|Du|^2 + F(u)/eps dx."""
    g2 = GRADIENT_STENCILS[stencil](s.u).values
    dens = 0.5 * s.eps * g2 + s.potential.F(s.u.values) / s.eps
    return float(np.sum(dens) * s.grid.cell_volume)
