"""Initial data with non-positive discrepancy, and sharp-interface references."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import PhaseState
from .grid import GridSpec, ScalarField
from .potential import Potential, get_potential, unit_wave

SCENARIOS = ("planar", "shrinking-circle", "shrinking-sphere", "double-interface", "torus-band")
SHRINKING = ("shrinking-circle", "shrinking-sphere")


class ScenarioError(ValueError):
    pass


class InterfaceExtinct(RuntimeError):
    """The phase field no longer changes sign."""


@dataclass(frozen=True)
class Scenario:
    """A named interface geometry on a grid.

    ``r0`` is the initial radius of shrinking scenarios, ``d`` the separation
    of the two sheets (double-interface) or the band width (torus-band).
    ``axis`` is the normal direction of flat interfaces.  ``steepness`` > 1
    compresses the profile and deliberately breaks the sign condition.
    ``stretch`` widens the profile by 1/stretch; ``None`` selects the factor
    that makes the profile tails decay at the discrete equilibrium rate of
    the 3-point stencil.  ``strict=False`` waives the minimum sheet
    separation of 8 eps.
    """

    name: str
    eps: float
    grid: GridSpec
    r0: float | None = None
    d: float | None = None
    center: tuple[float, ...] | None = None
    axis: int = 0
    steepness: float = 1.0
    stretch: float | None = None
    strict: bool = True
    potential: str = "standard"
    s_max: float = 0.0

    @property
    def center_point(self) -> np.ndarray:
        return self.grid.center() if self.center is None else np.asarray(self.center, dtype=float)


def discrete_tail_stretch(grid: GridSpec, eps: float, p: Potential) -> float:
    """Factor c <= 1 such that q(c x / eps) decays like the discrete stationary profile."""
    h = max(grid.spacing)
    s = np.array([-1.0, 1.0])
    fp = p.f_prime(s) if p.f_prime is not None else (p.f(s + 1e-6) - p.f(s - 1e-6)) / 2e-6
    root = math.sqrt(float(np.max(fp)))
    a = h * root / (2.0 * eps)
    return math.asinh(a) / a


def _validate(sc: Scenario) -> None:
    g = sc.grid
    if sc.name not in SCENARIOS:
        raise ScenarioError(f"unknown scenario {sc.name!r}; known: {SCENARIOS}")
    if not sc.eps > 0:
        raise ScenarioError("eps must be positive")
    if sc.name == "shrinking-circle" and g.dim != 2:
        raise ScenarioError("shrinking-circle needs a 2D grid")
    if sc.name == "shrinking-sphere" and g.dim != 3:
        raise ScenarioError("shrinking-sphere needs a 3D grid")
    if sc.name in SHRINKING:
        if sc.r0 is None or sc.r0 < 8 * sc.eps:
            raise ScenarioError(f"r0 must be at least 8 eps = {8 * sc.eps}")
    if sc.name == "double-interface":
        if sc.d is None or sc.d <= 0:
            raise ScenarioError("double-interface needs a positive separation d")
        if sc.strict and sc.d < 8 * sc.eps:
            raise ScenarioError(f"separation {sc.d} below 8 eps = {8 * sc.eps}")
    if sc.name == "torus-band":
        if not all(g.periodic):
            raise ScenarioError("torus-band needs a fully periodic grid")
    if sc.name in ("planar", "double-interface") and g.periodic[sc.axis]:
        raise ScenarioError("flat interfaces need a Neumann normal axis")
    margin = 4 * max(sc.eps, math.sqrt(sc.s_max))
    for a in range(g.dim):
        if g.periodic[a]:
            continue
        lo, hi = _interface_span(sc, a)
        if lo - margin < 0 or hi + margin > g.extent[a]:
            raise ScenarioError(f"interface within {margin} of the wall on axis {a}")


def _interface_span(sc: Scenario, a: int) -> tuple[float, float]:
    c = sc.center_point[a]
    if sc.name in SHRINKING:
        return c - sc.r0, c + sc.r0
    if a != sc.axis:
        return 0.5 * sc.grid.extent[a], 0.5 * sc.grid.extent[a]
    if sc.name == "double-interface":
        return c - sc.d / 2, c + sc.d / 2
    return c, c


def signed_distance(sc: Scenario) -> np.ndarray:
    """Distance to the interface, positive on the +1 phase, clamped below the cut locus."""
    g = sc.grid
    c = sc.center_point
    mesh = g.mesh()
    if sc.name in SHRINKING:
        pts = np.stack(mesh, axis=-1)
        rad = g.distance(pts, c)
        return np.minimum(sc.r0 - rad, sc.r0 / 2)
    x = mesh[sc.axis] - c[sc.axis]
    if sc.name == "planar":
        return x
    if sc.name == "double-interface":
        return sc.d / 2 - np.abs(x)
    # torus-band
    L = g.extent[sc.axis]
    width = L / 2 if sc.d is None else sc.d
    x = x - L * np.round(x / L)
    return width / 2 - np.abs(x)


def make_initial(sc: Scenario) -> PhaseState:
    """u0 = q^eps(c * dist) with |grad(c * dist)| <= 1, so xi_0 <= 0 and |u0| <= 1."""
    _validate(sc)
    p = get_potential(sc.potential)
    c = discrete_tail_stretch(sc.grid, sc.eps, p) if sc.stretch is None else sc.stretch
    if not 0 < c <= 1:
        raise ScenarioError(f"stretch must lie in (0, 1], got {c}")
    r = signed_distance(sc) * c * sc.steepness
    u = unit_wave(p, r / sc.eps)
    return PhaseState(ScalarField(sc.grid, u), 0.0, sc.eps, p)


def extinction_time(sc: Scenario) -> float:
    if sc.name not in SHRINKING:
        raise ScenarioError(f"{sc.name} has no extinction time")
    n = sc.grid.dim
    return sc.r0**2 / (2 * (n - 1))


def reference_radius(sc: Scenario, t: float) -> float:
    """Radius of the sphere moving by mean curvature: sqrt(r0^2 - 2(n-1) t)."""
    T = extinction_time(sc)
    if t >= T:
        raise ScenarioError(f"t={t} is past the extinction time {T}")
    if t < 0:
        raise ScenarioError("t must be non-negative")
    return math.sqrt(sc.r0**2 - 2 * (sc.grid.dim - 1) * t)


def locate_interface(s: PhaseState) -> np.ndarray:
    """Zero level set of u by linear interpolation along grid edges, shape (m, dim)."""
    g = s.grid
    u = np.asarray(s.u.values)
    mesh = g.mesh()
    pts = []
    zero = u == 0
    if zero.any():
        pts.append(np.stack([m[zero] for m in mesh], axis=-1))
    for a in range(g.dim):
        nxt = np.roll(u, -1, axis=a)
        cross = u * nxt < 0
        if not g.periodic[a]:
            last = [slice(None)] * g.dim
            last[a] = -1
            cross[tuple(last)] = False
        if not cross.any():
            continue
        frac = u[cross] / (u[cross] - nxt[cross])
        coords = [m[cross] for m in mesh]
        coords[a] = coords[a] + frac * g.spacing[a]
        pts.append(np.stack(coords, axis=-1))
    if not pts:
        raise InterfaceExtinct("u does not change sign")
    return g.wrap(np.concatenate(pts, axis=0))


def fit_sphere(points: np.ndarray) -> tuple[np.ndarray, float]:
    """Algebraic least-squares circle/sphere fit; returns (center, radius)."""
    P = np.asarray(points, dtype=float)
    A = np.hstack([2 * P, np.ones((len(P), 1))])
    b = np.sum(P * P, axis=1)
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    center = sol[:-1]
    radius = math.sqrt(sol[-1] + center @ center)
    return center, radius


def interface_radius(s: PhaseState) -> float:
    return fit_sphere(locate_interface(s))[1]
