"""Backward heat kernels scaled so that a flat hyperplane has unit Gaussian density.

    rho_{y,s}(t, x) = sqrt(4 pi tau) * H(x, y, tau),   tau = s - t,

with ``H`` the heat kernel of the domain: the free Gaussian along Neumann
axes (the box stands in for R^n) and the wrapped Gaussian along periodic
axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import GridSpec

IMAGE_TOL = 1e-16
MAX_IMAGES = 10_000


@dataclass(frozen=True)
class KernelPoint:
    y: tuple[float, ...]
    s: float
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "y", tuple(float(v) for v in np.atleast_1d(self.y)))
        if not self.s - self.t > 0:
            raise ValueError(f"need s > t, got s={self.s}, t={self.t}")

    @property
    def tau(self) -> float:
        return self.s - self.t


def axis_heat(d, tau: float, period: float | None = None) -> np.ndarray:
    """One-dimensional heat kernel at displacement ``d`` after time ``tau``.

    With a ``period`` the image sum over d + m*period is accumulated until
    the next pair of images adds less than 1e-16 of the running sum.
    """
    d = np.asarray(d, dtype=float)
    norm = 1.0 / math.sqrt(4.0 * math.pi * tau)
    if period is None:
        return norm * np.exp(-d * d / (4.0 * tau))
    d = d - period * np.round(d / period)
    total = np.exp(-d * d / (4.0 * tau))
    for m in range(1, MAX_IMAGES):
        term = (np.exp(-(d + m * period) ** 2 / (4.0 * tau))
                + np.exp(-(d - m * period) ** 2 / (4.0 * tau)))
        total = total + term
        if np.all(term <= IMAGE_TOL * total):
            break
    return norm * total


def _axis_period(grid: GridSpec, axis: int) -> float | None:
    return grid.extent[axis] if grid.periodic[axis] else None


def rho(kp: KernelPoint, x, grid: GridSpec) -> np.ndarray:
    """rho_{y,s}(t, x) for points ``x`` (last axis = coordinates)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(kp.y)
    if y.shape[-1] != grid.dim or x.shape[-1] != grid.dim:
        raise ValueError("point dimension does not match the grid")
    val = math.sqrt(4.0 * math.pi * kp.tau)
    for a in range(grid.dim):
        val = val * axis_heat(x[..., a] - y[a], kp.tau, _axis_period(grid, a))
    return val


def axis_kernel_matrix(grid: GridSpec, axis: int, centers, tau: float) -> np.ndarray:
    """Rows: 1D heat kernel from each center to every cell center on ``axis``."""
    c = np.asarray(centers, dtype=float)[:, None]
    return axis_heat(grid.axis_centers(axis)[None, :] - c, tau, _axis_period(grid, axis))


def contract(density: np.ndarray, mats: list[np.ndarray]) -> np.ndarray:
    """Apply one matrix per axis: out[i, j, ...] = sum K0[i,a] K1[j,b] ... d[a, b, ...]."""
    out = density
    for a, K in enumerate(mats):
        out = np.moveaxis(np.tensordot(K, out, axes=([1], [a])), 0, a)
    return out


def rho_field(kp: KernelPoint, grid: GridSpec) -> np.ndarray:
    """rho evaluated at every cell center, shape ``grid.shape``."""
    val = np.array(math.sqrt(4.0 * math.pi * kp.tau))
    for a in range(grid.dim):
        k = axis_kernel_matrix(grid, a, [kp.y[a]], kp.tau)[0]
        val = np.multiply.outer(val, k)
    return val


def gaussian_integral(mu, kp: KernelPoint) -> float:
    """int rho_{y,s}(t, x) dmu(x) by midpoint quadrature."""
    grid = mu.grid
    mats = [axis_kernel_matrix(grid, a, [kp.y[a]], kp.tau) for a in range(grid.dim)]
    core = float(contract(np.asarray(mu.density), mats).ravel()[0])
    return math.sqrt(4.0 * math.pi * kp.tau) * core * grid.cell_volume


def kernel_mass(kp: KernelPoint, grid: GridSpec) -> float:
    """int rho dx over the grid; sqrt(4 pi tau) up to boundary loss on boxes."""
    return float(np.sum(rho_field(kp, grid)) * grid.cell_volume)
