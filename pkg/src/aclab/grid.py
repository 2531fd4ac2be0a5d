"""Cell-centered rectilinear grids on boxes and flat tori.

Each axis is either ``periodic`` (a flat torus direction) or ``neumann``
(a reflecting wall, used to model a truncated copy of R^n).  Cell centers
sit at ``(j + 1/2) * h`` along every axis, so quadrature is the midpoint
rule and all stencils are second order.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

PERIODIC = "periodic"
NEUMANN = "neumann"
TOPOLOGIES = (PERIODIC, NEUMANN)
MIN_CELLS = 8


class GridError(ValueError):
    """Invalid grid or field construction."""


@dataclass(frozen=True)
class GridSpec:
    dim: int
    extent: tuple[float, ...]
    cells: tuple[int, ...]
    topology: tuple[str, ...]

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise GridError(f"dim must be 1, 2 or 3, got {self.dim}")
        for name in ("extent", "cells", "topology"):
            if len(getattr(self, name)) != self.dim:
                raise GridError(f"{name} needs {self.dim} entries")
        for L in self.extent:
            if not (np.isfinite(L) and L > 0):
                raise GridError(f"extent must be positive, got {L}")
        for n in self.cells:
            if n < MIN_CELLS:
                raise GridError(f"need at least {MIN_CELLS} cells per axis, got {n}")
        for topo in self.topology:
            if topo not in TOPOLOGIES:
                raise GridError(f"unknown topology {topo!r}")

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / n for L, n in zip(self.extent, self.cells))

    @property
    def min_spacing(self) -> float:
        return min(self.spacing)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells

    @property
    def size(self) -> int:
        return int(np.prod(self.cells))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def periodic(self) -> tuple[bool, ...]:
        return tuple(t == PERIODIC for t in self.topology)

    @property
    def diameter(self) -> float:
        """Largest distance between two points of the domain."""
        half = [L / 2 if p else L for L, p in zip(self.extent, self.periodic)]
        return float(np.sqrt(np.sum(np.square(half))))

    def axis_centers(self, axis: int) -> np.ndarray:
        h = self.spacing[axis]
        return (np.arange(self.cells[axis]) + 0.5) * h

    def mesh(self) -> list[np.ndarray]:
        """Cell-center coordinates, one array of shape ``self.shape`` per axis."""
        axes = [self.axis_centers(i) for i in range(self.dim)]
        return np.meshgrid(*axes, indexing="ij")

    def center(self) -> np.ndarray:
        return np.array(self.extent, dtype=float) / 2

    def displacement(self, x, y) -> np.ndarray:
        """Per-axis displacement ``x - y`` using the minimum image on periodic axes.

        ``x`` and ``y`` broadcast against each other; the last axis holds the
        coordinates.
        """
        d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        d = np.array(d, dtype=float, copy=True)
        for i, (L, p) in enumerate(zip(self.extent, self.periodic)):
            if p:
                d[..., i] -= L * np.round(d[..., i] / L)
        return d

    def distance(self, x, y) -> np.ndarray:
        return np.sqrt(np.sum(self.displacement(x, y) ** 2, axis=-1))

    def wrap(self, x) -> np.ndarray:
        """Map a point into the fundamental domain along periodic axes."""
        x = np.array(x, dtype=float, copy=True)
        for i, (L, p) in enumerate(zip(self.extent, self.periodic)):
            if p:
                x[..., i] = np.mod(x[..., i], L)
        return x


def make_grid(dim: int, extents: Sequence[float], cells: Sequence[int],
              topology: str | Sequence[str]) -> GridSpec:
    """Build a validated grid; ``topology`` may be one name for all axes."""
    if isinstance(topology, str):
        topology = (topology,) * len(cells)
    return GridSpec(int(dim), tuple(float(L) for L in extents),
                    tuple(int(n) for n in cells), tuple(topology))


@dataclass(frozen=True)
class ScalarField:
    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.shape:
            if v.size != self.grid.size:
                raise GridError(f"expected {self.grid.size} values, got {v.size}")
            v = v.reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise GridError("field contains non-finite values")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def trusted(cls, grid: GridSpec, values: np.ndarray) -> "ScalarField":
        """Wrap a fresh, finite float array of the grid's shape without copying or checks."""
        obj = object.__new__(cls)
        values.flags.writeable = False
        object.__setattr__(obj, "grid", grid)
        object.__setattr__(obj, "values", values)
        return obj

    def with_values(self, values) -> "ScalarField":
        return ScalarField(self.grid, values)

    def __mul__(self, c: float) -> "ScalarField":
        return ScalarField(self.grid, self.values * c)

    __rmul__ = __mul__


def from_function(grid: GridSpec, fn) -> ScalarField:
    """Sample ``fn(*coords)`` at the cell centers."""
    return ScalarField(grid, fn(*grid.mesh()))


def _padded(u: ScalarField) -> np.ndarray:
    # One ghost layer per side: wrap on periodic axes, mirror the edge cell on
    # Neumann axes (zero normal derivative at the wall).
    p = u.values
    for axis, periodic in enumerate(u.grid.periodic):
        lo = [slice(None)] * p.ndim
        hi = [slice(None)] * p.ndim
        lo[axis] = slice(-1, None) if periodic else slice(0, 1)
        hi[axis] = slice(0, 1) if periodic else slice(-1, None)
        p = np.concatenate([p[tuple(lo)], p, p[tuple(hi)]], axis=axis)
    return p


def _shifted(p: np.ndarray, axis: int, offset: int) -> np.ndarray:
    """Interior view of a padded array shifted by ``offset`` along ``axis``."""
    idx = []
    for a in range(p.ndim):
        lo = 1 + (offset if a == axis else 0)
        hi = p.shape[a] - 1 + (offset if a == axis else 0)
        idx.append(slice(lo, hi))
    return p[tuple(idx)]


def laplacian(u: ScalarField) -> ScalarField:
    p = _padded(u)
    out = np.zeros(u.grid.shape)
    for axis, h in enumerate(u.grid.spacing):
        out += (_shifted(p, axis, 1) - 2.0 * u.values + _shifted(p, axis, -1)) / h**2
    return ScalarField(u.grid, out)


def grad_sq(u: ScalarField) -> ScalarField:
    """|Du|^2 from centered differences."""
    p = _padded(u)
    out = np.zeros(u.grid.shape)
    for axis, h in enumerate(u.grid.spacing):
        out += ((_shifted(p, axis, 1) - _shifted(p, axis, -1)) / (2.0 * h)) ** 2
    return ScalarField.trusted(u.grid, out)


def grad_product(u: ScalarField) -> ScalarField:
    """|Du|^2 estimated as the product of forward and backward differences.

    Second-order consistent like :func:`grad_sq`, but exact on the geometric
    tails of the 3-point stencil's stationary profiles.  Can be slightly
    negative at discrete extrema.
    """
    p = _padded(u)
    out = np.zeros(u.grid.shape)
    for axis, h in enumerate(u.grid.spacing):
        out += (_shifted(p, axis, 1) - u.values) * (u.values - _shifted(p, axis, -1)) / h**2
    return ScalarField.trusted(u.grid, out)


GRADIENT_STENCILS = {"centered": grad_sq, "product": grad_product}


def integrate(w: ScalarField) -> float:
    return float(np.sum(w.values) * w.grid.cell_volume)


def ball_mask(grid: GridSpec, center, radius: float) -> np.ndarray:
    if not radius > 0:
        raise GridError(f"radius must be positive, got {radius}")
    d2 = np.zeros(grid.shape)
    mesh = grid.mesh()
    c = np.asarray(center, dtype=float)
    for axis in range(grid.dim):
        d = mesh[axis] - c[axis]
        if grid.periodic[axis]:
            L = grid.extent[axis]
            d = d - L * np.round(d / L)
        d2 += d * d
    return d2 <= radius * radius


def ball_sum(w: ScalarField, center, radius: float) -> float:
    """Quadrature of ``w`` over cells whose centers lie in the closed ball."""
    mask = ball_mask(w.grid, center, radius)
    return float(np.sum(w.values[mask]) * w.grid.cell_volume)


# -- serialization ----------------------------------------------------------

def field_to_bytes(u: ScalarField) -> bytes:
    g = u.grid
    head = struct.pack("<i", g.dim)
    head += struct.pack(f"<{g.dim}i", *g.cells)
    head += struct.pack(f"<{g.dim}d", *g.extent)
    head += struct.pack(f"<{g.dim}i", *(1 if p else 0 for p in g.periodic))
    payload = np.ascontiguousarray(u.values, dtype="<f8").tobytes(order="C")
    return head + payload


def field_from_bytes(data: bytes) -> ScalarField:
    (dim,) = struct.unpack_from("<i", data, 0)
    if dim not in (1, 2, 3):
        raise GridError(f"bad header: dim={dim}")
    off = 4
    cells = struct.unpack_from(f"<{dim}i", data, off)
    off += 4 * dim
    extent = struct.unpack_from(f"<{dim}d", data, off)
    off += 8 * dim
    flags = struct.unpack_from(f"<{dim}i", data, off)
    off += 4 * dim
    grid = make_grid(dim, extent, cells, [PERIODIC if f else NEUMANN for f in flags])
    n = grid.size
    if len(data) - off != 8 * n:
        raise GridError(f"payload holds {(len(data) - off) / 8} values, expected {n}")
    values = np.frombuffer(data, dtype="<f8", count=n, offset=off).reshape(grid.shape)
    return ScalarField(grid, values.astype(float))


def write_field(path, u: ScalarField) -> None:
    Path(path).write_bytes(field_to_bytes(u))


def read_field(path) -> ScalarField:
    return field_from_bytes(Path(path).read_bytes())


def write_field_csv(path, u: ScalarField) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"i{a}" for a in range(u.grid.dim)] + ["value"])
        for idx in np.ndindex(*u.grid.shape):
            w.writerow(list(idx) + [format(float(u.values[idx]), ".17g")])
