"""Gaussian-density entropy of a discretized measure, and its monotonicity checks.

The entropy is the supremum over centers ``y`` and scales ``s`` of
``int rho_{y,s}(x, 0) dmu(x)``.  It is found by a coarse scan (separable
kernel contractions over strided cell centers and log-spaced scales)
followed by a coordinate pattern search in ``(y, log s)`` from the best few
well-separated scan points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate as spi
from scipy import signal

from .dynamics import PhaseState
from .grid import GridSpec
from .kernel import KernelPoint, axis_kernel_matrix, contract, gaussian_integral
from .measures import DensityField, energy_measure
from .reports import FAIL, NA, PASS, Report

N_SEEDS = 5


@dataclass(frozen=True)
class EntropySearchConfig:
    s_min: float
    s_max: float
    s_count: int = 40
    y_stride: int = 4
    refine_iters: int = 60
    refine_shrink: float = 0.5

    def __post_init__(self):
        if not 0 < self.s_min < self.s_max:
            raise ValueError(f"need 0 < s_min < s_max, got {self.s_min}, {self.s_max}")
        if self.s_count < 8:
            raise ValueError("s_count must be at least 8")
        if self.y_stride < 1:
            raise ValueError("y_stride must be at least 1")
        if self.refine_iters < 0:
            raise ValueError("refine_iters must be non-negative")
        if not 0 < self.refine_shrink < 1:
            raise ValueError("refine_shrink must lie in (0, 1)")

    @classmethod
    def for_grid(cls, grid: GridSpec, **overrides) -> "EntropySearchConfig":
        """Scales from (2h)^2 up to diam^2 on tori or 4 diam^2 on boxes."""
        h = grid.min_spacing
        top = grid.diameter**2 * (1.0 if all(grid.periodic) else 4.0)
        kw = dict(s_min=(2 * h) ** 2, s_max=top)
        kw.update(overrides)
        return cls(**kw)


@dataclass(frozen=True)
class Box:
    """Axis-aligned region of centers; ``None`` bounds are unbounded."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def contains(self, y) -> bool:
        y = np.asarray(y)
        return bool(np.all(y >= np.asarray(self.lo)) and np.all(y <= np.asarray(self.hi)))


@dataclass(frozen=True)
class EntropyResult:
    value: float
    argmax_y: np.ndarray
    argmax_s: float
    scan_evaluations: int
    refine_evaluations: int = 0
    s_range: tuple[float, float] = (0.0, 0.0)
    coarse_value: float = 0.0
    restricted: tuple | None = None


def _scale_range(cfg: EntropySearchConfig, interval) -> tuple[float, float]:
    lo, hi = cfg.s_min, cfg.s_max
    if interval is not None:
        a, b = interval
        if a is not None:
            lo = max(lo, a)
        if b is not None and math.isfinite(b):
            hi = min(hi, b)
    if lo > hi:
        raise ValueError(f"scale interval {interval} misses [{cfg.s_min}, {cfg.s_max}]")
    return lo, hi


def _axis_candidates(grid: GridSpec, axis: int, stride: int, region: Box | None) -> np.ndarray:
    xs = grid.axis_centers(axis)
    picked = xs[::stride]
    if region is not None:
        lo, hi = region.lo[axis], region.hi[axis]
        picked = picked[(picked >= lo) & (picked <= hi)]
        if picked.size == 0:
            picked = xs[(xs >= lo) & (xs <= hi)]
        if picked.size == 0:
            picked = np.array([0.5 * (lo + hi)])
    return picked


class _Search:
    def __init__(self, mu: DensityField, cfg: EntropySearchConfig, region, interval):
        self.mu = mu
        self.grid = mu.grid
        self.cfg = cfg
        self.region = region
        self.s_lo, self.s_hi = _scale_range(cfg, interval)
        self.evals = 0

    def value(self, y, s) -> float:
        self.evals += 1
        return gaussian_integral(self.mu, KernelPoint(tuple(y), s))

    def scan(self):
        g = self.grid
        axes = [_axis_candidates(g, a, self.cfg.y_stride, self.region) for a in range(g.dim)]
        if self.s_hi > self.s_lo:
            scales = np.geomspace(self.s_lo, self.s_hi, self.cfg.s_count)
        else:
            scales = np.array([self.s_lo])
        table = np.empty((len(scales),) + tuple(len(c) for c in axes))
        dens = np.asarray(self.mu.density)
        for k, s in enumerate(scales):
            mats = [axis_kernel_matrix(g, a, axes[a], s) for a in range(g.dim)]
            table[k] = contract(dens, mats) * math.sqrt(4 * math.pi * s) * g.cell_volume
        return axes, scales, table

    def seeds(self, table: np.ndarray, k: int = N_SEEDS) -> list[tuple[int, ...]]:
        # Best scan points, skipping any within one lattice step of a chosen one.
        order = np.argsort(-table, axis=None, kind="stable")
        chosen: list[tuple[int, ...]] = []
        for flat in order:
            idx = np.unravel_index(flat, table.shape)
            if any(max(abs(int(i) - int(j)) for i, j in zip(idx, c)) <= 1 for c in chosen):
                continue
            chosen.append(tuple(int(i) for i in idx))
            if len(chosen) == k:
                break
        return chosen

    def _clip(self, z: np.ndarray) -> np.ndarray:
        g = self.grid
        z = z.copy()
        for a in range(g.dim):
            if self.region is not None:
                z[a] = min(max(z[a], self.region.lo[a]), self.region.hi[a])
            if g.periodic[a]:
                if self.region is None:
                    z[a] = z[a] % g.extent[a]
            else:
                z[a] = min(max(z[a], 0.0), g.extent[a])
        z[-1] = min(max(z[-1], math.log(self.s_lo)), math.log(self.s_hi))
        return z

    def refine(self, y0, s0, v0, log_step):
        g = self.grid
        z = np.append(np.asarray(y0, dtype=float), math.log(s0))
        steps = np.array([self.cfg.y_stride * h for h in g.spacing] + [log_step])
        best = v0
        for _ in range(self.cfg.refine_iters):
            improved = False
            for i in range(len(z)):
                for sign in (1.0, -1.0):
                    trial = z.copy()
                    trial[i] += sign * steps[i]
                    trial = self._clip(trial)
                    if np.array_equal(trial, z):
                        continue
                    v = self.value(trial[:-1], math.exp(trial[-1]))
                    if v > best:
                        best, z, improved = v, trial, True
                        break
            if not improved:
                steps *= self.cfg.refine_shrink
        return best, z[:-1], min(max(math.exp(z[-1]), self.s_lo), self.s_hi)

    def run(self, restricted=None) -> EntropyResult:
        axes, scales, table = self.scan()
        n_scan = table.size
        top = self.seeds(table)
        k0 = top[0]
        best_v = float(table[k0])
        best_y = np.array([axes[a][k0[a + 1]] for a in range(self.grid.dim)])
        best_s = float(scales[k0[0]])
        coarse = best_v
        log_step = math.log(scales[1] / scales[0]) if len(scales) > 1 else 0.0
        if best_v > 0 and self.cfg.refine_iters > 0:
            for idx in top:
                y0 = [axes[a][idx[a + 1]] for a in range(self.grid.dim)]
                v, y, s = self.refine(y0, float(scales[idx[0]]), float(table[idx]), log_step)
                if v > best_v:
                    best_v, best_y, best_s = v, y, s
        return EntropyResult(best_v, np.asarray(best_y), best_s, n_scan, self.evals,
                             (self.s_lo, self.s_hi), coarse, restricted)


def entropy(mu: DensityField, cfg: EntropySearchConfig) -> EntropyResult:
    return _Search(mu, cfg, None, None).run()


def local_entropy(mu: DensityField, U: Box | None, I, cfg: EntropySearchConfig) -> EntropyResult:
    """Supremum restricted to centers in ``U`` and scales in ``I = (a, b)``."""
    if U is not None and any(l > h for l, h in zip(U.lo, U.hi)):
        raise ValueError("empty center region")
    return _Search(mu, cfg, U, I).run(restricted=(U, tuple(I) if I is not None else None))


# -- traces -----------------------------------------------------------------

def huisken_trace(traj: Sequence[PhaseState], kp_center: KernelPoint,
                  stencil: str = "centered") -> list[tuple[float, float]]:
    """Gaussian density of each snapshot's energy measure at a fixed (y, s)."""
    out = []
    for st in traj:
        if st.t >= kp_center.s:
            raise ValueError(f"snapshot at t={st.t} is not before s={kp_center.s}")
        kp = KernelPoint(kp_center.y, kp_center.s, st.t)
        out.append((st.t, gaussian_integral(energy_measure(st, stencil), kp)))
    return out


def monotone_report(trace: Sequence[tuple[float, float]], rel_slack: float,
                    check: str, result: str) -> Report:
    """Non-increase of consecutive trace values within a relative slack."""
    rep = Report(check, result, ("t", "value", "slack", "pass"))
    slacks = []
    prev = None
    for t, v in trace:
        if prev is None:
            rep.rows.append((t, v, None, True))
        else:
            slack = prev * (1 + rel_slack) - v if prev >= 0 else prev - v
            slacks.append(slack)
            rep.rows.append((t, v, slack, slack >= 0))
        prev = v
    if slacks:
        rep.worst_slack = float(min(slacks))
        rep.status = PASS if rep.worst_slack >= 0 else FAIL
    return rep


def gronwall_exponent(eps: float, t1: float) -> float:
    if not 0 < eps < 1:
        raise ValueError(f"need 0 < eps < 1, got {eps}")
    if not t1 > 0:
        raise ValueError(f"need t1 > 0, got {t1}")
    return 1.0 / (math.log(1.0 / eps) * t1)


def gronwall_rhs(v1: float, s: float, t1: float, t2: float, eps: float) -> float:
    """Upper bound for the Gaussian density at t2 given its value v1 at t1."""
    K = gronwall_exponent(eps, t1)
    if t2 == t1:
        return v1
    growth = ((s - t1) / (s - t2)) ** K
    corr, _ = spi.quad(lambda b: (s - b) ** -0.5 * ((s - b) / (s - t2)) ** K, t1, t2,
                       epsabs=1e-14, epsrel=1e-12, limit=200)
    return growth * v1 + 8.0 * eps * math.sqrt(math.pi) * K * corr


def gronwall_check(traj: Sequence[PhaseState], kp_center: KernelPoint, eps: float,
                   t1: float, tol: float = 1e-6) -> Report:
    K = gronwall_exponent(eps, t1)
    rep = Report("gronwall", "Gaussian-density Gronwall inequality",
                 ("t1", "t2", "value_t1", "value_t2", "bound", "slack", "pass"))
    rep.reason = f"K={K!r}"
    trace = huisken_trace(traj, kp_center)
    base = [v for t, v in trace if abs(t - t1) <= 1e-12 * max(1.0, t1)]
    if not base:
        raise ValueError(f"no snapshot at t1={t1}")
    v1 = base[0]
    slacks = []
    for t2, v2 in trace:
        if t2 < t1 - 1e-12:
            continue
        bound = gronwall_rhs(v1, kp_center.s, t1, t2, eps)
        slack = bound - v2
        slacks.append(slack)
        rep.rows.append((t1, t2, v1, v2, bound, slack, slack >= -tol))
    rep.worst_slack = float(min(slacks))
    rep.status = PASS if rep.worst_slack >= -tol else FAIL
    return rep


@dataclass
class EntropyTrace:
    times: list[float]
    results: list[EntropyResult]
    report: Report
    shifted: list[EntropyResult] = field(default_factory=list)


def entropy_trace(traj: Sequence[PhaseState], cfg: EntropySearchConfig,
                  horizon: float | None = None, rel_slack: float = 0.02,
                  stencil: str = "centered") -> EntropyTrace:
    """Per-snapshot entropy with a monotonicity verdict.

    With ``horizon`` T each consecutive pair compares the local entropy with
    scales in (0, T) at the later time against scales in (0, T + dt) at the
    earlier one.
    """
    measures = [energy_measure(st, stencil) for st in traj]
    times = [st.t for st in traj]
    if horizon is None:
        results = [entropy(m, cfg) for m in measures]
        rep = Report("entropy_monotonicity", "entropy monotonicity",
                     ("t", "lambda", "y", "s", "evaluations", "slack", "pass"))
        shifted = []
        lhs = [r.value for r in results]
        rhs = [None] + [r.value for r in results[:-1]]
    else:
        results = [local_entropy(m, None, (0.0, horizon), cfg) for m in measures]
        shifted = [None] + [local_entropy(measures[i], None, (0.0, horizon + times[i + 1] - times[i]), cfg)
                            for i in range(len(measures) - 1)]
        rep = Report("local_entropy_monotonicity", "local entropy monotonicity with shifted horizon",
                     ("t", "lambda", "y", "s", "evaluations", "slack", "pass"))
        lhs = [r.value for r in results]
        rhs = [None] + [r.value for r in shifted[1:]]
    slacks = []
    for t, r, left, right in zip(times, results, lhs, rhs):
        if right is None:
            rep.rows.append((t, r.value, r.argmax_y, r.argmax_s, r.scan_evaluations + r.refine_evaluations,
                             None, True))
            continue
        slack = right * (1 + rel_slack) - left
        slacks.append(slack)
        rep.rows.append((t, r.value, r.argmax_y, r.argmax_s, r.scan_evaluations + r.refine_evaluations,
                         slack, slack >= 0))
    if slacks:
        rep.worst_slack = float(min(slacks))
        rep.status = PASS if rep.worst_slack >= 0 else FAIL
    else:
        rep.status = NA
    rep.reason = f"relative slack {rel_slack}"
    return EntropyTrace(times, results, rep, [s for s in shifted if s is not None])


# -- volume growth ----------------------------------------------------------

def ball_sums_all(mu: DensityField, radius: float) -> np.ndarray:
    """mu(B_R(x)) for every cell center x, by FFT correlation with the ball stencil.

    Ball membership matches :func:`aclab.grid.ball_sum` (cell centers within
    the closed ball, minimum-image distance on periodic axes).
    """
    g = mu.grid
    offsets, pads = [], []
    for a in range(g.dim):
        h, n = g.spacing[a], g.cells[a]
        m = int(math.ceil(radius / h)) + 1
        if g.periodic[a]:
            lo, hi = min(m, (n - 1) // 2), min(m, n // 2)
        else:
            lo = hi = min(m, n - 1)
        offsets.append(np.arange(-lo, hi + 1))
        pads.append((lo, hi))
    mesh = np.meshgrid(*[o * h for o, h in zip(offsets, g.spacing)], indexing="ij")
    d2 = sum(m * m for m in mesh)
    stencil = (d2 <= radius * radius).astype(float)
    padded = np.asarray(mu.density)
    for a in range(g.dim):
        widths = [(0, 0)] * g.dim
        widths[a] = pads[a]
        padded = np.pad(padded, widths, mode="wrap" if g.periodic[a] else "constant")
    sums = signal.correlate(padded, stencil, mode="valid", method="fft")
    return sums * g.cell_volume


def area_ratio_sup(mu: DensityField, radii: Sequence[float], y_stride: int = 4) -> float:
    """max over strided cell centers and ``radii`` of mu(B_R(x)) / R^(n-1)."""
    g = mu.grid
    if len(radii) == 0:
        raise ValueError("need at least one radius")
    for R in radii:
        if R < 2 * g.min_spacing:
            raise ValueError(f"radius {R} below twice the grid spacing")
    best = 0.0
    sl = tuple(slice(None, None, y_stride) for _ in range(g.dim))
    for R in radii:
        sums = ball_sums_all(mu, R)[sl]
        best = max(best, float(sums.max()) / R ** (g.dim - 1))
    return best
