"""Simulation and diagnostic pipeline behind the ``run``, ``verify`` and ``convergence`` commands."""

from __future__ import annotations

import csv
import math
import shutil
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from ..density import NOT_UNIT, UNIT, density_entropy_bound, unit_density_report
from ..dynamics import PhaseState, StepControl, default_control, run, stable_dt
from ..entropy import (EntropySearchConfig, area_ratio_sup, entropy, entropy_trace, gronwall_check,
                       huisken_trace, local_entropy, monotone_report)
from ..grid import make_grid, read_field, write_field
from ..kernel import KernelPoint
from ..measures import (SONER_EPS_MAX, check_discrepancy_sign, check_soner_bound,
                        discrepancy_measure, energy_measure)
from ..potential import energy_constant, get_potential
from ..reports import FAIL, NA, PASS, Report, fmt
from ..scenarios import (SHRINKING, InterfaceExtinct, Scenario, extinction_time, interface_radius,
                         make_initial, reference_radius)
from .config import ConfigError, RunConfig, convert_flag, parse_centers

MANIFEST = "manifest.txt"
SUMMARY_COLUMNS = ("check", "status", "worst_slack", "result", "reason")
TIME_TOL = 1e-12


# -- setup ------------------------------------------------------------------

def build_scenario(cfg: RunConfig) -> Scenario:
    n = cfg.resolved_dim
    try:
        grid = make_grid(n, [cfg.extent] * n, [cfg.n] * n, cfg.resolved_topology)
        sc = Scenario(cfg.scenario, cfg.eps, grid, r0=cfg.r0, d=cfg.d, axis=cfg.axis,
                      steepness=cfg.steepness, stretch=cfg.stretch, strict=cfg.strict,
                      potential=cfg.potential, s_max=cfg.s_max or 0.0)
        make_initial(sc)
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from None
    return sc


def step_control(cfg: RunConfig, sc: Scenario) -> StepControl:
    p = get_potential(cfg.potential)
    try:
        if cfg.dt is not None:
            limit = stable_dt(sc.grid, cfg.eps, 1.0, p)
            if cfg.dt > limit:
                raise ConfigError(f"dt={cfg.dt} exceeds the stability limit {limit}")
            return StepControl(cfg.dt, cfg.dt / limit)
        if cfg.safety is not None:
            return StepControl(stable_dt(sc.grid, cfg.eps, cfg.safety, p), cfg.safety)
        return default_control(sc.grid, cfg.eps, p)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def gronwall_t1(cfg: RunConfig) -> float:
    return cfg.gronwall_t1 if cfg.gronwall_t1 is not None else cfg.t_end / 4


def snapshot_times(cfg: RunConfig) -> list[float]:
    times = [float(t) for t in np.linspace(0.0, cfg.t_end, cfg.snapshots)]
    if "gronwall" in cfg.enabled_suites:
        t1 = gronwall_t1(cfg)
        if all(abs(t - t1) > TIME_TOL for t in times):
            times = sorted(times + [t1])
    return times


def horizon(cfg: RunConfig) -> float:
    return cfg.horizon if cfg.horizon is not None else cfg.t_end / 2


def search_config(cfg: RunConfig, grid) -> EntropySearchConfig:
    kw = dict(s_count=cfg.s_count, y_stride=cfg.y_stride, refine_iters=cfg.refine_iters,
              refine_shrink=cfg.refine_shrink)
    if cfg.s_min is not None:
        kw["s_min"] = cfg.s_min
    if cfg.s_max is not None:
        kw["s_max"] = cfg.s_max
    try:
        return EntropySearchConfig.for_grid(grid, **kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def huisken_centers(cfg: RunConfig, sc: Scenario) -> list[KernelPoint]:
    if cfg.huisken_centers is not None:
        pts = parse_centers(cfg.huisken_centers, cfg.resolved_dim)
    else:
        top = extinction_time(sc) if sc.name in SHRINKING else cfg.t_end
        pts = [(tuple(sc.center_point), top + 0.05)]
    out = []
    for y, s in pts:
        if s <= cfg.t_end:
            raise ConfigError(f"huisken scale s={s} must exceed t_end={cfg.t_end}")
        out.append(KernelPoint(y, s))
    return out


def prepare(cfg: RunConfig):
    """Validate everything that can be checked before any work or output."""
    sc = build_scenario(cfg)
    ctrl = step_control(cfg, sc)
    search_config(cfg, sc.grid)
    if "huisken" in cfg.enabled_suites or "gronwall" in cfg.enabled_suites:
        huisken_centers(cfg, sc)
    return sc, ctrl


def simulate(cfg: RunConfig, sc: Scenario | None = None, ctrl: StepControl | None = None) -> list[PhaseState]:
    if sc is None or ctrl is None:
        sc, ctrl = prepare(cfg)
    s0 = make_initial(sc)
    return run(s0, cfg.t_end, ctrl, snapshot_times(cfg))


# -- diagnostics ------------------------------------------------------------

@dataclass
class Diagnostics:
    reports: list[Report] = field(default_factory=list)
    extra: list[tuple[str, Report]] = field(default_factory=list)

    def summary(self) -> Report:
        rep = Report("summary", "", SUMMARY_COLUMNS)
        for r in self.reports:
            rep.rows.append((r.check, r.status, r.worst_slack, r.result, r.reason))
        return rep

    @property
    def exit_code(self) -> int:
        return 1 if any(r.status == FAIL for r in self.reports) else 0

    def by_check(self) -> dict[str, Report]:
        return {r.check: r for r in self.reports}


def _na(check: str, result: str, reason: str) -> Report:
    return Report(check, result, ("reason",), [(reason,)], NA, float("nan"), reason)


def _merge(check: str, result: str, parts: Sequence[Report]) -> Report:
    """One summary row for several reports of the same kind."""
    rep = Report(check, result, ("part", "status", "worst_slack"))
    live = [p for p in parts if p.status != NA]
    for i, p in enumerate(parts):
        rep.rows.append((i, p.status, p.worst_slack))
    if not live:
        rep.status, rep.worst_slack = NA, float("nan")
    else:
        rep.worst_slack = float(min(p.worst_slack for p in live))
        rep.status = FAIL if any(p.status == FAIL for p in live) else PASS
    rep.reason = "; ".join(p.reason for p in parts if p.reason)
    return rep


def measures_table(traj: Sequence[PhaseState]) -> Report:
    rep = Report("measures", "", ("t", "energy_mass", "discrepancy_mass", "max_discrepancy",
                                  "max_energy_density"))
    for s in traj:
        mu = energy_measure(s)
        xi = discrepancy_measure(s)
        rep.rows.append((s.t, mu.mass(), xi.mass(), float(xi.density.max()), float(mu.density.max())))
    return rep


def radius_check(cfg: RunConfig, sc: Scenario, traj: Sequence[PhaseState]) -> Report:
    result = "sphere radius under mean curvature flow"
    if sc.name not in SHRINKING:
        return _na("mcf_radius", result, f"no reference radius for {sc.name}")
    tol = cfg.radius_tol if cfg.radius_tol is not None else 0.02 * cfg.r0
    T = extinction_time(sc)
    rep = Report("mcf_radius", result, ("t", "radius", "reference", "error", "slack", "pass"))
    slacks = []
    for s in traj:
        if s.t >= T:
            continue
        try:
            R = interface_radius(s)
        except InterfaceExtinct:
            continue
        ref = reference_radius(sc, s.t)
        err = abs(R - ref)
        slacks.append(tol - err)
        rep.rows.append((s.t, R, ref, err, tol - err, err <= tol))
    if not slacks:
        rep.status, rep.worst_slack, rep.reason = NA, float("nan"), "no interface before extinction"
        return rep
    rep.worst_slack = float(min(slacks))
    rep.status = PASS if rep.worst_slack >= 0 else FAIL
    rep.reason = f"tolerance {tol!r}"
    return rep


def area_radii(grid, eps: float, count: int = 6) -> np.ndarray:
    lo = 2 * max(2 * grid.min_spacing, 2 * eps)
    hi = 0.5 * min(grid.extent)
    return np.geomspace(lo, max(hi, lo), count)


def sandwich_check(traj, lambdas: Sequence[float], factor: float) -> Report:
    rep = Report("area_sandwich", "entropy comparable to area ratios",
                 ("t", "entropy", "area_ratio_sup", "ratio", "slack", "pass"))
    slacks = []
    for s, lam in zip(traj, lambdas):
        mu = energy_measure(s)
        A = area_ratio_sup(mu, area_radii(s.grid, s.eps))
        if A <= 0 or lam <= 0:
            rep.rows.append((s.t, lam, A, None, None, NA))
            continue
        q = lam / A
        slack = math.log(factor) - abs(math.log(q))
        slacks.append(slack)
        rep.rows.append((s.t, lam, A, q, slack, slack >= 0))
    if not slacks:
        rep.status, rep.worst_slack, rep.reason = NA, float("nan"), "empty measures"
    else:
        rep.worst_slack = float(min(slacks))
        rep.status = PASS if rep.worst_slack >= 0 else FAIL
        rep.reason = f"two-sided factor {factor!r}; slack in log units"
    return rep


def density_checks(cfg: RunConfig, traj: Sequence[PhaseState], scfg: EntropySearchConfig,
                   alpha: float, want_unit: bool, want_bound: bool):
    T = horizon(cfg)
    kappa = cfg.kappa * alpha
    per_snapshot, bounds, verdicts = [], [], []
    for s in traj:
        mu = energy_measure(s)
        ud = unit_density_report(mu, s.eps, alpha, cfg.probe_count, u=s.u, kappa=kappa,
                                 r_min=cfg.density_r_min, r_max=cfg.density_r_max)
        verdicts.append((s.t, ud))
        if want_unit:
            per_snapshot.append(ud.as_report())
        if want_bound:
            bounds.append(density_entropy_bound(mu, ud.probes, T, scfg, cfg.density_slack))
    reports, extra = [], []
    if want_unit:
        lam0 = local_entropy(energy_measure(traj[0]), None, (0.0, T), scfg).value
        limit = 2 * alpha - kappa
        result = "unit density below twice the energy constant"
        rep = Report("unit_density", result, ("t", "verdict", "median_theta_over_alpha",
                                              "max_theta_over_alpha"))
        for t, ud in verdicts:
            rep.rows.append((t, ud.verdict, ud.median, max(ud.normalized) if ud.normalized else None))
        meds = [ud.median for _, ud in verdicts if ud.median is not None]
        hyp = lam0 < limit
        names = [ud.verdict for _, ud in verdicts]
        if meds:
            rep.worst_slack = float(min(min(1.1 - m, m - 0.9) for m in meds))
        else:
            rep.worst_slack = float("nan")
        if not hyp:
            rep.status = NA
            rep.reason = (f"hypothesis not met: initial local entropy {lam0!r} >= {limit!r}; "
                          f"verdicts {' '.join(names)}")
        elif NOT_UNIT in names:
            rep.status = FAIL
            rep.reason = f"NOT-UNIT despite initial local entropy {lam0!r} < {limit!r}"
        elif UNIT in names:
            rep.status = PASS
            rep.reason = f"initial local entropy {lam0!r} < {limit!r}"
        else:
            rep.status, rep.reason = NA, f"no conclusive snapshot: {' '.join(names)}"
        reports.append(rep)
        extra += [(f"unit_density_{i:04d}", r) for i, r in enumerate(per_snapshot)]
    if want_bound:
        merged = _merge("density_entropy_bound", "density bounded by local entropy", bounds)
        merged.reason = f"horizon {T!r}; relative slack {cfg.density_slack!r}"
        reports.append(merged)
        extra += [(f"density_entropy_bound_{i:04d}", r) for i, r in enumerate(bounds)]
    return reports, extra


def diagnose(cfg: RunConfig, sc: Scenario, traj: Sequence[PhaseState]) -> Diagnostics:
    """Run every enabled suite on a stored or fresh trajectory."""
    suites = cfg.enabled_suites
    scfg = search_config(cfg, sc.grid)
    alpha = energy_constant(get_potential(cfg.potential))
    diag = Diagnostics()
    diag.extra.append(("measures", measures_table(traj)))

    if "discrepancy" in suites:
        diag.reports.append(check_discrepancy_sign(traj, cfg.discrepancy_tol / cfg.eps))
    if "soner" in suites:
        if cfg.eps < SONER_EPS_MAX:
            diag.reports.append(check_soner_bound(traj, cfg.soner_tol, cfg.soner_t_min))
        else:
            diag.reports.append(_na("soner_bound", "Soner gradient bound",
                                    f"eps={cfg.eps!r} is not below {SONER_EPS_MAX}"))
    centers = huisken_centers(cfg, sc) if ("huisken" in suites or "gronwall" in suites) else []
    if "huisken" in suites:
        parts = []
        for i, kp in enumerate(centers):
            rep = monotone_report(huisken_trace(traj, kp), cfg.huisken_slack, "huisken",
                                  "Huisken monotonicity")
            rep.reason = f"y={fmt(kp.y)} s={fmt(kp.s)}"
            parts.append(rep)
            diag.extra.append((f"huisken_{i}", rep))
        diag.reports.append(_merge("huisken", "Huisken monotonicity", parts))
    if "gronwall" in suites:
        t1 = gronwall_t1(cfg)
        parts = []
        for i, kp in enumerate(centers):
            rep = gronwall_check(traj, kp, cfg.eps, t1, cfg.gronwall_tol)
            parts.append(rep)
            diag.extra.append((f"gronwall_{i}", rep))
        merged = _merge("gronwall", "Gaussian-density Gronwall inequality", parts)
        merged.status = NA if not parts else merged.status
        diag.reports.append(merged)

    lambdas = None
    if "entropy" in suites or "area" in suites:
        tr = entropy_trace(traj, scfg, None, cfg.entropy_slack)
        lambdas = [r.value for r in tr.results]
        if "entropy" in suites:
            diag.reports.append(tr.report)
    if "local_entropy" in suites:
        diag.reports.append(entropy_trace(traj, scfg, horizon(cfg), cfg.entropy_slack).report)
    if "area" in suites:
        diag.reports.append(sandwich_check(traj, lambdas, cfg.area_factor))
    if "density" in suites or "density_bound" in suites:
        reps, extra = density_checks(cfg, traj, scfg, alpha, "density" in suites,
                                     "density_bound" in suites)
        diag.reports += reps
        diag.extra += extra
    if "radius" in suites:
        diag.reports.append(radius_check(cfg, sc, traj))
    return diag


# -- artifacts --------------------------------------------------------------

def write_reports(dest: Path, diag: Diagnostics) -> None:
    rdir = dest / "reports"
    rdir.mkdir(parents=True, exist_ok=True)
    for rep in diag.reports:
        rep.write_csv(rdir / f"{rep.check}.csv")
    for name, rep in diag.extra:
        rep.write_csv(rdir / f"{name}.csv")
    diag.summary().write_csv(dest / "summary.csv")


def write_manifest(dest: Path, cfg: RunConfig, ctrl: StepControl, traj: Sequence[PhaseState],
                   files: Sequence[str]) -> None:
    lines = ["# aclab run manifest", "format = 1", f"dt = {fmt(ctrl.dt)}",
             f"safety = {fmt(ctrl.safety)}", f"snapshot_count = {len(traj)}"]
    for i, (s, name) in enumerate(zip(traj, files)):
        lines.append(f"snapshot_{i:04d} = {fmt(s.t)} {name}")
    lines += [f"config.{k} = {v}" for k, v in cfg.manifest_items()]
    (dest / MANIFEST).write_text("\n".join(lines) + "\n")


def _publish(tmp: Path, dest: Path) -> None:
    """Move a finished artifact tree into place."""
    dest.mkdir(parents=True, exist_ok=True)
    for item in sorted(tmp.iterdir()):
        target = dest / item.name
        if target.is_dir():
            shutil.rmtree(target)
        elif target.exists():
            target.unlink()
        shutil.move(str(item), str(target))


def cmd_run(cfg: RunConfig) -> int:
    sc, ctrl = prepare(cfg)
    traj = simulate(cfg, sc, ctrl)
    diag = diagnose(cfg, sc, traj)
    dest = Path(cfg.out)
    with tempfile.TemporaryDirectory(prefix=".aclab-", dir=dest.parent if dest.parent.exists() else None) as tmpd:
        tmp = Path(tmpd)
        (tmp / "snapshots").mkdir()
        files = []
        for i, s in enumerate(traj):
            name = f"snapshots/snap_{i:04d}.bin"
            write_field(tmp / name, s.u)
            files.append(name)
        write_reports(tmp, diag)
        write_manifest(tmp, cfg, ctrl, traj, files)
        _publish(tmp, dest)
    return diag.exit_code


# -- verify -----------------------------------------------------------------

@dataclass
class StoredRun:
    cfg: RunConfig
    traj: list[PhaseState]
    dt: float


def read_manifest(run_dir: Path) -> dict[str, str]:
    path = run_dir / MANIFEST
    if not path.is_file():
        raise ConfigError(f"{run_dir} has no {MANIFEST}")
    out = {}
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, val = line.partition("=")
        out[key.strip()] = val.strip()
    return out


def load_run(run_dir: Path, overrides: dict | None = None) -> StoredRun:
    items = read_manifest(run_dir)
    values = {}
    for k, v in items.items():
        if k.startswith("config."):
            values[k[len("config."):]] = convert_flag(k[len("config."):], v)
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        cfg = RunConfig(**values).validate()
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    p = get_potential(cfg.potential)
    traj = []
    for i in range(int(items["snapshot_count"])):
        t_text, name = items[f"snapshot_{i:04d}"].split(maxsplit=1)
        u = read_field(run_dir / name)
        traj.append(PhaseState(u, float(t_text), cfg.eps, p))
    return StoredRun(cfg, traj, float(items["dt"]))


def cmd_verify(run_dir, overrides: dict | None = None) -> int:
    run_dir = Path(run_dir)
    stored = load_run(run_dir, overrides)
    sc = build_scenario(stored.cfg)
    diag = diagnose(stored.cfg, sc, stored.traj)
    dest = run_dir / "verify"
    with tempfile.TemporaryDirectory(prefix=".aclab-", dir=run_dir) as tmpd:
        write_reports(Path(tmpd), diag)
        _publish(Path(tmpd), dest)
    return diag.exit_code


# -- convergence ------------------------------------------------------------

CONVERGENCE_COLUMNS = ("eps", "n", "h", "t", "radius", "reference", "radius_error", "order",
                       "entropy_t0", "entropy_mid", "entropy_end", "density_median")


@dataclass
class ConvergenceRow:
    eps: float
    n: int
    h: float
    t: float
    radius: float
    reference: float
    error: float
    entropies: tuple[float, ...]
    density_median: float | None


def convergence_configs(cfg: RunConfig, eps_list: Sequence[float], n_list: Sequence[int]) -> list[RunConfig]:
    if len(eps_list) != len(n_list) or not eps_list:
        raise ConfigError("eps and n lists must be non-empty and of equal length")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ConfigError("eps list must be strictly descending")
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ConfigError("n list must be strictly ascending")
    if cfg.scenario not in SHRINKING:
        raise ConfigError("convergence needs a shrinking scenario")
    out = []
    for eps, n in zip(eps_list, n_list):
        h = cfg.extent / n
        if eps < 4 * h * (1 - 1e-12):
            raise ConfigError(f"eps={eps} is below 4h={4 * h} for n={n}")
        c = replace(cfg, eps=float(eps), n=int(n), snapshots=3,
                    suites="radius").validate()
        prepare(c)
        out.append(c)
    return out


def convergence_row(cfg: RunConfig) -> ConvergenceRow:
    sc, ctrl = prepare(cfg)
    traj = simulate(cfg, sc, ctrl)
    scfg = search_config(cfg, sc.grid)
    lams = tuple(entropy(energy_measure(s), scfg).value for s in traj)
    end = traj[-1]
    R = interface_radius(end)
    ref = reference_radius(sc, end.t)
    alpha = energy_constant(get_potential(cfg.potential))
    ud = unit_density_report(energy_measure(end), cfg.eps, alpha, cfg.probe_count, u=end.u,
                             kappa=cfg.kappa * alpha, r_min=cfg.density_r_min)
    med = None if ud.median is None else ud.median * alpha
    return ConvergenceRow(cfg.eps, cfg.n, sc.grid.min_spacing, end.t, R, ref, abs(R - ref), lams, med)


def observed_orders(rows: Sequence[ConvergenceRow]) -> list[float | None]:
    orders: list[float | None] = [None]
    for a, b in zip(rows, rows[1:]):
        if a.error > 0 and b.error > 0:
            orders.append(math.log(a.error / b.error) / math.log(a.eps / b.eps))
        else:
            orders.append(None)
    return orders


def convergence_report(rows: Sequence[ConvergenceRow]) -> Report:
    rep = Report("convergence", "sharp-interface limit", CONVERGENCE_COLUMNS)
    for r, p in zip(rows, observed_orders(rows)):
        rep.rows.append((r.eps, r.n, r.h, r.t, r.radius, r.reference, r.error, p,
                         *r.entropies, r.density_median))
    errs = [r.error for r in rows]
    decreasing = all(b < a for a, b in zip(errs, errs[1:]))
    rep.status = PASS if decreasing else FAIL
    rep.worst_slack = float(min((a - b for a, b in zip(errs, errs[1:])), default=float("nan")))
    return rep


def cmd_convergence(cfg: RunConfig, eps_list: Sequence[float], n_list: Sequence[int]) -> int:
    configs = convergence_configs(cfg, eps_list, n_list)
    rows = [convergence_row(c) for c in configs]
    rep = convergence_report(rows)
    dest = Path(cfg.out)
    dest.mkdir(parents=True, exist_ok=True)
    rep.write_csv(dest / "convergence.csv")
    summary = Report("summary", "", SUMMARY_COLUMNS,
                     [(rep.check, rep.status, rep.worst_slack, rep.result,
                       "radius error strictly decreasing in eps")])
    summary.write_csv(dest / "summary.csv")
    return 0 if rep.status == PASS else 1


def read_summary(path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
