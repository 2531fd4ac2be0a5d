"""Plain-text ``key = value`` run configuration."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from typing import Any

from ..reports import fmt


class ConfigError(ValueError):
    pass


SUITES = ("discrepancy", "soner", "huisken", "gronwall", "entropy", "local_entropy",
          "area", "density", "density_bound", "radius")

_SCENARIO_DEFAULTS = {
    "planar": (1, "neumann"),
    "shrinking-circle": (2, "neumann"),
    "shrinking-sphere": (3, "neumann"),
    "double-interface": (2, "neumann,periodic"),
    "torus-band": (2, "periodic"),
}


@dataclass(frozen=True)
class RunConfig:
    scenario: str = "shrinking-circle"
    dim: int | None = None
    n: int = 256
    extent: float = 2.56
    topology: str | None = None
    eps: float = 0.04
    r0: float = 0.8
    d: float | None = None
    axis: int = 0
    steepness: float = 1.0
    stretch: float | None = None
    strict: bool = True
    potential: str = "standard"
    t_end: float = 0.2
    snapshots: int = 9
    safety: float | None = None
    dt: float | None = None
    s_min: float | None = None
    s_max: float | None = None
    s_count: int = 40
    y_stride: int = 4
    refine_iters: int = 60
    refine_shrink: float = 0.5
    horizon: float | None = None
    entropy_slack: float = 0.02
    huisken_slack: float = 1e-3
    density_slack: float = 0.05
    discrepancy_tol: float = 1e-6
    soner_tol: float = 1e-6
    soner_t_min: float = 0.01
    gronwall_t1: float | None = None
    gronwall_tol: float = 1e-6
    huisken_centers: str | None = None
    probe_count: int = 16
    kappa: float = 0.3
    density_r_min: float | None = None
    density_r_max: float | None = None
    area_factor: float = 10.0
    radius_tol: float | None = None
    suites: str = "all"
    out: str = "run"

    # -- derived ------------------------------------------------------------

    @property
    def resolved_dim(self) -> int:
        return self.dim if self.dim is not None else _SCENARIO_DEFAULTS[self.scenario][0]

    @property
    def resolved_topology(self) -> tuple[str, ...]:
        raw = self.topology if self.topology is not None else _SCENARIO_DEFAULTS[self.scenario][1]
        parts = [p.strip() for p in raw.split(",") if p.strip()]
        n = self.resolved_dim
        if len(parts) == 1:
            parts = parts * n
        if len(parts) < n:
            parts = parts + [parts[-1]] * (n - len(parts))
        return tuple(parts[:n])

    @property
    def enabled_suites(self) -> tuple[str, ...]:
        if self.suites.strip() == "all":
            return SUITES
        names = tuple(s.strip() for s in self.suites.split(",") if s.strip())
        return names

    def validate(self) -> "RunConfig":
        if self.scenario not in _SCENARIO_DEFAULTS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        for s in self.enabled_suites:
            if s not in SUITES:
                raise ConfigError(f"unknown suite {s!r}; known: {', '.join(SUITES)}")
        positive = ("extent", "eps", "t_end", "entropy_slack", "huisken_slack", "density_slack",
                    "discrepancy_tol", "soner_tol", "gronwall_tol", "area_factor")
        for name in positive:
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be positive, got {v}")
        if self.snapshots < 2:
            raise ConfigError("need at least 2 snapshots")
        if self.n < 8:
            raise ConfigError("n must be at least 8")
        if self.gronwall_t1 is not None and not 0 < self.gronwall_t1 < self.t_end:
            raise ConfigError("gronwall_t1 must lie in (0, t_end)")
        if self.huisken_centers is not None:
            parse_centers(self.huisken_centers, self.resolved_dim)
        return self

    def manifest_items(self) -> list[tuple[str, str]]:
        return [(k, fmt(v)) for k, v in asdict(self).items()]


def parse_centers(text: str, dim: int) -> list[tuple[tuple[float, ...], float]]:
    """``"y1 y2 s; y1 y2 s"`` -> [((y1, y2), s), ...]."""
    out = []
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        try:
            vals = [float(v) for v in chunk.split()]
        except ValueError:
            raise ConfigError(f"bad huisken center {chunk!r}") from None
        if len(vals) != dim + 1:
            raise ConfigError(f"huisken center {chunk!r} needs {dim} coordinates and a scale")
        out.append((tuple(vals[:-1]), vals[-1]))
    return out


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _convert(key: str, raw: str) -> Any:
    kind = _TYPES[key]
    raw = raw.strip()
    optional = "None" in kind
    if optional and raw.lower() in ("", "none", "auto"):
        return None
    try:
        if kind.startswith("int"):
            return int(raw)
        if kind.startswith("float"):
            return float(raw)
        if kind.startswith("bool"):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return raw


def parse_config_text(text: str) -> dict[str, Any]:
    values: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _convert(key, raw)
    return values


def load_config(path=None, overrides: dict[str, Any] | None = None) -> RunConfig:
    values: dict[str, Any] = {}
    if path is not None:
        try:
            with open(path) as fh:
                values.update(parse_config_text(fh.read()))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    for k, v in (overrides or {}).items():
        if v is not None:
            values[k] = v
    try:
        cfg = RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return cfg.validate()


def with_overrides(cfg: RunConfig, overrides: dict[str, Any]) -> RunConfig:
    return replace(cfg, **{k: v for k, v in overrides.items() if v is not None}).validate()


def convert_flag(key: str, raw: str) -> Any:
    if key not in _TYPES:
        raise ConfigError(f"unknown key {key!r}")
    return _convert(key, raw)


def config_keys() -> list[str]:
    return list(_TYPES)
