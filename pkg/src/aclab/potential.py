"""Double-well potentials, the 1D standing wave and the energy constant alpha."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable

import numba
import numpy as np
from scipy import integrate, optimize


class PotentialError(ValueError):
    """A potential violates its structural assumptions."""


class EnergyConstantMismatch(PotentialError):
    pass


class GrowthBoundViolation(PotentialError):
    pass


@dataclass(frozen=True, eq=False)
class Potential:
    """The triple ``(F, f, g)`` with ``f = F'`` and ``F = g**2 / 2``.

    ``wave`` and ``wave_inverse`` are optional closed forms of the unit-width
    standing wave; without them the wave is integrated numerically.
    ``f_jit`` is an optional numba-compiled ``f`` used by the fused time
    stepper.
    """

    name: str
    F: Callable
    f: Callable
    g: Callable
    growth_bound: float = 4.0
    f_prime: Callable | None = None
    wave: Callable | None = None
    wave_inverse: Callable | None = None
    f_jit: Callable | None = None

    def max_abs_f_prime(self) -> float:
        """max |f'| on [-1, 1]; sets the reaction part of the stable step."""
        return _max_abs_f_prime(self)


@numba.njit(cache=True)
def _standard_f_jit(u):
    return 2.0 * u * (u * u - 1.0)


def standard_potential() -> Potential:
    return Potential(
        name="standard",
        F=lambda u: 0.5 * (1.0 - np.square(u)) ** 2,
        f=lambda u: 2.0 * u * (np.square(u) - 1.0),
        g=lambda u: 1.0 - np.square(u),
        growth_bound=4.0,
        f_prime=lambda u: 6.0 * np.square(u) - 2.0,
        wave=np.tanh,
        wave_inverse=np.arctanh,
        f_jit=_standard_f_jit,
    )


def _scaled_jit(inner, c: float):
    @numba.njit
    def f_jit(u):
        return c * inner(u)
    return f_jit


def scaled_potential(base: Potential, c: float, name: str | None = None) -> Potential:
    """The potential ``c * F`` (so ``g`` scales by ``sqrt(c)``)."""
    if not c > 0:
        raise PotentialError("scale must be positive")
    root = math.sqrt(c)
    f_jit = None if base.f_jit is None else _scaled_jit(base.f_jit, c)
    wave = wave_inverse = None
    if base.wave is not None:
        # q' = sqrt(c) g(q) is the base wave with x rescaled by sqrt(c).
        wave = lambda y, w=base.wave: w(root * np.asarray(y))
    if base.wave_inverse is not None:
        wave_inverse = lambda v, wi=base.wave_inverse: wi(v) / root
    return Potential(
        name=name or f"{base.name}*{c:g}",
        F=lambda u: c * base.F(u),
        f=lambda u: c * base.f(u),
        g=lambda u: root * base.g(u),
        growth_bound=base.growth_bound,
        f_prime=None if base.f_prime is None else (lambda u: c * base.f_prime(u)),
        wave=wave,
        wave_inverse=wave_inverse,
        f_jit=f_jit,
    )


_REGISTRY: dict[str, Callable[[], Potential]] = {"standard": standard_potential}


def register_potential(name: str, factory: Callable[[], Potential]) -> None:
    validate_potential(factory())
    _REGISTRY[name] = factory


def get_potential(name: str) -> Potential:
    try:
        return _REGISTRY[name]()
    except KeyError:
        raise PotentialError(f"unknown potential {name!r}; known: {sorted(_REGISTRY)}") from None


def potential_names() -> list[str]:
    return sorted(_REGISTRY)


# -- standing wave ----------------------------------------------------------

_WAVE_SPAN = 40.0


@functools.lru_cache(maxsize=16)
def _wave_solution(p: Potential):
    """Dense solutions of q' = g(q), q(0) = 0 on [0, span] and [0, -span]."""
    rhs = lambda _, q: p.g(np.clip(q, -1.0, 1.0))
    opts = dict(method="DOP853", rtol=1e-13, atol=1e-15, dense_output=True)
    fwd = integrate.solve_ivp(rhs, (0.0, _WAVE_SPAN), [0.0], **opts)
    bwd = integrate.solve_ivp(rhs, (0.0, -_WAVE_SPAN), [0.0], **opts)
    return fwd.sol, bwd.sol


def unit_wave(p: Potential, y):
    """The standing wave with unit width, evaluated at ``y``."""
    y = np.asarray(y, dtype=float)
    if p.wave is not None:
        return p.wave(y)
    fwd, bwd = _wave_solution(p)
    flat = np.clip(y.ravel(), -_WAVE_SPAN, _WAVE_SPAN)
    out = np.empty_like(flat)
    pos = flat >= 0
    if pos.any():
        out[pos] = fwd(flat[pos])[0]
    if (~pos).any():
        out[~pos] = bwd(flat[~pos])[0]
    out = np.clip(out, -1.0, 1.0).reshape(y.shape)
    return float(out) if out.ndim == 0 else out


def standing_wave(p: Potential, x, eps: float):
    """q^eps(x): increasing, q(0) = 0, q(+-inf) = +-1."""
    if not eps > 0:
        raise PotentialError(f"eps must be positive, got {eps}")
    return unit_wave(p, np.asarray(x, dtype=float) / eps)


def wave_inverse(p: Potential, v):
    """Inverse of the unit-width wave on (-1, 1)."""
    if p.wave_inverse is not None:
        return p.wave_inverse(v)
    raise NotImplementedError(f"no closed-form inverse wave for potential {p.name!r}")


# -- energy constant --------------------------------------------------------

def _tail_cutoff(p: Potential, tol: float = 1e-16) -> float:
    # Energy density of the unit wave is 2 F(q) = g(q)**2; extend the window
    # until it is negligible at both ends.
    X = 20.0
    while X < _WAVE_SPAN:
        q = unit_wave(p, np.array([-X, X]))
        if np.all(2.0 * p.F(q) < tol):
            break
        X *= 1.5
    return min(X, _WAVE_SPAN)


def alpha_by_profile(p: Potential) -> float:
    """Energy of the unit-width wave by quadrature in x."""
    X = _tail_cutoff(p)

    def density(x):
        q = float(unit_wave(p, x))
        qx = float(p.g(q))
        return 0.5 * qx * qx + float(p.F(q))

    left, _ = integrate.quad(density, -X, 0.0, limit=400, epsabs=1e-14, epsrel=1e-13)
    right, _ = integrate.quad(density, 0.0, X, limit=400, epsabs=1e-14, epsrel=1e-13)
    return left + right


def alpha_by_level_sets(p: Potential) -> float:
    """alpha as the integral of sqrt(2 F) over the wells' gap [-1, 1]."""
    val, _ = integrate.quad(lambda s: math.sqrt(max(2.0 * float(p.F(s)), 0.0)), -1.0, 1.0,
                            limit=400, epsabs=1e-14, epsrel=1e-13)
    return val


def energy_constant(p: Potential, tol: float = 1e-6) -> float:
    a = alpha_by_profile(p)
    b = alpha_by_level_sets(p)
    if abs(a - b) > tol:
        raise EnergyConstantMismatch(f"profile route {a!r} != level-set route {b!r}")
    return b


# -- growth condition -------------------------------------------------------

def check_growth(p: Potential, samples: int = 200_001, span: float = 20.0) -> float:
    """sup_x x^2 F(q^1(x)); raises if it exceeds ``p.growth_bound``."""
    x = np.linspace(-span, span, samples)
    vals = x**2 * p.F(unit_wave(p, x))
    k = int(np.argmax(vals))
    best = float(vals[k])
    if 0 < k < samples - 1:
        res = optimize.minimize_scalar(
            lambda s: -(s**2) * float(p.F(unit_wave(p, s))),
            bounds=(x[k - 1], x[k + 1]), method="bounded",
            options={"xatol": 1e-12})
        best = max(best, float(-res.fun))
    if best > p.growth_bound:
        raise GrowthBoundViolation(f"sup x^2 F(q(x)) = {best} exceeds {p.growth_bound}")
    return best


# -- structural checks ------------------------------------------------------

def _max_abs_f_prime(p: Potential) -> float:
    s = np.linspace(-1.0, 1.0, 20001)
    if p.f_prime is not None:
        return float(np.max(np.abs(p.f_prime(s))))
    h = 1e-6
    return float(np.max(np.abs((p.f(s + h) - p.f(s - h)) / (2 * h))))


def validate_potential(p: Potential, tol: float = 1e-6) -> None:
    s = np.linspace(-1.0, 1.0, 2001)
    h = 1e-5
    dF = (p.F(s + h) - p.F(s - h)) / (2 * h)
    if np.max(np.abs(dF - p.f(s))) > tol:
        raise PotentialError("f is not the derivative of F")
    if np.max(np.abs(p.F(s) - 0.5 * p.g(s) ** 2)) > tol:
        raise PotentialError("F != g^2 / 2")
    if max(abs(float(p.f(v))) for v in (-1.0, 0.0, 1.0)) > tol:
        raise PotentialError("f must vanish at -1, 0, 1")
    inner = s[1:-1]
    left, right = inner[inner < 0], inner[inner > 0]
    if np.any(p.f(left) <= 0) or np.any(p.f(right) >= 0):
        raise PotentialError("f must be positive on (-1, 0) and negative on (0, 1)")
    if max(abs(float(p.g(v))) for v in (-1.0, 1.0)) > tol or np.any(p.g(inner) <= 0):
        raise PotentialError("g must vanish at +-1 and be positive in between")
    check_growth(p)
