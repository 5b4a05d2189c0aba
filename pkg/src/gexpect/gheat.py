"""Explicit monotone finite differences for ``u_t = G(u_xx)``.

``G(α) = ½(σ̄²α⁺ - σ̲²α⁻)``.  The G-normal expectation of ``φ`` is ``u(0, 1)``
with ``u(·, 0) = φ``.  Boundary nodes have zero second difference, so
``G(0) = 0`` freezes them at their initial value; the domain is wide enough
(``k_safety`` standard deviations of the fastest diffusion) that this rule
does not reach the evaluation points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.stats import norm

from .core import ConfigurationError, DomainError

CFL_FACTOR = 0.45
BASE_DX = 0.2
K_SAFETY = 6.0


@dataclass(frozen=True)
class GParams:
    sigma_lower: float
    sigma_upper: float

    def __post_init__(self):
        if not (0 < self.sigma_lower <= self.sigma_upper < math.inf):
            raise ConfigurationError("need 0 < sigma_lower <= sigma_upper < inf")


def g_generator(alpha, p: GParams):
    """``½(σ̄²α⁺ - σ̲²α⁻)``; accepts scalars or arrays."""
    a = np.asarray(alpha, dtype=float)
    out = 0.5 * (p.sigma_upper ** 2 * np.maximum(a, 0.0) - p.sigma_lower ** 2 * np.maximum(-a, 0.0))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class GridConfig:
    """``dx`` defaults to ``0.2 / 2**level``; ``half_width`` to the smallest safe value."""

    level: int = 2
    dx: float | None = None
    half_width: float | None = None
    k_safety: float = K_SAFETY
    cfl: float = CFL_FACTOR
    dt: float | None = None
    store_times: tuple[float, ...] = ()

    def spacing(self) -> float:
        return self.dx if self.dx is not None else BASE_DX / 2 ** self.level


@dataclass
class GridSolution:
    x: np.ndarray
    dx: float
    dt: float
    t_final: float
    times: np.ndarray
    values: np.ndarray  # (len(times), len(x))
    cap_radius: float
    params: GParams

    @property
    def x_min(self) -> float:
        return float(self.x[0])

    @property
    def x_max(self) -> float:
        return float(self.x[-1])

    def at(self, x0: float = 0.0, t: float | None = None) -> float:
        """Linear interpolation of ``u(x0, t)`` on a stored time layer."""
        j = -1 if t is None else int(np.argmin(np.abs(self.times - t)))
        if t is not None and abs(self.times[j] - t) > 1e-12:
            raise DomainError(f"time {t} was not stored")
        return float(np.interp(x0, self.x, self.values[j]))


def _evaluate(phi: Callable, x: np.ndarray) -> np.ndarray:
    y = np.asarray(phi(x), dtype=float)
    if y.shape == ():
        y = np.full(x.shape, float(y))
    if not np.all(np.isfinite(y)):
        raise DomainError("initial condition is not finite on the grid")
    return y


def solve_g_heat(phi: Callable, t: float, p: GParams, grid_cfg: GridConfig | None = None,
                 x_eval=(0.0,)) -> GridSolution:
    """Solve up to time ``t`` on ``[-R, R]``.

    Frozen boundary values cap unbounded payoffs at radius ``R`` (recorded as
    ``cap_radius``).
    """
    if not t > 0:
        raise DomainError("t must be positive")
    cfg = grid_cfg or GridConfig()
    dx = cfg.spacing()
    if not dx > 0:
        raise ConfigurationError("dx must be positive")
    xe = np.atleast_1d(np.asarray(x_eval, dtype=float))
    need = cfg.k_safety * p.sigma_upper * math.sqrt(t)
    reach = float(np.max(np.abs(xe)))
    half = cfg.half_width if cfg.half_width is not None else reach + need
    if half - reach < need - 1e-12:
        raise ConfigurationError(f"domain half-width {half} leaves {half - reach:.4g} beyond the "
                                 f"evaluation points; need {need:.4g}")
    m = int(math.ceil(half / dx - 1e-9))
    x = dx * np.arange(-m, m + 1)
    dt_max = cfg.cfl * dx * dx / p.sigma_upper ** 2
    if cfg.dt is not None:
        if p.sigma_upper ** 2 * cfg.dt / (dx * dx) > 0.5:
            raise ConfigurationError("CFL violated: sigma_upper^2 dt / dx^2 > 1/2")
        steps = int(math.ceil(t / cfg.dt - 1e-9))
    else:
        steps = int(math.ceil(t / dt_max - 1e-9))
    dt = t / steps
    if p.sigma_upper ** 2 * dt / (dx * dx) > 0.5 + 1e-12:
        raise ConfigurationError("CFL violated: sigma_upper^2 dt / dx^2 > 1/2")
    cap = float(x[-1])
    u = _evaluate(phi, x)
    store = sorted(set(float(s) for s in cfg.store_times) | {0.0, float(t)})
    store_steps = {int(round(s / dt)): s for s in store if 0 <= s <= t}
    times, layers = [], []
    if 0 in store_steps:
        times.append(0.0)
        layers.append(u.copy())
    hi = 0.5 * p.sigma_upper ** 2 * dt / (dx * dx)
    lo = 0.5 * p.sigma_lower ** 2 * dt / (dx * dx)
    for j in range(1, steps + 1):
        d2 = u[:-2] - 2.0 * u[1:-1] + u[2:]
        u[1:-1] += np.where(d2 > 0, hi, lo) * d2
        if j in store_steps:
            times.append(store_steps[j] if j < steps else float(t))
            layers.append(u.copy())
    return GridSolution(x, dx, dt, float(t), np.array(times), np.array(layers), cap, p)


def gnormal_expectation(phi: Callable, p: GParams, grid_cfg: GridConfig | None = None) -> float:
    """``E[φ(X)]`` for ``X ~ N(0, [σ̲², σ̄²])``, i.e. ``u(0, 1)``."""
    return solve_g_heat(phi, 1.0, p, grid_cfg).at(0.0)


def classical_normal_expectation(phi: Callable, sigma: float, kinks=()) -> float:
    """``E[φ(σZ)]`` by adaptive quadrature; ``kinks`` are breakpoints of ``φ``."""
    f = lambda z: float(_evaluate(phi, np.array([sigma * z]))[0]) * norm.pdf(z)  # noqa: E731
    pts = sorted({k / sigma for k in kinks if abs(k / sigma) < 12} | {0.0})
    return float(quad(f, -12.0, 12.0, points=pts, limit=500, epsabs=1e-14, epsrel=1e-12)[0])


# Bounded Lipschitz test functions
TEST_FUNCTIONS: dict[str, Callable] = {
    "ramp": lambda x: np.clip(x + 0.3, 0.0, 1.5),
    "hump": lambda x: np.maximum(0.0, 1.0 - np.abs(x - 0.2)),
    "clipped_quadratic": lambda x: np.clip(0.25 * x * x - 0.5 * x, -1.0, 1.0),
    "call_spread": lambda x: np.clip(x - 0.5, 0.0, 1.0),
    "smooth_wave": lambda x: np.sin(1.5 * x) + 0.5 * np.cos(x),
}

# breakpoints of the library functions, for quadrature references
TEST_KINKS: dict[str, tuple[float, ...]] = {
    "ramp": (-0.3, 1.2),
    "hump": (-0.8, 0.2, 1.2),
    "clipped_quadratic": (1 - math.sqrt(5), 1 + math.sqrt(5)),
    "call_spread": (0.5, 1.5),
    "smooth_wave": (),
}


def comparison_violations(pairs, p: GParams, grid_cfg: GridConfig | None = None,
                          tol: float = 1e-12) -> int:
    """Count pairs ``(φ1, φ2)`` with ``φ1 <= φ2`` whose solutions break the order anywhere."""
    bad = 0
    for f1, f2 in pairs:
        u1 = solve_g_heat(f1, 1.0, p, grid_cfg).values[-1]
        u2 = solve_g_heat(f2, 1.0, p, grid_cfg).values[-1]
        bad += int(np.any(u1 > u2 + tol))
    return bad
