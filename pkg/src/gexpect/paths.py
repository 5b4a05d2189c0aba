"""Volatility-controlled Brownian paths ``W_θ(t) = ∫ θ dB`` with ``σ̲ <= θ <= σ̄``.

θ is held constant on each step of length ``dt``, so ``ΔW = θ √dt Z`` is exact
in law.  Normals come from a Philox counter-based generator through the
inverse normal CDF, which makes every stream reproducible from its seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtri
from scipy.stats import chi2, norm

from .core import ConfigurationError, DomainError

RANGE_TOL = 1e-12


class PolicyRangeError(DomainError):
    """A policy produced a volatility outside ``[σ̲, σ̄]``."""


@dataclass(frozen=True)
class VolatilityPolicy:
    """``constant``: θ ≡ ``value``.  ``schedule``: θ cycles through ``schedule``
    by step index.  ``feedback``: θ = σ̄ when ``sign(W) == target`` else σ̲
    (swapped when ``high_on_match`` is False); ``rule`` may replace the
    sign rule with any map ``(step, W) -> θ`` of the current state."""

    kind: str
    sigma_lower: float
    sigma_upper: float
    value: float | None = None
    schedule: tuple[float, ...] = ()
    target: int = 1
    high_on_match: bool = True
    rule: Callable | None = field(default=None, compare=False)
    label: str = ""

    def __post_init__(self):
        if not 0 < self.sigma_lower <= self.sigma_upper:
            raise ConfigurationError("need 0 < sigma_lower <= sigma_upper")
        if self.kind not in ("constant", "schedule", "feedback"):
            raise ConfigurationError(f"unknown policy kind {self.kind!r}")
        if self.kind == "constant" and self.value is None:
            raise ConfigurationError("constant policy needs a value")
        if self.kind == "schedule" and not self.schedule:
            raise ConfigurationError("schedule policy needs a nonempty schedule")

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        if self.kind == "constant":
            return f"const({self.value:g})"
        if self.kind == "schedule":
            return "sched(" + ",".join(f"{s:g}" for s in self.schedule) + ")"
        if self.rule is not None:
            return "feedback(custom)"
        return f"sign({'+' if self.target > 0 else '-'},{'hi' if self.high_on_match else 'lo'})"

    @property
    def adaptive(self) -> bool:
        return self.kind == "feedback"

    def sigma(self, step: int, w: np.ndarray) -> np.ndarray:
        """Volatility for ``step`` given current values ``w`` (one per path)."""
        if self.kind == "constant":
            out = np.full(w.shape, float(self.value))
        elif self.kind == "schedule":
            out = np.full(w.shape, float(self.schedule[step % len(self.schedule)]))
        elif self.rule is not None:
            out = np.broadcast_to(np.asarray(self.rule(step, w), dtype=float), w.shape).copy()
        else:
            match = np.sign(w) == self.target
            hi, lo = (self.sigma_upper, self.sigma_lower) if self.high_on_match else \
                (self.sigma_lower, self.sigma_upper)
            out = np.where(match, hi, lo)
        if np.any(out < self.sigma_lower - RANGE_TOL) or np.any(out > self.sigma_upper + RANGE_TOL):
            raise PolicyRangeError(f"policy {self.name} left [{self.sigma_lower}, {self.sigma_upper}]")
        return out

    def fixed_sigmas(self, steps: int) -> np.ndarray | None:
        """Whole volatility sequence when it does not depend on the path."""
        if self.kind == "feedback":
            return None
        if self.kind == "constant":
            out = np.full(steps, float(self.value))
        else:
            out = np.resize(np.asarray(self.schedule, dtype=float), steps)
        if np.any(out < self.sigma_lower - RANGE_TOL) or np.any(out > self.sigma_upper + RANGE_TOL):
            raise PolicyRangeError(f"policy {self.name} left [{self.sigma_lower}, {self.sigma_upper}]")
        return out


def constant_policy(sigma: float, lo: float | None = None, hi: float | None = None) -> VolatilityPolicy:
    return VolatilityPolicy("constant", lo if lo is not None else sigma,
                            hi if hi is not None else sigma, value=sigma)


def default_policy_grid(lo: float, hi: float) -> list[VolatilityPolicy]:
    """Three constants, four alternating schedules, four sign-feedback rules."""
    mid = 0.5 * (lo + hi)
    grid = [VolatilityPolicy("constant", lo, hi, value=v) for v in (lo, hi, mid)]
    for sched in ((lo, hi), (hi, lo), (lo, lo, hi, hi), (hi, hi, lo, lo)):
        grid.append(VolatilityPolicy("schedule", lo, hi, schedule=sched))
    for target in (1, -1):
        for high in (True, False):
            grid.append(VolatilityPolicy("feedback", lo, hi, target=target, high_on_match=high))
    return grid


# -- normal streams ------------------------------------------------------------

class NormalStream:
    """Standard normals by inversion of uniforms from a Philox generator."""

    def __init__(self, seed: int | Sequence[int]):
        self._gen = np.random.Generator(np.random.Philox(seed))

    def normals(self, size) -> np.ndarray:
        k = self._gen.integers(0, 1 << 53, size=size, dtype=np.int64)
        return ndtri((k + 0.5) / float(1 << 53))


def zero_stream(size) -> np.ndarray:
    return np.zeros(size)


def _n_steps(T: float, dt: float) -> int:
    if not dt > 0:
        raise DomainError("dt must be positive")
    if T < 0:
        raise DomainError("T must be >= 0")
    k = int(round(T / dt))
    if abs(k * dt - T) > 1e-9 * max(1.0, T):
        raise DomainError("T must be an integer multiple of dt")
    return k


@dataclass
class ControlledPath:
    dt: float
    increments: np.ndarray
    sigmas: np.ndarray
    w: np.ndarray = field(init=False)
    qv: np.ndarray = field(init=False)

    def __post_init__(self):
        self.w = np.cumsum(self.increments)
        self.qv = np.cumsum(self.sigmas ** 2 * self.dt)

    @property
    def T(self) -> float:
        return len(self.increments) * self.dt

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(1, len(self.increments) + 1)


@dataclass
class PathBatch:
    dt: float
    increments: np.ndarray  # (n_paths, steps)
    sigmas: np.ndarray

    @property
    def w(self) -> np.ndarray:
        return np.cumsum(self.increments, axis=1)

    @property
    def qv(self) -> np.ndarray:
        return np.cumsum(self.sigmas ** 2 * self.dt, axis=1)


def _drive(policy: VolatilityPolicy, z: np.ndarray, dt: float):
    """Apply a policy to a block of normals of shape (n_paths, steps)."""
    n_paths, steps = z.shape
    root = math.sqrt(dt)
    fixed = policy.fixed_sigmas(steps)
    if fixed is not None:
        sig = np.broadcast_to(fixed, z.shape).copy()
        return sig * root * z, sig
    sig = np.empty_like(z)
    inc = np.empty_like(z)
    w = np.zeros(n_paths)
    for j in range(steps):
        s = policy.sigma(j, w)
        sig[:, j] = s
        inc[:, j] = s * root * z[:, j]
        w = w + inc[:, j]
    return inc, sig


def simulate_paths(policy: VolatilityPolicy, T: float, dt: float, seed, n_paths: int, *,
                   normals: Callable | None = None) -> PathBatch:
    steps = _n_steps(T, dt)
    draw = normals or NormalStream(seed).normals
    z = draw((n_paths, steps))
    inc, sig = _drive(policy, z, dt)
    return PathBatch(dt, inc, sig)


def simulate_path(policy: VolatilityPolicy, T: float, dt: float, seed, *,
                  normals: Callable | None = None) -> ControlledPath:
    """One path on ``[0, T]``; identical arguments give identical bits."""
    b = simulate_paths(policy, T, dt, seed, 1, normals=normals)
    return ControlledPath(dt, b.increments[0], b.sigmas[0])


# -- self-normalized statistics -------------------------------------------------

@dataclass
class SelfNormSeries:
    """Running statistics of the unit-block increments ``X_k = W(k) - W(k-1)``,
    kept for ``n >= 3`` where ``log log n > 0``."""

    n: np.ndarray
    s_n: np.ndarray
    v_n_sq: np.ndarray
    lil_ratio: np.ndarray
    qv: np.ndarray

    def __len__(self):
        return len(self.n)


def unit_increments(path: ControlledPath, block: float = 1.0) -> np.ndarray:
    per = _n_steps(block, path.dt)
    if per == 0:
        raise DomainError("block must be positive")
    m = len(path.increments) // per
    return path.increments[: m * per].reshape(m, per).sum(axis=1)


def unit_qv(path: ControlledPath, block: float = 1.0) -> np.ndarray:
    per = _n_steps(block, path.dt)
    m = len(path.increments) // per
    return (path.sigmas[: m * per] ** 2 * path.dt).reshape(m, per).sum(axis=1)


def lil_ratios(s: np.ndarray, v2: np.ndarray, n: np.ndarray) -> np.ndarray:
    denom = np.sqrt(v2) * np.sqrt(2.0 * np.log(np.log(n)))
    out = np.zeros_like(s, dtype=float)
    np.divide(s, denom, out=out, where=denom > 0)
    return out


def self_normalized_series(path: ControlledPath, block: float = 1.0) -> SelfNormSeries:
    x = unit_increments(path, block)
    if len(x) < 3:
        raise DomainError("need at least three unit blocks")
    s = np.cumsum(x)
    v2 = np.cumsum(x * x)
    qv = np.cumsum(unit_qv(path, block))
    n = np.arange(1, len(x) + 1)
    keep = n >= 3
    n, s, v2, qv = n[keep], s[keep], v2[keep], qv[keep]
    return SelfNormSeries(n, s, v2, lil_ratios(s, v2, n.astype(float)), qv)


def block_martingale_differences(path: ControlledPath, block: float = 1.0) -> np.ndarray:
    """``m_k = X_k² - ∫_{k-1}^k θ²``."""
    return unit_increments(path, block) ** 2 - unit_qv(path, block)


# -- worst-case policy search -----------------------------------------------

@dataclass
class PolicySearchResult:
    best_policy: VolatilityPolicy
    estimate: float
    stderr: float
    table: list[tuple[str, float, float]]  # (policy, screening mean, screening stderr)
    lower_bound: bool = True  # a grid maximum never exceeds the sup over all adapted θ


def worst_case_policy_search(statistic: Callable[[np.ndarray], np.ndarray],
                             policy_grid: Sequence[VolatilityPolicy], paths_per_policy: int,
                             seed: int, *, T: float = 1.0, dt: float = 0.01) -> PolicySearchResult:
    """Screen every policy on one shared set of normals, then re-estimate the
    winner on an independent stream so the reported mean is unbiased for it.

    ``statistic`` maps the ``(n_paths, steps)`` array of ``W`` values to one
    number per path.
    """
    if not policy_grid:
        raise ConfigurationError("empty policy grid")
    screen_seed, final_seed = np.random.SeedSequence(seed).spawn(2)
    steps = _n_steps(T, dt)
    z = NormalStream(screen_seed.generate_state(4)).normals((paths_per_policy, steps))
    table = []
    for pol in policy_grid:
        inc, _ = _drive(pol, z, dt)
        vals = np.asarray(statistic(np.cumsum(inc, axis=1)), dtype=float)
        table.append((pol.name, float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(len(vals)))))
    best = max(range(len(policy_grid)), key=lambda i: table[i][1])
    z2 = NormalStream(final_seed.generate_state(4)).normals((paths_per_policy, steps))
    inc, _ = _drive(policy_grid[best], z2, dt)
    vals = np.asarray(statistic(np.cumsum(inc, axis=1)), dtype=float)
    return PolicySearchResult(policy_grid[best], float(vals.mean()),
                              float(vals.std(ddof=1) / math.sqrt(len(vals))), table)


# -- time-change diagnostics ------------------------------------------------

@dataclass
class DDSReport:
    n_blocks: int
    qv_rate: float
    raw_variance: float
    variance: float
    chi2_p: float
    lag1_corr: float
    lag1_z: float
    confidence: float

    @property
    def passed(self) -> bool:
        a = 1 - self.confidence
        return self.chi2_p > a and abs(self.lag1_z) < norm.ppf(1 - a / 2)


def dds_time_change_check(path: ControlledPath, confidence: float = 0.99, *,
                          qv_block: float = 1.0, seed: int = 0) -> DDSReport:
    """Re-index the path by quadratic-variation time and test Brownian scaling.

    The time-changed process is sampled at multiples of ``qv_block``.  Each
    crossing falls inside a step where θ is constant, so the path there is a
    Brownian bridge between the step endpoints and the crossing value is drawn
    from it (stream ``seed``).  The resulting increments are exactly i.i.d.
    normal with variance ``qv_block``; variance is tested two-sided by
    chi-square and the lag-1 correlation by its normal approximation.
    """
    if len(path.increments) == 0:
        raise DomainError("empty path")
    q = path.sigmas ** 2 * path.dt
    cq = np.cumsum(q)
    levels = qv_block * np.arange(1, int(cq[-1] / qv_block * (1 + 1e-12)) + 1)
    m = len(levels)
    if m < 3:
        raise DomainError("path too short for block diagnostics")
    idx = np.minimum(np.searchsorted(cq, levels - 1e-12 * qv_block), len(q) - 1)
    prev_q = np.where(idx > 0, cq[idx - 1], 0.0)
    prev_w = np.where(idx > 0, path.w[idx - 1], 0.0)
    f = np.clip((levels - prev_q) / q[idx], 0.0, 1.0)
    bridge_sd = np.sqrt(f * (1 - f) * q[idx])
    w_at = prev_w + f * path.increments[idx] + bridge_sd * NormalStream(seed).normals(m)
    z = np.diff(np.concatenate([[0.0], w_at])) / math.sqrt(qv_block)
    ss = float(np.sum(z * z))
    cdf = chi2.cdf(ss, m)
    p = 2 * min(cdf, 1 - cdf)
    r = float(np.sum(z[1:] * z[:-1]) / ss)
    raw = unit_increments(path) if path.T >= 3 else path.increments
    return DDSReport(m, float(cq[-1] / path.T), float(np.mean(raw ** 2)), ss / m, float(p), r,
                     r * math.sqrt(m - 1), confidence)
