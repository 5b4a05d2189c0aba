"""End-to-end experiments: moderate-deviation rate curves, LIL traces, the
rate function of the lower-bound argument and the block schedules.

Limit statements are never asserted at finite ``n``.  Experiments return
tables; the trend and envelope checks that the test-suite applies live in
small helpers next to them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .bounds import combined_upper_bound, heterogeneous_delta, eta_rate_target
from .core import (ConfigurationError, DiscreteLaw, DomainError, MeasureFamily, ResourceError,
                   upper_expectation)
from .moments import MomentProfile, condition_diagnostics, default_grid, solve_zn
from .paths import VolatilityPolicy, lil_ratios, simulate_path, unit_increments
from .tree import MAX_STATES, StateDP, sum_sq_dp

METHODS = ("exact-dp", "mc-policy-lower", "certified-upper")
DEFAULT_MC_PATHS = 20000


class ExperimentRefused(DomainError):
    """Hypothesis diagnostics failed; the experiment was not run."""


# -- rate curves -----------------------------------------------------------

@dataclass(frozen=True)
class RateRow:
    n: int
    x_n: float
    log_capacity: float
    method: str
    stderr: float = math.nan  # standard error of the capacity estimate (MC rows)
    delta: float = math.nan
    q: float = math.nan

    @property
    def normalized_rate(self) -> float:
        return self.log_capacity / (self.x_n * self.x_n)


@dataclass
class RateCurve:
    rows: list[RateRow]
    gamma: float
    label: str = ""
    notes: list[str] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    columns = ("n", "x_n", "log_capacity", "normalized_rate", "method", "stderr", "delta", "q")

    def table(self) -> list[tuple]:
        return [(r.n, r.x_n, r.log_capacity, r.normalized_rate, r.method, r.stderr, r.delta, r.q)
                for r in self.rows]

    def by_method(self, method: str) -> dict[int, RateRow]:
        return {r.n: r for r in self.rows if r.method == method}

    def rates(self, method: str = "exact-dp") -> list[tuple[int, float]]:
        return sorted((r.n, r.normalized_rate) for r in self.rows if r.method == method)


def x_sequence(n: int, kind: str = "power", *, gamma: float = 0.3, eps: float = 0.0,
               b2: float | None = None) -> float:
    """Named ``x_n`` presets: ``n^γ`` or ``(1 + ε)√(2 log log B̄²)``."""
    if kind == "power":
        return float(n) ** gamma
    if kind == "lil":
        b2 = float(n) if b2 is None else b2
        if math.log(b2) <= 0:
            raise DomainError("log log undefined for B^2 <= e")
        return (1 + eps) * math.sqrt(2 * math.log(math.log(b2)))
    raise ConfigurationError(f"unknown x_n preset {kind!r}")


def _check_conditions(fams: Sequence[MeasureFamily]):
    failing = []
    for fam in {f: None for f in fams}:
        prof = MomentProfile(fam)
        for reason in condition_diagnostics(prof, default_grid(fam)).failing():
            failing.append(f"{fam.name or 'family'}: {reason}")
    if failing:
        raise ExperimentRefused("; ".join(failing))


def _event_indicator(s, v2, x):
    return (s >= x * np.sqrt(v2)).astype(float)


def _second_moments(fam: MeasureFamily) -> np.ndarray:
    return fam.probs @ fam.support ** 2


def _simulate_policy(steps, choose, x, n_paths, seed, tilt):
    """Importance-sampled probability of ``{S_n >= x V_n}`` under one adapted law choice.

    Each step's chosen law is exponentially tilted by ``tilt``; the likelihood
    ratio keeps the estimate unbiased for that (classical) measure, hence a
    lower-bound estimate of the capacity.
    """
    gen = np.random.Generator(np.random.Philox(seed))
    s = np.zeros(n_paths)
    v2 = np.zeros(n_paths)
    logw = np.zeros(n_paths)
    for i, fam in enumerate(steps):
        j = choose(i, s, v2)
        a = fam.support
        q = fam.probs[j] * np.exp(tilt * a)
        mass = q.sum(axis=1)
        cdf = np.cumsum(q, axis=1) / mass[:, None]
        u = gen.random(n_paths)
        idx = np.minimum((u[:, None] >= cdf).sum(axis=1), len(a) - 1)
        step = a[idx]
        logw += np.log(mass) - tilt * step
        s += step
        v2 += step * step
    w = np.where(s >= x * np.sqrt(v2), np.exp(logw), 0.0)
    return float(w.mean()), float(w.std(ddof=1) / math.sqrt(n_paths))


def _dp_policy_chooser(dp: StateDP, choices):
    maps = [{(a, b): k for k, (a, b) in enumerate(zip(*layer.cols))} for layer in dp.layers[:-1]]

    def choose(i, s, v2):
        m = maps[i]
        return np.array([choices[i][m[(a, b)]] for a, b in zip(s.tolist(), v2.tolist())])
    return choose


def _candidate_policies(steps, x):
    out = {}
    m = steps[0].n_laws
    if all(f.n_laws == m for f in steps):
        for j in range(m):
            out[f"const-law-{j}"] = lambda i, s, v2, j=j: np.full(len(s), j)
    hi = [int(np.argmax(_second_moments(f))) for f in steps]
    lo = [int(np.argmin(_second_moments(f))) for f in steps]
    out["behind-high"] = lambda i, s, v2: np.where(s < x * np.sqrt(v2), hi[i], lo[i])
    out["behind-low"] = lambda i, s, v2: np.where(s < x * np.sqrt(v2), lo[i], hi[i])
    return out


def _mc_lower(steps, x, n_paths, seed, dp=None, dp_choices=None):
    n = len(steps)
    m2 = max(float(np.max(_second_moments(f))) for f in steps)
    tilt = x / math.sqrt(n * m2) if m2 > 0 else 0.0
    cands = _candidate_policies(steps, x)
    if dp is not None:
        cands["dp-optimal"] = _dp_policy_chooser(dp, dp_choices)
    pilot_seed, final_seed = np.random.SeedSequence(seed).spawn(2)
    pilot = max(n_paths // 4, 100)
    scores = {name: _simulate_policy(steps, ch, x, pilot, pilot_seed.generate_state(4), tilt)[0]
              for name, ch in cands.items()}
    best = max(scores, key=lambda k: (scores[k], k == "dp-optimal"))
    est, se = _simulate_policy(steps, cands[best], x, n_paths, final_seed.generate_state(4), tilt)
    return best, est, se


def _rate_pipeline(steps_for: Callable[[int], list], gamma: float, n_list, budget: int, *,
                   bounds: str, mc_paths: int, seed: int, extra: Callable | None = None
                   ) -> RateCurve:
    if not 0 < gamma < 0.5:
        raise DomainError("gamma must lie in (0, 1/2)")
    rows, notes = [], []
    for n in sorted(set(int(v) for v in n_list)):
        if n < 1:
            raise DomainError("n must be >= 1")
        steps = steps_for(n)
        x = x_sequence(n, gamma=gamma)
        tags = extra(n, x) if extra else {}
        dp = None
        try:
            dp = sum_sq_dp(steps, max_states=budget)
        except ResourceError:
            notes.append(f"n={n}: state budget {budget} exceeded, exact row skipped")
        choices = None
        if dp is not None:
            s, v2 = dp.terminal
            val, choices = dp.value(_event_indicator(s, v2, x), policy=True)
            rows.append(RateRow(n, x, math.log(val) if val > 0 else -math.inf, "exact-dp", **tags))
        want_bounds = bounds == "always" or (bounds == "auto" and dp is None)
        if want_bounds:
            name, est, se = _mc_lower(steps, x, mc_paths, [seed, n], dp, choices)
            if est > 0:
                rows.append(RateRow(n, x, math.log(est), "mc-policy-lower", se, **tags))
            else:
                notes.append(f"n={n}: no Monte Carlo hits under policy {name}")
            ub, _ = combined_upper_bound(steps, x)
            rows.append(RateRow(n, x, math.log(ub), "certified-upper", **tags))
    return RateCurve(rows, gamma, notes=notes)


def md_rate_curve(fam: MeasureFamily, gamma: float, n_list, budget: int = MAX_STATES, *,
                  bounds: str = "auto", mc_paths: int = DEFAULT_MC_PATHS, seed: int = 0,
                  check_conditions: bool = True) -> RateCurve:
    """Normalized rates ``x_n^{-2} log V(S_n >= x_n V_n)`` with ``x_n = n^γ``.

    Within the state budget the capacity is exact.  ``bounds="auto"`` adds
    the Monte Carlo policy lower bound and the certified upper bound only when
    the exact value is out of reach; ``"always"`` adds them everywhere and
    ``"never"`` skips them.
    """
    if bounds not in ("auto", "always", "never"):
        raise ConfigurationError("bounds must be auto, always or never")
    if check_conditions:
        _check_conditions([fam])
    curve = _rate_pipeline(lambda n: [fam] * n, gamma, n_list, budget, bounds=bounds,
                           mc_paths=mc_paths, seed=seed)
    curve.label = fam.name
    return curve


def sandwich_violations(curve: RateCurve, *, tol: float = 1e-9, k_se: float = 3.0) -> list[str]:
    """Rows where ``mc-lower <= exact <= upper`` fails (lower side within ``k_se`` errors)."""
    out = []
    ex = curve.by_method("exact-dp")
    lo = curve.by_method("mc-policy-lower")
    up = curve.by_method("certified-upper")
    for n, row in ex.items():
        cap = math.exp(row.log_capacity)
        if n in up and cap > math.exp(up[n].log_capacity) * (1 + tol) + tol:
            out.append(f"n={n}: exact above upper bound")
        if n in lo and math.exp(lo[n].log_capacity) - k_se * lo[n].stderr > cap * (1 + tol) + tol:
            out.append(f"n={n}: Monte Carlo lower bound above exact")
    return out


def trend_toward(rates: Sequence[float], target: float = -0.5, slack: float = 0.10) -> bool:
    """``|r_k - target|`` nonincreasing along the sequence, each step allowed ``slack`` growth."""
    d = [abs(r - target) for r in rates]
    return all(b <= a * (1 + slack) for a, b in zip(d, d[1:]))


def conjecture_explore(fam: MeasureFamily, gamma: float, n_list, budget: int = MAX_STATES
                       ) -> RateCurve:
    """Lower-capacity analogue ``x_n^{-2} log v(S_n >= x_n V_n)``; exploratory only."""
    rows = []
    for n in sorted(set(int(v) for v in n_list)):
        dp = sum_sq_dp([fam] * n, max_states=budget)
        x = x_sequence(n, gamma=gamma)
        s, v2 = dp.terminal
        low = 1.0 - dp.value(1.0 - _event_indicator(s, v2, x))
        rows.append(RateRow(n, x, math.log(low) if low > 0 else -math.inf, "exact-dp"))
    return RateCurve(rows, gamma, fam.name, ["conjecture - no pass/fail"])


def large_v_remainder_trend(fam: MeasureFamily, gamma: float, n_list) -> list[tuple]:
    """``(n, x_n, log V(S_n >= x_n V_n, V_n² >= 9 n l(z_n)), (log V + x_n²)/x_n²)``.

    An empty event gives ``-inf`` rows, which satisfy the bound trivially.
    """
    prof = MomentProfile(fam)
    out = []
    for n in n_list:
        x = x_sequence(n, gamma=gamma)
        z = solve_zn(prof, n, x).z_n
        dp = sum_sq_dp([fam] * n)
        s, v2 = dp.terminal
        ind = _event_indicator(s, v2, x) * (v2 >= 9 * n * prof.l(z))
        cap = dp.value(ind)
        lc = math.log(cap) if cap > 0 else -math.inf
        out.append((n, x, lc, (lc + x * x) / (x * x)))
    return out


# -- eta reduction and rate function ----------------------------------------

@dataclass(frozen=True)
class EtaResult:
    n: int
    x_n: float
    beta: float
    b: float
    value: float
    target: float

    @property
    def log_value(self) -> float:
        return math.log(self.value) if self.value > 0 else -math.inf

    @property
    def normalized(self) -> float:
        return self.log_value / (self.x_n * self.x_n)


def eta_scale(fam: MeasureFamily, n: int, x_n: float) -> float:
    return 1.0 / solve_zn(MomentProfile(fam), n, x_n).z_n


def eta_lower_bound(fam: MeasureFamily, n: int, x_n: float, beta: float, *,
                    dp: StateDP | None = None) -> EtaResult:
    """Exact ``V(η_n >= (1+β) x_n²)`` with ``η_n = 2bS_n - (bV_n)²``, ``b = 1/z_n``."""
    target = eta_rate_target(beta)
    b = eta_scale(fam, n, x_n)
    dp = dp or sum_sq_dp([fam] * n)
    s, v2 = dp.terminal
    eta = 2 * b * s - b * b * v2
    val = dp.value((eta >= (1 + beta) * x_n * x_n).astype(float))
    return EtaResult(n, x_n, beta, b, val, target)


def eta_reduction_gap(steps, x_n: float, b: float, *, dp: StateDP | None = None) -> float:
    """``V(S_n >= x_n V_n) - V(2bS_n - (bV_n)² >= x_n²)``; nonnegative for every ``b > 0``."""
    dp = dp or sum_sq_dp(steps)
    s, v2 = dp.terminal
    big = dp.value(_event_indicator(s, v2, x_n))
    small = dp.value((2 * b * s - b * b * v2 >= x_n * x_n).astype(float))
    return big - small


@dataclass(frozen=True)
class RateFunction:
    """Legendre transform of ``φ(λ) = 2λ² - λ`` over ``λ > 1/2``."""

    @staticmethod
    def phi(lam: float) -> float:
        return 2 * lam * lam - lam

    @staticmethod
    def maximizer(x: float) -> float:
        return (x + 1) / 4

    def __call__(self, x: float) -> float:
        if not x > 1:
            raise DomainError("rate function is evaluated on x > 1")
        return (x + 1) ** 2 / 8

    def numeric(self, x: float) -> float:
        """Supremum by bounded scalar optimization, for cross-checking."""
        res = minimize_scalar(lambda l: -(l * x - self.phi(l)), bounds=(0.5, 0.5 + 10 * (1 + x)),
                              method="bounded", options={"xatol": 1e-12})
        return float(-res.fun)


# -- block schedules -----------------------------------------------------------

def _log_nk(k: int) -> float:
    return k * math.log(k) ** 2


def _log_mk(k: int) -> float:
    return k / math.log(math.log(k)) ** 2


@dataclass(frozen=True)
class BlockSchedule:
    kind: str
    indices: tuple[int, ...]

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise ConfigurationError("schedule indices must be strictly increasing")


def mk_turning_index() -> int:
    """First ``k >= 3`` from which ``k / (log log k)²`` increases."""
    k = 3
    while _log_mk(k + 1) <= _log_mk(k):
        k += 1
    return k


def block_schedule(kind: str, n_max: int) -> BlockSchedule:
    """Schedule points ``floor(e^{...})`` up to ``n_max``.

    ``nk`` starts at ``k = 3``.  ``m_k`` first decreases (``log log k`` is tiny
    just above ``e``), so ``mk`` starts where it becomes increasing.
    """
    if kind == "nk":
        k, log_of = 3, _log_nk
    elif kind == "mk":
        k, log_of = mk_turning_index(), _log_mk
    else:
        raise ConfigurationError(f"unknown schedule kind {kind!r}")
    out = []
    while log_of(k) <= math.log(n_max) + 1e-12:
        v = math.floor(math.exp(log_of(k)))
        if v > n_max:
            break
        if not out or v > out[-1]:
            out.append(v)
        k += 1
    return BlockSchedule(kind, tuple(out))


# -- LIL traces -------------------------------------------------------------

def _unit_steps(source, n_max: int, seed: int) -> np.ndarray:
    if isinstance(source, VolatilityPolicy):
        return unit_increments(simulate_path(source, n_max, 1.0, seed))
    if isinstance(source, DiscreteLaw):
        gen = np.random.Generator(np.random.Philox(seed))
        cdf = np.cumsum(source.probs)
        idx = np.minimum(np.searchsorted(cdf, gen.random(n_max), side="right"), len(cdf) - 1)
        return np.asarray(source.values)[idx]
    raise ConfigurationError("source must be a VolatilityPolicy or a DiscreteLaw")


@dataclass
class LilSeedRow:
    seed: int
    max_ratio: float
    min_ratio: float
    final_ratio: float
    coverage: float
    block_maxima: tuple[float, ...]


@dataclass
class LilTrace:
    source: str
    n_max: int
    n_min: int
    grid: tuple[float, ...]
    radius: float
    schedule: BlockSchedule | None
    seeds: list[LilSeedRow]

    columns = ("seed", "max_ratio", "min_ratio", "final_ratio", "coverage")

    def fraction_in_band(self, lo: float = 0.8, hi: float = 1.25) -> float:
        return float(np.mean([lo <= r.max_ratio <= hi for r in self.seeds]))

    def fraction_covered(self, level: float = 1.0) -> float:
        return float(np.mean([r.coverage >= level - 1e-12 for r in self.seeds]))

    def fraction_below(self, bound: float) -> float:
        return float(np.mean([r.max_ratio <= bound for r in self.seeds]))


def lil_trace(source, n_max: int, seeds: Sequence[int] = range(20), *,
              schedule: BlockSchedule | None = None, grid=(-1.0, 0.0, 1.0), radius: float = 0.15,
              n_min: int = 3) -> LilTrace:
    """Self-normalized ratios ``S_n / (V_n √(2 log log n))`` for ``n_min <= n <= n_max``.

    ``coverage`` is the fraction of ``grid`` points that the trace comes within
    ``radius`` of.
    """
    if n_max < 100:
        raise DomainError("n_max must be >= 100")
    if n_min < 3:
        raise DomainError("log log n needs n >= 3")
    if schedule is not None and schedule.indices and schedule.indices[-1] > n_max:
        raise DomainError("schedule exceeds n_max")
    g = np.asarray(grid, dtype=float)
    n = np.arange(n_min, n_max + 1, dtype=float)
    rows = []
    for sd in seeds:
        x = _unit_steps(source, n_max, sd)
        r = lil_ratios(np.cumsum(x)[n_min - 1:], np.cumsum(x * x)[n_min - 1:], n)
        srt = np.sort(r)
        pos = np.clip(np.searchsorted(srt, g), 1, len(srt) - 1)
        dist = np.minimum(np.abs(srt[pos] - g), np.abs(srt[pos - 1] - g))
        blocks = ()
        if schedule is not None and len(schedule.indices) >= 2:
            idx = [max(i - n_min, 0) for i in schedule.indices]
            blocks = tuple(float(np.max(r[a:b + 1])) for a, b in zip(idx, idx[1:]))
        rows.append(LilSeedRow(int(sd), float(r.max()), float(r.min()), float(r[-1]),
                               float(np.mean(dist <= radius)), blocks))
    name = source.name if isinstance(source, VolatilityPolicy) else "discrete-law"
    return LilTrace(name, n_max, n_min, tuple(float(v) for v in g), radius, schedule, rows)


@dataclass
class BlockRatioReport:
    indices: tuple[int, ...]
    ratios: tuple[float, ...]  # V_{n_k} / V_{n_{k+1}}
    reference: tuple[float, ...]  # √(n_k / n_{k+1})

    @property
    def decreasing(self) -> bool | None:
        if len(self.ratios) < 2:
            return None
        return all(b < a for a, b in zip(self.ratios, self.ratios[1:]))


def block_ratio_check(source, schedule: BlockSchedule, seed: int = 0) -> BlockRatioReport:
    """Empirical ``V_{n_k}/V_{n_{k+1}}`` along the schedule; empty below two points."""
    idx = schedule.indices
    if len(idx) < 2:
        return BlockRatioReport(idx, (), ())
    x = _unit_steps(source, idx[-1], seed)
    v = np.sqrt(np.cumsum(x * x))
    vk = v[np.asarray(idx) - 1]
    return BlockRatioReport(idx, tuple(float(a / b) for a, b in zip(vk, vk[1:])),
                            tuple(math.sqrt(a / b) for a, b in zip(idx, idx[1:])))


# -- heterogeneous arrays ------------------------------------------------------

def alternating_array(fam: MeasureFamily, scales: Sequence[float]) -> Callable[[int], list]:
    scaled = [fam if s == 1 else fam.scaled(s) for s in scales]
    return lambda n: [scaled[i % len(scaled)] for i in range(n)]


def inject_index(array_fn: Callable[[int], list], index: int,
                 scale_fn: Callable[[int], float]) -> Callable[[int], list]:
    """Replace entry ``index`` by itself scaled with ``scale_fn(n)``."""
    def fn(n):
        arr = list(array_fn(n))
        if index < n:
            arr[index] = arr[index].scaled(scale_fn(n))
        return arr
    return fn


@dataclass(frozen=True)
class ArrayDiagnostics:
    n: int
    delta: float
    q: float
    max_share: float  # max_i E[X_i²] / B̄_n²
    x_weighted_share: float  # x_n² max_i E[X_i²] / B̄_n²
    lil_tail: float  # sum E[(X_i² - ε B̄²/log log B̄²)^+] / B̄²

    def violated(self, share_cap: float = 0.25) -> list[str]:
        return ["max_i E[X_i^2] is not small against B_upper^2"] if self.max_share > share_cap else []


def array_diagnostics(arr: Sequence[MeasureFamily], n: int, x: float, eps: float = 0.1
                      ) -> ArrayDiagnostics:
    d = heterogeneous_delta(arr, n, x)
    m = max(upper_expectation(lambda v: v * v, f) for f in arr[:n])
    ll = math.log(math.log(d.b_upper_sq)) if d.b_upper_sq > math.e else math.nan
    if math.isfinite(ll) and ll > 0:
        c = eps * d.b_upper_sq / ll
        tail = math.fsum(upper_expectation(lambda v: np.maximum(v * v - c, 0.0), f)
                         for f in arr[:n]) / d.b_upper_sq
    else:
        tail = math.nan
    return ArrayDiagnostics(n, d.delta, d.q, m / d.b_upper_sq, x * x * m / d.b_upper_sq, tail)


def non_iid_experiment(array_fn: Callable[[int], list], gamma: float, n_list,
                       budget: int = MAX_STATES, *, q_cap: float = 100.0, bounds: str = "auto",
                       mc_paths: int = DEFAULT_MC_PATHS, seed: int = 0) -> RateCurve:
    """Rate curve for independent, non-identically distributed steps.

    Runs the same pipeline as :func:`md_rate_curve`; each row also carries
    ``Δ_{n,x_n}`` and ``q_n``.  Refused when some ``q_n`` exceeds ``q_cap``.
    """
    diags = {}
    for n in sorted(set(int(v) for v in n_list)):
        arr = array_fn(n)
        dg = array_diagnostics(arr, n, x_sequence(n, gamma=gamma))
        if dg.q > q_cap:
            raise ExperimentRefused(f"q_n = {dg.q:.4g} exceeds the cap {q_cap:g} at n={n}")
        diags[n] = dg

    def tags(n, x):
        return {"delta": diags[n].delta, "q": diags[n].q}

    curve = _rate_pipeline(array_fn, gamma, n_list, budget, bounds=bounds, mc_paths=mc_paths,
                           seed=seed, extra=tags)
    curve.diagnostics = diags
    for n, dg in diags.items():
        for msg in dg.violated():
            curve.notes.append(f"n={n}: hypothesis flagged: {msg}")
    return curve


def fit_rate_constant(curve: RateCurve) -> float:
    """Least-squares ``C`` in ``rate + 1/2 ≈ C Δ_{n,x_n}`` over exact rows; reported, not asserted."""
    rows = [r for r in curve.rows if r.method == "exact-dp" and math.isfinite(r.delta)]
    num = math.fsum((r.normalized_rate + 0.5) * r.delta for r in rows)
    den = math.fsum(r.delta * r.delta for r in rows)
    return num / den if den > 0 else math.nan
