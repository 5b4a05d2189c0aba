"""Closed-form concentration bounds and their certification against exact capacities.

Every bound is split into a hard part (a number that must dominate the exact
capacity for every finite ``n``) and, where the statement carries
``o(x^2)`` or ``O(1)`` remainders, an asymptotic part whose envelope is supplied
by the caller and flagged in the result.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp

from .core import (DomainError, MeasureFamily, capacity, conjugate_expectation,
                   random_family, upper_expectation)
from .moments import MomentProfile, conjugate_scaled_b, solve_zn
from .tree import AdversarialTree, StateDP, sum_sq_dp

CERT_TOL = 1e-12
MEAN_TOL = 1e-12  # float slack on the mean conditions
SWEEP_SEED = 0xC0FFEE
SWEEP_ATOMS = (-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0)


@dataclass
class BoundReport:
    bound_id: str
    family_hash: str
    n: int
    x: float
    bound: float
    capacity: float
    method: str = "exact-DP"
    applicable: bool = True

    @property
    def slack(self) -> float:
        return self.bound - self.capacity

    @property
    def status(self) -> str:
        if not self.applicable:
            return "n/a"
        return "ok" if self.slack >= -CERT_TOL else "VIOLATION"

    def row(self) -> tuple:
        return (self.bound_id, self.family_hash, self.n, self.x, self.bound, self.capacity,
                self.slack, self.status)


SWEEP_COLUMNS = ("bound_id", "family_hash", "n", "x", "bound", "capacity", "slack", "status")


def family_hash(fam: MeasureFamily) -> str:
    return hashlib.sha256(fam.to_json().encode()).hexdigest()[:12]


# -- Bernstein-type inequalities -------------------------------------------

def _bernstein_exponent(x, a, var_sum):
    return -x * x / (2.0 * (var_sum + 2.0 * a * x))


def bernstein_bound(variant: int, x: float, a: float, var_sum: float, mean_terms=None):
    """Bernstein-type bound for sums of variables bounded by ``a``.

    variant 1: ``exp{-x^2 / (2(B^2 + 2ax))}`` for ``V(sum(Y_i - E[Y_i]) >= x)``.
    variant 2: returns ``(shift, 4 exp{...})`` for
        ``V(max_k T_k >= x + shift)`` with
        ``shift = max_k sum_{i>k} E[-Y_i] + sum_i E[Y_i]``;
        ``mean_terms`` is a sequence of ``(E[Y_i], E[-Y_i])`` pairs.
    variant 3: same value as variant 1 with ``var_sum`` built around
        conjugate means; bounds the lower capacity.
    """
    if not (x > 0 and a > 0 and var_sum > 0):
        raise DomainError("bernstein_bound needs x, a, var_sum > 0")
    value = math.exp(_bernstein_exponent(x, a, var_sum))
    if variant in (1, 3):
        return value
    if variant == 2:
        if mean_terms is None:
            raise DomainError("variant 2 needs the per-index means")
        return maximal_shift(mean_terms), 4.0 * value
    raise DomainError(f"unknown Bernstein variant {variant}")


def bernstein_second_form(x: float, a: float, second_moment_sum: float) -> float:
    """The weaker form ``exp{-x^2 / (8 sum E[Y_i^2] + 4ax)}``."""
    return math.exp(-x * x / (8.0 * second_moment_sum + 4.0 * a * x))


def maximal_shift(mean_terms) -> float:
    ups = [float(u) for u, _ in mean_terms]
    negs = [float(v) for _, v in mean_terms]
    n = len(ups)
    tails = [math.fsum(negs[k:]) for k in range(1, n + 1)]  # k = 1..n
    return max(tails) + math.fsum(ups)


def _sum_event_capacity(steps, pred):
    dp = StateDP(steps, (0.0,), lambda c, a: (c[0] + a,))
    ind = pred(dp.terminal[0]).astype(float)
    return dp.value(ind), 1.0 - dp.value(1.0 - ind)


def _running_max_capacity(steps, level):
    def trans(c, a):
        s = c[0] + a
        return s, np.maximum(c[1], s)
    dp = StateDP(steps, (0.0, -math.inf), trans)
    return dp.value((dp.terminal[1] >= level).astype(float))


def certify_bernstein(fam: MeasureFamily, n: int, x: float, variant: int) -> BoundReport:
    """Exact capacity of the variant's event for ``n`` i.i.d. copies versus the bound."""
    steps = [fam] * n
    a = float(np.max(np.abs(fam.support)))
    h = family_hash(fam)
    if a == 0:
        return BoundReport(f"BIneq{variant}", h, n, x, 1.0, 0.0, applicable=False)
    mu = upper_expectation(lambda v: v, fam)
    mu_low = conjugate_expectation(lambda v: v, fam)
    if variant == 1:
        var = n * upper_expectation(lambda v: (v - mu) ** 2, fam)
        if var <= 0:
            return BoundReport("BIneq1", h, n, x, 1.0, 0.0, applicable=False)
        cap, _ = _sum_event_capacity(steps, lambda s: s - n * mu >= x)
        return BoundReport("BIneq1", h, n, x, bernstein_bound(1, x, a, var), cap)
    if variant == 2:
        var = n * upper_expectation(lambda v: (v - mu) ** 2, fam)
        if var <= 0:
            return BoundReport("BIneq2", h, n, x, 1.0, 0.0, applicable=False)
        neg = upper_expectation(lambda v: -v, fam)
        shift, bound = bernstein_bound(2, x, a, var, [(mu, neg)] * n)
        cap = _running_max_capacity(steps, x + shift)
        return BoundReport("BIneq2", h, n, x, bound, cap)
    if variant == 3:
        var = n * upper_expectation(lambda v: (v - mu_low) ** 2, fam)
        if var <= 0:
            return BoundReport("BIneq3", h, n, x, 1.0, 0.0, applicable=False)
        _, low = _sum_event_capacity(steps, lambda s: s - n * mu_low >= x)
        return BoundReport("BIneq3", h, n, x, bernstein_bound(3, x, a, var), low)
    raise DomainError(f"unknown Bernstein variant {variant}")


# -- one-step expansion of f(s) = exp(λs - θs²) ------------------------------

def expansion_constant(lam: float, theta: float) -> float:
    """``½θ^{3/2}e^{λ²/4θ} + |λ| + e^{λ²/4θ}``."""
    if theta <= 0:
        raise DomainError("theta must be > 0")
    e = math.exp(lam * lam / (4 * theta))
    return 0.5 * theta ** 1.5 * e + abs(lam) + e


@dataclass(frozen=True)
class ExpansionCheck:
    exact: float
    bound: float
    side: str
    applicable: bool

    @property
    def holds(self) -> bool:
        if not self.applicable:
            return True
        if self.side == "upper":
            return self.exact <= self.bound + CERT_TOL
        return self.exact >= self.bound - CERT_TOL


def moment_expansion_bound(fam: MeasureFamily, b: float, lam: float, theta: float,
                           side: str = "upper") -> ExpansionCheck:
    """Second-order expansion bound for ``E[exp{λbξ - θ(bξ)²}]``.

    The upper form needs ``E[ξ] <= 0``, the lower form ``ε[ξ] >= 0``
    (both with ``λ >= 0``); otherwise the check is marked not applicable.
    """
    if b <= 0:
        raise DomainError("b must be positive")
    if side not in ("upper", "lower"):
        raise ValueError("side must be 'upper' or 'lower'")
    s = b * fam.support
    c = lam * lam / 2 - theta
    sq = np.minimum(s * s, 1.0)
    main = 1.0 + max(c, 0.0) * upper_expectation(sq, fam) \
        - max(-c, 0.0) * conjugate_expectation(sq, fam)
    rem = (upper_expectation(np.minimum(np.abs(s) ** 3, 1.0), fam)
           + upper_expectation(np.maximum(np.abs(s) - 1.0, 0.0), fam)
           + capacity(np.abs(s) > 1.0, fam).upper)
    const = expansion_constant(lam, theta)
    exact = upper_expectation(np.exp(lam * s - theta * s * s), fam)
    if side == "upper":
        ok = lam >= 0 and upper_expectation(lambda v: v, fam) <= MEAN_TOL
        return ExpansionCheck(exact, main + const * rem, side, ok)
    ok = lam >= 0 and conjugate_expectation(lambda v: v, fam) >= -MEAN_TOL
    return ExpansionCheck(exact, main - const * rem, side, ok)


def expansion_remainder(s, lam: float, theta: float):
    """``g(s) = f(s) - 1 - λs - (λ²/2 - θ)(s² ∧ 1)`` and its pointwise envelope."""
    s = np.asarray(s, dtype=float)
    g = np.exp(lam * s - theta * s * s) - 1 - lam * s - (lam * lam / 2 - theta) * np.minimum(s * s, 1)
    a = np.abs(s)
    env = expansion_constant(lam, theta) * (np.minimum(a, 1) ** 3 + np.maximum(a - 1, 0) + (a > 1))
    return g, env


# -- exponential-quadratic moments of (S_n, V_n²) ---------------------------

@dataclass(frozen=True)
class ExpQuadValue:
    log_exact: float
    log_predicted: float
    b: float
    z_n: float

    @property
    def exact(self) -> float:
        return math.exp(self.log_exact)

    @property
    def predicted(self) -> float:
        return math.exp(self.log_predicted)

    @property
    def log_ratio(self) -> float:
        return self.log_exact - self.log_predicted


def log_exp_quadratic(steps, lam_b: float, theta_b2: float, dp: StateDP | None = None) -> float:
    """``log E[exp{λ' S_n - θ' V_n²}]`` by log-space backward induction."""
    dp = dp or sum_sq_dp(steps)
    s, v2 = dp.terminal
    return dp.value(lam_b * s - theta_b2 * v2, log_space=True)


def exp_quadratic_value(fam: MeasureFamily, n: int, x_n: float, lam: float, theta: float,
                        b_mode: str = "upper", *, dp: StateDP | None = None) -> ExpQuadValue:
    """Exact ``E[exp{λ b S_n - θ b² V_n²}]`` with ``b`` tied to ``z_n``, next to
    the leading-order prediction ``exp{(λ²/2 - θ) x_n²}``."""
    profile = MomentProfile(fam)
    z = solve_zn(profile, n, x_n).z_n
    if b_mode == "upper":
        b = 1.0 / z
    elif b_mode == "conjugate-scaled":
        b = conjugate_scaled_b(profile, z)
    else:
        raise ValueError("b_mode must be 'upper' or 'conjugate-scaled'")
    log_exact = log_exp_quadratic([fam] * n, lam * b, theta * b * b, dp)
    return ExpQuadValue(log_exact, (lam * lam / 2 - theta) * x_n * x_n, b, z)


# -- non-identically distributed arrays --------------------------------------

@dataclass(frozen=True)
class DeltaResult:
    delta: float
    q: float
    b_upper_sq: float
    b_lower_sq: float


def heterogeneous_delta(array: Sequence[MeasureFamily], n: int, x: float) -> DeltaResult:
    """``Δ_{n,x}``, ``q_n`` and the upper/lower variance sums of the first ``n`` entries."""
    fams = list(array)[:n]
    if len(fams) < n:
        raise DomainError("array shorter than n")
    bu = math.fsum(upper_expectation(lambda v: v * v, f) for f in fams)
    bl = math.fsum(conjugate_expectation(lambda v: v * v, f) for f in fams)
    if bl <= 0:
        raise DomainError("degenerate array: lower variance sum is zero")
    scale = x / math.sqrt(bu)
    d = math.fsum(upper_expectation(lambda v: v * v * np.minimum(1.0, np.abs(scale * v)), f)
                  for f in fams) / bu
    return DeltaResult(d, bu / bl, bu, bl)


def counting_event_capacity(array: Sequence[MeasureFamily], n: int, x: float,
                                a0: float = 120.0) -> float:
    """Exact ``V(#{i <= n : b X_i > A_0} >= x²/4)`` with ``b = x / B̄_n``."""
    fams = list(array)[:n]
    bu = math.fsum(upper_expectation(lambda v: v * v, f) for f in fams)
    b = x / math.sqrt(bu)
    dp = StateDP(fams, (0.0,), lambda c, a: (c[0] + float(b * a > a0),))
    return dp.value((dp.terminal[0] >= x * x / 4).astype(float))


# -- closed-form proposition bounds -------------------------------------------

@dataclass(frozen=True)
class PropositionBound:
    bound_id: str
    log_value: float
    asymptotic_terms: tuple[str, ...] = ()

    @property
    def value(self) -> float:
        return math.exp(self.log_value) if self.log_value < 709 else math.inf

    @property
    def hard(self) -> bool:
        return not self.asymptotic_terms


def _need(params, *names):
    missing = [k for k in names if k not in params]
    if missing:
        raise DomainError(f"missing parameters: {missing}")
    return [float(params[k]) for k in names]


def _x_at_least_2(x):
    if x < 2:
        raise DomainError("bound requires x >= 2")


def _o_const(lam, theta, c):
    e = math.exp(lam * lam / (4 * theta))
    return c * (theta ** 1.5 * e + theta * e)


def proposition_bound(bound_id: str, params: dict) -> PropositionBound:
    """Dominant closed-form value of a named bound.

    Remainders such as ``o(x_n²)`` enter only through the caller-chosen
    ``remainder`` (default 0) or constant ``C`` (default 1) and are listed in
    ``asymptotic_terms``.
    """
    p = dict(params)
    rem = float(p.get("remainder", 0.0))
    C = float(p.get("C", 1.0))
    if bound_id in ("BIneq1", "BIneq3"):
        x, a, var = _need(p, "x", "a", "var_sum")
        return PropositionBound(bound_id, _bernstein_exponent(x, a, var))
    if bound_id == "BIneq2":
        x, a, var = _need(p, "x", "a", "var_sum")
        return PropositionBound(bound_id, math.log(4.0) + _bernstein_exponent(x, a, var))
    if bound_id == "Prop1":
        (x,) = _need(p, "x")
        return PropositionBound(bound_id, -x * x + rem, ("o(x_n) remainder",))
    if bound_id == "Prop2":
        x, delta = _need(p, "x", "delta")
        if not 0 < delta < 1:
            raise DomainError("Prop2 needs 0 < delta < 1")
        return PropositionBound(bound_id, -x * x / 2 + rem, ("o(x_n^2) remainder",))
    if bound_id == "Prop3":
        x, delta, r2 = _need(p, "x", "delta", "r_squared")
        if not 0 < delta < 1 / r2:
            raise DomainError("Prop3 needs 0 < delta < 1/r^2")
        return PropositionBound(bound_id, -2 * x * x, ("n large enough",))
    if bound_id == "Prop4":
        (beta,) = _need(p, "beta")
        target = eta_rate_target(beta)
        x = float(p.get("x", 1.0))
        return PropositionBound(bound_id, target * x * x, ("liminf statement",))
    if bound_id == "Prop6.1":
        x, d = _need(p, "x", "delta_nx")
        _x_at_least_2(x)
        a0 = float(p.get("A0", 120.0))
        t = float(p.get("t", 5.0))
        c1 = math.log(27 / 48) + 1.5 * a0 + 3 * math.log(a0)
        first = -2.25 * x * x + math.exp(c1) * x * x * d if d > 0 else -2.25 * x * x
        second = counting_bound_log(x, t, a0)
        return PropositionBound(bound_id, float(np.logaddexp(first, second)))
    if bound_id == "Prop6.1-second":
        (x,) = _need(p, "x")
        _x_at_least_2(x)
        return PropositionBound(bound_id, counting_bound_log(x, float(p.get("t", 5.0)),
                                                            float(p.get("A0", 120.0))))
    if bound_id == "Prop6.2":
        x, q, d = _need(p, "x", "q", "delta_nx")
        _x_at_least_2(x)
        if "delta" in p and not 0 < float(p["delta"]) <= 0.25 / q:
            raise DomainError("Prop6.2 needs 0 < delta <= B_lower^2 / (4 B_upper^2)")
        return PropositionBound(bound_id, -2 * x * x + C * x * x * q ** 3 * d, ("O(1) constant",))
    if bound_id == "Prop6.3":
        x, q, d = _need(p, "x", "q", "delta_nx")
        _x_at_least_2(x)
        return PropositionBound(bound_id, -x * x / 2 + C * q ** 1.5 * (math.log(x) + x * x * d),
                                ("O(1) constant",))
    if bound_id == "MomentG2-upper":
        x, lam, theta = _need(p, "x", "lam", "theta")
        return PropositionBound(bound_id, (lam * lam / 2 - theta) * x * x + rem,
                                ("o(x_n^2) remainder",))
    if bound_id in ("Lem6.2a", "Lem6.2b", "Lem6.2c"):
        x, lam, theta, d = _need(p, "x", "lam", "theta", "delta_nx")
        _x_at_least_2(x)
        c = lam * lam / 2 - theta
        o = _o_const(lam, theta, C)
        if bound_id == "Lem6.2a":
            if c < 0:
                raise DomainError("Lem6.2a needs λ²/2 - θ >= 0")
            return PropositionBound(bound_id, c * x * x + o * x * x * d, ("O(1) constant",))
        if bound_id == "Lem6.2b":
            if c >= 0:
                raise DomainError("Lem6.2b needs λ²/2 - θ < 0")
            (q,) = _need(p, "q")
            return PropositionBound(bound_id, c * x * x + o * q ** 3 * x * x * d, ("O(1) constant",))
        if c <= 0:
            raise DomainError("Lem6.2c needs λ²/2 - θ > 0")
        return PropositionBound(bound_id, c * x * x - o * x * x * d, ("O(1) constant", "lower bound"))
    raise DomainError(f"unknown bound id {bound_id!r}")


def counting_bound_log(x: float, t: float = 5.0, a0: float = 120.0) -> float:
    """``-t x²/4 + 4 e^t x² / A_0²``."""
    return -t * x * x / 4 + 4 * math.exp(t) * x * x / (a0 * a0)


def eta_rate_target(beta: float) -> float:
    """``-(1 + β/4)² / 2`` for ``0 < β < 1``."""
    if not 0 < beta < 1:
        raise DomainError("beta must lie in the open interval (0, 1)")
    return -(1 + beta / 4) ** 2 / 2


# -- maximal inequality ------------------------------------------------------

@dataclass(frozen=True)
class MaximalCheck:
    lhs: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs <= 4 * self.rhs * (1 + 1e-12)


def maximal_factor_check(fam: MeasureFamily, n: int, lam: float) -> MaximalCheck:
    """``E[M_n²]`` and ``E[Q_n²]`` on the exact tree, where
    ``Q_k = exp{(λ/2) sum_{i<=k}(Y_i - ε[Y_i])}``, ``Q_0 = 0``, ``M_n = max_{k<=n} Q_k``."""
    if lam <= 0:
        raise DomainError("lambda must be positive")
    centre = conjugate_expectation(lambda v: v, fam)
    steps = [fam] * n

    def q_paths(paths):
        return np.exp(0.5 * lam * np.cumsum(paths - centre, axis=1))

    lhs = AdversarialTree(steps, lambda p: np.max(q_paths(p), axis=1) ** 2).solve()
    rhs = AdversarialTree(steps, lambda p: q_paths(p)[:, -1] ** 2).solve()
    return MaximalCheck(lhs, rhs)


# -- certified upper bound for V(S_n >= x V_n) --------------------------------

@dataclass(frozen=True)
class CellBound:
    v_lo: float
    v_hi: float
    lam: float
    mu: float
    log_bound: float


def log_mgf_product(steps, lam: float, mu: float) -> float:
    """``log E[exp{λ S_n - μ V_n²}]`` for independent steps.

    The payoff is a product of positive one-step factors, so the nested upper
    expectation factorizes into ``prod_i max_j E_j[exp{λ X - μ X²}]``.
    """
    groups = steps if _is_grouped(steps) else _grouped(steps)
    total = 0.0
    for fam, count in groups:
        a = fam.support
        total += count * float(np.max(logsumexp(lam * a - mu * a * a, b=fam.probs, axis=1)))
    return total


def _is_grouped(steps):
    return bool(steps) and isinstance(steps[0], tuple)


def _grouped(steps):
    counts: dict[MeasureFamily, int] = {}
    for fam in steps:
        counts[fam] = counts.get(fam, 0) + 1
    return list(counts.items())


def _cell_log_bound(steps, x: float, v_lo: float, v_hi: float):
    def obj(z):
        lam, mu = max(z[0], 0.0), max(z[1], 0.0)
        return -lam * x * v_lo + mu * v_hi * v_hi + log_mgf_product(steps, lam, mu)

    mid = max(0.5 * (v_lo + v_hi), 1e-12)
    lam0 = x / mid
    start = [(lam0, lam0 * lam0 / 2), (lam0, 0.0), (0.0, 0.0)]
    best = min((obj(np.array(p)), p) for p in start)
    res = minimize(obj, np.array(best[1], dtype=float), method="L-BFGS-B",
                   bounds=[(0.0, None), (0.0, None)])
    cand = [(float(res.fun), tuple(float(v) for v in np.maximum(res.x, 0.0))), best]
    val, (lam, mu) = min(cand)
    return min(val, 0.0), lam, mu


def _v_range(groups):
    lo = math.fsum(c * float(np.min(f.support ** 2)) for f, c in groups)
    hi = math.fsum(c * float(np.max(f.support ** 2)) for f, c in groups)
    nz = [float(np.min(np.abs(f.support[f.support != 0]))) for f, _ in groups if np.any(f.support != 0)]
    return math.sqrt(lo), math.sqrt(hi), (min(nz) if nz else 0.0)


def combined_upper_bound(steps, x: float, *, ratio: float | None = None
                         ) -> tuple[float, list[CellBound]]:
    """Certified bound on ``V(S_n >= x V_n)`` for independent steps.

    ``V_n`` is split into geometric cells ``[v_j, v_{j+1}]`` (ratio
    ``1 + 1/x`` by default).  On a cell the event sits inside
    ``{S_n >= x v_j, V_n² <= v_{j+1}²}``, whose capacity is at most
    ``exp{-λ x v_j + μ v_{j+1}²} E[exp{λ S_n - μ V_n²}]`` for every
    ``λ, μ >= 0``; ``(λ, μ)`` is optimized per cell and sub-additivity sums
    the cells.  Without an explicit ``ratio`` the smallest of several
    partitions (each one valid) is returned.
    """
    steps = list(steps)
    if x <= 0:
        raise DomainError("x must be positive")
    if not _is_grouped(steps):
        steps = _grouped(steps)
    if ratio is None:
        return min((combined_upper_bound(steps, x, ratio=r)
                    for r in (1.0 + 1.0 / x, 2.0, math.inf)), key=lambda t: t[0])
    vmin, vmax, step_min = _v_range(steps)
    if vmax == 0:
        return 1.0, []  # S_n = V_n = 0 surely
    edges = []
    lo = vmin
    if lo == 0:
        # V_n > 0 forces V_n >= smallest nonzero |atom|
        edges.append((0.0, 0.0))
        lo = step_min
    while True:
        hi = min(lo * ratio, vmax) if math.isfinite(ratio) else vmax
        edges.append((lo, hi))
        if hi >= vmax:
            break
        lo = hi
    cells = []
    for lo, hi in edges:
        lb, lam, mu = _cell_log_bound(steps, x, lo, hi)
        cells.append(CellBound(lo, hi, lam, mu, lb))
    total = float(np.exp(np.logaddexp.reduce([c.log_bound for c in cells])))
    return min(total, 1.0), cells


# -- randomized certification sweep -----------------------------------------

def certification_sweep(n_configs: int = 200, seed: int = SWEEP_SEED, *, n_max: int = 8
                        ) -> list[BoundReport]:
    """Bernstein variants 1-3, the one-step expansion bounds and the counting
    bound with ``t = 5, A_0 = 120`` on random families.

    Each configuration draws its own generator from a spawned seed sequence.
    """
    reports = []
    for child in np.random.SeedSequence(seed).spawn(n_configs):
        rng = np.random.default_rng(child)
        fam = random_family(rng, atoms=SWEEP_ATOMS)
        n = int(rng.integers(1, n_max + 1))
        a = float(np.max(np.abs(fam.support)))
        x = float(rng.uniform(0.05, 1.5) * a * math.sqrt(n))
        for variant in (1, 2, 3):
            reports.append(certify_bernstein(fam, n, x, variant))
        b = float(rng.uniform(0.05, 1.5))
        lam = float(rng.uniform(0.0, 2.0))
        theta = float(rng.uniform(0.1, 2.0))
        h = family_hash(fam)
        for fam_side, side in ((_centre(fam, "upper"), "upper"), (_centre(fam, "lower"), "lower")):
            chk = moment_expansion_bound(fam_side, b, lam, theta, side)
            # encode as bound >= capacity: for the lower form compare the negated values
            if side == "upper":
                reports.append(BoundReport("OneStep-upper", h, 1, b, chk.bound, chk.exact,
                                           applicable=chk.applicable))
            else:
                reports.append(BoundReport("OneStep-lower", h, 1, b, -chk.bound, -chk.exact,
                                           applicable=chk.applicable))
        x2 = float(rng.uniform(2.0, 4.0))
        reports.append(BoundReport("Prop6.1-second", h, n, x2,
                                   proposition_bound("Prop6.1-second", {"x": x2}).value,
                                   counting_event_capacity([fam] * n, n, x2)))
    return reports


def _centre(fam: MeasureFamily, side: str) -> MeasureFamily:
    """Shift the family so the expansion's mean condition holds with equality."""
    if side == "upper":
        m = upper_expectation(lambda v: v, fam)
    else:
        m = conjugate_expectation(lambda v: v, fam)
    if m == 0:
        return fam
    return MeasureFamily.from_lists([[(v - m, p) for v, p in law.atoms] for law in fam.laws])
