"""Truncated second moments ``l(x) = E[X^2 ∧ x^2]`` and the truncation root ``z_n``."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import DomainError, MeasureFamily, conjugate_expectation, upper_expectation


def _truncated_per_law(fam: MeasureFamily, x: float) -> np.ndarray:
    return fam.probs @ np.minimum(fam.support ** 2, x * x)


@dataclass
class MomentProfile:
    fam: MeasureFamily
    b: float = field(init=False)
    r_squared_estimate: float = field(init=False)

    def __post_init__(self):
        nonzero = fam_nonzero_mass(self.fam)
        # l(x) > 0 for every x > 0 as soon as some law charges a nonzero atom
        self.b = 0.0 if np.max(nonzero) > 0 else math.inf
        self.r_squared_estimate = max(ratio_ii(self, x) for x in default_grid(self.fam))

    @property
    def degenerate(self) -> bool:
        return math.isinf(self.b)

    @property
    def max_abs_atom(self) -> float:
        return float(np.max(np.abs(self.fam.support)))

    def l(self, x: float) -> float:
        return truncated_moment(self, x, "upper")

    def ratio(self, s: float) -> float:
        """``l(s) / s^2``, nonincreasing in ``s``."""
        return float(np.max(self.fam.probs @ np.minimum(self.fam.support ** 2 / (s * s), 1.0)))


def fam_nonzero_mass(fam: MeasureFamily) -> np.ndarray:
    return fam.probs @ (fam.support != 0).astype(float)


def default_grid(fam: MeasureFamily) -> np.ndarray:
    a = np.unique(np.abs(fam.support[fam.support != 0]))
    if a.size == 0:
        return np.array([1.0])
    mids = np.concatenate([a[:1] / 2, (a[:-1] + a[1:]) / 2, a[-1:] * 2])
    return np.unique(np.concatenate([a, mids, a[-1:] * 10]))


def truncated_moment(profile: MomentProfile, x: float, which: str = "upper") -> float:
    """``E[X^2 ∧ x^2]`` (upper) or ``-E[-(X^2 ∧ x^2)]`` (conjugate)."""
    if x < 0 or not math.isfinite(x):
        raise DomainError("truncation level must be finite and >= 0")
    per_law = _truncated_per_law(profile.fam, x)
    if which == "upper":
        return float(np.max(per_law))
    if which == "conjugate":
        return float(np.min(per_law))
    raise ValueError("which must be 'upper' or 'conjugate'")


def ratio_ii(profile: MomentProfile, x: float) -> float:
    lo = truncated_moment(profile, x, "conjugate")
    hi = truncated_moment(profile, x, "upper")
    if lo <= 0:
        return math.inf if hi > 0 else 1.0
    return hi / lo


@dataclass(frozen=True)
class TruncationPoint:
    n: int
    x_n: float
    z_n: float
    flagged: bool = False
    reason: str = ""

    def residual(self, profile: MomentProfile) -> float:
        return abs(self.n * profile.l(self.z_n) - self.x_n ** 2 * self.z_n ** 2)


def _law_crossing(values: np.ndarray, probs: np.ndarray, t: float) -> float:
    """``inf{s > 0 : E[min(X^2/s^2, 1)] <= t}`` for a single law, solved piecewise.

    Between consecutive absolute atoms ``c_i < s <= c_{i+1}`` the ratio is
    ``A_i / s^2 + B_i`` with ``A_i`` the second moment below ``c_i`` and
    ``B_i`` the mass above it.
    """
    mask = (values != 0) & (probs > 0)
    c = np.abs(values[mask])
    w = probs[mask]
    if c.size == 0:
        return 0.0
    order = np.argsort(c, kind="stable")
    c, w = c[order], w[order]
    levels, start = np.unique(c, return_index=True)
    weights = np.add.reduceat(w, start)
    if weights.sum() <= t:
        return 0.0
    A = 0.0
    tail = float(weights.sum())
    for i, (ci, wi) in enumerate(zip(levels, weights)):
        A += wi * ci * ci
        tail -= wi
        right = levels[i + 1] if i + 1 < len(levels) else math.inf
        r_right = A / right ** 2 + tail if math.isfinite(right) else tail
        if r_right <= t:
            if tail >= t:
                return float(right)
            s = math.sqrt(A / (t - tail))
            return float(min(max(s, ci), right))
    return math.inf  # unreachable for t > 0


def solve_zn(profile: MomentProfile, n: int, x_n: float) -> TruncationPoint:
    """``z_n = inf{s >= b + 1 : l(s)/s^2 <= x_n^2/n}``.

    ``l(s)/s^2`` is the max over laws of nonincreasing per-law ratios, so the
    infimum is the largest per-law crossing (each solved exactly), floored at
    ``b + 1``.  Boundary and degenerate cases are flagged, not raised.
    """
    if n < 1 or x_n <= 0:
        raise DomainError("need n >= 1 and x_n > 0")
    t = x_n * x_n / n
    if profile.degenerate:
        return TruncationPoint(n, x_n, 1.0, True, "degenerate: l vanishes identically")
    s0 = profile.b + 1.0
    if t >= profile.ratio(s0):
        return TruncationPoint(n, x_n, s0, True, "x_n^2/n >= l(b+1)/(b+1)^2; infimum at b+1")
    fam = profile.fam
    z = max(_law_crossing(fam.support, p, t) for p in fam.probs)
    return TruncationPoint(n, x_n, max(z, s0))


def solve_zn_bisect(profile: MomentProfile, n: int, x_n: float, *, rtol: float = 1e-14) -> float:
    """Doubling bracket then bisection for the leftmost ``s`` with ``l(s)/s^2 <= x_n^2/n``."""
    t = x_n * x_n / n
    lo = profile.b + 1.0
    if profile.ratio(lo) <= t:
        return lo
    hi = 2.0 * lo
    while profile.ratio(hi) > t:
        lo, hi = hi, 2.0 * hi
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if profile.ratio(mid) <= t:
            hi = mid
        else:
            lo = mid
    return hi


def conjugate_scaled_b(profile: MomentProfile, z_n: float) -> float:
    """``(1/z_n) E[X^2 ∧ z_n^2] / ε[X^2 ∧ z_n^2]``."""
    lo = truncated_moment(profile, z_n, "conjugate")
    if lo <= 0:
        raise DomainError("conjugate truncated moment vanishes")
    return truncated_moment(profile, z_n, "upper") / (lo * z_n)


@dataclass
class ConditionReport:
    rows: list[tuple[float, float, float, float, float, float]]
    r_squared: float
    compact: bool
    support_radius: float
    mean_upper: float
    mean_lower: float

    columns = ("x", "l_upper", "l_conj", "ratio_I", "ratio_II", "tail_III")

    @property
    def cond_ii(self) -> bool:
        return math.isfinite(self.r_squared)

    def failing(self, *, mean_tol: float = 1e-12, centered: bool = True) -> list[str]:
        """Names of the hypotheses that fail; empty when the family is admissible."""
        bad = []
        if not self.compact:
            bad.append("(I)/(III): non-compact support")
        if not self.cond_ii:
            bad.append("(II): conjugate truncated moment vanishes")
        if self.mean_upper > mean_tol:
            bad.append("mean: E[X] > 0")
        if centered and self.mean_lower < -mean_tol:
            bad.append("mean: conjugate E[X] < 0")
        return bad


def condition_diagnostics(profile: MomentProfile, x_grid) -> ConditionReport:
    """Tabulate the three tail conditions over an increasing positive grid."""
    xs = np.asarray(x_grid, dtype=float)
    if xs.ndim != 1 or xs.size == 0 or np.any(xs <= 0) or np.any(np.diff(xs) <= 0):
        raise DomainError("x_grid must be positive and strictly increasing")
    fam = profile.fam
    rows = []
    for x in xs:
        lu = truncated_moment(profile, x, "upper")
        lc = truncated_moment(profile, x, "conjugate")
        tail = upper_expectation(np.abs(fam.support) >= x, fam)
        r1 = x * x * tail / lu if lu > 0 else math.inf
        r2 = ratio_ii(profile, x)
        t3 = upper_expectation(np.maximum(np.abs(fam.support) - x, 0.0), fam)
        rows.append((float(x), lu, lc, r1, r2, t3))
    r_sq = max(max(r[4] for r in rows), profile.r_squared_estimate)
    return ConditionReport(rows, r_sq, True, profile.max_abs_atom,
                           upper_expectation(lambda v: v, fam),
                           conjugate_expectation(lambda v: v, fam))


def slow_variation(profile: MomentProfile, x: float, c: float) -> float:
    """``l(c x) / l(x)``; equals 1 once ``x`` is beyond the support."""
    return profile.l(c * x) / profile.l(x)
