"""Sub-linear expectations realized as upper envelopes of finitely many discrete laws.

A :class:`MeasureFamily` holds ``m`` probability vectors on one shared finite
support.  The upper expectation of a payoff is the largest of the ``m`` linear
expectations, the conjugate expectation the smallest.  Capacities, Choquet
integrals and the axiom checks are all built on those two reductions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

PROB_TOL = 1e-12
AXIOM_TOL = 1e-10


class ConfigurationError(ValueError):
    """Malformed family, grid or experiment configuration."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class ResourceError(RuntimeError):
    """A computation would exceed its declared size budget."""


@dataclass(frozen=True)
class DiscreteLaw:
    """Finitely supported probability law, atoms sorted by value."""

    values: tuple[float, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != len(self.probs) or not self.values:
            raise ConfigurationError("a law needs matching, nonempty values and probs")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ConfigurationError("atoms must be strictly increasing (sorted, no duplicates)")
        if any(not math.isfinite(v) for v in self.values):
            raise ConfigurationError("atom values must be finite")
        if any(p < 0 or p > 1 for p in self.probs):
            raise ConfigurationError("probabilities must lie in [0, 1]")
        if abs(math.fsum(self.probs) - 1.0) > PROB_TOL:
            raise ConfigurationError(f"probabilities sum to {math.fsum(self.probs)!r}, not 1")

    @classmethod
    def from_atoms(cls, atoms: Iterable[tuple[float, float]]) -> "DiscreteLaw":
        merged: dict[float, float] = {}
        for v, p in atoms:
            merged[float(v)] = merged.get(float(v), 0.0) + float(p)
        vals = sorted(merged)
        return cls(tuple(vals), tuple(merged[v] for v in vals))

    @property
    def atoms(self) -> list[tuple[float, float]]:
        return list(zip(self.values, self.probs))

    def mean(self, f: Callable = None) -> float:
        x = np.asarray(self.values)
        y = x if f is None else np.asarray(f(x), dtype=float)
        return float(np.dot(self.probs, y))


@dataclass(frozen=True, eq=False)
class MeasureFamily:
    """Finite set of discrete laws padded onto their merged support.

    ``probs`` has shape ``(m, k)``: row ``j`` is law ``j`` on ``support``.
    """

    laws: tuple[DiscreteLaw, ...]
    name: str = ""
    support: np.ndarray = field(init=False, repr=False)
    probs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.laws:
            raise ConfigurationError("a measure family needs at least one law")
        support = sorted({v for law in self.laws for v in law.values})
        index = {v: i for i, v in enumerate(support)}
        probs = np.zeros((len(self.laws), len(support)))
        for j, law in enumerate(self.laws):
            for v, p in law.atoms:
                probs[j, index[v]] = p
        sup = np.array(support, dtype=float)
        sup.flags.writeable = False
        probs.flags.writeable = False
        object.__setattr__(self, "support", sup)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_lists(cls, laws: Sequence[Sequence[tuple[float, float]]], name: str = "") -> "MeasureFamily":
        return cls(tuple(DiscreteLaw.from_atoms(law) for law in laws), name=name)

    @property
    def n_laws(self) -> int:
        return len(self.laws)

    @property
    def n_atoms(self) -> int:
        return len(self.support)

    def scaled(self, c: float) -> "MeasureFamily":
        """Law of ``c * X``; ``c`` must be nonzero."""
        if c == 0:
            raise DomainError("scale must be nonzero")
        return MeasureFamily.from_lists([[(c * v, p) for v, p in law.atoms] for law in self.laws],
                                        name=f"{self.name}*{c:g}" if self.name else "")

    def linear_expectations(self, f) -> np.ndarray:
        """Per-law expectations of ``f`` (callable or values on the support)."""
        y = payoff_values(f, self.support)
        return self.probs @ y

    # -- JSON round trip --------------------------------------------------

    def to_dict(self) -> dict:
        return {"name": self.name,
                "laws": [[[v, p] for v, p in law.atoms] for law in self.laws]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "MeasureFamily":
        unknown = set(d) - {"name", "laws"}
        if unknown:
            raise ConfigurationError(f"unknown family keys: {sorted(unknown)}")
        if "laws" not in d:
            raise ConfigurationError("family JSON needs a 'laws' field")
        try:
            laws = [[(float(v), float(p)) for v, p in law] for law in d["laws"]]
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(f"bad law entry: {exc}") from None
        return cls.from_lists(laws, name=str(d.get("name", "")))

    @classmethod
    def from_json(cls, text: str) -> "MeasureFamily":
        return cls.from_dict(json.loads(text))

    def __eq__(self, other):
        if not isinstance(other, MeasureFamily):
            return NotImplemented
        return self.laws == other.laws and self.name == other.name

    def __hash__(self):
        return hash((self.laws, self.name))


def rvf() -> MeasureFamily:
    """Rademacher-volatility family: {±1 w.p. 1/2} and {±2 w.p. 1/2}."""
    return MeasureFamily.from_lists([[(-1, 0.5), (1, 0.5)], [(-2, 0.5), (2, 0.5)]], name="rvf")


def single_law(atoms: Sequence[tuple[float, float]], name: str = "") -> MeasureFamily:
    return MeasureFamily.from_lists([atoms], name=name)


def payoff_values(f, support: np.ndarray) -> np.ndarray:
    """Evaluate ``f`` on the support, rejecting non-finite values."""
    if callable(f):
        try:
            y = np.asarray(f(support), dtype=float)
        except TypeError:
            y = np.array([float(f(x)) for x in support])
        if y.shape == ():
            y = np.full(support.shape, float(y))
    else:
        y = np.asarray(f, dtype=float)
    if y.shape != support.shape:
        raise DomainError(f"payoff has shape {y.shape}, support has {support.shape}")
    if not np.all(np.isfinite(y)):
        raise DomainError("payoff is not finite on the support")
    return y


def upper_expectation(f, fam: MeasureFamily) -> float:
    """``E[f(X)]``: the maximum of the per-law expectations."""
    _check_family(fam)
    return float(np.max(fam.linear_expectations(f)))


def conjugate_expectation(f, fam: MeasureFamily) -> float:
    """``-E[-f(X)]``, i.e. the minimum of the per-law expectations."""
    _check_family(fam)
    y = payoff_values(f, fam.support)
    return -upper_expectation(-y, fam)


def _check_family(fam):
    if not isinstance(fam, MeasureFamily) or fam.n_laws == 0:
        raise ConfigurationError("expected a nonempty MeasureFamily")


@dataclass(frozen=True)
class CapacityPair:
    upper: float
    lower: float


def capacity(event, fam: MeasureFamily) -> CapacityPair:
    """Upper capacity ``V(A)`` and lower capacity ``v(A) = 1 - V(A^c)``.

    ``event`` is a predicate (vectorized or scalar) or a boolean mask on the support.
    """
    mask = _event_mask(event, fam.support)
    ind = mask.astype(float)
    upper = upper_expectation(ind, fam)
    lower = 1.0 - upper_expectation(1.0 - ind, fam)
    return CapacityPair(upper, lower)


def _event_mask(event, support):
    if callable(event):
        try:
            m = np.asarray(event(support))
        except TypeError:
            m = np.array([bool(event(x)) for x in support])
        if m.shape == ():
            m = np.full(support.shape, bool(m))
    else:
        m = np.asarray(event)
    if m.shape != support.shape:
        raise DomainError("event mask does not match the support")
    return m.astype(bool)


def choquet_integral(f, fam: MeasureFamily, which: str = "upper") -> float:
    """Choquet integral of ``f(X)`` against ``V`` (upper) or ``v`` (lower).

    ``t -> V(f >= t)`` is a step function on a finite support, so the integral
    reduces to ``y_1 + sum_i (y_i - y_{i-1}) * V(f >= y_i)`` over the sorted
    distinct values ``y_i`` of ``f``.
    """
    if which not in ("upper", "lower"):
        raise ValueError("which must be 'upper' or 'lower'")
    y = payoff_values(f, fam.support)
    levels = np.unique(y)
    total = levels[0]
    for lo, hi in zip(levels[:-1], levels[1:]):
        cap = capacity(y >= hi, fam)
        total += (hi - lo) * (cap.upper if which == "upper" else cap.lower)
    return float(total)


@dataclass
class AxiomReport:
    max_violation: float
    by_axiom: dict[str, float]
    n_checks: int
    tol: float = AXIOM_TOL

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tol


def verify_axioms(fam: MeasureFamily, random_fns: Sequence, *, scales=(0.0, 0.5, 2.0, 3.7),
                  constants=(-1.5, 0.0, 2.25)) -> AxiomReport:
    """Check monotonicity, constant preservation, sub-additivity, positive
    homogeneity and capacity duality on every function and pair of functions.

    Violations are reported, never raised.
    """
    if not random_fns:
        raise ValueError("need at least one test function")
    ys = [payoff_values(f, fam.support) for f in random_fns]
    E = lambda y: upper_expectation(y, fam)  # noqa: E731
    viol = {"monotonicity": 0.0, "constant": 0.0, "subadditivity": 0.0,
            "homogeneity": 0.0, "duality": 0.0, "conjugate_order": 0.0}
    checks = 0

    def bump(key, v):
        nonlocal checks
        checks += 1
        viol[key] = max(viol[key], v)

    for c in constants:
        bump("constant", abs(E(np.full(fam.support.shape, c)) - c))
    for y in ys:
        ey = E(y)
        for c in constants:
            bump("constant", abs(E(y + c) - (ey + c)))
        for lam in scales:
            bump("homogeneity", abs(E(lam * y) - lam * ey))
        bump("conjugate_order", conjugate_expectation(y, fam) - ey)
        for t in np.unique(y):
            a = y >= t
            cap = capacity(a, fam)
            comp = capacity(~a, fam)
            bump("duality", abs(cap.lower - (1.0 - comp.upper)))
            bump("duality", cap.lower - cap.upper)
    for i, y1 in enumerate(ys):
        e1 = E(y1)
        for y2 in ys[i:]:
            e2 = E(y2)
            bump("subadditivity", E(y1 + y2) - (e1 + e2))
            hi = np.maximum(y1, y2)
            lo = np.minimum(y1, y2)
            bump("monotonicity", max(e1, e2) - E(hi))
            bump("monotonicity", E(lo) - min(e1, e2))
    return AxiomReport(max(viol.values()), viol, checks)


def random_family(rng: np.random.Generator, *, atoms=(-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0),
                  n_laws=(2, 3), n_atoms=(2, 4)) -> MeasureFamily:
    """Random family on a subset of ``atoms`` with Dirichlet weights."""
    m = int(rng.integers(n_laws[0], n_laws[1] + 1))
    k = int(rng.integers(n_atoms[0], n_atoms[1] + 1))
    laws = []
    for _ in range(m):
        vals = rng.choice(np.asarray(atoms), size=k, replace=False)
        w = rng.dirichlet(np.ones(k))
        laws.append([(float(v), float(p)) for v, p in zip(vals, w)])
    fam = MeasureFamily.from_lists(_renormalize(laws))
    return fam


def _renormalize(laws):
    out = []
    for law in laws:
        s = math.fsum(p for _, p in law)
        out.append([(v, p / s) for v, p in law])
    return out
