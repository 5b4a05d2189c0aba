"""Backward induction for independent sequences under a sub-linear expectation.

For ``X_1, ..., X_n`` where each ``X_{i+1}`` is independent of the past, the
upper expectation of ``phi(X_1, ..., X_n)`` is the nested value
``E[E[...E[phi(x_1, ..., x_{n-1}, X_n)]...]]``.  On finite supports this is a
game tree: at every history an adversary picks the law of the next variable
and the value is the maximum over laws of the expected child value.

Two engines are provided:

* :class:`AdversarialTree` enumerates the full outcome tree (``prod k_i``
  leaves) and accepts arbitrary path payoffs.
* :class:`StateDP` runs on the reachable set of a sufficient statistic
  (for example ``(S_i, V_i^2)``), merging histories that share a state.
  States are merged only on exact float equality, so no grid rounding occurs.

Ties in the adversarial max go to the first law in declaration order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp

from .core import CapacityPair, ConfigurationError, MeasureFamily, ResourceError

MAX_LEAVES = 1 << 22
MAX_STATES = 5_000_000


def _as_steps(fam_or_steps, n=None) -> list[MeasureFamily]:
    if isinstance(fam_or_steps, MeasureFamily):
        if n is None or n < 1:
            raise ConfigurationError("n must be >= 1")
        return [fam_or_steps] * n
    steps = list(fam_or_steps)
    if not steps:
        raise ConfigurationError("need at least one step")
    return steps


def _reduce(child_vals: np.ndarray, probs: np.ndarray, log_space: bool):
    """Max over laws of the expected child value.

    ``child_vals`` has atoms on the last axis; returns (value, argmax law).
    """
    if log_space:
        with np.errstate(divide="ignore"):
            logp = np.log(probs)
        per_law = np.stack([logsumexp(child_vals + lp, axis=-1) for lp in logp], axis=-1)
    else:
        per_law = child_vals @ probs.T
    choice = np.argmax(per_law, axis=-1)
    return np.take_along_axis(per_law, choice[..., None], axis=-1)[..., 0], choice


@dataclass
class AdversarialTree:
    """Full outcome tree; ``payoff`` maps an ``(N, n)`` array of paths to ``N`` values."""

    steps: list[MeasureFamily]
    payoff: Callable[[np.ndarray], np.ndarray]
    log_space: bool = False
    max_leaves: int = MAX_LEAVES
    value_cache: list[np.ndarray] = field(default_factory=list, repr=False)
    policy: list[np.ndarray] = field(default_factory=list, repr=False)

    @property
    def depth(self) -> int:
        return len(self.steps)

    def leaves(self) -> np.ndarray:
        shape = tuple(f.n_atoms for f in self.steps)
        if int(np.prod(shape, dtype=float)) > self.max_leaves:
            raise ResourceError(f"outcome tree has {np.prod(shape, dtype=float):.3g} leaves "
                                f"(limit {self.max_leaves}); declare a sufficient statistic")
        grids = np.meshgrid(*[f.support for f in self.steps], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1), shape

    def solve(self) -> float:
        paths, shape = self.leaves()
        vals = np.asarray(self.payoff(paths), dtype=float).reshape(shape)
        if not self.log_space and not np.all(np.isfinite(vals)):
            raise ValueError("payoff is not finite on every leaf")
        cache = [vals]
        pol = []
        for fam in reversed(self.steps):
            vals, choice = _reduce(vals, fam.probs, self.log_space)
            cache.append(vals)
            pol.append(choice)
        self.value_cache = cache[::-1]
        self.policy = pol[::-1]
        return float(vals)


@dataclass
class StateLayer:
    cols: tuple[np.ndarray, ...]
    child: np.ndarray | None = None  # (n_states, n_atoms) indices into the next layer


class StateDP:
    """Backward induction on the reachable set of a sufficient statistic.

    ``transition(cols, atom)`` maps the state columns of one layer to the
    columns after observing ``atom``; ``init`` is the initial state.
    """

    def __init__(self, steps, init: Sequence[float], transition, *, max_states: int = MAX_STATES):
        self.steps = list(steps)
        self.transition = transition
        self.layers: list[StateLayer] = []
        total = 1
        cols = tuple(np.array([float(v)]) for v in init)
        for fam in self.steps:
            kids = [transition(cols, a) for a in fam.support]
            stacked = np.stack([np.concatenate([kid[d] for kid in kids]) for d in range(len(cols))],
                               axis=1)
            uniq, inv = np.unique(stacked, axis=0, return_inverse=True)
            inv = np.asarray(inv).reshape(fam.n_atoms, -1).T
            self.layers.append(StateLayer(cols, inv))
            cols = tuple(uniq[:, d].copy() for d in range(uniq.shape[1]))
            total += len(uniq)
            if total > max_states:
                raise ResourceError(f"reachable state count exceeds {max_states}")
        self.layers.append(StateLayer(cols))
        self.n_states = total

    @property
    def terminal(self) -> tuple[np.ndarray, ...]:
        return self.layers[-1].cols

    def value(self, terminal_values: np.ndarray, *, log_space: bool = False, policy: bool = False):
        vals = np.asarray(terminal_values, dtype=float)
        choices = []
        for layer, fam in zip(reversed(self.layers[:-1]), reversed(self.steps)):
            vals, choice = _reduce(vals[layer.child], fam.probs, log_space)
            choices.append(choice)
        v = float(vals[0])
        return (v, choices[::-1]) if policy else v

    def fixed_policy_value(self, terminal_values: np.ndarray, policy: Sequence[np.ndarray]) -> float:
        """Linear value of a given per-layer law choice (no maximization)."""
        vals = np.asarray(terminal_values, dtype=float)
        for layer, fam, choice in zip(reversed(self.layers[:-1]), reversed(self.steps),
                                      reversed(policy)):
            per_law = vals[layer.child] @ fam.probs.T
            vals = per_law[np.arange(len(choice)), choice]
        return float(vals[0])


def _sv_transition(cols, a):
    s, v2 = cols
    return s + a, v2 + a * a


def sum_sq_dp(steps, *, max_states: int = MAX_STATES) -> StateDP:
    """State DP on ``(S_i, V_i^2)``."""
    return StateDP(steps, (0.0, 0.0), _sv_transition, max_states=max_states)


def iid_sequence_value(payoff, fam: MeasureFamily, n: int, *, statistic: str | None = None,
                       max_leaves: int = MAX_LEAVES, max_states: int = MAX_STATES) -> float:
    """Upper expectation of ``payoff`` over an i.i.d. sequence of length ``n``.

    With ``statistic=None`` the payoff receives the ``(N, n)`` array of paths
    and the full tree is enumerated.  With ``statistic="sum_sq"`` it receives
    ``(S_n, V_n^2)`` arrays and the compressed DP is used.
    """
    steps = _as_steps(fam, n)
    if statistic is None:
        return AdversarialTree(steps, payoff, max_leaves=max_leaves).solve()
    if statistic == "sum_sq":
        dp = sum_sq_dp(steps, max_states=max_states)
        s, v2 = dp.terminal
        return dp.value(np.asarray(payoff(s, v2), dtype=float) * np.ones_like(s))
    raise ConfigurationError(f"unknown statistic {statistic!r}")


def sequence_capacity(event_sv, steps, *, dp: StateDP | None = None) -> CapacityPair:
    """Capacity pair of an event ``{event_sv(S_n, V_n^2)}`` over the sequence ``steps``."""
    dp = dp or sum_sq_dp(steps)
    s, v2 = dp.terminal
    ind = np.asarray(event_sv(s, v2), dtype=bool).astype(float)
    upper = dp.value(ind)
    lower = 1.0 - dp.value(1.0 - ind)
    return CapacityPair(upper, lower)
