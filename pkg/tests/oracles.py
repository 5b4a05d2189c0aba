"""Reference implementations that share no code with the package.

Everything here is plain Python over explicit histories, so it is slow but
easy to audit.  Laws are lists of ``(value, prob)`` pairs and a family is a
list of laws.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

import numpy as np


def family_laws(fam):
    """Convert a package family into nested Python lists."""
    return [[(float(v), float(p)) for v, p in law.atoms] for law in fam.laws]


def support(laws):
    return sorted({v for law in laws for v, _ in law})


def law_prob(law, v):
    return sum(p for a, p in law if a == v)


def nested_value(laws_per_step, payoff, prefix=()):
    """Nested max over histories: at each node take the best law's expected child value."""
    k = len(prefix)
    if k == len(laws_per_step):
        return payoff(prefix)
    laws = laws_per_step[k]
    pts = support(laws)
    child = {v: nested_value(laws_per_step, payoff, prefix + (v,)) for v in pts}
    return max(sum(law_prob(law, v) * child[v] for v in pts) for law in laws)


def _internal_nodes(laws_per_step):
    nodes = [()]
    frontier = [()]
    for laws in laws_per_step[:-1]:
        pts = support(laws)
        frontier = [h + (v,) for h in frontier for v in pts]
        nodes.extend(frontier)
    return nodes


def strategy_count(laws_per_step):
    nodes = _internal_nodes(laws_per_step)
    return math.prod(len(laws_per_step[len(h)]) for h in nodes)


def strategy_value(laws_per_step, payoff, strategy):
    """Linear expectation of ``payoff`` under an adapted strategy ``history -> law index``."""
    total = 0.0
    pts = [support(laws) for laws in laws_per_step]
    for path in itertools.product(*pts):
        p = 1.0
        for k, v in enumerate(path):
            p *= law_prob(laws_per_step[k][strategy[path[:k]]], v)
            if p == 0.0:
                break
        if p:
            total += p * payoff(path)
    return total


def exhaustive_strategy_max(laws_per_step, payoff, limit=1 << 16):
    """Maximum over every adapted strategy; ``None`` when there are more than ``limit``."""
    if strategy_count(laws_per_step) > limit:
        return None
    nodes = _internal_nodes(laws_per_step)
    choices = [range(len(laws_per_step[len(h)])) for h in nodes]
    best = -math.inf
    for pick in itertools.product(*choices):
        best = max(best, strategy_value(laws_per_step, payoff, dict(zip(nodes, pick))))
    return best


def optimal_strategy(laws_per_step, payoff):
    """Greedy best-response strategy read off the nested recursion."""
    strat = {}

    def rec(prefix):
        k = len(prefix)
        if k == len(laws_per_step):
            return payoff(prefix)
        laws = laws_per_step[k]
        pts = support(laws)
        child = {v: rec(prefix + (v,)) for v in pts}
        vals = [sum(law_prob(law, v) * child[v] for v in pts) for law in laws]
        strat[prefix] = int(np.argmax(vals))
        return max(vals)

    rec(())
    return strat


def no_profitable_deviation(laws_per_step, payoff, strategy, tol=1e-12):
    """Policy-iteration certificate: no single-node switch raises the linear value."""
    base = strategy_value(laws_per_step, payoff, strategy)
    for node in strategy:
        for j in range(len(laws_per_step[len(node)])):
            if j == strategy[node]:
                continue
            alt = dict(strategy)
            alt[node] = j
            if strategy_value(laws_per_step, payoff, alt) > base + tol:
                return False
    return True


def multinomial_tail(law, n, event):
    """``P(event(S_n, V_n^2))`` for ``n`` i.i.d. draws of one law, by count enumeration."""
    vals = [Fraction(v).limit_denominator(10 ** 9) for v, _ in law]
    probs = [p for _, p in law]
    k = len(vals)
    total = 0.0
    for counts in _compositions(n, k):
        s = float(sum(c * v for c, v in zip(counts, vals)))
        v2 = float(sum(c * v * v for c, v in zip(counts, vals)))
        if event(s, v2):
            coef = math.factorial(n)
            for c in counts:
                coef //= math.factorial(c)
            total += coef * math.prod(p ** c for p, c in zip(probs, counts))
    return total


def _compositions(n, k):
    if k == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in _compositions(n - first, k - 1):
            yield (first,) + rest


def normal_expectation_trapezoid(phi, sigma, half_width=12.0, points=400001):
    """``E[phi(sigma Z)]`` by the trapezoid rule on a uniform grid."""
    z = np.linspace(-half_width, half_width, points)
    y = phi(sigma * z) * np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
    h = z[1] - z[0]
    return float(h * (y.sum() - 0.5 * (y[0] + y[-1])))
