"""Hoeffding lower estimates of transition probabilities and per-stage
confidence budgets."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .mdp import CountTable


@dataclass(frozen=True)
class ConfidenceBudget:
    """Split of a stage's error budget ``delta_k``.

    ``delta_tp`` covers transition estimates, ``delta_ec`` end-component
    detection and ``delta_nk`` the chance that some transition is seen too
    rarely.  The per-transition shares are each component scaled by
    ``p_k / sa_count``.
    """

    delta_k: float
    delta_tp: float
    delta_ec: float
    delta_nk: float
    delta_p: float
    delta_c: float
    delta_n: float
    sa_count: int


def split_budget(delta_k: float, p_k: float, sa_count: int) -> ConfidenceBudget:
    if not 0 < delta_k < 1 or not 0 < p_k < 1:
        raise ValueError("delta_k and p_k must lie in (0, 1)")
    if sa_count < 1:
        raise ValueError("sa_count must be >= 1")
    third = delta_k / 3
    share = p_k / sa_count
    return ConfidenceBudget(
        delta_k=delta_k,
        delta_tp=third,
        delta_ec=third,
        delta_nk=third,
        delta_p=third * share,
        delta_c=third * share,
        delta_n=third * share,
        sa_count=sa_count,
    )


def hoeffding_width(n: int, delta_p: float) -> float:
    """Two-sided Hoeffding radius ``sqrt(ln(delta_p / 2) / (-2 n))``.

    With ``n`` samples the empirical frequency is farther than this from the
    true probability with chance at most ``delta_p``.
    """
    if n < 1:
        raise ValueError("no samples: width undefined for n = 0")
    if not 0 < delta_p < 1:
        raise ValueError("delta_p must lie in (0, 1)")
    return math.sqrt(math.log(delta_p / 2) / (-2 * n))


@dataclass
class EstimatedModel:
    """Lower-estimated probabilities for every observed triple.

    ``lower[(s, a)]`` maps each observed successor to its estimate; unobserved
    successors are simply absent.
    """

    lower: dict[tuple[int, int], dict[int, float]] = field(default_factory=dict)
    widths: dict[tuple[int, int], float] = field(default_factory=dict)

    def get(self, s: int, a: int, t: int) -> float:
        return self.lower.get((s, a), {}).get(t, 0.0)

    def mass(self, s: int, a: int) -> float:
        return sum(self.lower.get((s, a), {}).values())

    def as_probability_map(self) -> dict[int, dict[int, dict[int, float]]]:
        out: dict[int, dict[int, dict[int, float]]] = {}
        for (s, a), row in self.lower.items():
            out.setdefault(s, {})[a] = dict(row)
        return out


def clamp_estimate(count: int, total: int, width: float) -> float:
    return max(0.0, count / total - width)


def lower_estimate(counts: CountTable, delta_p: float) -> EstimatedModel:
    est = EstimatedModel()
    for s, a in counts.pairs():
        n = counts.pair(s, a)
        c = hoeffding_width(n, delta_p)
        est.widths[(s, a)] = c
        est.lower[(s, a)] = {t: clamp_estimate(k, n, c) for t, k in sorted(counts.successors(s, a).items())}
    return est
