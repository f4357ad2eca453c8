"""Small hand-built models and a random model generator."""
from __future__ import annotations

import itertools
from fractions import Fraction as F

import numpy as np

from .mdp import Mdp, zero_value_states


def fig1() -> Mdp:
    """Four states: ``s0`` reaches ``T`` or the cycle ``s1 <-> s2`` with
    probability 1/2 each.  ``T`` has a self loop so every state has an
    action.  Optimal value 1/2."""
    s0, s1, s2, t = range(4)
    return Mdp(4, s0, ["a"], {
        (s0, 0): [(t, F(1, 2)), (s1, F(1, 2))],
        (s1, 0): [(s2, 1)],
        (s2, 0): [(s1, 1)],
        (t, 0): [(t, 1)],
    }, {"goal": [t]})


def fig1_with_detour() -> Mdp:
    """:func:`fig1` plus a worse action ``b`` at ``s0`` (value 1/4)."""
    s0, s1, s2, t = range(4)
    return Mdp(4, s0, ["a", "b"], {
        (s0, 0): [(t, F(1, 2)), (s1, F(1, 2))],
        (s0, 1): [(t, F(1, 4)), (s2, F(3, 4))],
        (s1, 0): [(s2, 1)],
        (s2, 0): [(s1, 1)],
        (t, 0): [(t, 1)],
    }, {"goal": [t]})


def layered() -> Mdp:
    """Six states in three layers plus a goal and a sink; optimal value 21/32
    via ``b`` at ``s0`` then ``a`` at ``u``."""
    s0, u, w, x, goal, sink = range(6)
    return Mdp(6, s0, ["a", "b"], {
        (s0, 0): [(u, F(1, 2)), (w, F(1, 2))],
        (s0, 1): [(u, F(3, 4)), (sink, F(1, 4))],
        (u, 0): [(goal, F(3, 4)), (x, F(1, 4))],
        (u, 1): [(x, 1)],
        (w, 0): [(x, F(1, 2)), (sink, F(1, 2))],
        (w, 1): [(goal, F(1, 4)), (sink, F(3, 4))],
        (x, 0): [(goal, F(1, 2)), (sink, F(1, 2))],
        (x, 1): [(goal, F(1, 4)), (w, F(3, 4))],
        (goal, 0): [(goal, 1)],
        (sink, 0): [(sink, 1)],
    }, {"goal": [goal]})


def trap() -> Mdp:
    """Every run ends in the end component ``{s1, s2}``; the goal is
    unreachable, so the value is 0."""
    s0, s1, s2, t = range(4)
    return Mdp(4, s0, ["a", "b"], {
        (s0, 0): [(s1, F(1, 2)), (s2, F(1, 2))],
        (s1, 0): [(s2, 1)],
        (s1, 1): [(s1, 1)],
        (s2, 0): [(s1, 1)],
        (t, 0): [(t, 1)],
    }, {"goal": [t]})


def target_in_mec() -> Mdp:
    """The goal lies inside the end component ``{s1, s2, T}``.  Optimal
    value 3/4 via ``b`` at ``s0``."""
    s0, s1, s2, t, sink = range(5)
    return Mdp(5, s0, ["a", "b"], {
        (s0, 0): [(s1, F(1, 2)), (sink, F(1, 2))],
        (s0, 1): [(s2, F(3, 4)), (sink, F(1, 4))],
        (s1, 0): [(s2, F(1, 2)), (t, F(1, 2))],
        (s2, 0): [(s1, 1)],
        (s2, 1): [(sink, 1)],
        (t, 0): [(s1, 1)],
        (sink, 0): [(sink, 1)],
    }, {"goal": [t]})


def token_ring(n: int = 3) -> Mdp:
    """Randomised self-stabilisation on a ring of ``n`` processes.

    A state is the non-empty set of processes holding a token.  The
    scheduler picks a token holder (action ``pick<i>``), whose token moves
    left or right with probability 1/2 each, merging with any token already
    there.  Target: exactly one token.  Initially every process holds one.
    For ``n = 3`` this has 7 states and 21 transitions.
    """
    subsets = [frozenset(c) for r in range(1, n + 1) for c in itertools.combinations(range(n), r)]
    index = {s: i for i, s in enumerate(subsets)}
    transitions = {}
    for s in subsets:
        for i in sorted(s):
            row: dict[int, F] = {}
            for j in ((i - 1) % n, (i + 1) % n):
                nxt = index[(s - {i}) | {j}]
                row[nxt] = row.get(nxt, F(0)) + F(1, 2)
            transitions[(index[s], i)] = list(row.items())
    target = [index[s] for s in subsets if len(s) == 1]
    return Mdp(len(subsets), index[frozenset(range(n))], [f"pick{i}" for i in range(n)],
               transitions, {"goal": target})


def _row(rng: np.random.Generator, n: int, max_den: int, max_support: int):
    den = int(rng.integers(1, max_den + 1))
    k = int(rng.integers(1, min(max_support, den, n) + 1))
    succ = rng.choice(n, size=k, replace=False)
    # a random composition of den into k positive parts
    cuts = sorted(rng.choice(np.arange(1, den), size=k - 1, replace=False)) if k > 1 else []
    parts = np.diff([0, *cuts, den])
    return [(int(t), F(int(w), den)) for t, w in zip(succ, parts)]


def random_mdp(rng: np.random.Generator | int, max_states: int = 8, max_actions: int = 3,
               max_den: int = 4, min_states: int = 2, max_support: int = 3) -> Mdp:
    """A random model with rational probabilities of denominator at most
    ``max_den`` whose target (the last state) is reachable from ``s0``."""
    rng = np.random.default_rng(rng)
    while True:
        n = int(rng.integers(min_states, max_states + 1))
        n_act = int(rng.integers(1, max_actions + 1))
        goal = n - 1
        transitions = {(goal, 0): [(goal, F(1))]}
        for s in range(n - 1):
            acts = [a for a in range(n_act) if rng.random() < 0.7] or [int(rng.integers(n_act))]
            for a in acts:
                transitions[(s, a)] = _row(rng, n, max_den, max_support)
        m = Mdp(n, 0, [f"a{i}" for i in range(n_act)], transitions, {"goal": [goal]})
        if 0 not in zero_value_states(m):
            return m


def random8() -> Mdp:
    """A fixed random 8-state model."""
    return random_mdp(np.random.default_rng(20240), max_states=8, min_states=8)


GOLDEN = {
    "fig1": fig1,
    "fig1_detour": fig1_with_detour,
    "layered": layered,
    "trap": trap,
    "target_in_mec": target_in_mec,
    "random8": random8,
    "token_ring3": token_ring,
}
