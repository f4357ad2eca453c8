"""Known-model oracle.

Optimal reachability values, exact rational evaluation of memoryless
deterministic policies, brute-force policy enumeration, the value gap
between optimal and runner-up policies, transition complexity and the
closed-form lower bound on value differences.
"""
from __future__ import annotations

import itertools
import math
from collections import defaultdict, deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

import numpy as np

from .bvi import bvi_sweep, extract_policy, reset_bounds
from .collapse import collapse, mec_decomposition
from .mdp import Mdp, MemorylessDetPolicy, induced_chain, zero_value_states

#: default refusal threshold for :func:`enumerate_policies`
POLICY_CAP = 10**6


class PolicyEnumerationError(RuntimeError):
    """The model has more policies than the enumeration cap allows."""

    def __init__(self, count: int, cap: int):
        self.count = count
        self.cap = cap
        super().__init__(f"model has {count} memoryless deterministic policies, cap is {cap}")


class ConvergenceError(RuntimeError):
    pass


# -- optimal values -------------------------------------------------------


@dataclass
class OptimalValues:
    value: float
    per_state: np.ndarray
    policy: MemorylessDetPolicy
    sweeps: int


def solve_optimal(m: Mdp, tolerance: float = 1e-12, certify: float = 1e-10,
                  max_sweeps: int = 10**6) -> OptimalValues:
    """Optimal reachability values via collapsed interval iteration.

    True MECs are collapsed, states with value zero are pinned, and sweeps
    run until no bound moves by ``tolerance``; the result is accepted once
    ``U - L < certify`` at the initial state.
    """
    mecs = mec_decomposition(m.successor_map())
    cm = collapse(m.probability_map(), mecs, m.target, m.initial)
    zero = {cm.membership[s] for s in zero_value_states(m)}
    v = reset_bounds(cm, zero)
    for _ in range(max_sweeps):
        nxt = bvi_sweep(cm, v, zero)
        delta = max(np.max(np.abs(nxt.L_state - v.L_state)), np.max(np.abs(nxt.U_state - v.U_state)))
        v = nxt
        if delta < tolerance and v.gap(cm.initial) < certify:
            break
    else:
        raise ConvergenceError(f"no convergence after {max_sweeps} sweeps, gap {v.gap(cm.initial)}")
    mid = (v.L_state + v.U_state) / 2
    per_state = np.array([mid[cm.membership[s]] for s in range(m.num_states)])
    ext = extract_policy(cm, v, m.num_states, m.available, None, m.target)
    return OptimalValues(float(per_state[m.initial]), per_state, ext.policy, v.sweeps)


def optimal_value(m: Mdp) -> tuple[float, np.ndarray]:
    """``(value at s0, values of all states)``."""
    res = solve_optimal(m)
    return res.value, res.per_state


def optimal_value_exact(m: Mdp) -> Fraction:
    """Exact optimal value at s0: the value of an extracted optimal policy."""
    return policy_value_exact(m, solve_optimal(m).policy)[m.initial]


# -- policy evaluation -----------------------------------------------------


def _positive_states(chain, target) -> set[int]:
    preds = defaultdict(set)
    for s, row in enumerate(chain):
        for t, _ in row:
            preds[t].add(s)
    good = set(target)
    queue = deque(good)
    while queue:
        t = queue.popleft()
        for s in preds[t]:
            if s not in good:
                good.add(s)
                queue.append(s)
    return good


def bareiss_solve(A: list[list[int]], b: list[int]) -> list[Fraction]:
    """Exact solution of ``A x = b`` for a nonsingular integer matrix.

    Fraction-free (Bareiss) elimination on the augmented matrix keeps all
    intermediates integral; only the back substitution uses fractions.
    """
    n = len(A)
    M = [list(row) + [rhs] for row, rhs in zip(A, b)]
    prev = 1
    for k in range(n - 1):
        if M[k][k] == 0:
            for i in range(k + 1, n):
                if M[i][k] != 0:
                    M[k], M[i] = M[i], M[k]
                    break
            else:
                raise ZeroDivisionError("singular system")
        pivot = M[k][k]
        for i in range(k + 1, n):
            for j in range(k + 1, n + 1):
                M[i][j] = (M[i][j] * pivot - M[i][k] * M[k][j]) // prev
            M[i][k] = 0
        prev = pivot
    if n and M[n - 1][n - 1] == 0:
        raise ZeroDivisionError("singular system")
    x = [Fraction(0)] * n
    for i in range(n - 1, -1, -1):
        acc = Fraction(M[i][n])
        for j in range(i + 1, n):
            acc -= M[i][j] * x[j]
        x[i] = acc / M[i][i]
    return x


def _reduced_system(m: Mdp, policy: MemorylessDetPolicy):
    chain = induced_chain(m, policy)
    target = m.target
    positive = _positive_states(chain, target)
    free = [s for s in range(m.num_states) if s in positive and s not in target]
    return chain, target, free


def policy_value_exact(m: Mdp, policy: MemorylessDetPolicy) -> list[Fraction]:
    """Reachability probability of every state under ``policy``, exactly.

    States that cannot reach the target under the policy are pinned to zero
    first, which leaves a nonsingular system for the rest.
    """
    chain, target, free = _reduced_system(m, policy)
    col = {s: i for i, s in enumerate(free)}
    A, b = [], []
    for s in free:
        row = chain[s]
        scale = math.lcm(*(p.denominator for _, p in row))
        line = [0] * len(free)
        line[col[s]] += scale
        rhs = 0
        for t, p in row:
            w = int(p * scale)
            if t in target:
                rhs += w
            elif t in col:
                line[col[t]] -= w
        A.append(line)
        b.append(rhs)
    x = bareiss_solve(A, b) if free else []
    values = [Fraction(0)] * m.num_states
    for s in target:
        values[s] = Fraction(1)
    for s, val in zip(free, x):
        values[s] = val
    return values


def policy_value(m: Mdp, policy: MemorylessDetPolicy) -> np.ndarray:
    """Floating-point counterpart of :func:`policy_value_exact`."""
    chain, target, free = _reduced_system(m, policy)
    col = {s: i for i, s in enumerate(free)}
    n = len(free)
    A = np.eye(n)
    b = np.zeros(n)
    for s in free:
        for t, p in chain[s]:
            if t in target:
                b[col[s]] += float(p)
            elif t in col:
                A[col[s], col[t]] -= float(p)
    values = np.zeros(m.num_states)
    values[list(target)] = 1.0
    if n:
        values[free] = np.linalg.solve(A, b)
    return values


def residual_exact(m: Mdp, policy: MemorylessDetPolicy, values: list[Fraction]) -> list[Fraction]:
    """``v - (v A + r)`` restricted to states, in exact arithmetic."""
    chain = induced_chain(m, policy)
    out = []
    for s in range(m.num_states):
        if s in m.target:
            out.append(values[s] - 1)
        else:
            out.append(values[s] - sum(p * values[t] for t, p in chain[s]))
    return out


# -- enumeration and gaps ------------------------------------------------


def count_policies(m: Mdp) -> int:
    return math.prod(len(m.available(s)) for s in range(m.num_states))


def enumerate_policies(m: Mdp, cap: int = POLICY_CAP) -> Iterator[MemorylessDetPolicy]:
    """All memoryless deterministic policies in lexicographic order."""
    count = count_policies(m)
    if count > cap:
        raise PolicyEnumerationError(count, cap)
    choices = [m.available(s) for s in range(m.num_states)]
    for combo in itertools.product(*choices):
        yield MemorylessDetPolicy(tuple(combo))


def brute_force_optimum(m: Mdp, cap: int = POLICY_CAP) -> float:
    """Best float policy value at s0 over all enumerated policies."""
    return max(policy_value(m, pi)[m.initial] for pi in enumerate_policies(m, cap))


def transition_complexity(m: Mdp) -> int:
    """Max over pairs of the lcm of the successor-probability denominators."""
    return max((math.lcm(*(p.denominator for _, p in row)) for row in m.rows().values()), default=1)


def eps_diff_bound(m: Mdp) -> Fraction:
    """``(2D)^(-2|A||S|) * 2^(-2|S|)`` as an exact rational."""
    d = transition_complexity(m)
    n_s, n_a = m.num_states, m.num_actions
    return Fraction(1, (2 * d) ** (2 * n_a * n_s) * 2 ** (2 * n_s))


@dataclass(frozen=True)
class GapCertificate:
    """Exact gap data for a model.

    ``eps_diff`` is the s0-value gap between the best and the best strictly
    worse policy; ``min_l1`` is the smallest positive L1 distance between the
    value vectors of two policies.  Either is ``None`` when all policies tie.
    """

    optimal_value: Fraction
    runner_up_value: Fraction | None
    eps_diff: Fraction | None
    min_l1: Fraction | None
    bound: Fraction
    D: int
    num_policies: int


def min_gap(m: Mdp, cap: int = POLICY_CAP) -> GapCertificate:
    vectors = {tuple(policy_value_exact(m, pi)) for pi in enumerate_policies(m, cap)}
    at_s0 = sorted({vec[m.initial] for vec in vectors}, reverse=True)
    best = at_s0[0]
    runner = at_s0[1] if len(at_s0) > 1 else None
    vecs = sorted(vectors)
    min_l1 = None
    for i in range(len(vecs)):
        for j in range(i + 1, len(vecs)):
            d = sum(abs(x - y) for x, y in zip(vecs[i], vecs[j]))
            if d > 0 and (min_l1 is None or d < min_l1):
                min_l1 = d
    return GapCertificate(
        optimal_value=best,
        runner_up_value=runner,
        eps_diff=best - runner if runner is not None else None,
        min_l1=min_l1,
        bound=eps_diff_bound(m),
        D=transition_complexity(m),
        num_policies=count_policies(m),
    )
