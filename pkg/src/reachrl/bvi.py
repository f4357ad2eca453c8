"""Bounded value iteration on a collapsed model and policy extraction."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .collapse import CollapsedMdp
from .mdp import MemorylessDetPolicy

#: two pair values closer than this count as tied
TIE_TOLERANCE = 1e-12


@dataclass
class IntervalValues:
    """Lower/upper bounds per quotient state and per quotient action.

    Pair arrays are indexed in the order of :attr:`CompiledModel.labels`.
    """

    L_state: np.ndarray
    U_state: np.ndarray
    L_pair: np.ndarray
    U_pair: np.ndarray
    sweeps: int = 0

    def gap(self, q: int) -> float:
        return float(self.U_state[q] - self.L_state[q])

    def copy(self) -> "IntervalValues":
        return IntervalValues(self.L_state.copy(), self.U_state.copy(), self.L_pair.copy(),
                              self.U_pair.copy(), self.sweeps)


class CompiledModel:
    """Flat array view of a :class:`CollapsedMdp` for fast sweeps."""

    def __init__(self, cm: CollapsedMdp):
        owner, labels, staying, rows, cols, vals = [], [], [], [], [], []
        first = np.full(cm.num_states, -1, dtype=np.int64)
        for q, acts in enumerate(cm.actions):
            for act in acts:
                i = len(labels)
                if first[q] < 0:
                    first[q] = i
                owner.append(q)
                labels.append(act.label)
                staying.append(act.staying)
                if not act.staying:
                    for t, p in act.successors:
                        rows.append(i)
                        cols.append(t)
                        vals.append(float(p))
        n_pairs = len(labels)
        self.owner = np.asarray(owner, dtype=np.int64)
        self.labels: list[tuple[int, int]] = labels
        self.staying = np.asarray(staying, dtype=bool)
        self.P = sparse.csr_matrix((vals, (rows, cols)), shape=(n_pairs, cm.num_states))
        self.mass = np.asarray(self.P.sum(axis=1)).ravel()
        self.pin = np.zeros(n_pairs)
        for i, q in enumerate(owner):
            if staying[i] and q in cm.target_mecs:
                self.pin[i] = 1.0
        self.has_actions = first >= 0
        self.starts = first[self.has_actions]
        self.target_mask = np.zeros(cm.num_states, dtype=bool)
        for q in cm.target | cm.target_mecs:
            self.target_mask[q] = True
        self.pair_index = {(q, lab): i for i, (q, lab) in enumerate(zip(owner, labels))}


def compiled(cm: CollapsedMdp) -> CompiledModel:
    if cm._compiled is None:
        cm._compiled = CompiledModel(cm)
    return cm._compiled


def reset_bounds(cm: CollapsedMdp, zero_states=()) -> IntervalValues:
    """Fresh bounds: ``U = 1`` everywhere, ``L = 1`` on targets and 0
    elsewhere, staying actions pinned.  ``zero_states`` (quotient ids known to
    have value 0) start with ``U = 0``."""
    c = compiled(cm)
    n = cm.num_states
    L = np.where(c.target_mask, 1.0, 0.0)
    U = np.ones(n)
    for q in zero_states:
        if not c.target_mask[q]:
            U[q] = 0.0
    L_pair = np.where(c.staying, c.pin, 0.0)
    U_pair = np.where(c.staying, c.pin, 1.0)
    return IntervalValues(L, U, L_pair, U_pair)


def bvi_sweep(cm: CollapsedMdp, v: IntervalValues, zero_states=()) -> IntervalValues:
    """One synchronous update of all pair and state bounds."""
    c = compiled(cm)
    L_pair = c.P @ v.L_state
    U_pair = c.P @ v.U_state + (1.0 - c.mass)
    L_pair = np.where(c.staying, c.pin, L_pair)
    U_pair = np.where(c.staying, c.pin, U_pair)
    L = v.L_state.copy()
    U = v.U_state.copy()
    if len(c.starts):
        L[c.has_actions] = np.maximum.reduceat(L_pair, c.starts)
        U[c.has_actions] = np.maximum.reduceat(U_pair, c.starts)
    L[c.target_mask] = 1.0
    U[c.target_mask] = 1.0
    for q in zero_states:
        if not c.target_mask[q]:
            U[q] = 0.0
    return IntervalValues(L, U, L_pair, U_pair, v.sweeps + 1)


def run_bvi(cm: CollapsedMdp, iterations: int, tolerance: float | None = None,
            zero_states=(), trace: list | None = None) -> IntervalValues:
    """``iterations`` sweeps from fresh bounds.

    With ``tolerance`` set, stops early once no state bound moves by more
    than that amount in a sweep.  ``trace`` (a list) receives
    ``(L(s0), U(s0))`` after every sweep.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    v = reset_bounds(cm, zero_states)
    for _ in range(iterations):
        nxt = bvi_sweep(cm, v, zero_states)
        if trace is not None:
            trace.append((float(nxt.L_state[cm.initial]), float(nxt.U_state[cm.initial])))
        if tolerance is not None and v.sweeps > 0:
            delta = max(np.max(np.abs(nxt.L_state - v.L_state), initial=0.0),
                        np.max(np.abs(nxt.U_state - v.U_state), initial=0.0))
            v = nxt
            if delta < tolerance:
                break
        else:
            v = nxt
    return v


@dataclass
class ExtractedPolicy:
    """Result of :func:`extract_policy`.

    ``best`` holds the action set that guides the next stage's simulations;
    ``fallback`` lists states that had no observed action and were assigned
    one at random.
    """

    policy: MemorylessDetPolicy
    best: dict[int, tuple[int, ...]]
    fallback: list[int]


def extract_policy(cm: CollapsedMdp, v: IntervalValues, num_states: int, available,
                   rng: np.random.Generator | None = None, target=()) -> ExtractedPolicy:
    """Memoryless deterministic policy on the original states.

    Args:
        cm: the collapsed model the bounds were computed on.
        v: bounds from :func:`run_bvi`.
        num_states: number of original states.
        available: callable ``s -> list of action indices`` of the true model.
        rng: used for states without any observed action; lowest index if None.
        target: original target states (their choice is irrelevant).
    """
    c = compiled(cm)
    choice: dict[int, int] = {}
    best: dict[int, tuple[int, ...]] = {}
    target = frozenset(target)

    for q, acts in enumerate(cm.actions):
        if not acts:
            continue
        ec = cm.super_states.get(q)
        if ec is None:
            (s,) = cm.members[q]
            vals = {act.label[1]: v.U_pair[c.pair_index[(q, act.label)]] for act in acts}
            top = max(vals.values())
            argmax = tuple(sorted(a for a, u in vals.items() if u >= top - TIE_TOLERANCE))
            choice[s] = argmax[0]
            best[s] = argmax
            continue
        _extract_mec(cm, c, q, ec, v, choice, best, target)

    fallback = []
    for s in range(num_states):
        if s in choice:
            continue
        av = list(available(s))
        if not av:
            raise ValueError(f"state {s} has no available action")
        best[s] = tuple(av)
        if s in target or rng is None:
            choice[s] = av[0]
        else:
            choice[s] = int(av[int(rng.integers(len(av)))])
        if s not in target:
            fallback.append(s)
    policy = MemorylessDetPolicy(tuple(choice[s] for s in range(num_states)))
    return ExtractedPolicy(policy, best, fallback)


def _extract_mec(cm, c, q, ec, v, choice, best, target):
    acts = cm.actions[q]
    if q in cm.target_mecs:
        goals = {s: None for s in ec.states if s in target}
    else:
        exits = [act for act in acts if not act.staying]
        goals = {}
        if exits:
            vals = [(v.U_pair[c.pair_index[(q, act.label)]], act.label) for act in exits]
            top = max(u for u, _ in vals)
            for u, (s, a) in sorted(vals, key=lambda x: x[1]):
                if u >= top - TIE_TOLERANCE:
                    goals.setdefault(s, []).append(a)
    for s, acts_here in goals.items():
        if acts_here is None:
            a = ec.actions_of(s)[0] if ec.actions_of(s) else None
            if a is None:
                continue
            choice[s] = a
            best[s] = (a,)
        else:
            choice[s] = acts_here[0]
            best[s] = tuple(acts_here)

    # staying actions along shortest routes towards the goal states
    stay_succ = {}
    for act in acts:
        if act.staying:
            s, a = act.label
            stay_succ.setdefault(s, []).append((a, _original_successors(cm, q, act)))
    reached = set(goals)
    frontier = deque(sorted(goals))
    pending = sorted(ec.states - reached)
    if not goals:
        for s in pending:
            a = ec.actions_of(s)[0]
            choice[s] = a
            best[s] = (a,)
        return
    while pending:
        layer = set(reached)
        progressed = []
        for s in pending:
            for a, succ in sorted(stay_succ.get(s, [])):
                if succ & layer:
                    choice[s] = a
                    best[s] = (a,)
                    progressed.append(s)
                    break
        if not progressed:
            # unreachable inside the component (cannot happen for a true MEC)
            for s in pending:
                a = ec.actions_of(s)[0]
                choice[s] = a
                best[s] = (a,)
            break
        reached.update(progressed)
        pending = [s for s in pending if s not in reached]


def _original_successors(cm, q, act):
    return cm.original_support.get(act.label, frozenset())
