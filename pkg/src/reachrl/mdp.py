"""Explicit-state MDPs with exact rational transition probabilities.

States and actions are dense integers.  Action names live in a single
model-wide table; a state's available actions are the ones with a non-empty
successor list.  Probabilities are :class:`fractions.Fraction` objects; a
float copy is cached for the numeric loops.
"""
from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

#: successor list of a single (state, action) pair
Row = tuple[tuple[int, Fraction], ...]


class ModelError(ValueError):
    """Raised when a model cannot be constructed or queried."""


@dataclass(frozen=True)
class Violation:
    """A single well-formedness problem found by :func:`validate`."""

    kind: str
    message: str
    state: int | None = None
    action: int | None = None

    def __str__(self) -> str:
        return self.message


class Mdp:
    """A finite MDP ``(S, A, s0, P)`` plus named state labels.

    Args:
        num_states: number of states; states are ``0 .. num_states - 1``.
        initial: the initial state.
        actions: action names; position in the sequence is the action index.
        transitions: ``{(state, action_index): [(successor, probability), ...]}``.
            Probabilities may be anything :class:`~fractions.Fraction` accepts.
        labels: ``{label_name: iterable of states}``.
        target_label: name of the label whose states form the target set ``G``.

    Zero or negative probabilities are rejected immediately.  Everything else
    (sums, ranges, availability) is reported by :func:`validate` instead, so
    broken models can still be inspected.
    """

    def __init__(
        self,
        num_states: int,
        initial: int,
        actions: Sequence[str],
        transitions: Mapping[tuple[int, int], Iterable[tuple[int, object]]],
        labels: Mapping[str, Iterable[int]] | None = None,
        target_label: str = "goal",
    ):
        if num_states < 0:
            raise ModelError("negative state count")
        self.num_states = int(num_states)
        self.initial = int(initial)
        self.action_names: tuple[str, ...] = tuple(actions)
        if len(set(self.action_names)) != len(self.action_names):
            raise ModelError("duplicate action names")
        self.labels: dict[str, frozenset[int]] = {
            name: frozenset(int(s) for s in states) for name, states in (labels or {}).items()
        }
        self.target_label = target_label

        rows: dict[tuple[int, int], Row] = {}
        for (s, a), succ in transitions.items():
            entries = []
            for t, p in succ:
                p = Fraction(p)
                if p <= 0:
                    raise ModelError(
                        f"non-positive probability {p} at ({s}, {a}) -> {t}"
                    )
                entries.append((int(t), p))
            if entries:
                rows[(int(s), int(a))] = tuple(sorted(entries))
        self._rows = dict(sorted(rows.items()))

        self._avail: list[list[int]] = [[] for _ in range(max(self.num_states, 0))]
        for s, a in self._rows:
            if 0 <= s < self.num_states:
                self._avail[s].append(a)
        self._float_cache: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}

    # -- basic queries -------------------------------------------------

    @property
    def num_actions(self) -> int:
        return len(self.action_names)

    @property
    def target(self) -> frozenset[int]:
        return self.labels.get(self.target_label, frozenset())

    @property
    def states(self) -> range:
        return range(self.num_states)

    def available(self, s: int) -> list[int]:
        """Av(s): indices of the actions with at least one successor."""
        return list(self._avail[s])

    def row(self, s: int, a: int) -> Row:
        try:
            return self._rows[(s, a)]
        except KeyError:
            raise ModelError(f"action not available: {self.action_label(a)} at state {s}") from None

    def rows(self) -> dict[tuple[int, int], Row]:
        return dict(self._rows)

    def pairs(self) -> list[tuple[int, int]]:
        return list(self._rows)

    def action_label(self, a: int) -> str:
        if 0 <= a < len(self.action_names):
            return self.action_names[a]
        return f"#{a}"

    def action_index(self, name: str) -> int:
        try:
            return self.action_names.index(name)
        except ValueError:
            raise ModelError(f"unknown action {name!r}") from None

    def float_row(self, s: int, a: int) -> tuple[np.ndarray, np.ndarray]:
        """``(successors, probabilities)`` as numpy arrays (cached)."""
        key = (s, a)
        if key not in self._float_cache:
            row = self.row(s, a)
            self._float_cache[key] = (
                np.array([t for t, _ in row], dtype=np.int64),
                np.array([float(p) for _, p in row]),
            )
        return self._float_cache[key]

    def successor_map(self) -> dict[int, dict[int, frozenset[int]]]:
        """Support graph: ``state -> action -> set of successors``."""
        graph: dict[int, dict[int, frozenset[int]]] = {s: {} for s in self.states}
        for (s, a), row in self._rows.items():
            graph.setdefault(s, {})[a] = frozenset(t for t, _ in row)
        return graph

    def probability_map(self) -> dict[int, dict[int, dict[int, Fraction]]]:
        """Nested ``state -> action -> successor -> probability`` dictionaries."""
        out: dict[int, dict[int, dict[int, Fraction]]] = {s: {} for s in self.states}
        for (s, a), row in self._rows.items():
            out.setdefault(s, {})[a] = dict(row)
        return out

    # -- structural equality -------------------------------------------

    def _key(self):
        named = frozenset(
            (s, self.action_names[a], t, p) for (s, a), row in self._rows.items() for t, p in row
        )
        labels = frozenset((k, v) for k, v in self.labels.items())
        return (self.num_states, self.initial, named, labels, self.target)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Mdp):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self) -> int:
        return hash(self._key())

    def __repr__(self) -> str:
        return (
            f"Mdp(num_states={self.num_states}, initial={self.initial}, "
            f"actions={len(self.action_names)}, pairs={len(self._rows)}, target={sorted(self.target)})"
        )


@dataclass(frozen=True)
class MemorylessDetPolicy:
    """A total map from states to action indices."""

    choice: tuple[int, ...]

    def __getitem__(self, s: int) -> int:
        return self.choice[s]

    def __len__(self) -> int:
        return len(self.choice)

    def check(self, m: Mdp) -> None:
        if len(self.choice) != m.num_states:
            raise ModelError(f"policy covers {len(self.choice)} states, model has {m.num_states}")
        for s, a in enumerate(self.choice):
            if (s, a) not in m._rows:
                raise ModelError(f"policy picks unavailable action {m.action_label(a)} at state {s}")


class CountTable:
    """Occurrence counters ``#(s, a)`` and ``#(s, a, s')``."""

    def __init__(self):
        self._succ: dict[tuple[int, int], dict[int, int]] = defaultdict(dict)
        self._pair: dict[tuple[int, int], int] = defaultdict(int)
        self.total = 0

    def record(self, s: int, a: int, t: int, n: int = 1) -> None:
        if n <= 0:
            return
        succ = self._succ[(s, a)]
        succ[t] = succ.get(t, 0) + n
        self._pair[(s, a)] += n
        self.total += n

    def pair(self, s: int, a: int) -> int:
        return self._pair.get((s, a), 0)

    def triple(self, s: int, a: int, t: int) -> int:
        return self._succ.get((s, a), {}).get(t, 0)

    def successors(self, s: int, a: int) -> dict[int, int]:
        return dict(self._succ.get((s, a), {}))

    def pairs(self) -> list[tuple[int, int]]:
        return sorted(p for p, n in self._pair.items() if n > 0)

    def support_graph(self) -> dict[int, dict[int, frozenset[int]]]:
        """Observed support: ``state -> action -> successors seen so far``."""
        graph: dict[int, dict[int, frozenset[int]]] = {}
        for (s, a) in self.pairs():
            graph.setdefault(s, {})[a] = frozenset(self._succ[(s, a)])
        for succ in list(graph.values()):
            for ts in succ.values():
                for t in ts:
                    graph.setdefault(t, {})
        return graph

    def seen_states(self, initial: int | None = None) -> set[int]:
        seen = set(self.support_graph())
        if initial is not None:
            seen.add(initial)
        return seen

    def is_consistent(self) -> bool:
        return all(sum(self._succ[p].values()) == n for p, n in self._pair.items())

    def copy(self) -> "CountTable":
        out = CountTable()
        for p, succ in self._succ.items():
            out._succ[p] = dict(succ)
        out._pair.update(self._pair)
        out.total = self.total
        return out


def validate(m: Mdp) -> list[Violation]:
    """Return every well-formedness violation of ``m`` (empty when valid)."""
    out: list[Violation] = []
    n = m.num_states
    if not 0 <= m.initial < n:
        out.append(Violation("initial", f"initial state {m.initial} out of range [0, {n})"))
    for name, states in m.labels.items():
        bad = sorted(s for s in states if not 0 <= s < n)
        if bad:
            out.append(Violation("label", f"label {name!r} names out-of-range states {bad}"))
    for (s, a), row in m._rows.items():
        where = f"({s}, {m.action_label(a)})"
        if not 0 <= s < n:
            out.append(Violation("state", f"source state {s} out of range at {where}", s, a))
        if not 0 <= a < m.num_actions:
            out.append(Violation("action", f"action index {a} out of range at {where}", s, a))
        for t, _ in row:
            if not 0 <= t < n:
                out.append(Violation("state", f"successor {t} out of range at {where}", s, a))
        total = sum(p for _, p in row)
        if total != 1:
            out.append(Violation("sum", f"sum != 1 at {where}: {total}", s, a))
    for s in range(n):
        if not m._avail[s]:
            out.append(Violation("available", f"Av({s}) = {{}}: state {s} has no available action", s))
    return out


def support(m: Mdp, s: int, a: int) -> frozenset[int]:
    """The successors of ``(s, a)`` with positive probability."""
    return frozenset(t for t, _ in m.row(s, a))


def zero_value_states(m: Mdp) -> frozenset[int]:
    """States from which no policy reaches the target with positive probability.

    Pure graph computation: backward reachability from the target over the
    support graph.
    """
    preds: dict[int, set[int]] = defaultdict(set)
    for (s, _), row in m._rows.items():
        for t, _ in row:
            preds[t].add(s)
    positive = set(m.target)
    queue = deque(positive)
    while queue:
        t = queue.popleft()
        for s in preds[t]:
            if s not in positive:
                positive.add(s)
                queue.append(s)
    return frozenset(s for s in range(m.num_states) if s not in positive)


def induced_chain(m: Mdp, policy: MemorylessDetPolicy) -> list[Row]:
    """Per-state successor distribution of the Markov chain induced by ``policy``."""
    policy.check(m)
    return [m.row(s, policy[s]) for s in range(m.num_states)]
