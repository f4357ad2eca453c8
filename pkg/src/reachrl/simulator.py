"""Black-box sampling of a model with loop detection and guided exploration."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .collapse import EcCandidate, mec_decomposition
from .mdp import CountTable, Mdp

LoopMode = Literal["heuristic", "exact_ec"]

#: largest common denominator sampled through an exact lookup table
LOOKUP_LIMIT = 4096


@dataclass
class SamplingTables:
    """Padded per-pair successor tables for the compiled sampling loops."""

    pairs: list[tuple[int, int]]
    pair_id: np.ndarray
    succ: np.ndarray
    cum: np.ndarray
    width: int
    den: int
    lookup: np.ndarray | None


class SimulatorHandle:
    """Sampling access to a model.

    Learners see the state and action counts, the initial state, the target
    set and which actions are available; transition probabilities stay
    hidden behind :meth:`step`.
    """

    def __init__(self, model: Mdp, seed: int | np.random.Generator | np.random.SeedSequence = 0):
        self._model = model
        if isinstance(seed, np.random.Generator):
            self.rng = seed
        else:
            self.rng = np.random.default_rng(seed)
        self.num_states = model.num_states
        self.num_actions = model.num_actions
        self.initial = model.initial
        self.target = model.target
        self.action_names = model.action_names
        self._avail = [tuple(model.available(s)) for s in range(model.num_states)]
        self._state = self.initial
        self.steps = 0
        self._tables = None

    def available(self, s: int) -> tuple[int, ...]:
        return self._avail[s]

    @property
    def state(self) -> int:
        return self._state

    def reset(self) -> int:
        self._state = self.initial
        return self._state

    def step(self, a: int) -> int:
        succ, probs = self._model.float_row(self._state, a)
        i = int(np.searchsorted(np.cumsum(probs), self.rng.random(), side="right"))
        self._state = int(succ[min(i, len(succ) - 1)])
        self.steps += 1
        return self._state

    # flat tables for the compiled batch loops
    def _compile(self):
        if self._tables is None:
            m = self._model
            pairs = m.pairs()
            width = max((len(m.row(s, a)) for s, a in pairs), default=1)
            pair_id = np.full((m.num_states, max(m.num_actions, 1)), -1, dtype=np.int64)
            succ = np.zeros((len(pairs), width), dtype=np.int64)
            cum = np.full((len(pairs), width), 2.0)
            for i, (s, a) in enumerate(pairs):
                pair_id[s, a] = i
                ts, ps = m.float_row(s, a)
                succ[i, : len(ts)] = ts
                c = np.cumsum(ps)
                c[-1] = 1.0
                cum[i, : len(ts)] = c
                succ[i, len(ts):] = ts[-1]
            # exact lookup table when all probabilities share a small denominator
            den = math.lcm(*(p.denominator for row in m.rows().values() for _, p in row)) if pairs else 1
            lookup = None
            if den <= LOOKUP_LIMIT:
                lookup = np.zeros((len(pairs), den), dtype=np.int64)
                for i, (s, a) in enumerate(pairs):
                    pos = 0
                    for j, (_, p) in enumerate(m.row(s, a)):
                        w = int(p * den)
                        lookup[i, pos: pos + w] = j
                        pos += w
            self._tables = SamplingTables(pairs, pair_id, succ, cum, width, den, lookup)
        return self._tables


@dataclass
class RunTrace:
    visited: list[int]
    terminal_reason: Literal["reached_target", "looping"]


@dataclass
class GuidanceTable:
    """Best actions per state from the previous stage."""

    best: dict[int, tuple[int, ...]] = field(default_factory=dict)

    @classmethod
    def uniform(cls, handle: SimulatorHandle) -> "GuidanceTable":
        return cls({s: tuple(handle.available(s)) for s in range(handle.num_states)})

    def actions(self, s: int, handle: SimulatorHandle) -> tuple[int, ...]:
        return self.best.get(s) or tuple(handle.available(s))


def required_samples(p_k: float, delta_c: float) -> float:
    """``ln(delta_c) / ln(1 - p_k)``: samples per pair before a missed exit
    of probability ``p_k`` becomes less likely than ``delta_c``."""
    if not 0 < p_k < 1 or not 0 < delta_c < 1:
        raise ValueError("p_k and delta_c must lie in (0, 1)")
    return math.log(delta_c) / math.log1p(-p_k)


def delta_sure_ec(candidate: EcCandidate, counts: CountTable, p_k: float, delta_c: float) -> bool:
    threshold = required_samples(p_k, delta_c)
    return all(counts.pair(s, a) > threshold for s, a in candidate.pairs)


def steps_since_growth(trace: Sequence[int]) -> int:
    seen = set()
    last = 0
    for i, s in enumerate(trace):
        if s not in seen:
            seen.add(s)
            last = i
    return len(trace) - 1 - last


def looping(visited: Sequence[int], s: int, counts: CountTable, p_k: float, delta_c: float,
            mode: LoopMode = "heuristic", num_states: int | None = None) -> bool:
    """Whether a run that reached ``s`` after ``visited`` is probably stuck.

    ``heuristic``: the set of distinct states has not grown within the last
    ``num_states ** 2`` steps.  ``exact_ec``: ``s`` was visited before and
    lies in an end component of the observed support, made of visited
    states only, whose pairs are all sampled often enough.
    """
    if mode == "heuristic":
        if num_states is None:
            raise ValueError("heuristic loop detection needs num_states")
        return steps_since_growth(list(visited) + [s]) >= num_states**2
    if s not in visited:
        return False
    candidate = certified_component(set(visited) | {s}, s, counts, p_k, delta_c)
    return candidate is not None and delta_sure_ec(candidate, counts, p_k, delta_c)


def certified_component(region: set[int], s: int, counts: CountTable, p_k: float,
                        delta_c: float) -> EcCandidate | None:
    """An end component inside ``region`` that contains ``s`` and consists of
    sufficiently sampled pairs, or None."""
    threshold = required_samples(p_k, delta_c)
    graph: dict[int, dict[int, frozenset[int]]] = {}
    for x in region:
        acts = {}
        for (y, a) in _pairs_of(counts, x):
            succ = frozenset(counts.successors(y, a))
            if counts.pair(y, a) > threshold and succ <= region:
                acts[a] = succ
        graph[x] = acts
    if not graph.get(s):
        return None
    for ec in mec_decomposition(graph):
        if s in ec.states:
            return ec
    return None


def _pairs_of(counts: CountTable, s: int):
    return [(x, a) for (x, a) in counts.pairs() if x == s]


def _choose(handle: SimulatorHandle, guidance: GuidanceTable, s: int, mu: float) -> int:
    rng = handle.rng
    pool = handle.available(s) if rng.random() < mu else guidance.actions(s, handle)
    return int(pool[int(rng.integers(len(pool)))])


def simulate_run(handle: SimulatorHandle, guidance: GuidanceTable, mu: float, p_k: float,
                 delta_c: float, counts: CountTable, mode: LoopMode = "heuristic") -> RunTrace:
    """One simulation from the initial state until the target is reached or
    loop detection fires.  Every step is recorded in ``counts``."""
    if not 0 < mu <= 1:
        raise ValueError("mu must lie in (0, 1]")
    s = handle.reset()
    visited = [s]
    if s in handle.target:
        return RunTrace(visited, "reached_target")
    n2 = handle.num_states**2
    seen = {s}
    since = 0
    while True:
        a = _choose(handle, guidance, s, mu)
        t = handle.step(a)
        counts.record(s, a, t)
        if t in handle.target:
            visited.append(t)
            return RunTrace(visited, "reached_target")
        if mode == "heuristic":
            if t in seen:
                since += 1
            else:
                seen.add(t)
                since = 0
            stuck = since >= n2
        else:
            stuck = t in seen and looping(visited, t, counts, p_k, delta_c, "exact_ec")
            seen.add(t)
        visited.append(t)
        if stuck:
            return RunTrace(visited, "looping")
        s = t


@dataclass
class BatchResult:
    runs: int
    steps: int
    reached: int
    looped: int


def _action_matrix(lists: Sequence[Sequence[int]]) -> tuple[np.ndarray, np.ndarray]:
    sizes = np.array([len(x) for x in lists], dtype=np.int64)
    mat = np.zeros((len(lists), max(int(sizes.max(initial=1)), 1)), dtype=np.int64)
    for s, acts in enumerate(lists):
        mat[s, : len(acts)] = acts
    return sizes, mat


def _kernel_tables(handle: SimulatorHandle):
    tab = handle._compile()
    lookup = tab.lookup if tab.lookup is not None else np.zeros((1, 1), dtype=np.int64)
    is_target = np.zeros(handle.num_states, dtype=np.bool_)
    is_target[list(handle.target)] = True
    return tab, lookup, is_target


def _seed(handle: SimulatorHandle) -> int:
    return int(handle.rng.integers(0, 2**32))


def _flush(handle: SimulatorHandle, slots: np.ndarray, counts: CountTable) -> None:
    tab = handle._compile()
    for slot in np.flatnonzero(slots):
        pid, j = divmod(int(slot), tab.width)
        s, a = tab.pairs[pid]
        counts.record(s, a, int(tab.succ[pid, j]), int(slots[slot]))


def simulate_batch(handle: SimulatorHandle, guidance: GuidanceTable, mu: float, runs: int,
                   counts: CountTable) -> BatchResult:
    """``runs`` independent heuristic-mode simulations.

    Within a stage the guidance table is fixed and heuristic loop detection
    only looks at a run's own trace, so the runs are exchangeable; they are
    executed by a compiled loop and their counts merged at the end.
    """
    if not 0 < mu <= 1:
        raise ValueError("mu must lie in (0, 1]")
    from ._kernels import batch_runs

    n = handle.num_states
    tab, lookup, is_target = _kernel_tables(handle)
    avail_n, avail_mat = _action_matrix([handle.available(s) for s in range(n)])
    best_n, best_mat = _action_matrix([guidance.actions(s, handle) for s in range(n)])
    slots = np.zeros(len(tab.pairs) * tab.width, dtype=np.int64)
    steps, reached, looped = batch_runs(
        _seed(handle), runs, handle.initial, is_target, avail_n, avail_mat, best_n, best_mat,
        float(mu), tab.pair_id, tab.succ, tab.cum, lookup, tab.den, tab.lookup is not None,
        tab.width, n * n, slots)
    handle.steps += steps
    _flush(handle, slots, counts)
    return BatchResult(runs, int(steps), int(reached), int(looped))


def certify_components(handle: SimulatorHandle, counts: CountTable, threshold: float,
                       max_steps: int = 10**10) -> int:
    """Extra sampling until every end component of the observed support has
    all its pairs sampled more than ``threshold`` times.

    A uniform-action run from the initial state is driven into an
    uncertified component, then walks inside it choosing uniformly among
    the component's actions.  Leaving the component reveals a new
    transition, after which the decomposition is recomputed.  Returns the
    number of extra steps.
    """
    from ._kernels import component_walk

    n = handle.num_states
    tab, lookup, is_target = _kernel_tables(handle)
    avail_n, avail_mat = _action_matrix([handle.available(s) for s in range(n)])
    spent = 0
    while spent < max_steps:
        pending = [ec for ec in mec_decomposition(counts.support_graph())
                   if any(counts.pair(s, a) <= threshold for s, a in ec.pairs)]
        if not pending:
            break
        ec = pending[0]
        inside = np.zeros(n, dtype=np.bool_)
        inside[list(ec.states)] = True
        comp_n, comp_mat = _action_matrix([ec.actions_of(s) for s in range(n)])
        need_index = np.full(len(tab.pairs), -1, dtype=np.int64)
        need = np.zeros(len(ec.pairs), dtype=np.int64)
        for i, (s, a) in enumerate(sorted(ec.pairs)):
            need_index[tab.pair_id[s, a]] = i
            need[i] = max(0, math.floor(threshold) + 1 - counts.pair(s, a))
        slots = np.zeros(len(tab.pairs) * tab.width, dtype=np.int64)
        steps, status = component_walk(
            _seed(handle), handle.initial, is_target, inside, avail_n, avail_mat, comp_n, comp_mat,
            need_index, need, tab.pair_id, tab.succ, tab.cum, lookup, tab.den,
            tab.lookup is not None, tab.width, n * n, 1000, max_steps - spent, slots)
        spent += int(steps)
        handle.steps += int(steps)
        _flush(handle, slots, counts)
        if status in (2, 3):
            break
    return spent
