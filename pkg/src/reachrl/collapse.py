"""Maximal end-component decomposition and the collapsed (quotient) MDP.

Models are handled in a plain nested-dict form so the same code serves the
true model (exact probabilities) and a learner's partial model (lower
estimates over the observed support):

* support graph: ``{state: {action: iterable of successors}}``
* probability map: ``{state: {action: {successor: probability}}}``
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

SupportGraph = Mapping[int, Mapping[int, Iterable[int]]]
ProbabilityMap = Mapping[int, Mapping[int, Mapping[int, object]]]


@dataclass(frozen=True)
class EcCandidate:
    """A set of (state, action) pairs forming an end component."""

    pairs: frozenset[tuple[int, int]]

    @property
    def states(self) -> frozenset[int]:
        return frozenset(s for s, _ in self.pairs)

    def actions_of(self, s: int) -> list[int]:
        return sorted(a for t, a in self.pairs if t == s)

    def __contains__(self, pair) -> bool:
        return pair in self.pairs

    def __len__(self) -> int:
        return len(self.pairs)


def strongly_connected_components(vertices, successors) -> list[list[int]]:
    """Tarjan's algorithm, iterative.  Components come out in reverse
    topological order of the condensation."""
    index: dict[int, int] = {}
    low: dict[int, int] = {}
    on_stack: set[int] = set()
    stack: list[int] = []
    out: list[list[int]] = []
    counter = 0
    for root in vertices:
        if root in index:
            continue
        work = [(root, iter(successors(root)))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(successors(w))))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                out.append(sorted(comp))
    return out


def mec_decomposition(graph: SupportGraph) -> list[EcCandidate]:
    """Maximal end components of a support graph.

    Repeatedly splits the graph into SCCs and drops every action with a
    successor outside its own SCC (and states left without actions) until
    nothing changes.  Successors that do not appear as keys are treated as
    states without actions.
    """
    allowed: dict[int, dict[int, frozenset[int]]] = {}
    for s, acts in graph.items():
        allowed[s] = {a: frozenset(succ) for a, succ in acts.items()}
    alive = {s for s, acts in allowed.items() if acts}
    while True:
        order = sorted(alive)
        comps = strongly_connected_components(
            order, lambda v: sorted({t for succ in allowed[v].values() for t in succ if t in alive})
        )
        comp_of = {v: i for i, comp in enumerate(comps) for v in comp}
        changed = False
        for s in order:
            for a, succ in list(allowed[s].items()):
                if any(comp_of.get(t) != comp_of[s] for t in succ):
                    del allowed[s][a]
                    changed = True
            if not allowed[s]:
                alive.discard(s)
                changed = True
        if not changed:
            break
    result = []
    for comp in comps:
        if all(s in alive for s in comp):
            pairs = frozenset((s, a) for s in comp for a in allowed[s])
            if pairs:
                result.append(EcCandidate(pairs))
    result.sort(key=lambda ec: min(ec.states))
    return result


@dataclass(frozen=True)
class QAction:
    """An action of the collapsed model, labelled by its original pair."""

    label: tuple[int, int]
    successors: tuple[tuple[int, object], ...]
    staying: bool = False


@dataclass
class CollapsedMdp:
    """Quotient of a model in which every MEC became one super state.

    ``membership`` maps original states to quotient states and
    ``members[q]`` is the inverse.  ``super_states`` holds the MEC behind each
    super state.  ``target`` lists plain target states, ``target_mecs`` the
    super states whose MEC meets the target set.
    """

    num_states: int
    initial: int
    membership: dict[int, int]
    members: list[frozenset[int]]
    super_states: dict[int, EcCandidate]
    actions: list[list[QAction]]
    target: frozenset[int]
    target_mecs: frozenset[int]
    original_support: dict[tuple[int, int], frozenset[int]] = field(default_factory=dict)
    _compiled: object = field(default=None, repr=False, compare=False)

    def is_target(self, q: int) -> bool:
        return q in self.target or q in self.target_mecs

    def stay_flags(self, q: int) -> list[bool]:
        return [act.staying for act in self.actions[q]]

    def support_graph(self, include_staying: bool = False) -> dict[int, dict[int, frozenset[int]]]:
        """Support graph of the quotient; action ids are positions in
        ``actions[q]``."""
        graph: dict[int, dict[int, frozenset[int]]] = {}
        for q, acts in enumerate(self.actions):
            graph[q] = {
                i: frozenset(t for t, _ in act.successors)
                for i, act in enumerate(acts)
                if include_staying or not act.staying
            }
        return graph

    def probability_map(self, include_staying: bool = False) -> dict[int, dict[int, dict[int, object]]]:
        return {
            q: {i: dict(act.successors) for i, act in enumerate(acts) if include_staying or not act.staying}
            for q, acts in enumerate(self.actions)
        }

    def to_mdp(self, action_names=None):
        """The quotient as a plain :class:`~reachrl.mdp.Mdp`.

        Staying actions become probability-one self loops; target super
        states join the target set.  Needs a full model (every quotient state
        has an action).
        """
        from .mdp import Mdp

        names: list[str] = []
        ids: dict[str, int] = {}
        transitions = {}
        for q, acts in enumerate(self.actions):
            for act in acts:
                s, a = act.label
                orig = action_names[a] if action_names is not None else f"a{a}"
                name = f"{orig}@{s}" if q in self.super_states else orig
                if name not in ids:
                    ids[name] = len(names)
                    names.append(name)
                succ = [(q, 1)] if act.staying else list(act.successors)
                transitions[(q, ids[name])] = succ
        target = sorted(self.target | self.target_mecs)
        return Mdp(self.num_states, self.initial, names, transitions, {"goal": target}, "goal")


def collapse(
    pmap: ProbabilityMap,
    mecs: list[EcCandidate],
    target: Iterable[int],
    initial: int,
) -> CollapsedMdp:
    """Collapse every MEC in ``mecs`` into a super state.

    Transitions out of a super state keep their original (state, action)
    label; probabilities flowing into the same quotient state are summed.
    Transitions of staying pairs become self loops of the super state.
    """
    target = frozenset(target)
    owner: dict[int, int] = {}
    for i, ec in enumerate(mecs):
        for s in ec.states:
            if s in owner:
                raise ValueError(f"overlapping end components at state {s}")
            owner[s] = i

    universe = set(pmap) | {initial}
    for acts in pmap.values():
        for succ in acts.values():
            universe.update(succ)

    membership: dict[int, int] = {}
    members: list[frozenset[int]] = []
    super_states: dict[int, EcCandidate] = {}
    mec_q: dict[int, int] = {}
    for s in sorted(universe):
        if s in owner:
            i = owner[s]
            if i not in mec_q:
                mec_q[i] = len(members)
                members.append(mecs[i].states)
                super_states[mec_q[i]] = mecs[i]
            membership[s] = mec_q[i]
        else:
            membership[s] = len(members)
            members.append(frozenset({s}))

    actions: list[list[QAction]] = []
    original_support: dict[tuple[int, int], frozenset[int]] = {}
    for q, group in enumerate(members):
        ec = super_states.get(q)
        acts = []
        for s in sorted(group):
            for a in sorted(pmap.get(s, {})):
                merged: dict[int, object] = {}
                original_support[(s, a)] = frozenset(pmap[s][a])
                for t, p in pmap[s][a].items():
                    qt = membership[t]
                    merged[qt] = merged[qt] + p if qt in merged else p
                staying = ec is not None and (s, a) in ec.pairs
                acts.append(QAction((s, a), tuple(sorted(merged.items())), staying))
        actions.append(acts)

    plain_target = frozenset(membership[s] for s in target if s in membership and s not in owner)
    target_mecs = frozenset(q for q, ec in super_states.items() if ec.states & target)
    return CollapsedMdp(
        num_states=len(members),
        initial=membership[initial],
        membership=membership,
        members=members,
        super_states=super_states,
        actions=actions,
        target=plain_target,
        target_mecs=target_mecs,
        original_support=original_support,
    )
