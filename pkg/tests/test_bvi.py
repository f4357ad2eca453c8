from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reachrl.bvi import bvi_sweep, extract_policy, reset_bounds, run_bvi
from reachrl.collapse import collapse, mec_decomposition
from reachrl.exact import optimal_value, policy_value_exact
from reachrl.mdp import Mdp
from reachrl.models import fig1, random_mdp


def collapsed(m, with_mecs=True):
    mecs = mec_decomposition(m.successor_map()) if with_mecs else []
    return collapse(m.probability_map(), mecs, m.target, m.initial)


def test_reset_fig2():
    cm = collapsed(fig1())
    v = reset_bounds(cm)
    t, ss, s0 = cm.membership[3], cm.membership[1], cm.membership[0]
    assert v.L_state[t] == v.U_state[t] == 1
    assert v.L_state[s0] == 0 and v.U_state[s0] == 1
    stay = [i for i, lab in enumerate(cm._compiled.labels) if lab in {(1, 0), (2, 0)}]
    assert np.all(v.L_pair[stay] == 0) and np.all(v.U_pair[stay] == 0)


def test_target_mec_pins_one():
    m = Mdp(3, 0, ["a"], {(0, 0): [(1, 1)], (1, 0): [(2, 1)], (2, 0): [(1, 1)]}, {"goal": [2]})
    cm = collapsed(m)
    v = reset_bounds(cm)
    assert np.all(v.L_pair[cm._compiled.staying] == 1)
    assert np.all(v.U_pair[cm._compiled.staying] == 1)


def test_all_target():
    m = Mdp(2, 0, ["a"], {(0, 0): [(1, 1)], (1, 0): [(0, 1)]}, {"goal": [0, 1]})
    v = run_bvi(collapsed(m), 3)
    assert np.all(v.L_state == 1) and np.all(v.U_state == 1)


def test_fig2_two_sweeps():
    cm = collapsed(fig1())
    v = run_bvi(cm, 2)
    assert v.L_state[cm.initial] == 0.5 and v.U_state[cm.initial] == 0.5


def test_fig1_uncollapsed_stalls():
    cm = collapsed(fig1(), with_mecs=False)
    v = run_bvi(cm, 200)
    assert v.L_state[cm.initial] == 0.5 and v.U_state[cm.initial] == 1.0


def test_empty_estimates():
    cm = collapse({0: {}}, [], [3], 0)
    v = run_bvi(cm, 5)
    assert v.L_state[0] == 0 and v.U_state[0] == 1


def test_iterations_positive():
    with pytest.raises(ValueError):
        run_bvi(collapsed(fig1()), 0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_monotone_and_ordered(seed):
    m = random_mdp(seed)
    cm = collapsed(m)
    v = reset_bounds(cm)
    for _ in range(30):
        nxt = bvi_sweep(cm, v)
        assert np.all(nxt.L_state >= v.L_state - 1e-15)
        assert np.all(nxt.U_state <= v.U_state + 1e-15)
        assert np.all(nxt.L_state <= nxt.U_state + 1e-15)
        v = nxt


def _acyclic(cm):
    g = cm.support_graph()
    return not any(q in succ for q, acts in g.items() for succ in acts.values()) and \
        not mec_decomposition({q: {i: s - {q} for i, s in acts.items()} for q, acts in g.items()}) and \
        _dag(g)


def _dag(g):
    state = {}

    def visit(q):
        state[q] = 1
        for succ in g[q].values():
            for t in succ:
                if t == q:
                    continue
                if state.get(t) == 1 or (t not in state and not visit(t)):
                    return False
        state[q] = 2
        return True

    return all(visit(q) for q in g if q not in state)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_sound_and_converged_on_known_models(seed):
    m = random_mdp(seed)
    cm = collapsed(m)
    truth = optimal_value(m)[0]
    sweeps = cm.num_states if _acyclic(cm) else 20000
    v = run_bvi(cm, sweeps, tolerance=None if _acyclic(cm) else 1e-15)
    assert abs(v.L_state[cm.initial] - truth) <= 1e-9
    assert abs(v.U_state[cm.initial] - truth) <= 1e-9


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_extraction_optimal(seed):
    m = random_mdp(seed)
    cm = collapsed(m)
    v = run_bvi(cm, 20000, tolerance=1e-15)
    pol = extract_policy(cm, v, m.num_states, m.available, target=m.target).policy
    best = max(policy_value_exact(m, p)[m.initial] for p in _all(m))
    assert policy_value_exact(m, pol)[m.initial] == best


def _all(m):
    from reachrl.exact import enumerate_policies
    return enumerate_policies(m)


def test_argmax_choice():
    m = Mdp(3, 0, ["a", "b"], {
        (0, 0): [(1, 1)], (0, 1): [(1, F(1, 2)), (2, F(1, 2))], (1, 0): [(1, 1)], (2, 0): [(2, 1)],
    }, {"goal": [1]})
    cm = collapsed(m)
    v = run_bvi(cm, 10)
    ext = extract_policy(cm, v, 3, m.available, target=m.target)
    assert ext.policy[0] == 0 and ext.best[0] == (0,)


def test_mec_exit_routing():
    s0, s1, s2, t, sink = range(5)
    m = Mdp(5, s0, ["a", "b"], {
        (s0, 0): [(s1, 1)],
        (s1, 0): [(s2, 1)], (s1, 1): [(sink, 1)],
        (s2, 0): [(s1, 1)], (s2, 1): [(t, 1)],
        (t, 0): [(t, 1)], (sink, 0): [(sink, 1)],
    }, {"goal": [t]})
    cm = collapsed(m)
    v = run_bvi(cm, 10)
    pol = extract_policy(cm, v, 5, m.available, target=m.target).policy
    assert pol[s2] == 1 and pol[s1] == 0
    assert policy_value_exact(m, pol)[s0] == 1


def test_fallback_for_unseen_states():
    cm = collapse({0: {0: {1: 0.5}}}, [], [1], 0)
    v = run_bvi(cm, 3)
    ext = extract_policy(cm, v, 3, lambda s: [0, 1], rng=np.random.default_rng(0), target=[1])
    assert ext.fallback == [2] and ext.policy[0] == 0
