import warnings
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from reachrl.exact import optimal_value_exact
from reachrl.mdp import Mdp, validate
from reachrl.model_io import (
    DeadlockWarning, ParseError, ProbabilityRepairWarning, import_prism_explicit, parse_mdpx, parse_probability, write_mdpx,
)
from reachrl.models import GOLDEN, fig1, random_mdp

FIG1 = """\
mdpx 1
states 4
initial 0
label goal 3
transition 0 a 1 1/2
transition 0 a 3 1/2
transition 1 a 2 1
transition 2 a 1 1
transition 3 a 3 1
"""


def test_parse_fig1():
    m = parse_mdpx(FIG1)
    assert m == fig1()
    assert validate(m) == []


def test_comments_decimals_and_crlf():
    text = "# header\r\nmdpx 1\r\nstates 2\r\ninitial 0  # start\r\nlabel goal 1\r\n" \
           "transition 0 a 1 0.25\r\ntransition 0 a 0 0.75\r\ntransition 1 a 1 1\r\n"
    m = parse_mdpx(text.encode())
    assert dict(m.row(0, 0)) == {0: F(3, 4), 1: F(1, 4)}


def test_duplicate_triple():
    text = FIG1.replace("transition 0 a 3 1/2", "transition 0 a 1 0.5\ntransition 0 a 3 1/2")
    with pytest.raises(ParseError, match="duplicate") as exc:
        parse_mdpx(text)
    assert exc.value.line == 6


def test_out_of_range_state():
    with pytest.raises(ParseError) as exc:
        parse_mdpx("mdpx 1\nstates 2\ninitial 0\ntransition 0 a 5 1\n")
    assert exc.value.line == 4 and exc.value.column is not None


def test_bad_sum_is_error():
    with pytest.raises(ParseError, match="sum"):
        parse_mdpx("mdpx 1\nstates 2\ninitial 0\ntransition 0 a 1 1/2\ntransition 1 a 1 1\n")


def test_syntax_error_location():
    with pytest.raises(ParseError) as exc:
        parse_mdpx("mdpx 1\nstates two\n")
    assert exc.value.line == 2 and exc.value.column == 8


@pytest.mark.parametrize("lit,val", [("0.125", F(1, 8)), ("2/4", F(1, 2)), ("1", F(1)), ("1e-1", F(1, 10))])
def test_probability_literals(lit, val):
    assert parse_probability(lit) == val


def test_write_lowest_terms_and_sorted():
    m = Mdp(2, 0, ["b", "a"], {(0, 1): [(1, F(2, 4)), (0, F(1, 2))], (0, 0): [(1, 1)], (1, 0): [(1, 1)]}, {})
    text = write_mdpx(m).decode()
    assert "label" not in text
    lines = [ln for ln in text.splitlines() if ln.startswith("transition")]
    assert lines == ["transition 0 b 1 1/1", "transition 0 a 0 1/2", "transition 0 a 1 1/2", "transition 1 b 1 1/1"]
    assert "transition 0 a 1 1/2" in text


def test_decimal_reserialised_exactly():
    m = parse_mdpx("mdpx 1\nstates 2\ninitial 0\ntransition 0 a 1 0.125\ntransition 0 a 0 0.875\ntransition 1 a 1 1\n")
    assert "1/8" in write_mdpx(m).decode()


@pytest.mark.parametrize("name", sorted(GOLDEN))
def test_round_trip_golden(name):
    m = GOLDEN[name]()
    assert parse_mdpx(write_mdpx(m)) == m


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_round_trip_random(seed):
    m = random_mdp(seed, max_states=8, max_actions=3, max_den=6)
    text = write_mdpx(m)
    assert parse_mdpx(text) == m
    assert write_mdpx(parse_mdpx(text)) == text


TRA = "2 1 2\n0 0 0 0.5\n0 0 1 0.5\n"
LAB = '0="init" 1="goal"\n0: 0\n1: 1\n'


def test_prism_two_state():
    with pytest.warns(DeadlockWarning):
        m = import_prism_explicit(TRA, LAB, "goal")
    assert m.initial == 0 and m.target == {1}
    assert dict(m.row(0, m.action_index("c0"))) == {0: F(1, 2), 1: F(1, 2)}
    assert validate(m) == []
    assert import_prism_explicit("2 2 3\n0 0 0 0.5\n0 0 1 0.5\n1 0 1 1\n", LAB, "goal").action_names == ("c0",)


def test_prism_action_names():
    m = import_prism_explicit("2 3 3\n0 0 1 1 go\n0 1 0 1 stay\n1 0 1 1\n", LAB, "goal")
    assert set(m.action_names) >= {"go", "stay"}


def test_prism_missing_init():
    with pytest.raises(ParseError, match="init"):
        import_prism_explicit(TRA, '0="goal"\n1: 0\n', "goal")


def test_prism_unknown_target():
    with pytest.raises(ParseError, match="label"):
        import_prism_explicit("2 2 3\n0 0 0 0.5\n0 0 1 0.5\n1 0 1 1\n", LAB, "done")


def test_prism_malformed_header():
    with pytest.raises(ParseError):
        import_prism_explicit("2 1\n0 0 1 1\n", LAB, "goal")


def test_prism_choice_gap():
    with pytest.raises(ParseError, match="choice"):
        import_prism_explicit("2 2 2\n0 1 1 1\n1 0 1 1\n", LAB, "goal")


def test_prism_repair_and_reject():
    with pytest.warns(ProbabilityRepairWarning):
        m = import_prism_explicit("2 2 3\n0 0 0 0.33333333333\n0 0 1 0.6666666667\n1 0 1 1\n", LAB, "goal")
    assert sum(p for _, p in m.row(0, 0)) == 1
    with pytest.raises(ParseError, match="sum"):
        import_prism_explicit("2 2 3\n0 0 0 0.3\n0 0 1 0.6\n1 0 1 1\n", LAB, "goal")


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_prism_import_matches_model(seed):
    m = random_mdp(seed, max_den=4)
    tra, lab = _export_prism(m)
    imported = import_prism_explicit(tra, lab, "goal")
    assert validate(imported) == []
    assert optimal_value_exact(imported) == optimal_value_exact(m)
    assert parse_mdpx(write_mdpx(imported)) == imported


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_prism_decimal_import(seed):
    # decimal exports of thirds are off by ~1e-16 and get repaired
    m = random_mdp(seed, max_den=4)
    tra, lab = _export_prism(m, decimal=True)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ProbabilityRepairWarning)
        imported = import_prism_explicit(tra, lab, "goal")
    assert validate(imported) == []
    assert abs(float(optimal_value_exact(imported)) - float(optimal_value_exact(m))) < 1e-9


def _export_prism(m, decimal=False):
    # one choice per available action, numbered per state
    rows = []
    for s in m.states:
        for i, a in enumerate(m.available(s)):
            for t, p in m.row(s, a):
                lit = repr(float(p)) if decimal else f"{p.numerator}/{p.denominator}"
                rows.append(f"{s} {i} {t} {lit} {m.action_label(a)}")
    n_choices = sum(len(m.available(s)) for s in m.states)
    tra = f"{m.num_states} {n_choices} {len(rows)}\n" + "\n".join(rows) + "\n"
    lab = '0="init" 1="goal"\n' + f"{m.initial}: 0\n"
    for s in sorted(m.target):
        lab += f"{s}: 1\n" if s != m.initial else ""
    if m.initial in m.target:
        lab = lab.replace(f"{m.initial}: 0\n", f"{m.initial}: 0 1\n")
    return tra, lab
