import csv
import io
import xml.etree.ElementTree as ET
from fractions import Fraction as F

import numpy as np
import pytest

from reachrl import harness
from reachrl.cli import format_value, main
from reachrl.exact import optimal_value_exact
from reachrl.learner import LearnerConfig
from reachrl.mdp import Mdp, validate
from reachrl.model_io import load_mdpx, save_mdpx
from reachrl.models import fig1, random_mdp


@pytest.fixture
def fig1_file(tmp_path):
    path = tmp_path / "fig1.mdpx"
    save_mdpx(fig1(), path)
    return str(path)


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_format_value():
    assert format_value(F(1, 2)) == "0.5"
    assert format_value(F(0)) == "0" and format_value(F(1)) == "1"
    assert format_value(F(21, 32)) == "0.65625"
    assert format_value(F(1, 3)) == repr(1 / 3)


def test_solve_fig1(capsys, fig1_file):
    assert run(capsys, "solve", fig1_file) == (0, "0.5\n", "")
    code, out, _ = run(capsys, "solve", fig1_file, "--per-state", "--exact")
    assert out.splitlines() == ["1/2", "0 1/2", "1 0", "2 0", "3 1"]


def test_solve_missing_file(capsys, tmp_path):
    code, _, err = run(capsys, "solve", tmp_path / "nope.mdpx")
    assert code != 0 and "nope.mdpx" in err


def test_solve_parse_error_location(capsys, tmp_path):
    bad = tmp_path / "bad.mdpx"
    bad.write_text("mdpx 1\nstates 2\ninitial 0\ntransition 0 a 7 1\n")
    code, _, err = run(capsys, "solve", bad)
    assert code != 0 and ":4:" in err


def test_solve_unreachable(capsys, tmp_path):
    path = tmp_path / "u.mdpx"
    save_mdpx(Mdp(2, 0, ["a"], {(0, 0): [(0, 1)], (1, 0): [(1, 1)]}, {"goal": [1]}), path)
    assert run(capsys, "solve", path)[1] == "0\n"


def test_learn_fig1_seed7(capsys, fig1_file):
    code, out, _ = run(capsys, "learn", fig1_file, "--seed", 7)
    assert code == 0
    rows = harness.parse_csv(out)
    assert out.splitlines()[0] == ",".join(harness.CSV_HEADER)
    last = rows[-1]
    assert float(last["error"]) <= 0.05
    assert float(last["policy_value"]) == 0.5 and last["is_optimal"] == "true"
    assert int(last["k"]) == len(rows) <= 15


def test_learn_one_stage_to_file(capsys, fig1_file, tmp_path):
    out = tmp_path / "run.csv"
    assert run(capsys, "learn", fig1_file, "--max-stages", 1, "--out", out)[0] == 0
    assert len(harness.read_csv(out)) == 1


def test_learn_seed_from_environment(capsys, fig1_file, monkeypatch):
    monkeypatch.setenv("REACHRL_SEED", "7")
    a = run(capsys, "learn", fig1_file, "--max-stages", 2)[1]
    b = run(capsys, "learn", fig1_file, "--max-stages", 2, "--seed", 7)[1]
    strip = lambda text: [row[:-1] for row in csv.reader(io.StringIO(text))]
    assert strip(a) == strip(b)
    monkeypatch.setenv("REACHRL_SEED", "x")
    assert run(capsys, "learn", fig1_file)[0] != 0


def test_learn_theoretical_infeasible(capsys, tmp_path):
    path = tmp_path / "big.mdpx"
    save_mdpx(random_mdp(np.random.default_rng(4), min_states=20, max_states=20), path)
    code, out, err = run(capsys, "learn", path, "--mode", "theoretical")
    assert code != 0
    assert "# error k=1" in out and "infeasible" in err


def test_bench(capsys, fig1_file, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(capsys, "bench", fig1_file, "--trials", 10, "--seed", 3, "--out", a, "--jobs", 1)[0] == 0
    assert run(capsys, "bench", fig1_file, "--trials", 10, "--seed", 3, "--out", b, "--jobs", 1)[0] == 0
    for name in ("stages.csv", "aggregate.csv", "bounds.svg", "error.svg", "policy.svg"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    for name in ("bounds.svg", "error.svg", "policy.svg"):
        ET.parse(a / name)
    agg = harness.read_csv(a / "aggregate.csv")
    assert float(agg[-1]["policy_value_median"]) == 0.5
    assert all(int(r["trials"]) == 10 for r in agg)
    stages = harness.read_csv(a / "stages.csv")
    assert sorted({int(r["seed"]) for r in stages}) == list(range(3, 13))
    assert "wall_ms" not in stages[0]


def test_bench_parallel_matches_serial(capsys, fig1_file, tmp_path):
    run(capsys, "bench", fig1_file, "--trials", 3, "--max-stages", 4, "--out", tmp_path / "s", "--jobs", 1)
    run(capsys, "bench", fig1_file, "--trials", 3, "--max-stages", 4, "--out", tmp_path / "p", "--jobs", 2)
    assert (tmp_path / "s/stages.csv").read_bytes() == (tmp_path / "p/stages.csv").read_bytes()


def test_bench_single_trial_zero_std(capsys, fig1_file, tmp_path):
    run(capsys, "bench", fig1_file, "--trials", 1, "--out", tmp_path)
    for row in harness.read_csv(tmp_path / "aggregate.csv"):
        assert all(float(row[c]) == 0 for c in row if c.endswith("_std"))


def test_bench_errors(capsys, fig1_file, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    code, _, err = run(capsys, "bench", fig1_file, "--out", blocker / "sub")
    assert code != 0 and "not writable" in err
    assert run(capsys, "bench", fig1_file, "--trials", 0, "--out", tmp_path)[0] != 0


def test_aggregate_padding():
    from reachrl.learner import learn
    short = harness._trial((fig1(), LearnerConfig(seed=1, max_stages=2, min_stages=1)))
    long = harness._trial((fig1(), LearnerConfig(seed=2, max_stages=4, min_stages=4)))
    rows = harness.aggregate([short, long])
    assert [r["padded"] for r in rows] == [0, 0, 1, 1]
    assert rows[3]["L_median"] == pytest.approx((short[-1][0].L_s0 + long[3][0].L_s0) / 2)


def test_epsdiff(capsys, fig1_file, tmp_path, two_action_toy):
    code, out, _ = run(capsys, "epsdiff", fig1_file)
    lines = dict(line.split(" ", 1) for line in out.splitlines())
    assert code == 0 and lines["D"] == "2" and lines["bound"] == "1/16777216"
    assert lines["eps_diff"].startswith("none")
    toy = tmp_path / "toy.mdpx"
    save_mdpx(two_action_toy, toy)
    lines = dict(line.split(" ", 1) for line in run(capsys, "epsdiff", toy)[1].splitlines())
    assert lines["eps_diff"] == "1/2" and lines["bound_holds"] == "true"
    code, _, err = run(capsys, "epsdiff", toy, "--cap", 1)
    assert code != 0 and "2 policies" in err


TRA = "3 3 4\n0 0 1 0.5 go\n0 0 2 0.5 go\n1 0 1 1\n2 0 2 1\n"
LAB = '0="init" 1="goal"\n0: 0\n1: 1\n'


def test_convert(capsys, tmp_path):
    (tmp_path / "m.tra").write_text(TRA)
    (tmp_path / "m.lab").write_text(LAB)
    out = tmp_path / "m.mdpx"
    assert run(capsys, "convert", "--from", "prism", "--tra", tmp_path / "m.tra", "--lab", tmp_path / "m.lab",
               "--target", "goal", "--out", out)[0] == 0
    m = load_mdpx(out)
    assert validate(m) == [] and optimal_value_exact(m) == F(1, 2)
    direct = run(capsys, "solve", tmp_path / "m.tra")[1]
    assert direct == run(capsys, "solve", out)[1] == "0.5\n"


def test_convert_missing_init(capsys, tmp_path):
    (tmp_path / "m.tra").write_text(TRA)
    (tmp_path / "m.lab").write_text('0="goal"\n1: 0\n')
    code, _, err = run(capsys, "convert", "--tra", tmp_path / "m.tra", "--lab", tmp_path / "m.lab")
    assert code != 0 and "init" in err


def test_module_entry_point(fig1_file):
    import subprocess
    import sys
    res = subprocess.run([sys.executable, "-m", "reachrl", "solve", fig1_file], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout == "0.5\n"
