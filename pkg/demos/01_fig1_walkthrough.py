"""The four-state example with an end component, step by step.

Run with ``python demos/01_fig1_walkthrough.py``.
"""
from reachrl.bvi import run_bvi
from reachrl.collapse import collapse, mec_decomposition
from reachrl.exact import optimal_value_exact
from reachrl.learner import LearnerConfig, learn
from reachrl.models import fig1

m = fig1()
print("model:", m)
print("exact optimal value at s0:", optimal_value_exact(m))

# s1 and s2 bounce between each other forever; that pair of actions is an
# end component, and so is the goal's self loop
mecs = mec_decomposition(m.successor_map())
for ec in mecs:
    print("end component:", sorted(ec.pairs))

# without collapsing, the upper bound never learns that {s1, s2} is hopeless
plain = collapse(m.probability_map(), [], m.target, m.initial)
v = run_bvi(plain, 500)
print(f"no collapse,  500 sweeps: L(s0)={v.L_state[0]:.3f} U(s0)={v.U_state[0]:.3f}")

cm = collapse(m.probability_map(), mecs, m.target, m.initial)
v = run_bvi(cm, 2)
print(f"collapsed,      2 sweeps: L(s0)={v.L_state[cm.initial]:.3f} U(s0)={v.U_state[cm.initial]:.3f}")

# now learn it from samples only
print("\nlearning from a simulator (seed 7):")
print(" k   runs      steps      L(s0)    U(s0)")
for r in learn(m, LearnerConfig(seed=7)):
    print(f"{r.k:2d} {r.N_k:6d} {r.cumulative_samples:10d}   {r.L_s0:.4f}   {r.U_s0:.4f}")
