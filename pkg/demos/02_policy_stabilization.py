"""How quickly the learned policy settles on an optimal one.

For each golden model, a handful of seeded trials are run and the exact
value of every stage's policy is compared with the optimum.
Run with ``python demos/02_policy_stabilization.py [trials]``.
"""
import sys

from reachrl.exact import optimal_value_exact, policy_value_exact
from reachrl.learner import LearnerConfig, learn
from reachrl.models import GOLDEN

trials = int(sys.argv[1]) if len(sys.argv) > 1 else 5

for name, make in GOLDEN.items():
    m = make()
    best = optimal_value_exact(m)
    marks = []
    for seed in range(trials):
        reps = learn(m, LearnerConfig(seed=seed))
        marks.append("".join("+" if policy_value_exact(m, r.policy)[m.initial] == best else "."
                             for r in reps))
    print(f"{name:14s} optimum {str(best):6s}")
    for seed, row in enumerate(marks):
        print(f"    seed {seed}: {row}")

print("\n'+' marks a stage whose policy is optimal, '.' one that is not.")
