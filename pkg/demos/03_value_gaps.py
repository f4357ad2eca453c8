"""Transition complexity, the closed-form gap bound, and actual gaps.

The bound is astronomically small even for tiny models; the actual
distances between policy values are usually far larger.
Run with ``python demos/03_value_gaps.py``.
"""
import numpy as np

from reachrl.exact import min_gap
from reachrl.models import GOLDEN, random_mdp

print(f"{'model':14s} {'D':>3s} {'policies':>8s} {'bound':>10s} {'eps_diff':>10s} {'min L1':>10s}")
models = {name: make() for name, make in GOLDEN.items() if name != "token_ring3"}
rng = np.random.default_rng(1)
for i in range(4):
    models[f"random#{i}"] = random_mdp(rng, max_states=5, max_actions=2)

for name, m in models.items():
    cert = min_gap(m)
    gap = "none" if cert.eps_diff is None else f"{float(cert.eps_diff):.3g}"
    l1 = "none" if cert.min_l1 is None else f"{float(cert.min_l1):.3g}"
    print(f"{name:14s} {cert.D:3d} {cert.num_policies:8d} {float(cert.bound):10.2e} {gap:>10s} {l1:>10s}")
