"""A small seeded benchmark with CSV output and SVG charts.

Writes into ``demos/out/<model>/``.  Equivalent to
``reachrl bench models/layered.mdpx --trials 10 --out demos/out/layered``.
Run with ``python demos/04_bench_plots.py [model] [trials]``.
"""
import sys
from pathlib import Path

from reachrl.harness import bench
from reachrl.learner import LearnerConfig
from reachrl.models import GOLDEN

name = sys.argv[1] if len(sys.argv) > 1 else "layered"
trials = int(sys.argv[2]) if len(sys.argv) > 2 else 10
out = Path(__file__).parent / "out" / name

agg = bench(GOLDEN[name](), LearnerConfig(), trials, seed=0, out_dir=out, name=name)
print(f"{trials} trials of {name}, {len(agg)} stages (shorter trials padded with their last stage)")
print(" k   median L   median U   median error   optimal share")
for row in agg:
    print(f"{row['k']:2d}   {row['L_median']:.4f}     {row['U_median']:.4f}     {row['error_median']:.5f}"
          f"        {row['optimal_fraction']:.2f}")
print("wrote", ", ".join(sorted(p.name for p in out.iterdir())))
