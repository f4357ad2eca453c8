"""Experiment plumbing: exact scoring of learned policies, CSV telemetry,
multi-trial benchmarks with aggregation, and minimal SVG charts."""
from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path

import numpy as np

from .exact import optimal_value, policy_value_exact
from .learner import LearnerConfig, StageReport, learn
from .mdp import Mdp

CSV_HEADER = ["k", "delta_k", "eps_k", "p_k", "N_k", "cum_samples", "L_s0", "U_s0", "error",
              "policy_value", "is_optimal", "wall_ms"]
#: per-trial bench columns; wall-clock time is kept out so reruns match byte for byte
BENCH_HEADER = ["trial", "seed"] + CSV_HEADER[:-1]
AGGREGATE_HEADER = ["k", "trials", "padded", "L_median", "L_std", "U_median", "U_std",
                    "error_median", "error_std", "policy_value_median", "policy_value_std",
                    "optimal_fraction"]
OPTIMAL_TOLERANCE = 1e-9


def fmt(x) -> str:
    """Shortest round-tripping text for numbers; fractions as decimals."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, Fraction):
        x = float(x)
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


@dataclass
class ScoredStage:
    report: StageReport
    policy_value: float
    is_optimal: bool

    def row(self, with_time: bool = True) -> list[str]:
        r = self.report
        out = [r.k, r.params.delta, r.params.eps, r.params.p, r.N_k, r.cumulative_samples,
               r.L_s0, r.U_s0, r.error, self.policy_value, self.is_optimal]
        if with_time:
            out.append(round(r.wall_time * 1000, 3))
        return [fmt(x) for x in out]


class Scorer:
    """Exact evaluation of learned policies against a known model."""

    def __init__(self, model: Mdp):
        self.model = model
        self.optimum = optimal_value(model)[0]
        self._cache: dict[tuple[int, ...], float] = {}

    def value(self, report: StageReport) -> float:
        key = report.policy.choice
        if key not in self._cache:
            self._cache[key] = float(policy_value_exact(self.model, report.policy)[self.model.initial])
        return self._cache[key]

    def score(self, report: StageReport) -> ScoredStage:
        v = self.value(report)
        report.exact_policy_value = v
        return ScoredStage(report, v, abs(v - self.optimum) <= OPTIMAL_TOLERANCE)


def learn_csv(model: Mdp, config: LearnerConfig, out) -> list[ScoredStage]:
    """Run one trial, streaming one CSV row per stage to ``out``."""
    scorer = Scorer(model)
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    scored: list[ScoredStage] = []

    def emit(report: StageReport) -> None:
        st = scorer.score(report)
        scored.append(st)
        writer.writerow(st.row())
        out.flush()

    learn(model, config, on_stage=emit)
    return scored


def parse_csv(text: str) -> list[dict[str, str]]:
    """Rows of telemetry CSV text as dictionaries (``#`` lines skipped)."""
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    return list(csv.DictReader(lines))


def read_csv(path) -> list[dict[str, str]]:
    return parse_csv(Path(path).read_text(encoding="utf-8"))


# -- benchmarks ------------------------------------------------------------


def _trial(args) -> list[tuple[StageReport, float, bool]]:
    model, config = args
    scorer = Scorer(model)
    out = []
    for report in learn(model, config):
        st = scorer.score(report)
        out.append((report, st.policy_value, st.is_optimal))
    return out


def default_jobs() -> int:
    return os.cpu_count() or 1


def run_trials(model: Mdp, config: LearnerConfig, trials: int, seed: int, jobs: int | None = None):
    """Trials with seeds ``seed .. seed + trials - 1``; results in seed order."""
    if trials < 1:
        raise ValueError("need at least one trial")
    tasks = [(model, replace(config, seed=seed + i)) for i in range(trials)]
    jobs = min(jobs or default_jobs(), trials)
    if jobs <= 1:
        return [_trial(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_trial, tasks))


def aggregate(results) -> list[dict[str, object]]:
    """Per-stage median and population standard deviation over trials.

    Trials that stopped early are padded with their final stage, and the
    number of padded entries is reported per stage.
    """
    depth = max(len(r) for r in results)
    rows = []
    for i in range(depth):
        picked, padded = [], 0
        for r in results:
            if i < len(r):
                picked.append(r[i])
            else:
                picked.append(r[-1])
                padded += 1
        L = np.array([rep.L_s0 for rep, _, _ in picked])
        U = np.array([rep.U_s0 for rep, _, _ in picked])
        E = U - L
        V = np.array([v for _, v, _ in picked])
        opt = np.array([o for _, _, o in picked], dtype=float)
        rows.append({
            "k": i + 1, "trials": len(picked), "padded": padded,
            "L_median": float(np.median(L)), "L_std": float(np.std(L)),
            "U_median": float(np.median(U)), "U_std": float(np.std(U)),
            "error_median": float(np.median(E)), "error_std": float(np.std(E)),
            "policy_value_median": float(np.median(V)), "policy_value_std": float(np.std(V)),
            "optimal_fraction": float(opt.mean()),
        })
    return rows


def bench(model: Mdp, config: LearnerConfig, trials: int, seed: int, out_dir, jobs: int | None = None,
          name: str = "model") -> list[dict[str, object]]:
    """Run ``trials`` seeded trials and write ``stages.csv``, ``aggregate.csv``,
    ``timing.csv`` and three SVG charts into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results = run_trials(model, config, trials, seed, jobs)

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BENCH_HEADER)
    for i, res in enumerate(results):
        for rep, v, opt in res:
            st = ScoredStage(rep, v, opt)
            w.writerow([str(i), str(seed + i)] + st.row(with_time=False))
    (out / "stages.csv").write_text(buf.getvalue(), encoding="utf-8")

    agg = aggregate(results)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AGGREGATE_HEADER)
    for row in agg:
        w.writerow([fmt(row[h]) for h in AGGREGATE_HEADER])
    (out / "aggregate.csv").write_text(buf.getvalue(), encoding="utf-8")

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["trial", "seed", "k", "wall_ms"])
    for i, res in enumerate(results):
        for rep, _, _ in res:
            w.writerow([i, seed + i, rep.k, fmt(round(rep.wall_time * 1000, 3))])
    (out / "timing.csv").write_text(buf.getvalue(), encoding="utf-8")

    ks = [row["k"] for row in agg]
    optimum = Scorer(model).optimum
    (out / "bounds.svg").write_text(line_chart(
        f"{name}: value bounds vs. stage k", ks,
        [("L(s0)", [r["L_median"] for r in agg], "#1f77b4"),
         ("U(s0)", [r["U_median"] for r in agg], "#d62728")],
        y_range=(0.0, 1.0)), encoding="utf-8")
    err = [r["error_median"] for r in agg]
    sd = [r["error_std"] for r in agg]
    (out / "error.svg").write_text(line_chart(
        f"{name}: error vs. stage k", ks, [("U - L", err, "#2ca02c")],
        band=([max(0.0, e - s) for e, s in zip(err, sd)], [e + s for e, s in zip(err, sd)]),
        y_range=(0.0, max([e + s for e, s in zip(err, sd)] + [1e-9]))), encoding="utf-8")
    (out / "policy.svg").write_text(line_chart(
        f"{name}: policy accuracy vs. stage k", ks,
        [("policy value", [r["policy_value_median"] for r in agg], "#9467bd"),
         ("optimum", [optimum] * len(ks), "#7f7f7f")],
        y_range=(0.0, 1.0)), encoding="utf-8")
    return agg


# -- SVG -----------------------------------------------------------------


def _num(x: float) -> str:
    return f"{x:.2f}"


def line_chart(title: str, xs, series, band=None, y_range=(0.0, 1.0), width: int = 480,
               height: int = 320) -> str:
    """A small self-contained SVG line chart.

    ``series`` is a list of ``(label, ys, colour)``; ``band`` an optional
    ``(lower, upper)`` pair shaded behind the first series.
    """
    left, right, top, bottom = 56, 16, 32, 40
    pw, ph = width - left - right, height - top - bottom
    x0, x1 = min(xs), max(xs)
    y0, y1 = y_range
    if x1 == x0:
        x1 = x0 + 1
    if y1 <= y0:
        y1 = y0 + 1

    def px(x):
        return left + (x - x0) / (x1 - x0) * pw

    def py(y):
        return top + ph - (min(max(y, y0), y1) - y0) / (y1 - y0) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.0f}" y="18" text-anchor="middle" font-family="sans-serif" '
        f'font-size="13">{_escape(title)}</text>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
    ]
    for i in range(5):
        yv = y0 + (y1 - y0) * i / 4
        parts.append(f'<text x="{left - 6}" y="{_num(py(yv) + 4)}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="10">{yv:.3g}</text>')
    step = max(1, len(xs) // 10)
    for x in xs[::step]:
        parts.append(f'<text x="{_num(px(x))}" y="{top + ph + 14}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="10">{x}</text>')
    parts.append(f'<text x="{left + pw / 2:.0f}" y="{height - 6}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="11">stage k</text>')
    if band is not None:
        lo, hi = band
        pts = [f"{_num(px(x))},{_num(py(y))}" for x, y in zip(xs, hi)]
        pts += [f"{_num(px(x))},{_num(py(y))}" for x, y in reversed(list(zip(xs, lo)))]
        colour = series[0][2]
        parts.append(f'<polygon points="{" ".join(pts)}" fill="{colour}" fill-opacity="0.2" stroke="none"/>')
    for i, (label, ys, colour) in enumerate(series):
        pts = " ".join(f"{_num(px(x))},{_num(py(y))}" for x, y in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{colour}" stroke-width="1.5"/>')
        ly = top + 12 + 14 * i
        parts.append(f'<line x1="{left + pw - 90}" y1="{ly - 4}" x2="{left + pw - 74}" y2="{ly - 4}" '
                     f'stroke="{colour}" stroke-width="1.5"/>')
        parts.append(f'<text x="{left + pw - 70}" y="{ly}" font-family="sans-serif" '
                     f'font-size="10">{_escape(label)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
