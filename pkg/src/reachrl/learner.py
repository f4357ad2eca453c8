"""Staged learning loop: parameter schedule, sample budgets, stages and the
convergence check."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Literal

import numpy as np
from scipy import stats

from .bvi import IntervalValues, extract_policy, run_bvi
from .collapse import CollapsedMdp, collapse, mec_decomposition
from .estimation import ConfidenceBudget, lower_estimate, split_budget
from .mdp import CountTable, Mdp, MemorylessDetPolicy
from .simulator import (GuidanceTable, SimulatorHandle, certify_components, required_samples,
                        simulate_batch, simulate_run)

Mode = Literal["practical", "theoretical"]

#: largest simulation count the theoretical budget may ask for
BUDGET_CAP = 10**9


class BudgetInfeasible(RuntimeError):
    """The theoretical sample budget exceeds what can be run."""

    def __init__(self, k: int, s_k: float, p: float, cap: int):
        self.k = k
        self.s_k = s_k
        self.p = p
        self.cap = cap
        super().__init__(
            f"theoretical budget infeasible at this scale: stage {k} needs s_k={s_k:.4g} "
            f"samples per transition with least transition probability p={p:.4g} (cap {cap})"
        )


@dataclass(frozen=True)
class StageParams:
    k: int
    delta: Fraction
    eps: Fraction
    p: Fraction
    mu: float = 0.1
    mode: Mode = "practical"


def stage_parameters(k: int, mu: float = 0.1, mode: Mode = "practical") -> StageParams:
    if k < 1:
        raise ValueError("stage index starts at 1")
    x = Fraction(1, 2**k)
    return StageParams(k, x, x, x, mu, mode)


@dataclass
class LearnerConfig:
    mode: Mode = "practical"
    mu: float = 0.1
    c0: int = 800
    max_stages: int = 30
    min_stages: int = 3
    threshold: float = 1e-3
    loop_mode: Literal["heuristic", "exact_ec"] = "heuristic"
    bvi_coef: int = 10
    unroll: int | None = None
    budget_cap: int = BUDGET_CAP
    seed: int = 0

    def validate(self) -> None:
        if not 0 < self.mu <= 1:
            raise ValueError("mu must lie in (0, 1]")
        if self.min_stages < 1 or self.max_stages < self.min_stages:
            raise ValueError("need max_stages >= min_stages >= 1")
        if self.c0 < 1 or self.bvi_coef < 1:
            raise ValueError("c0 and bvi_coef must be positive")
        if self.unroll is not None and self.unroll < 1:
            raise ValueError("unroll depth must be >= 1")


@dataclass
class StageReport:
    k: int
    params: StageParams
    N_k: int
    cumulative_samples: int
    cumulative_runs: int
    L_s0: float
    U_s0: float
    policy: MemorylessDetPolicy
    mec_count: int
    sweeps: int
    iterations: int
    wall_time: float
    fallback: list[int] = field(default_factory=list)
    exact_policy_value: float | None = None
    s_k: float | None = None

    @property
    def error(self) -> float:
        return self.U_s0 - self.L_s0


# -- budgets -----------------------------------------------------------


def least_transition_probability(mu: float, p_k: float, num_actions: int, num_states: int) -> float:
    """``(mu * p_k / |A|) ** |S|``."""
    return (mu * p_k / num_actions) ** num_states


def per_transition_samples(delta_p: float, eps_k: float, p_k: float, r: int) -> float:
    """``32 ln(2/delta_p) r^2 / (eps_k^2 p_k^(2r))``, computed in log space
    so huge values come out as ``inf`` rather than raising."""
    log_s = (math.log(32 * math.log(2 / delta_p)) + 2 * math.log(r)
             - 2 * math.log(eps_k) - 2 * r * math.log(p_k))
    return math.exp(log_s) if log_s < 700 else math.inf


def simulations_needed(s_k: float, p: float, delta_n: float, cap: int = BUDGET_CAP) -> int | None:
    """Least ``N`` with ``P[Binomial(N, p) <= s_k - 1] <= delta_n``.

    Doubles an upper bracket and then bisects; the CDF is evaluated in log
    space.  Returns None when ``N`` would exceed ``cap``.
    """
    if s_k <= 0:
        return 0
    if not math.isfinite(s_k) or s_k > cap:
        return None
    s = math.ceil(s_k)
    log_target = math.log(delta_n)

    def ok(n: int) -> bool:
        return stats.binom.logcdf(s - 1, n, p) <= log_target

    hi = max(s, 1)
    while not ok(hi):
        if hi > cap:
            return None
        hi *= 2
    lo = hi // 2 if hi > s else s - 1
    lo = max(lo, s - 1)
    # invariant: ok(hi), not ok(lo) (or lo below the trivial range)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi if hi <= cap else None


def theoretical_budget(params: StageParams, num_states: int, num_actions: int, sa_count: int,
                       r: int, cap: int = BUDGET_CAP) -> tuple[int, float]:
    """``(N_k, s_k)`` for a theoretical-mode stage."""
    if r < 1:
        raise ValueError("unroll depth must be >= 1")
    budget = split_budget(float(params.delta), float(params.p), max(sa_count, 1))
    s_k = per_transition_samples(budget.delta_p, float(params.eps), float(params.p), r)
    if math.isfinite(s_k):
        s_k = math.ceil(s_k)
    p = least_transition_probability(params.mu, float(params.p), num_actions, num_states)
    n = simulations_needed(s_k, p, budget.delta_n, cap)
    if n is None:
        raise BudgetInfeasible(params.k, s_k, p, cap)
    return n, s_k


def practical_budget(k: int, partial_states: int, c0: int = 50) -> int:
    if k < 1:
        raise ValueError("stage index starts at 1")
    return c0 * k * k * max(1, partial_states)


# -- partial model -------------------------------------------------------


def build_partial_model(counts: CountTable, initial: int, target, budget: ConfidenceBudget,
                        p_k: float) -> tuple[CollapsedMdp, int]:
    """Lower-estimate the counts and collapse the end components whose pairs
    are all sampled often enough to be trusted.  Returns the collapsed model
    and the number of collapsed components."""
    est = lower_estimate(counts, budget.delta_p)
    graph = counts.support_graph()
    graph.setdefault(initial, {})
    threshold = required_samples(p_k, budget.delta_c)
    trusted = {s: {a: succ for a, succ in acts.items() if counts.pair(s, a) > threshold}
               for s, acts in graph.items()}
    mecs = mec_decomposition(trusted)
    pmap = est.as_probability_map()
    for s in graph:
        pmap.setdefault(s, {})
    cm = collapse(pmap, mecs, target, initial)
    return cm, len(mecs)


def bvi_iterations(cfg: LearnerConfig, k: int, num_states: int, seen_states: int) -> int:
    if cfg.mode == "theoretical":
        return 2**k * num_states
    return cfg.bvi_coef * k * max(1, seen_states)


# -- learner ---------------------------------------------------------------


class Learner:
    """One learning trial against a simulator.

    Keeps the counters, the guidance table and the stage history between
    stages.  Nothing is reseeded between stages.
    """

    def __init__(self, sim: SimulatorHandle, config: LearnerConfig | None = None):
        self.sim = sim
        self.config = config or LearnerConfig()
        self.config.validate()
        self.counts = CountTable()
        self.guidance = GuidanceTable.uniform(sim)
        self.history: list[StageReport] = []
        self.runs = 0

    @property
    def rng(self) -> np.random.Generator:
        return self.sim.rng

    def _budget(self, params: StageParams) -> tuple[ConfidenceBudget, int, float | None]:
        cfg = self.config
        sa = max(1, len(self.counts.pairs()))
        budget = split_budget(float(params.delta), float(params.p), sa)
        if cfg.mode == "theoretical":
            r = cfg.unroll if cfg.unroll is not None else self.sim.num_states * params.k
            n, s_k = theoretical_budget(params, self.sim.num_states, self.sim.num_actions, sa, r,
                                        cfg.budget_cap)
            return budget, n, s_k
        seen = len(self.counts.seen_states(self.sim.initial)) if self.counts.total else 0
        return budget, practical_budget(params.k, seen, cfg.c0), None

    def _sample(self, params: StageParams, budget: ConfidenceBudget, n: int) -> None:
        cfg = self.config
        sim = self.sim
        p_k = float(params.p)
        if cfg.loop_mode == "heuristic":
            simulate_batch(sim, self.guidance, params.mu, n, self.counts)
        else:
            for _ in range(n):
                simulate_run(sim, self.guidance, params.mu, p_k, budget.delta_c, self.counts, "exact_ec")
        self.runs += n
        # top up end components that are not yet certified at this stage
        sa = max(1, len(self.counts.pairs()))
        delta_c = split_budget(float(params.delta), p_k, sa).delta_c
        certify_components(sim, self.counts, required_samples(p_k, delta_c))

    def evaluate(self, params: StageParams, iterations: int) -> tuple[CollapsedMdp, IntervalValues, int]:
        """Bounds from the current counts at the given stage parameters."""
        sa = max(1, len(self.counts.pairs()))
        budget = split_budget(float(params.delta), float(params.p), sa)
        cm, n_mecs = build_partial_model(self.counts, self.sim.initial, self.sim.target, budget,
                                         float(params.p))
        tol = None if self.config.mode == "theoretical" else 1e-12
        v = run_bvi(cm, iterations, tolerance=tol)
        return cm, v, n_mecs

    def run_stage(self, params: StageParams) -> StageReport:
        start = time.perf_counter()
        sim = self.sim
        budget, n, s_k = self._budget(params)
        self._sample(params, budget, n)
        seen = self.counts.seen_states(sim.initial)
        iterations = bvi_iterations(self.config, params.k, sim.num_states, len(seen))
        cm, v, n_mecs = self.evaluate(params, iterations)
        ext = extract_policy(cm, v, sim.num_states, sim.available, self.rng, sim.target)
        self.guidance = GuidanceTable(dict(ext.best))
        q0 = cm.initial
        report = StageReport(
            k=params.k,
            params=params,
            N_k=n,
            cumulative_samples=self.counts.total,
            cumulative_runs=self.runs,
            L_s0=float(v.L_state[q0]),
            U_s0=float(v.U_state[q0]),
            policy=ext.policy,
            mec_count=n_mecs,
            sweeps=v.sweeps,
            iterations=iterations,
            wall_time=time.perf_counter() - start,
            fallback=ext.fallback,
            s_k=s_k,
        )
        self.history.append(report)
        return report

    def converged(self) -> bool:
        """Re-run the previous stage's evaluation on the current counts and
        check whether the error improved by less than the threshold."""
        cfg = self.config
        if len(self.history) < 2:
            return False
        cur, prev = self.history[-1], self.history[-2]
        if cur.k < cfg.min_stages:
            return False
        cm, v, _ = self.evaluate(prev.params, prev.iterations)
        err = v.gap(cm.initial)
        return prev.error - err < cfg.threshold

    def run(self, on_stage=None) -> list[StageReport]:
        cfg = self.config
        for k in range(1, cfg.max_stages + 1):
            report = self.run_stage(stage_parameters(k, cfg.mu, cfg.mode))
            if on_stage is not None:
                on_stage(report)
            if k >= cfg.min_stages and self.converged():
                break
        return self.history


def learn(model: Mdp, config: LearnerConfig | None = None, on_stage=None) -> list[StageReport]:
    """Run a full trial on ``model`` seeded from ``config.seed``."""
    config = config or LearnerConfig()
    sim = SimulatorHandle(model, np.random.SeedSequence(config.seed))
    return Learner(sim, config).run(on_stage)


def with_overrides(config: LearnerConfig, **kw) -> LearnerConfig:
    return replace(config, **{k: v for k, v in kw.items() if v is not None})
