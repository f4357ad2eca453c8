"""``reachrl`` command line: solve, learn, bench, epsdiff, convert."""
from __future__ import annotations

import argparse
import os
import sys
import warnings
from fractions import Fraction
from pathlib import Path

from . import exact, harness
from .learner import BudgetInfeasible, LearnerConfig
from .mdp import Mdp
from .model_io import ParseError, load_mdpx, load_prism_explicit, save_mdpx, write_mdpx


class CliError(Exception):
    def __init__(self, message: str, code: int = 1):
        super().__init__(message)
        self.code = code


def format_value(v: Fraction) -> str:
    """Integers and terminating decimals exactly, anything else as a float."""
    if v.denominator == 1:
        return str(v.numerator)
    d = v.denominator
    for p in (2, 5):
        while d % p == 0:
            d //= p
    if d == 1:
        text = f"{v.numerator * 10**40 // v.denominator:041d}"
        whole, frac = text[:-40] or "0", text[-40:].rstrip("0")
        return f"{int(whole)}.{frac}"
    return repr(float(v))


def load_model(path: str, target: str, lab: str | None = None) -> Mdp:
    p = Path(path)
    if not p.exists():
        raise CliError(f"{path}: no such file")
    try:
        if p.suffix == ".tra" or lab is not None:
            lab_path = Path(lab) if lab else p.with_suffix(".lab")
            if not lab_path.exists():
                raise CliError(f"{lab_path}: no such file")
            return load_prism_explicit(p, lab_path, target)
        return load_mdpx(p, target)
    except ParseError as exc:
        raise CliError(str(exc), 2) from None


def _seed(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get("REACHRL_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise CliError(f"REACHRL_SEED must be an integer, got {env!r}") from None


def _config(args) -> LearnerConfig:
    max_stages = args.max_stages
    min_stages = min(args.min_stages, max_stages)
    cfg = LearnerConfig(mode=args.mode, mu=args.mu, c0=args.c0, max_stages=max_stages,
                        min_stages=min_stages, threshold=args.threshold, loop_mode=args.loop_mode,
                        bvi_coef=args.bvi_coef, unroll=args.unroll, seed=_seed(args.seed))
    try:
        cfg.validate()
    except ValueError as exc:
        raise CliError(str(exc)) from None
    return cfg


# -- subcommands ---------------------------------------------------------


def cmd_solve(args) -> int:
    m = load_model(args.model, args.target, args.lab)
    res = exact.solve_optimal(m)
    value = exact.policy_value_exact(m, res.policy)
    print(value[m.initial] if args.exact else format_value(value[m.initial]))
    if args.per_state:
        for s in range(m.num_states):
            print(f"{s} {value[s] if args.exact else format_value(value[s])}")
    return 0


def cmd_learn(args) -> int:
    m = load_model(args.model, args.target, args.lab)
    cfg = _config(args)
    out = open(args.out, "w", encoding="utf-8", newline="") if args.out else sys.stdout
    try:
        harness.learn_csv(m, cfg, out)
    except BudgetInfeasible as exc:
        out.write(f"# error k={exc.k}: {exc}\n")
        out.flush()
        raise CliError(str(exc), 3) from None
    finally:
        if args.out:
            out.close()
    return 0


def cmd_bench(args) -> int:
    m = load_model(args.model, args.target, args.lab)
    cfg = _config(args)
    if args.trials < 1:
        raise CliError("--trials must be >= 1")
    try:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        probe = Path(args.out) / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise CliError(f"{args.out}: not writable ({exc.strerror})") from None
    try:
        agg = harness.bench(m, cfg, args.trials, cfg.seed, args.out, args.jobs, Path(args.model).stem)
    except BudgetInfeasible as exc:
        raise CliError(str(exc), 3) from None
    last = agg[-1]
    print(f"{args.trials} trials, {len(agg)} stages; last stage median error "
          f"{last['error_median']:.6g}, median policy value {last['policy_value_median']:.6g}")
    return 0


def cmd_epsdiff(args) -> int:
    m = load_model(args.model, args.target, args.lab)
    print(f"D {exact.transition_complexity(m)}")
    print(f"bound {exact.eps_diff_bound(m)}")
    try:
        cert = exact.min_gap(m, args.cap)
    except exact.PolicyEnumerationError as exc:
        print(f"eps_diff refused: {exc.count} policies exceed the cap {exc.cap}", file=sys.stderr)
        return 4
    print(f"policies {cert.num_policies}")
    print(f"optimal {cert.optimal_value}")
    if cert.eps_diff is None:
        print("eps_diff none (all policies share one value at s0)")
    else:
        print(f"runner_up {cert.runner_up_value}")
        print(f"eps_diff {cert.eps_diff}")
    if cert.min_l1 is not None:
        print(f"min_l1 {cert.min_l1}")
        print(f"bound_holds {str(cert.bound <= cert.min_l1).lower()}")
    return 0


def cmd_convert(args) -> int:
    if args.source == "prism":
        if not args.tra or not args.lab:
            raise CliError("--from prism needs --tra and --lab")
        for f in (args.tra, args.lab):
            if not Path(f).exists():
                raise CliError(f"{f}: no such file")
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                m = load_prism_explicit(args.tra, args.lab, args.target)
            except ParseError as exc:
                raise CliError(str(exc), 2) from None
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
    else:
        if not args.input:
            raise CliError("--from mdpx needs --in")
        m = load_model(args.input, args.target)
    if args.out:
        save_mdpx(m, args.out)
    else:
        sys.stdout.write(write_mdpx(m).decode("utf-8"))
    return 0


# -- parser --------------------------------------------------------------


def _model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("model", help="MDPX file, or a PRISM .tra file (with --lab or a sibling .lab)")
    p.add_argument("--target", default="goal", help="label naming the target states (default: goal)")
    p.add_argument("--lab", help="PRISM .lab file for a .tra model")


def _learner_args(p: argparse.ArgumentParser) -> None:
    d = LearnerConfig()
    p.add_argument("--mode", choices=["practical", "theoretical"], default=d.mode)
    p.add_argument("--mu", type=float, default=d.mu, help="exploration factor in (0, 1]")
    p.add_argument("--c0", type=int, default=d.c0, help="practical budget coefficient")
    p.add_argument("--max-stages", type=int, default=d.max_stages)
    p.add_argument("--min-stages", type=int, default=d.min_stages)
    p.add_argument("--threshold", type=float, default=d.threshold, help="convergence threshold")
    p.add_argument("--loop-mode", choices=["heuristic", "exact_ec"], default=d.loop_mode)
    p.add_argument("--bvi-coef", type=int, default=d.bvi_coef)
    p.add_argument("--unroll", type=int, default=None, help="unroll depth r (theoretical mode)")
    p.add_argument("--seed", type=int, default=None, help="seed (default: $REACHRL_SEED or 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reachrl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="optimal reachability value of a known model")
    _model_args(p)
    p.add_argument("--per-state", action="store_true", help="also print every state's value")
    p.add_argument("--exact", action="store_true", help="print values as fractions")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("learn", help="run the learner once, one CSV row per stage")
    _model_args(p)
    _learner_args(p)
    p.add_argument("--out", help="CSV file (default: stdout)")
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("bench", help="seeded multi-trial run with CSV and SVG output")
    _model_args(p)
    _learner_args(p)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--jobs", type=int, default=None, help="parallel trials (default: CPU count)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("epsdiff", help="transition complexity, gap bound and policy gaps")
    _model_args(p)
    p.add_argument("--cap", type=int, default=exact.POLICY_CAP, help="policy enumeration cap")
    p.set_defaults(func=cmd_epsdiff)

    p = sub.add_parser("convert", help="convert a PRISM explicit model to MDPX")
    p.add_argument("--from", dest="source", choices=["prism", "mdpx"], default="prism")
    p.add_argument("--tra")
    p.add_argument("--lab")
    p.add_argument("--in", dest="input", help="MDPX input (with --from mdpx)")
    p.add_argument("--target", default="goal")
    p.add_argument("--out", help="output MDPX file (default: stdout)")
    p.set_defaults(func=cmd_convert)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"reachrl: error: {exc}", file=sys.stderr)
        return exc.code
    except BrokenPipeError:
        # output piped into e.g. head; stop quietly
        devnull = os.open(os.devnull, os.O_WRONLY)
        os.dup2(devnull, sys.stdout.fileno())
        return 141


if __name__ == "__main__":
    sys.exit(main())
