"""Reading and writing models.

Two formats are supported:

* MDPX, a small line-oriented native format::

      mdpx 1
      states <N>
      initial <i>
      label <name> <i> <j> ...
      transition <s> <action-name> <s'> <p/q | decimal>

* the explicit-state MDP export of PRISM (``.tra`` + ``.lab``), import only.
"""
from __future__ import annotations

import math
import re
import warnings
from fractions import Fraction
from pathlib import Path

from .mdp import Mdp, validate


class ParseError(ValueError):
    """Syntax or semantic error in a model file, with its location."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None, source: str = ""):
        self.line = line
        self.column = column
        self.source = source
        where = source
        if line is not None:
            where = f"{where}:{line}" if where else f"line {line}"
            if column is not None:
                where += f":{column}"
        super().__init__(f"{where}: {message}" if where else message)


class ProbabilityRepairWarning(UserWarning):
    """A rounded probability row was rescaled to sum to one."""


class DeadlockWarning(UserWarning):
    """An imported state without choices was given a self loop."""


def _decode(data: bytes | str) -> str:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return data


def parse_probability(literal: str) -> Fraction:
    """Exact value of a ``p/q`` or finite decimal literal."""
    try:
        value = Fraction(literal)
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"bad probability literal {literal!r}") from None
    return value


def _tokens(line: str) -> list[tuple[str, int]]:
    return [(m.group(0), m.start() + 1) for m in re.finditer(r"\S+", line)]


def _int(tok: tuple[str, int], lineno: int, what: str, source: str) -> int:
    text, col = tok
    try:
        value = int(text)
    except ValueError:
        raise ParseError(f"expected integer {what}, got {text!r}", lineno, col, source) from None
    if value < 0:
        raise ParseError(f"negative {what} {value}", lineno, col, source)
    return value


def parse_mdpx(data: bytes | str, target_label: str = "goal", source: str = "") -> Mdp:
    """Parse an MDPX document into a validated :class:`~reachrl.mdp.Mdp`."""
    text = _decode(data)
    version = num_states = initial = None
    labels: dict[str, list[int]] = {}
    actions: list[str] = []
    action_ids: dict[str, int] = {}
    transitions: dict[tuple[int, int], list[tuple[int, Fraction]]] = {}
    seen: dict[tuple[int, int, int], int] = {}
    first_line: dict[tuple[int, int], int] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip("\r")
        toks = _tokens(line)
        if not toks:
            continue
        keyword, col = toks[0]
        if version is None:
            if keyword != "mdpx" or len(toks) != 2:
                raise ParseError("document must start with 'mdpx <version>'", lineno, col, source)
            if toks[1][0] != "1":
                raise ParseError(f"unsupported version {toks[1][0]!r}", lineno, toks[1][1], source)
            version = 1
            continue
        if keyword == "states":
            if len(toks) != 2:
                raise ParseError("usage: states <N>", lineno, col, source)
            if num_states is not None:
                raise ParseError("duplicate 'states' line", lineno, col, source)
            num_states = _int(toks[1], lineno, "state count", source)
        elif keyword == "initial":
            if len(toks) != 2:
                raise ParseError("usage: initial <i>", lineno, col, source)
            if initial is not None:
                raise ParseError("duplicate 'initial' line", lineno, col, source)
            initial = _int(toks[1], lineno, "initial state", source)
        elif keyword == "label":
            if len(toks) < 2:
                raise ParseError("usage: label <name> <i> ...", lineno, col, source)
            name = toks[1][0]
            members = labels.setdefault(name, [])
            for tok in toks[2:]:
                s = _int(tok, lineno, "state", source)
                if num_states is not None and s >= num_states:
                    raise ParseError(f"state {s} out of range [0, {num_states})", lineno, tok[1], source)
                members.append(s)
        elif keyword == "transition":
            if len(toks) != 5:
                raise ParseError("usage: transition <s> <action> <s'> <p>", lineno, col, source)
            if num_states is None:
                raise ParseError("'transition' before 'states'", lineno, col, source)
            s = _int(toks[1], lineno, "source state", source)
            name = toks[2][0]
            t = _int(toks[3], lineno, "target state", source)
            for value, tok in ((s, toks[1]), (t, toks[3])):
                if value >= num_states:
                    raise ParseError(f"state {value} out of range [0, {num_states})", lineno, tok[1], source)
            try:
                p = parse_probability(toks[4][0])
            except ValueError as exc:
                raise ParseError(str(exc), lineno, toks[4][1], source) from None
            if not 0 < p <= 1:
                raise ParseError(f"probability {toks[4][0]} outside (0, 1]", lineno, toks[4][1], source)
            if name not in action_ids:
                action_ids[name] = len(actions)
                actions.append(name)
            a = action_ids[name]
            if (s, a, t) in seen:
                raise ParseError(
                    f"duplicate transition ({s}, {name}, {t}); first given on line {seen[(s, a, t)]}",
                    lineno, col, source,
                )
            seen[(s, a, t)] = lineno
            first_line.setdefault((s, a), lineno)
            transitions.setdefault((s, a), []).append((t, p))
        else:
            raise ParseError(f"unknown keyword {keyword!r}", lineno, col, source)

    if version is None:
        raise ParseError("empty document", source=source)
    if num_states is None:
        raise ParseError("missing 'states' line", source=source)
    if initial is None:
        raise ParseError("missing 'initial' line", source=source)
    if initial >= num_states:
        raise ParseError(f"initial state {initial} out of range [0, {num_states})", source=source)

    # the action table is not part of the text, so fix it by name order;
    # this keeps write(parse(text)) == text for canonical documents
    order = {old: new for new, old in enumerate(sorted(range(len(actions)), key=actions.__getitem__))}
    actions = sorted(actions)
    transitions = {(s, order[a]): row for (s, a), row in transitions.items()}
    first_line = {(s, order[a]): n for (s, a), n in first_line.items()}

    m = Mdp(num_states, initial, actions, transitions, labels, target_label)
    problems = validate(m)
    if problems:
        v = problems[0]
        line = first_line.get((v.state, v.action)) if v.action is not None else None
        raise ParseError("; ".join(str(p) for p in problems), line, None, source)
    return m


def write_mdpx(m: Mdp) -> bytes:
    """Canonical MDPX text for ``m`` (UTF-8 bytes)."""
    lines = ["mdpx 1", f"states {m.num_states}", f"initial {m.initial}"]
    for name in sorted(m.labels):
        states = " ".join(str(s) for s in sorted(m.labels[name]))
        lines.append(f"label {name} {states}".rstrip())
    for (s, a), row in sorted(m.rows().items()):
        for t, p in sorted(row):
            lines.append(f"transition {s} {m.action_names[a]} {t} {p.numerator}/{p.denominator}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def load_mdpx(path: str | Path, target_label: str = "goal") -> Mdp:
    path = Path(path)
    return parse_mdpx(path.read_bytes(), target_label, source=str(path))


def save_mdpx(m: Mdp, path: str | Path) -> None:
    Path(path).write_bytes(write_mdpx(m))


# -- PRISM explicit-state import ----------------------------------------

_LAB_DECL = re.compile(r'(\d+)="([^"]*)"')

#: largest |sum - 1| of an imported probability row that is silently repaired
REPAIR_TOLERANCE = 1e-9


def parse_prism_lab(data: bytes | str, source: str = "") -> dict[str, set[int]]:
    text = _decode(data)
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise ParseError("missing label declaration line", 1, None, source)
    names = {}
    for m in _LAB_DECL.finditer(lines[0]):
        names[int(m.group(1))] = m.group(2)
    if not names:
        raise ParseError("malformed label declaration line", 1, 1, source)
    states_by_label: dict[str, set[int]] = {name: set() for name in names.values()}
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line:
            continue
        head, sep, rest = line.partition(":")
        if not sep:
            raise ParseError("expected '<state>: <label ids>'", lineno, 1, source)
        try:
            state = int(head)
            ids = [int(x) for x in rest.split()]
        except ValueError:
            raise ParseError("non-integer entry in label assignment", lineno, 1, source) from None
        for i in ids:
            if i not in names:
                raise ParseError(f"undeclared label index {i}", lineno, None, source)
            states_by_label[names[i]].add(state)
    return states_by_label


def import_prism_explicit(
    tra: bytes | str,
    lab: bytes | str,
    target_label: str,
    source: str = "",
) -> Mdp:
    """Build an :class:`~reachrl.mdp.Mdp` from a PRISM ``.tra``/``.lab`` pair.

    Unnamed choices get the synthetic action name ``c<choiceIdx>``.  The
    initial state is the unique state labelled ``init``.  Rows whose decimal
    probabilities miss 1 by at most :data:`REPAIR_TOLERANCE` are repaired by
    adjusting the last successor (a :class:`ProbabilityRepairWarning` is
    emitted); larger deviations are rejected.
    """
    tra_text = _decode(tra)
    lines = [(i, l.strip()) for i, l in enumerate(tra_text.splitlines(), start=1)]
    lines = [(i, l) for i, l in lines if l]
    if not lines:
        raise ParseError("empty .tra file", source=source)
    header_no, header = lines[0]
    parts = header.split()
    try:
        n_states, n_choices, n_trans = (int(x) for x in parts)
    except ValueError:
        raise ParseError("malformed header, expected '<nStates> <nChoices> <nTransitions>'",
                         header_no, 1, source) from None

    rows: dict[tuple[int, int], list[tuple[int, Fraction]]] = {}
    choice_name: dict[tuple[int, int], str] = {}
    for lineno, line in lines[1:]:
        f = line.split()
        if len(f) not in (4, 5):
            raise ParseError("expected '<src> <choice> <dst> <prob> [action]'", lineno, 1, source)
        try:
            src, choice, dst = int(f[0]), int(f[1]), int(f[2])
        except ValueError:
            raise ParseError("non-integer index", lineno, 1, source) from None
        for v in (src, dst):
            if not 0 <= v < n_states:
                raise ParseError(f"state {v} out of range [0, {n_states})", lineno, 1, source)
        try:
            p = parse_probability(f[3])
        except ValueError as exc:
            raise ParseError(str(exc), lineno, None, source) from None
        if p <= 0:
            continue
        name = f[4] if len(f) == 5 else f"c{choice}"
        prev = choice_name.setdefault((src, choice), name)
        if prev != name:
            raise ParseError(f"choice {choice} of state {src} carries two action names", lineno, None, source)
        rows.setdefault((src, choice), []).append((dst, p))

    if len(rows) != n_choices:
        raise ParseError(f"header declares {n_choices} choices, found {len(rows)}", header_no, None, source)
    if sum(len(r) for r in rows.values()) != n_trans:
        raise ParseError(f"header declares {n_trans} transitions, found "
                         f"{sum(len(r) for r in rows.values())}", header_no, None, source)
    per_state: dict[int, list[int]] = {}
    for src, choice in rows:
        per_state.setdefault(src, []).append(choice)
    for src, choices in per_state.items():
        if sorted(choices) != list(range(len(choices))):
            missing = sorted(set(range(max(choices) + 1)) - set(choices))
            raise ParseError(f"malformed choice: state {src} has no transitions for choice(s) {missing}",
                             None, None, source)

    actions: list[str] = []
    ids: dict[str, int] = {}
    transitions: dict[tuple[int, int], list[tuple[int, Fraction]]] = {}
    for (src, choice), row in sorted(rows.items()):
        name = choice_name[(src, choice)]
        if name in ids and (src, ids[name]) in transitions:
            name = f"{name}_c{choice}"
        if name not in ids:
            ids[name] = len(actions)
            actions.append(name)
        transitions[(src, ids[name])] = _repair(row, src, choice, source)

    labels = parse_prism_lab(lab, source=source)
    init = labels.get("init", set())
    if len(init) != 1:
        raise ParseError(f"expected exactly one state labelled 'init', found {len(init)}", source=source)
    if target_label not in labels:
        raise ParseError(f"unknown target label {target_label!r}", source=source)
    labels = {k: v for k, v in labels.items() if k != "init"}
    # PRISM exports deadlock states without choices; give them a self loop
    dead = [s for s in range(n_states) if s not in per_state]
    if dead:
        warnings.warn(f"{source or 'tra'}: added self loops to {len(dead)} state(s) without choices",
                      DeadlockWarning, stacklevel=2)
        if "deadlock" not in ids:
            ids["deadlock"] = len(actions)
            actions.append("deadlock")
        for s in dead:
            transitions[(s, ids["deadlock"])] = [(s, Fraction(1))]
    m = Mdp(n_states, next(iter(init)), actions, transitions, labels, target_label)
    problems = validate(m)
    if problems:
        raise ParseError("; ".join(str(p) for p in problems), source=source)
    return m


def _repair(row, src, choice, source):
    total = sum(p for _, p in row)
    if total == 1:
        return row
    gap = abs(float(total - 1))
    if gap > REPAIR_TOLERANCE or not math.isfinite(gap):
        raise ParseError(f"probabilities of state {src} choice {choice} sum to {float(total)!r}",
                         source=source)
    head = row[:-1]
    last = 1 - sum(p for _, p in head)
    if last <= 0:
        raise ParseError(f"cannot repair state {src} choice {choice}", source=source)
    warnings.warn(f"{source or 'tra'}: rescaled state {src} choice {choice} (sum was {float(total)!r})",
                  ProbabilityRepairWarning, stacklevel=3)
    return head + [(row[-1][0], last)]


def load_prism_explicit(tra_path: str | Path, lab_path: str | Path, target_label: str) -> Mdp:
    return import_prism_explicit(Path(tra_path).read_bytes(), Path(lab_path).read_bytes(),
                                 target_label, source=str(tra_path))
