"""One-counter stochastic games: data model, text format and built-in fixtures.

A model is a finite set of control states, each owned by ``max``, ``min`` or
``rand`` (chance), and a set of rules ``(src, delta, dst)`` that move between
states while changing an unbounded integer counter by ``delta`` in
{-1, 0, +1}.  Rules leaving chance states carry exact rational probabilities.

Text format (UTF-8, line oriented, ``#`` starts a comment)::

    state <name> max|min|rand
    rule <src> <+1|0|-1> <dst> [<num>/<den>]

The probability field is required iff ``src`` is a ``rand`` state.
"""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Mapping, Sequence

from gmpy2 import mpz


class Owner(enum.Enum):
    MAX = "max"
    MIN = "min"
    RANDOM = "rand"

    @classmethod
    def parse(cls, text: str) -> "Owner":
        for owner in cls:
            if owner.value == text:
                return owner
        raise ValueError(f"unknown owner {text!r} (expected max, min or rand)")


class ModelError(ValueError):
    """Raised when a model fails to parse or validate."""

    def __init__(self, diagnostics: Sequence["Diagnostic"]):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    state: str | None = None
    rule: int | None = None
    line: int | None = None
    column: int | None = None

    def __str__(self) -> str:
        where = f"line {self.line}, column {self.column}: " if self.line is not None else ""
        return f"{where}{self.message}"

    def to_json(self) -> dict:
        out = {"code": self.code, "message": self.message}
        for key in ("state", "rule", "line", "column"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        return out


@dataclass(frozen=True)
class Rule:
    src: int
    delta: int
    dst: int
    prob: Fraction | None = None


@dataclass(frozen=True)
class Config:
    state: int
    counter: int


def parse_rational(text: str) -> Fraction:
    """Parse ``num/den``; anything else (decimals, bare integers) is rejected."""
    m = re.fullmatch(r"([+-]?\d+)/(\d+)", text.strip())
    if not m:
        raise ValueError(f"expected an exact rational num/den, got {text!r}")
    den = int(m.group(2))
    if den == 0:
        raise ValueError(f"zero denominator in {text!r}")
    return Fraction(int(m.group(1)), den)


def _digits(n: int) -> str:
    # str(int) refuses more than 4300 digits; deep segment games produce such values
    return str(n) if -10**4000 < n < 10**4000 else mpz(n).digits()


def format_rational(value: Fraction) -> str:
    return f"{_digits(int(value.numerator))}/{_digits(int(value.denominator))}"


@dataclass(frozen=True)
class OcSsg:
    """A one-counter simple stochastic game.

    States and rules keep declaration order; every downstream algorithm
    iterates in that order, which makes all outputs deterministic.
    Instances are immutable; validation is separate (see :func:`validate`).
    """

    states: tuple[tuple[str, Owner], ...]
    rules: tuple[Rule, ...]

    @classmethod
    def build(cls, states: Iterable[tuple[str, str | Owner]], rules: Iterable[Sequence]) -> "OcSsg":
        """Convenience constructor from names: rules are ``(src, delta, dst[, prob])``."""
        st = tuple((name, owner if isinstance(owner, Owner) else Owner.parse(owner)) for name, owner in states)
        index = {name: i for i, (name, _) in enumerate(st)}
        out = []
        for r in rules:
            src, delta, dst = r[0], int(r[1]), r[2]
            prob = r[3] if len(r) > 3 else None
            if isinstance(prob, str):
                prob = parse_rational(prob)
            elif prob is not None:
                prob = Fraction(prob)
            out.append(Rule(index[src], delta, index[dst], prob))
        return cls(st, tuple(out))

    @property
    def n_states(self) -> int:
        return len(self.states)

    def name(self, state: int) -> str:
        return self.states[state][0]

    def owner(self, state: int) -> Owner:
        return self.states[state][1]

    @cached_property
    def index(self) -> dict[str, int]:
        return {name: i for i, (name, _) in enumerate(self.states)}

    @cached_property
    def out_rules(self) -> tuple[tuple[int, ...], ...]:
        out: list[list[int]] = [[] for _ in self.states]
        for i, rule in enumerate(self.rules):
            if 0 <= rule.src < len(out):
                out[rule.src].append(i)
        return tuple(tuple(x) for x in out)

    @cached_property
    def rule_index(self) -> dict[tuple[int, int, int], int]:
        return {(r.src, r.delta, r.dst): i for i, r in enumerate(self.rules)}

    def states_of(self, owner: Owner) -> list[int]:
        return [i for i, (_, o) in enumerate(self.states) if o is owner]

    @property
    def has_min(self) -> bool:
        return any(o is Owner.MIN for _, o in self.states)

    def rule_prob(self, i: int) -> Fraction:
        """Probability of rule ``i`` (1 for rules of controlled states)."""
        p = self.rules[i].prob
        return Fraction(1) if p is None else p

    def describe_rule(self, i: int) -> str:
        r = self.rules[i]
        return f"({self.name(r.src)},{r.delta:+d},{self.name(r.dst)})".replace("+0", "0")

    def fix_strategy(self, strategy: "CounterlessStrategy") -> "OcSsg":
        """Turn the strategy owner's states into chance states playing the chosen rule.

        Rules of the other states are kept, so rule keys ``(src, delta, dst)``
        of unaffected states are preserved (see :meth:`rule_index`).
        """
        states = tuple(
            (name, Owner.RANDOM if owner is strategy.owner else owner) for name, owner in self.states
        )
        rules = []
        for i, rule in enumerate(self.rules):
            if self.owner(rule.src) is strategy.owner:
                if strategy.choice[rule.src] == i:
                    rules.append(Rule(rule.src, rule.delta, rule.dst, Fraction(1)))
            else:
                rules.append(rule)
        return OcSsg(states, tuple(rules))

    def to_text(self, comments: Mapping[int, str] | None = None) -> str:
        return serialize_ocssg(self, comments)


@dataclass(frozen=True)
class CounterlessStrategy:
    """A pure strategy that depends only on the current control state.

    ``choice`` maps every state of ``owner`` to the index of one of its
    outgoing rules in the model the strategy was built for.
    """

    owner: Owner
    choice: Mapping[int, int] = field(default_factory=dict)

    def check(self, model: OcSsg) -> None:
        for q in model.states_of(self.owner):
            if q not in self.choice:
                raise ValueError(f"strategy undefined in state {model.name(q)}")
            if model.rules[self.choice[q]].src != q:
                raise ValueError(f"strategy picks a rule not leaving {model.name(q)}")

    def translate(self, source: OcSsg, target: OcSsg) -> "CounterlessStrategy":
        """Re-index the chosen rules into ``target`` (matched by state name and rule key)."""
        choice = {}
        for q, i in self.choice.items():
            r = source.rules[i]
            tq = target.index[source.name(q)]
            key = (tq, r.delta, target.index[source.name(r.dst)])
            choice[tq] = target.rule_index[key]
        return CounterlessStrategy(self.owner, choice)

    def to_json(self, model: OcSsg) -> dict:
        return {model.name(q): _rule_json(model, i) for q, i in sorted(self.choice.items())}


def _rule_json(model: OcSsg, i: int) -> dict:
    r = model.rules[i]
    return {"rule": i, "delta": r.delta, "dst": model.name(r.dst)}


# ---------------------------------------------------------------------------
# validation


def validate(model: OcSsg) -> list[Diagnostic]:
    """Check every model invariant; an empty list means the model is well formed."""
    diags: list[Diagnostic] = []
    n = model.n_states
    seen_names: set[str] = set()
    for name, _ in model.states:
        if name in seen_names:
            diags.append(Diagnostic("duplicate-state", f"state {name} declared twice", state=name))
        seen_names.add(name)

    keys: set[tuple[int, int, int]] = set()
    for i, r in enumerate(model.rules):
        if not (0 <= r.src < n) or not (0 <= r.dst < n):
            diags.append(Diagnostic("dangling", f"rule {i} references an undeclared state", rule=i))
            continue
        where = model.describe_rule(i) if r.delta in (-1, 0, 1) else f"rule {i}"
        if r.delta not in (-1, 0, 1):
            diags.append(Diagnostic("delta-range", f"delta out of range in {where}", rule=i))
        owner = model.owner(r.src)
        if owner is Owner.RANDOM:
            if r.prob is None:
                diags.append(Diagnostic("prob-missing", f"rule {where} of chance state lacks a probability", rule=i))
            elif r.prob <= 0:
                diags.append(Diagnostic("prob-nonpositive", f"rule {where} has non-positive probability", rule=i))
        elif r.prob is not None:
            diags.append(Diagnostic("prob-unexpected", f"rule {where} of a controlled state carries a probability", rule=i))
        key = (r.src, r.delta, r.dst)
        if key in keys:
            diags.append(Diagnostic("duplicate-rule", f"rule {where} declared twice", rule=i))
        keys.add(key)

    for q, (name, owner) in enumerate(model.states):
        out = model.out_rules[q]
        if not out:
            diags.append(Diagnostic("no-rules", f"state {name} has no outgoing rule", state=name))
            continue
        if owner is Owner.RANDOM:
            probs = [model.rules[i].prob for i in out]
            if all(p is not None for p in probs):
                total = sum(probs, Fraction(0))
                if total != 1:
                    diags.append(Diagnostic(
                        "prob-sum",
                        f"probabilities of state {name} sum to {format_rational(total)} ≠ 1",
                        state=name,
                    ))
    return diags


def ensure_valid(model: OcSsg) -> OcSsg:
    diags = validate(model)
    if diags:
        raise ModelError(diags)
    return model


# ---------------------------------------------------------------------------
# text format

_NAME = re.compile(r"[^\s#]+")


def parse_ocssg(text: str) -> OcSsg:
    """Parse the line-oriented model format and validate the result."""
    states: list[tuple[str, Owner]] = []
    raw_rules: list[tuple[str, int, str, Fraction | None, int]] = []
    errors: list[Diagnostic] = []

    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0]
        tokens = [(m.group(), m.start() + 1) for m in re.finditer(r"\S+", body)]
        if not tokens:
            continue
        head, col = tokens[0]

        def syntax(msg: str, column: int) -> None:
            errors.append(Diagnostic("syntax", msg, line=lineno, column=column))

        if head == "state":
            if len(tokens) != 3:
                syntax("expected: state <name> max|min|rand", col)
                continue
            try:
                owner = Owner.parse(tokens[2][0])
            except ValueError as exc:
                syntax(str(exc), tokens[2][1])
                continue
            states.append((tokens[1][0], owner))
        elif head == "rule":
            if len(tokens) not in (4, 5):
                syntax("expected: rule <src> <+1|0|-1> <dst> [<num>/<den>]", col)
                continue
            dtext, dcol = tokens[2]
            if not re.fullmatch(r"[+-]?\d+", dtext):
                syntax(f"counter delta must be an integer, got {dtext!r}", dcol)
                continue
            delta = int(dtext)
            if delta not in (-1, 0, 1):
                errors.append(Diagnostic("delta-range", f"delta out of range: {dtext}", line=lineno, column=dcol))
                continue
            prob = None
            if len(tokens) == 5:
                try:
                    prob = parse_rational(tokens[4][0])
                except ValueError as exc:
                    syntax(str(exc), tokens[4][1])
                    continue
            raw_rules.append((tokens[1][0], delta, tokens[3][0], prob, lineno))
        else:
            syntax(f"unknown directive {head!r}", col)

    if errors:
        raise ModelError(errors)

    index: dict[str, int] = {}
    for i, (name, _) in enumerate(states):
        index.setdefault(name, i)
    rules = []
    for src, delta, dst, prob, lineno in raw_rules:
        missing = [x for x in (src, dst) if x not in index]
        if missing:
            errors.append(Diagnostic("dangling", f"undeclared state {missing[0]}", state=missing[0], line=lineno, column=1))
            continue
        rules.append(Rule(index[src], delta, index[dst], prob))
    if errors:
        raise ModelError(errors)
    return ensure_valid(OcSsg(tuple(states), tuple(rules)))


def serialize_ocssg(model: OcSsg, comments: Mapping[int, str] | None = None) -> str:
    lines = []
    for q, (name, owner) in enumerate(model.states):
        line = f"state {name} {owner.value}"
        if comments and q in comments:
            line += f"  # {comments[q]}"
        lines.append(line)
    for r in model.rules:
        delta = "+1" if r.delta == 1 else str(r.delta)
        line = f"rule {model.name(r.src)} {delta} {model.name(r.dst)}"
        if r.prob is not None:
            line += f" {format_rational(r.prob)}"
        lines.append(line)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# fixtures

_FIG2 = """\
# Max cannot attain the termination value from (s, n): it must delay the
# switch to t forever.
state s max
state r rand
state t rand
state g rand
state b rand
rule s 0 r
rule s 0 t
rule r +1 s 2/3
rule r -1 s 1/3
rule t 0 g 1/2
rule t 0 b 1/2
rule g -1 g 1/1
rule b +1 b 1/1
"""

BUILTIN_TEXT = {
    "fig2": _FIG2,
    "fig2-no-st": _FIG2.replace("rule s 0 t\n", ""),
    "biased-walk": "state q rand\nrule q +1 q 2/3\nrule q -1 q 1/3\n",
    "idle-loop": "state q max\nrule q 0 q\n",
}


def builtin_example(name: str) -> OcSsg:
    try:
        text = BUILTIN_TEXT[name]
    except KeyError:
        raise KeyError(f"unknown example {name!r}; choose from {', '.join(BUILTIN_TEXT)}") from None
    return parse_ocssg(text)
