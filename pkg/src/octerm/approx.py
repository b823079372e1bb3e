"""Approximate termination values and epsilon-optimal strategies.

Pipeline: LimInf analysis gives nu, T and counterless strategies; fixing
Min's strategy and collapsing T yields a model whose drift LP certifies an
exponential tail, hence a counter bound N above which v(q, i) is within
epsilon of nu[q].  Below N the game is solved exactly on counters 0..N,
with row N absorbed into "terminated" with probability nu[q].
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Mapping

from .errors import DEFAULT_ENUM_CAP, DEFAULT_SEGMENT_CAP, SegmentTooLarge
from .finite_solver import Edge, FiniteSsg, MemorylessStrategy, ssg_reach_values
from .martingale import Certificate, ExpCertificate, best_certificate_pair, exponential_certificate, build_lp, solve_lp_max_x, tail_certificate, with_bound
from .model import Config, CounterlessStrategy, OcSsg, Owner, ensure_valid
from .qualitative import LiminfResult, find_idling_strategy, liminf_values_ssg, value_one_states
from .rising import RisingModel, collapse_value_one, rising_construction

ONE = Fraction(1)


def fix_min_strategy(game: OcSsg, pi: CounterlessStrategy | None) -> OcSsg:
    if pi is None or not game.has_min:
        return game
    pi.check(game)
    return game.fix_strategy(pi)


def max_counter_drop(model: OcSsg) -> list[int | None]:
    """Largest total decrease of the counter along any path from each state.

    None marks states that reach a cycle with negative total effect.  From
    (q, i) with i > drop[q] the counter can never reach 0.
    """
    n = model.n_states
    dist = [0] * n  # most negative path sum seen so far
    for _ in range(n):
        changed = False
        for r in model.rules:
            d = r.delta + dist[r.dst]
            if d < dist[r.src]:
                dist[r.src] = d
                changed = True
        if not changed:
            return [-d for d in dist]
    # still relaxing after n rounds: exactly the states that reach a negative cycle
    # keep decreasing, so propagate "unbounded" backwards from any rule still relaxing
    bad = {r.src for r in model.rules if r.delta + dist[r.dst] < dist[r.src]}
    grew = True
    while grew:
        grew = False
        for r in model.rules:
            if r.dst in bad and r.src not in bad:
                bad.add(r.src)
                grew = True
    return [None if q in bad else -dist[q] for q in range(n)]


@dataclass(frozen=True)
class TailBound:
    N: int
    certificate: Certificate | None  # None when every state has value 1
    route: str  # "value-one", "direct" or "rising"
    collapsed: OcSsg | None = None
    rising: RisingModel | None = None
    drop_bound: int | None = None  # N from bounded counter drops, when every drop is finite
    refinement: ExpCertificate | None = None  # consulted only when the segment game would exceed its cap
    source: str = "certificate"  # which bound fixed N: "certificate", "counter-drop" or "exponential"

    @property
    def lp_model(self) -> OcSsg | None:
        return self.rising.model if self.rising is not None else self.collapsed

    def __iter__(self):
        return iter((self.N, self.certificate))


def termination_tail_bound(
    game: OcSsg,
    pi_star: CounterlessStrategy | None,
    epsilon: Fraction,
    *,
    cap: int = DEFAULT_ENUM_CAP,
    prune: bool = True,
    rising: str = "auto",
    T=None,
    segment_cap: int | None = None,
) -> TailBound:
    """Counter bound N with v(q, i) - nu[q] <= epsilon for all i >= N.

    ``rising`` is "auto" (apply the rising construction only when the
    collapsed model has an idling counterless strategy), "always" or
    "never".  Without idling strategies the collapsed model is already
    rising, and its LP usually gives a much smaller N.

    N is the certificate's bound unless a sharper sound bound applies:
    bounded counter drops always, and the exponential supermartingale
    when the segment game for N would have more than ``segment_cap``
    states.
    """
    epsilon = Fraction(epsilon)
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if rising not in ("auto", "always", "never"):
        raise ValueError(f"unknown rising mode {rising!r}")
    mdp = fix_min_strategy(game, pi_star)
    if T is None:
        T = value_one_states(mdp, cap)
    if len(T) == mdp.n_states:
        return TailBound(0, None, "value-one")
    collapsed = collapse_value_one(mdp, T)
    built = None
    if rising == "always" or (rising == "auto" and find_idling_strategy(collapsed, cap) is not None):
        built = rising_construction(collapsed, prune=prune)
    target = built.model if built is not None else collapsed
    lp = build_lp(target)
    x_bar, z_bar = best_certificate_pair(lp, *solve_lp_max_x(lp))
    cert = tail_certificate(x_bar, z_bar, [name for name, _ in target.states])
    cert = with_bound(cert, epsilon)
    # Where no state outside T can lose more than d units of counter, v(q, i) = nu[q] = 0
    # for i > d: a zero gap, usually far below the certificate's N.  Both sharper bounds
    # keep one extra row so that the gap at N - 1 is also within epsilon.
    drops = [d for q, d in enumerate(max_counter_drop(mdp)) if q not in T]
    drop_bound = None if None in drops else max(drops) + 2
    N, source = cert.N, "certificate"
    if drop_bound is not None and drop_bound < N:
        N, source = drop_bound, "counter-drop"
    refinement = None
    if segment_cap is not None and game.n_states * (N + 1) + 2 > segment_cap:
        refinement = exponential_certificate(collapsed, epsilon)
        if refinement is not None and refinement.counter_bound(epsilon) + 1 < N:
            N, source = refinement.counter_bound(epsilon) + 1, "exponential"
    route = "rising" if built is not None else "direct"
    return TailBound(N, cert, route, collapsed, built, drop_bound, refinement, source)


# ---------------------------------------------------------------------------
# segment game


@dataclass(frozen=True)
class SegmentGame:
    game: FiniteSsg
    N: int
    n_q: int

    def state(self, q: int, i: int) -> int:
        return i * self.n_q + q

    @property
    def s0(self) -> int:
        return self.n_q * (self.N + 1)

    @property
    def s1(self) -> int:
        return self.s0 + 1


def build_segment_game(game: OcSsg, nu, N: int) -> SegmentGame:
    if N < 1:
        raise ValueError("segment game needs N >= 1")
    nq = game.n_states
    s0 = nq * (N + 1)
    s1 = s0 + 1
    states = []
    edges = []
    for i in range(N + 1):
        for q, (name, owner) in enumerate(game.states):
            src = i * nq + q
            if i == 0:
                states.append((f"{name}@0", Owner.RANDOM))
                edges.append(Edge(src, s0, ONE))
            elif i == N:
                states.append((f"{name}@{N}", Owner.RANDOM))
                if nu[q] > 0:
                    edges.append(Edge(src, s0, Fraction(nu[q])))
                if nu[q] < 1:
                    edges.append(Edge(src, s1, 1 - Fraction(nu[q])))
            else:
                states.append((f"{name}@{i}", owner))
                for j in game.out_rules[q]:
                    r = game.rules[j]
                    edges.append(Edge(src, (i + r.delta) * nq + r.dst, r.prob, r.delta, j))
    states += [("s0", Owner.RANDOM), ("s1", Owner.RANDOM)]
    edges += [Edge(s0, s0, ONE), Edge(s1, s1, ONE)]
    return SegmentGame(FiniteSsg(tuple(states), tuple(edges), frozenset([s0])), N, nq)


@dataclass(frozen=True)
class ModeSwitchStrategy:
    """Table below N, then a counterless strategy forever once counter N is reached."""

    owner: Owner
    N: int
    below: Mapping[tuple[int, int], int]  # (state, counter in 1..N-1) -> rule
    at_or_above: CounterlessStrategy

    def choose(self, q: int, counter: int, switched: bool) -> tuple[int, bool]:
        """Rule to play and the updated mode bit."""
        switched = switched or counter >= self.N
        if switched:
            return self.at_or_above.choice[q], True
        return self.below[(q, counter)], False

    def to_json(self, model: OcSsg) -> dict:
        from .model import _rule_json

        table = {}
        for q in model.states_of(self.owner):
            runs = []
            for i in range(1, self.N):
                rule = self.below[(q, i)]
                if runs and runs[-1][2] == rule and runs[-1][1] == i - 1:
                    runs[-1][1] = i
                else:
                    runs.append([i, i, rule])
            table[model.name(q)] = [{"from": a, "to": b, **_rule_json(model, r)} for a, b, r in runs]
        return {
            "owner": self.owner.value,
            "N": self.N,
            "semantics": "play 'below' at counters 1..N-1 until the counter first reaches N, then 'at_or_above' forever",
            "below": table,
            "at_or_above": self.at_or_above.to_json(model),
        }


def strategy_from_json(doc: dict, model: OcSsg) -> ModeSwitchStrategy:
    """Inverse of :meth:`ModeSwitchStrategy.to_json` (rules are matched by index)."""
    owner = Owner.parse(doc["owner"])
    N = int(doc["N"])
    choice = {model.index[name]: int(entry["rule"]) for name, entry in doc["at_or_above"].items()}
    below = {}
    for name, runs in doc["below"].items():
        q = model.index[name]
        for run in runs:
            for i in range(int(run["from"]), int(run["to"]) + 1):
                below[(q, i)] = int(run["rule"])
    strategy = ModeSwitchStrategy(owner, N, below, CounterlessStrategy(owner, choice))
    strategy.at_or_above.check(model)
    for q in model.states_of(owner):
        for i in range(1, N):
            if model.rules[below[(q, i)]].src != q:
                raise ValueError(f"strategy table picks a rule not leaving {model.name(q)}")
    return strategy


def assemble_strategy(segment: SegmentGame, strategy: MemorylessStrategy, counterless: CounterlessStrategy, model: OcSsg) -> ModeSwitchStrategy:
    below = {}
    for q in model.states_of(counterless.owner):
        for i in range(1, segment.N):
            e = strategy.choice[segment.state(q, i)]
            below[(q, i)] = segment.game.edges[e].label
    return ModeSwitchStrategy(counterless.owner, segment.N, below, counterless)


# ---------------------------------------------------------------------------
# orchestration


@dataclass(frozen=True)
class Analysis:
    """Everything that depends on the game and epsilon but not on the start."""

    epsilon: Fraction
    liminf: LiminfResult
    tail: TailBound
    values: tuple[tuple[Fraction, ...], ...]  # values[q][i] for 0 <= i <= N
    sigma_bar: ModeSwitchStrategy
    pi_bar: ModeSwitchStrategy | None
    timings: dict = field(default_factory=dict, compare=False)


@lru_cache(maxsize=16)
def analyze(
    game: OcSsg,
    epsilon: Fraction,
    cap: int = DEFAULT_ENUM_CAP,
    prune: bool = True,
    rising: str = "auto",
    segment_cap: int = DEFAULT_SEGMENT_CAP,
) -> Analysis:
    ensure_valid(game)
    epsilon = Fraction(epsilon)
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    timings = {}
    t0 = time.perf_counter()
    lim = liminf_values_ssg(game, cap)
    timings["qualitative"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    tail = termination_tail_bound(
        game, lim.pi_star, epsilon, cap=cap, prune=prune, rising=rising, T=lim.T, segment_cap=segment_cap,
    )
    timings["tail_bound"] = time.perf_counter() - t0

    N = tail.N
    pi_star = lim.pi_star if game.has_min else None
    if N == 0:
        values = tuple((ONE,) for _ in range(game.n_states))
        sigma_bar = ModeSwitchStrategy(Owner.MAX, 0, {}, lim.sigma_star)
        pi_bar = ModeSwitchStrategy(Owner.MIN, 0, {}, pi_star) if pi_star else None
        return Analysis(epsilon, lim, tail, values, sigma_bar, pi_bar, timings)

    size = game.n_states * (N + 1) + 2
    if size > segment_cap:
        raise SegmentTooLarge(f"segment game for N = {N} has {size} states (cap {segment_cap})")
    t0 = time.perf_counter()
    seg = build_segment_game(game, lim.nu, N)
    vals, sigma, pi = ssg_reach_values(seg.game)
    timings["segment_game"] = time.perf_counter() - t0
    values = tuple(tuple(vals[seg.state(q, i)] for i in range(N + 1)) for q in range(game.n_states))
    sigma_bar = assemble_strategy(seg, sigma, lim.sigma_star, game)
    pi_bar = assemble_strategy(seg, pi, pi_star, game) if pi_star else None
    return Analysis(epsilon, lim, tail, values, sigma_bar, pi_bar, timings)


@dataclass(frozen=True)
class ApproxReport:
    epsilon: Fraction
    start: Config
    value: Fraction
    N: int
    nu: tuple[Fraction, ...]
    values: tuple[tuple[Fraction, ...], ...]
    sigma_bar: ModeSwitchStrategy
    pi_bar: ModeSwitchStrategy | None
    certificate: Certificate | None
    route: str
    timings: dict = field(default_factory=dict, compare=False)

    def value_at(self, q: int, i: int) -> Fraction:
        return self.nu[q] if i >= self.N else self.values[q][i]

    def to_json(self, model: OcSsg, values: str = "state", timings: bool = False) -> dict:
        from .report import SCHEMA_VERSION, rational

        doc = {
            "schema": f"octerm/approx/{SCHEMA_VERSION}",
            "epsilon": rational(self.epsilon),
            "start": {"state": model.name(self.start.state), "counter": self.start.counter},
            "value": rational(self.value),
            "N": self.N,
            "route": self.route,
            "nu": {model.name(q): rational(v) for q, v in enumerate(self.nu)},
        }
        if values == "all":
            doc["values"] = {model.name(q): [rational(v) for v in row] for q, row in enumerate(self.values)}
        elif values == "state":
            doc["values"] = {model.name(self.start.state): [rational(v) for v in self.values[self.start.state]]}
        doc["certificate"] = None if self.certificate is None else self.certificate.to_json()
        doc["sigma_bar"] = self.sigma_bar.to_json(model)
        doc["pi_bar"] = None if self.pi_bar is None else self.pi_bar.to_json(model)
        if timings:
            doc["timings"] = {k: round(v, 6) for k, v in self.timings.items()}
        return doc


def approximate_termination(
    game: OcSsg,
    start: Config,
    epsilon: Fraction,
    *,
    cap: int = DEFAULT_ENUM_CAP,
    prune: bool = True,
    rising: str = "auto",
    segment_cap: int = DEFAULT_SEGMENT_CAP,
) -> ApproxReport:
    if start.counter < 0:
        raise ValueError("start counter must be non-negative")
    if not 0 <= start.state < game.n_states:
        raise ValueError("start state out of range")
    a = analyze(game, Fraction(epsilon), cap, prune, rising, segment_cap)
    N = a.tail.N
    value = a.liminf.nu[start.state] if start.counter >= N else a.values[start.state][start.counter]
    if start.counter == 0:
        value = ONE
    return ApproxReport(
        a.epsilon, start, value, N, a.liminf.nu, a.values, a.sigma_bar, a.pi_bar,
        a.tail.certificate, a.tail.route, dict(a.timings),
    )
