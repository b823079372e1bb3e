"""Exact algorithms on finite (counterless) stochastic games.

Reachability values are computed by policy iteration with exact rational
policy evaluation.  The value-0 states are found by graph analysis first,
so every linear system solved is nonsingular.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from math import prod
from typing import Iterable, Mapping, Sequence

from .errors import DEFAULT_ENUM_CAP, EnumerationCapExceeded
from .graph import reachable, sccs
from .linalg import as_fraction, solve_sparse
from .model import OcSsg, Owner

ZERO = Fraction(0)
ONE = Fraction(1)


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    prob: Fraction | None = None
    reward: int = 0
    label: int | None = None  # originating rule, when the game encodes an OC model


@dataclass(frozen=True)
class FiniteSsg:
    states: tuple[tuple[str, Owner], ...]
    edges: tuple[Edge, ...]
    targets: frozenset[int] = frozenset()

    @cached_property
    def out_edges(self) -> tuple[tuple[int, ...], ...]:
        out: list[list[int]] = [[] for _ in self.states]
        for i, e in enumerate(self.edges):
            out[e.src].append(i)
        return tuple(tuple(x) for x in out)

    @property
    def n_states(self) -> int:
        return len(self.states)

    def owner(self, s: int) -> Owner:
        return self.states[s][1]

    def name(self, s: int) -> str:
        return self.states[s][0]

    def has(self, owner: Owner) -> bool:
        return any(o is owner for _, o in self.states)

    def with_targets(self, targets: Iterable[int]) -> "FiniteSsg":
        return FiniteSsg(self.states, self.edges, frozenset(targets))

    def prob(self, e: int) -> Fraction:
        p = self.edges[e].prob
        return ONE if p is None else p

    def successors(self, s: int) -> list[int]:
        return [self.edges[e].dst for e in self.out_edges[s]]

    def check(self) -> None:
        for s, (name, owner) in enumerate(self.states):
            out = self.out_edges[s]
            if not out:
                raise ValueError(f"state {name} has no outgoing edge")
            if owner is Owner.RANDOM and sum((self.prob(e) for e in out), ZERO) != 1:
                raise ValueError(f"probabilities of {name} do not sum to 1")


@dataclass(frozen=True)
class MemorylessStrategy:
    owner: Owner
    choice: Mapping[int, int] = field(default_factory=dict)  # state -> edge index


def from_ocssg(model: OcSsg, targets: Iterable[int] = ()) -> FiniteSsg:
    """Drop the counter; edge rewards keep the rule deltas, labels the rule indices."""
    edges = tuple(Edge(r.src, r.dst, r.prob, r.delta, i) for i, r in enumerate(model.rules))
    return FiniteSsg(model.states, edges, frozenset(targets))


def induced_chain(model: OcSsg, *strategies) -> FiniteSsg:
    """Markov chain of ``model`` (as a counterless game) under counterless strategies."""
    choice: dict[int, int] = {}
    for st in strategies:
        if st is not None:
            choice.update(st.choice)
    edges = []
    states = []
    for q, (name, owner) in enumerate(model.states):
        states.append((name, Owner.RANDOM))
        if owner is Owner.RANDOM:
            for i in model.out_rules[q]:
                r = model.rules[i]
                edges.append(Edge(q, r.dst, r.prob, r.delta, i))
        else:
            i = choice[q]
            r = model.rules[i]
            edges.append(Edge(q, r.dst, ONE, r.delta, i))
    return FiniteSsg(tuple(states), tuple(edges))


# ---------------------------------------------------------------------------
# reachability


def _attractor(game: FiniteSsg, out: Sequence[Sequence[int]], adversary: Owner | None) -> dict[int, int]:
    """States reaching the targets with positive probability against ``adversary``.

    Returns the BFS rank (distance) of every such state.  States of the
    adversary join only once all their successors have joined; all other
    states join as soon as one successor has.
    """
    n = game.n_states
    pred: list[list[int]] = [[] for _ in range(n)]
    missing = [0] * n
    for s in range(n):
        for e in out[s]:
            pred[game.edges[e].dst].append(s)
        missing[s] = len(out[s])
    rank: dict[int, int] = {}
    queue: deque[int] = deque()
    for t in sorted(game.targets):
        rank[t] = 0
        queue.append(t)
    while queue:
        v = queue.popleft()
        for s in pred[v]:
            if s in rank:
                continue
            if game.owner(s) is adversary:
                missing[s] -= 1
                if missing[s] == 0:
                    rank[s] = rank[v] + 1
                    queue.append(s)
            else:
                rank[s] = rank[v] + 1
                queue.append(s)
    return rank


def _evaluate(game: FiniteSsg, out: Sequence[Sequence[int]], unknown: Sequence[int], known: Mapping[int, Fraction]) -> list[Fraction]:
    """Values of ``unknown`` states in the chain given by ``out``; ``known`` fixes the rest."""
    pos = {s: i for i, s in enumerate(unknown)}
    rows = []
    rhs = []
    for s in unknown:
        row = {pos[s]: ONE}
        b = ZERO
        for e in out[s]:
            edge = game.edges[e]
            p = ONE if edge.prob is None else edge.prob
            j = pos.get(edge.dst)
            if j is None:
                v = known.get(edge.dst, ZERO)
                if v:
                    b += p * v
            else:
                row[j] = row.get(j, ZERO) - p
        rows.append(row)
        rhs.append(b)
    sol = solve_sparse(rows, rhs, raw=True)
    vals = [ZERO] * game.n_states
    for s, v in known.items():
        vals[s] = v
    for s, v in zip(unknown, sol):
        vals[s] = v
    return vals


def _best_edge(game: FiniteSsg, s: int, vals: Sequence[Fraction], maximize: bool) -> tuple[int, Fraction]:
    """Lowest-index edge of ``s`` with the best successor value."""
    best_e = -1
    best_v = ZERO
    for e in game.out_edges[s]:
        v = vals[game.edges[e].dst]
        if best_e < 0 or (v > best_v if maximize else v < best_v):
            best_e, best_v = e, v
    return best_e, best_v


def _float_values(game: FiniteSsg, fixed: Mapping[int, int]):
    """Approximate values from the float kernel, used only to seed policy iteration."""
    import numpy as np

    from . import kernels

    n = game.n_states
    offsets = np.zeros(n + 1, dtype=np.int64)
    dst = []
    prob = []
    for s in range(n):
        es = [fixed[s]] if s in fixed else game.out_edges[s]
        offsets[s + 1] = offsets[s] + len(es)
        for e in es:
            dst.append(game.edges[e].dst)
            prob.append(float(game.prob(e)))
    code = {Owner.MAX: kernels.MAX, Owner.MIN: kernels.MIN, Owner.RANDOM: kernels.RAND}
    owner = np.array([code[game.owner(s)] for s in range(n)], dtype=np.int64)
    target = np.zeros(n, dtype=np.bool_)
    target[list(game.targets)] = True
    values, _ = kernels.value_iteration(offsets, np.array(dst, dtype=np.int64), np.array(prob), owner, target)
    return values


def _greedy(game: FiniteSsg, s: int, fvals, maximize: bool) -> int:
    best_e = -1
    best_v = 0.0
    for e in game.out_edges[s]:
        v = fvals[game.edges[e].dst]
        if best_e < 0 or (v > best_v + 1e-12 if maximize else v < best_v - 1e-12):
            best_e, best_v = e, v
    return best_e


def _reaching(game: FiniteSsg, out: Sequence[Sequence[int]]) -> set[int]:
    pred: list[list[int]] = [[] for _ in range(game.n_states)]
    for s in range(game.n_states):
        for e in out[s]:
            pred[game.edges[e].dst].append(s)
    return reachable(pred, game.targets)


def _solve(game: FiniteSsg, fixed: Mapping[int, int], player: Owner | None, warm: bool = True) -> tuple[list[Fraction], dict[int, int]]:
    """Optimal reachability for ``player`` when every other controlled state is fixed.

    ``fixed`` pins the edge of states of the other controlled player.
    Policy iteration starts from the greedy policy of a float value
    iteration, repaired so that every state of positive value reaches the
    targets with positive probability, and switches only on strict
    improvement, which keeps that property.
    """
    n = game.n_states
    targets = game.targets
    out = [[fixed[s]] if s in fixed else list(game.out_edges[s]) for s in range(n)]
    rank = _attractor(game, out, Owner.MIN)
    positive = set(rank)
    fvals = _float_values(game, fixed) if warm and player is not None else None

    policy: dict[int, int] = {}
    for s in range(n):
        if player is None or game.owner(s) is not player:
            continue
        edges = game.out_edges[s]
        if s in targets:
            policy[s] = edges[0]
        elif s in positive:
            if fvals is not None:
                policy[s] = _greedy(game, s, fvals, player is Owner.MAX)
            elif player is Owner.MAX:
                policy[s] = min(edges, key=lambda e: (rank.get(game.edges[e].dst, n + 1), e))
            else:
                policy[s] = edges[0]
        else:
            # value 0; a minimizer must stay out of the attractor
            stay = [e for e in edges if game.edges[e].dst not in positive]
            policy[s] = stay[0] if stay else edges[0]

    if player is Owner.MAX:
        cur = [[policy[s]] if s in policy else out[s] for s in range(n)]
        reach = _reaching(game, cur)
        for s in positive - reach:
            if s in policy:
                policy[s] = min(game.out_edges[s], key=lambda e: (rank.get(game.edges[e].dst, n + 1), e))

    unknown = [s for s in range(n) if s in positive and s not in targets]
    known = {t: ONE for t in targets}
    while True:
        cur = [[policy[s]] if s in policy else out[s] for s in range(n)]
        vals = _evaluate(game, cur, unknown, known)
        if player is None:
            return vals, policy
        changed = False
        for s in unknown:
            if game.owner(s) is not player:
                continue
            e, v = _best_edge(game, s, vals, player is Owner.MAX)
            better = v > vals[s] if player is Owner.MAX else v < vals[s]
            if better:
                policy[s] = e
                changed = True
        if not changed:
            return vals, policy


def _canonical(game: FiniteSsg, vals: Sequence[Fraction]) -> tuple[dict[int, int], dict[int, int]]:
    """Deterministic optimal strategies read off the exact values.

    Min takes its lowest-index value-minimizing edge.  Max takes the
    lowest-index value-preserving edge that decreases the distance to the
    targets in the graph of value-preserving moves, so the strategy cannot
    stall in a cycle.  The result does not depend on how the values were
    found.
    """
    n = game.n_states
    keep = [
        [e for e in game.out_edges[s] if game.owner(s) is Owner.RANDOM or vals[game.edges[e].dst] == vals[s]]
        for s in range(n)
    ]
    rank = _attractor(game, keep, Owner.MIN)
    sigma: dict[int, int] = {}
    pi: dict[int, int] = {}
    for s in range(n):
        owner = game.owner(s)
        if owner is Owner.RANDOM:
            continue
        edges = game.out_edges[s]
        if s in game.targets or not vals[s]:
            choice = edges[0] if owner is Owner.MAX else (keep[s] or edges)[0]
        elif owner is Owner.MIN:
            choice = keep[s][0]
        else:
            down = [e for e in keep[s] if rank.get(game.edges[e].dst, n) < rank.get(s, n)]
            if not down:
                raise ArithmeticError(f"no value-preserving progress edge at state {game.name(s)}")
            choice = down[0]
        (sigma if owner is Owner.MAX else pi)[s] = choice
    return sigma, pi


def _fractions(vals) -> list[Fraction]:
    return [as_fraction(v) for v in vals]


def max_reach_values(game: FiniteSsg, warm: bool = True) -> tuple[list[Fraction], MemorylessStrategy]:
    if game.has(Owner.MIN):
        raise ValueError("max_reach_values expects a game without Min states")
    vals, _ = _solve(game, {}, Owner.MAX, warm)
    sigma, _ = _canonical(game, vals)
    return _fractions(vals), MemorylessStrategy(Owner.MAX, sigma)


def min_reach_values(game: FiniteSsg, warm: bool = True) -> tuple[list[Fraction], MemorylessStrategy]:
    if game.has(Owner.MAX):
        raise ValueError("min_reach_values expects a game without Max states")
    vals, _ = _solve(game, {}, Owner.MIN, warm)
    _, pi = _canonical(game, vals)
    return _fractions(vals), MemorylessStrategy(Owner.MIN, pi)


def chain_reach_values(game: FiniteSsg, choice: Mapping[int, int] = {}) -> list[Fraction]:
    """Reachability probabilities once every controlled state follows ``choice``."""
    vals, _ = _solve(game, choice, None)
    return _fractions(vals)


def ssg_reach_values(game: FiniteSsg, warm: bool = True) -> tuple[list[Fraction], MemorylessStrategy, MemorylessStrategy]:
    """Game values and optimal memoryless strategies for both players.

    Strategy iteration on Max's side: each round fixes Max's strategy,
    solves the residual minimizing MDP exactly, and lets Max switch where a
    successor is strictly better.  At termination the values form a fixed
    point of the game's Bellman operator that Max's strategy attains, hence
    they are the game values.
    """
    if not game.has(Owner.MIN):
        vals, sigma = max_reach_values(game, warm)
        return vals, sigma, MemorylessStrategy(Owner.MIN, {})
    if not game.has(Owner.MAX):
        vals, pi = min_reach_values(game, warm)
        return vals, MemorylessStrategy(Owner.MAX, {}), pi

    n = game.n_states
    targets = game.targets
    fvals = _float_values(game, {}) if warm else None
    rank = _attractor(game, game.out_edges, Owner.MIN)
    sigma: dict[int, int] = {}
    for s in range(n):
        if game.owner(s) is Owner.MAX:
            edges = game.out_edges[s]
            if s in targets or s not in rank:
                sigma[s] = edges[0]
            elif fvals is not None:
                sigma[s] = _greedy(game, s, fvals, True)
            else:
                sigma[s] = min(edges, key=lambda e: (rank.get(game.edges[e].dst, n + 1), e))
    while True:
        vals, _ = _solve(game, sigma, Owner.MIN, warm)
        changed = False
        for s in range(n):
            if game.owner(s) is not Owner.MAX or s in targets:
                continue
            e, v = _best_edge(game, s, vals, True)
            if v > vals[s]:
                sigma[s] = e
                changed = True
        if not changed:
            sig, pi = _canonical(game, vals)
            return _fractions(vals), MemorylessStrategy(Owner.MAX, sig), MemorylessStrategy(Owner.MIN, pi)


# ---------------------------------------------------------------------------
# qualitative graph algorithms


def _almost_sure(game: FiniteSsg, targets: frozenset[int], allowed: set[int] | None = None) -> tuple[set[int], dict[int, int]]:
    n = game.n_states
    win = set(range(n)) if allowed is None else set(allowed)
    while True:
        rank = {t: 0 for t in targets if t in win}
        choice: dict[int, int] = {}
        queue = deque(sorted(rank))
        pred: dict[int, list[int]] = {}
        for s in win:
            for e in game.out_edges[s]:
                pred.setdefault(game.edges[e].dst, []).append(e)
        while queue:
            v = queue.popleft()
            for e in sorted(pred.get(v, ())):
                s = game.edges[e].src
                if s in rank:
                    continue
                if game.owner(s) is Owner.RANDOM:
                    if not all(game.edges[f].dst in win for f in game.out_edges[s]):
                        continue
                else:
                    choice[s] = e
                rank[s] = rank[v] + 1
                queue.append(s)
        new = set(rank)
        if new == win:
            return win, choice
        win = new


def almost_sure_reach(game: FiniteSsg, targets: Iterable[int] | None = None) -> set[int]:
    """States from which Max reaches ``targets`` with probability one (graph fixpoint)."""
    if game.has(Owner.MIN):
        raise ValueError("almost_sure_reach expects a game without Min states")
    tset = game.targets if targets is None else frozenset(targets)
    win, _ = _almost_sure(game, tset)
    return win


def almost_sure_strategy(game: FiniteSsg, targets: Iterable[int], allowed: set[int] | None = None) -> tuple[set[int], dict[int, int]]:
    """Winning set and a rank-decreasing memoryless strategy (state -> edge) on it."""
    return _almost_sure(game, frozenset(targets), allowed)


def _has_action_inside(game: FiniteSsg, s: int, comp: set[int]) -> bool:
    dsts = [game.edges[e].dst for e in game.out_edges[s]]
    if game.owner(s) is Owner.RANDOM:
        return all(d in comp for d in dsts)
    return any(d in comp for d in dsts)


def decompose_end_components(game: FiniteSsg) -> list[frozenset[int]]:
    """Maximal end components of ``game`` read as a Max-MDP, ordered by least state."""
    if game.has(Owner.MIN):
        raise ValueError("end components are computed for games without Min states")
    result: list[frozenset[int]] = []
    stack = [set(range(game.n_states))]
    while stack:
        comp = stack.pop()
        changed = True
        while changed:
            changed = False
            for s in sorted(comp):
                if not _has_action_inside(game, s, comp):
                    comp.discard(s)
                    changed = True
        if not comp:
            continue
        members = sorted(comp)
        local = {s: i for i, s in enumerate(members)}
        succ = [[local[d] for d in game.successors(s) if d in comp] for s in members]
        parts = sccs(len(members), succ)
        if len(parts) == 1:
            result.append(frozenset(comp))
        else:
            for part in parts:
                stack.append({members[i] for i in part})
    return sorted(result, key=min)


# ---------------------------------------------------------------------------
# mean payoff


@dataclass(frozen=True)
class BsccInfo:
    states: frozenset[int]
    mean: Fraction
    decreasing: bool  # some -1 edge lies inside the component
    unbalanced: bool  # some cycle inside has non-zero counter change


def _stationary(chain: FiniteSsg, comp: Sequence[int]) -> dict[int, Fraction]:
    pos = {s: i for i, s in enumerate(comp)}
    k = len(comp)
    rows: list[dict[int, Fraction]] = [dict() for _ in range(k)]
    for s in comp:
        for e in chain.out_edges[s]:
            d = chain.edges[e].dst
            j = pos[d]
            rows[j][pos[s]] = rows[j].get(pos[s], ZERO) - chain.prob(e)
    for j in range(k):
        rows[j][j] = rows[j].get(j, ZERO) + ONE
    rows[-1] = {i: ONE for i in range(k)}
    rhs = [ZERO] * (k - 1) + [ONE]
    sol = solve_sparse(rows, rhs)
    return {s: sol[pos[s]] for s in comp}


def _unbalanced(chain: FiniteSsg, comp: Sequence[int]) -> bool:
    members = set(comp)
    potential = {comp[0]: 0}
    queue = deque([comp[0]])
    while queue:
        s = queue.popleft()
        for e in chain.out_edges[s]:
            edge = chain.edges[e]
            if edge.dst not in members:
                continue
            want = potential[s] + edge.reward
            have = potential.get(edge.dst)
            if have is None:
                potential[edge.dst] = want
                queue.append(edge.dst)
            elif have != want:
                return True
    return False


def bsccs(chain: FiniteSsg) -> list[list[int]]:
    n = chain.n_states
    succ = [chain.successors(s) for s in range(n)]
    out = []
    for comp in sccs(n, succ):
        members = set(comp)
        if all(d in members for s in comp for d in succ[s]):
            out.append(comp)
    return sorted(out, key=min)


def chain_mean_and_decrease(chain: FiniteSsg, start: int | None = None) -> list[BsccInfo]:
    """Per bottom SCC (reachable from ``start``, or all): exact mean reward and flags."""
    if any(o is not Owner.RANDOM for _, o in chain.states):
        raise ValueError("chain_mean_and_decrease expects a Markov chain")
    comps = bsccs(chain)
    if start is not None:
        reach = reachable([chain.successors(s) for s in range(chain.n_states)], [start])
        comps = [c for c in comps if c[0] in reach]
    out = []
    for comp in comps:
        pi = _stationary(chain, comp)
        mean = ZERO
        decreasing = False
        for s in comp:
            for e in chain.out_edges[s]:
                edge = chain.edges[e]
                mean += pi[s] * chain.prob(e) * edge.reward
                decreasing |= edge.reward < 0
        out.append(BsccInfo(frozenset(comp), mean, decreasing, _unbalanced(chain, comp)))
    return out


def ec_min_mean_payoff(game: FiniteSsg, ec: Iterable[int], cap: int = DEFAULT_ENUM_CAP) -> tuple[Fraction, MemorylessStrategy]:
    """Minimal almost-sure mean payoff over strategies confined to the end component ``ec``.

    Memoryless strategies inside the component are enumerated; the returned
    strategy plays the worst bottom component found and steers every other
    state of ``ec`` into it almost surely.
    """
    comp = sorted(set(ec))
    members = set(comp)
    inside = {s: [e for e in game.out_edges[s] if game.edges[e].dst in members] for s in comp}
    controlled = [s for s in comp if game.owner(s) is not Owner.RANDOM]
    count = prod(len(inside[s]) for s in controlled)
    if count > cap:
        raise EnumerationCapExceeded("end component", count, cap)
    local = {s: i for i, s in enumerate(comp)}

    best: tuple[Fraction, dict[int, int], list[int]] | None = None
    for picks in itertools.product(*(inside[s] for s in controlled)):
        choice = dict(zip(controlled, picks))
        edges = []
        for s in comp:
            es = [choice[s]] if s in choice else inside[s]
            for e in es:
                edge = game.edges[e]
                edges.append(Edge(local[s], local[edge.dst], ONE if s in choice else edge.prob, edge.reward, e))
        chain = FiniteSsg(tuple((str(s), Owner.RANDOM) for s in comp), tuple(edges))
        for info in chain_mean_and_decrease(chain):
            if best is None or info.mean < best[0]:
                best = (info.mean, choice, [comp[i] for i in sorted(info.states)])
    assert best is not None
    mean, choice, bottom = best
    sub_edges = tuple(game.edges[e] for s in comp for e in inside[s])
    index_map = [e for s in comp for e in inside[s]]
    sub = FiniteSsg(game.states, tuple(Edge(x.src, x.dst, x.prob, x.reward, i) for i, x in enumerate(sub_edges)))
    _, steer = almost_sure_strategy(sub, bottom, members)
    strategy = {}
    for s in controlled:
        if s in bottom:
            strategy[s] = choice[s]
        else:
            strategy[s] = index_map[steer[s]]
    return mean, MemorylessStrategy(game.owner(controlled[0]) if controlled else Owner.MAX, strategy)
