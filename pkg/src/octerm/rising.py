"""Reductions that make the tail-bound LP feasible with a positive drift.

``collapse_value_one`` redirects every rule entering the value-1 set into a
fresh trap that only increments.  ``rising_construction`` then tracks, in
bounded auxiliary counters, how far the counter has moved since the last
reset, so that no counterless strategy can idle: a run that neither
decreases below the reset point nor leaves the bounded window is sent to the
trap.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction

from .model import OcSsg, Owner, Rule

TRAP = ("trap",)


def _fresh(name: str, taken: set[str]) -> str:
    while name in taken:
        name += "'"
    return name


def collapse_value_one(mdp: OcSsg, T) -> OcSsg:
    """Drop the states of ``T`` and send rules entering ``T`` to an incrementing trap.

    Rules that become parallel after redirection are merged (probabilities
    are added for chance states).
    """
    T = set(T)
    keep = [q for q in range(mdp.n_states) if q not in T]
    names = {mdp.name(q) for q in keep}
    trap_name = _fresh("trap", names)
    new_index = {q: i for i, q in enumerate(keep)}
    trap = len(keep)
    states = tuple(mdp.states[q] for q in keep) + ((trap_name, Owner.RANDOM),)

    merged: dict[tuple[int, int, int], Fraction | None] = {}
    for r in mdp.rules:
        if r.src in T:
            continue
        key = (new_index[r.src], r.delta, new_index.get(r.dst, trap))
        if key in merged and r.prob is not None:
            merged[key] += r.prob
        elif key not in merged:
            merged[key] = r.prob
    rules = [Rule(s, d, t, p) for (s, d, t), p in merged.items()]
    rules.append(Rule(trap, 1, trap, Fraction(1)))
    return OcSsg(states, tuple(rules))


@dataclass(frozen=True)
class RisingModel:
    model: OcSsg
    f: dict[int, int]  # original state -> index of <q,0,0>
    tags: tuple[tuple, ...]  # ("trap",), (q, n, m) or (q, n, m, k, r) with original state ids

    def tag_text(self, source: OcSsg, i: int) -> str:
        tag = self.tags[i]
        if tag == TRAP:
            return "trap"
        parts = [source.name(tag[0]), *map(str, tag[1:3])]
        if len(tag) == 5:
            parts += [f"{tag[3]:+d}".replace("+0", "0"), source.name(tag[4])]
        return "<" + ",".join(parts) + ">"

    def dump(self, source: OcSsg) -> str:
        return self.model.to_text({i: self.tag_text(source, i) for i in range(self.model.n_states)})


def rising_construction(mdp: OcSsg, prune: bool = True) -> RisingModel:
    """Build the rising model; ``f[q]`` is the copy of ``q`` with both window counters at 0.

    Triples <q,n,m> are Max states choosing a rule of q; the committed
    5-tuple <q,n,m,k,r> is a chance state that performs the step, where n
    is the height above the last reset point and m the number of steps
    since the reset.  The height test n + k = -1 covers m = 0 as well; the
    caller is expected to check that the value-1 set is empty.
    """
    if mdp.has_min:
        raise ValueError("rising construction expects a maximizing OC-MDP")
    nq = mdp.n_states
    n_top = nq + 1
    m_top = nq * nq + 1

    def owner(tag) -> Owner:
        return Owner.MAX if len(tag) == 3 else Owner.RANDOM

    def moves(tag) -> list[tuple[int, tuple, Fraction | None]]:
        if tag == TRAP:
            return [(1, TRAP, Fraction(1))]
        if len(tag) == 3:
            q, n, m = tag
            return [(0, (q, n, m, mdp.rules[i].delta, mdp.rules[i].dst), None) for i in mdp.out_rules[q]]
        q, n, m, k, r = tag
        if n == n_top or m == m_top:
            return [(1, TRAP, Fraction(1))]
        i = mdp.rule_index[(q, k, r)]
        out = [(k, (r, n + k, m + 1) if n + k >= 0 else (r, 0, 0), mdp.rule_prob(i))]
        if mdp.owner(q) is Owner.RANDOM:
            for j in mdp.out_rules[q]:
                if j != i:
                    rule = mdp.rules[j]
                    out.append((rule.delta, (rule.dst, 0, 0), rule.prob))
        if len(out) == 1:
            out[0] = (out[0][0], out[0][1], Fraction(1))
        return out

    def order(tag):
        # trap first, then triples, then 5-tuples by originating rule
        if tag == TRAP:
            return (0,)
        if len(tag) == 3:
            return (1, tag[0], tag[1], tag[2])
        return (2, mdp.rule_index[(tag[0], tag[3], tag[4])], tag[1], tag[2])

    if prune:
        seen = {(q, 0, 0) for q in range(nq)}
        queue = deque(sorted(seen))
        while queue:
            tag = queue.popleft()
            for _, nxt, _ in moves(tag):
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
        tags = sorted(seen, key=order)
    else:
        tags = [TRAP]
        tags += [(q, n, m) for q in range(nq) for n in range(n_top + 1) for m in range(m_top + 1)]
        tags += [
            (r.src, n, m, r.delta, r.dst)
            for r in mdp.rules
            for n in range(n_top + 1)
            for m in range(m_top + 1)
        ]

    pos = {tag: i for i, tag in enumerate(tags)}
    names = []
    for tag in tags:
        if tag == TRAP:
            names.append("<trap>")
        elif len(tag) == 3:
            names.append(f"<{mdp.name(tag[0])},{tag[1]},{tag[2]}>")
        else:
            names.append(f"<{mdp.name(tag[0])},{tag[1]},{tag[2]},{tag[3]:+d},{mdp.name(tag[4])}>")
    rules = []
    for tag in tags:
        src = pos[tag]
        for delta, nxt, prob in moves(tag):
            rules.append(Rule(src, delta, pos[nxt], prob))
    states = tuple((name, owner(tag)) for name, tag in zip(names, tags))
    f = {q: pos[(q, 0, 0)] for q in range(nq)}
    return RisingModel(OcSsg(states, tuple(rules)), f, tuple(tags))
