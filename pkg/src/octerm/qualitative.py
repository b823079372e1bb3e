"""Qualitative analysis of the LimInf = -inf objective.

For every control state q, ``nu[q]`` is the value of the objective "the
counter's limit inferior is minus infinity"; it does not depend on the
initial counter and equals the limit of the termination values v(q, i) as
i grows.  The value-1 set T and optimal pure counterless strategies for both
players come out of the same computation.

Desk-scale substitute for the polynomial algorithms: counterless strategies
are enumerated (up to a cap) and each induced Markov chain is analysed
through its bottom strongly connected components.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from math import prod

from .errors import DEFAULT_ENUM_CAP, EnumerationCapExceeded
from .finite_solver import (
    almost_sure_strategy,
    bsccs,
    chain_mean_and_decrease,
    from_ocssg,
    induced_chain,
    max_reach_values,
    _unbalanced,
)
from .graph import reachable, reverse
from .model import CounterlessStrategy, OcSsg, Owner


class InternalError(RuntimeError):
    pass


@dataclass(frozen=True)
class LiminfResult:
    nu: tuple[Fraction, ...]
    T: frozenset[int]
    sigma_star: CounterlessStrategy
    pi_star: CounterlessStrategy | None = None
    sure: frozenset[int] = frozenset()  # states with a counterless strategy winning surely

    def to_json(self, model: OcSsg) -> dict:
        from .report import rational

        out = {
            "nu": {model.name(q): rational(v) for q, v in enumerate(self.nu)},
            "T": [model.name(q) for q in sorted(self.T)],
            "D": [model.name(q) for q in sorted(self.sure)],
            "sigma_star": self.sigma_star.to_json(model),
        }
        out["pi_star"] = None if self.pi_star is None else self.pi_star.to_json(model)
        return out


def _require_max_only(mdp: OcSsg) -> None:
    if mdp.has_min:
        raise ValueError("expected a maximizing OC-MDP (no Min states)")


def enumerate_counterless(model: OcSsg, owner: Owner, cap: int = DEFAULT_ENUM_CAP):
    """All pure counterless strategies of ``owner`` in lexicographic rule order."""
    states = model.states_of(owner)
    count = prod(len(model.out_rules[q]) for q in states)
    if count > cap:
        raise EnumerationCapExceeded(f"{owner.value} counterless strategies", count, cap)
    for picks in itertools.product(*(model.out_rules[q] for q in states)):
        yield CounterlessStrategy(owner, dict(zip(states, picks)))


def _winning_states(model: OcSsg, strategy: CounterlessStrategy) -> set[int]:
    """States from which LimInf = -inf holds almost surely under ``strategy``.

    A bottom component is winning iff its mean counter change is negative,
    or zero with some cycle of non-zero counter change (a zero-drift walk
    that is not a bounded function of the state).
    """
    chain = induced_chain(model, strategy)
    bad: set[int] = set()
    for info in chain_mean_and_decrease(chain):
        if not (info.mean < 0 or (info.mean == 0 and info.unbalanced)):
            bad |= info.states
    pred = reverse(chain.n_states, [chain.successors(s) for s in range(chain.n_states)])
    losing = reachable(pred, bad)
    return set(range(model.n_states)) - losing


def _sure_with_certificates(mdp: OcSsg, cap: int) -> tuple[set[int], dict[int, int]]:
    D: set[int] = set()
    choice: dict[int, int] = {}
    for strategy in enumerate_counterless(mdp, Owner.MAX, cap):
        for q in sorted(_winning_states(mdp, strategy) - D):
            D.add(q)
            if q in strategy.choice:
                choice[q] = strategy.choice[q]
    # Each state keeps the choice of the first strategy certifying it.  Along
    # a run the certificate index can only decrease, so the glued strategy
    # eventually follows a single certificate and wins almost surely.
    return D, choice


def liminf_sure_states(mdp: OcSsg, cap: int = DEFAULT_ENUM_CAP) -> set[int]:
    _require_max_only(mdp)
    return _sure_with_certificates(mdp, cap)[0]


def value_one_states(mdp: OcSsg, cap: int = DEFAULT_ENUM_CAP) -> set[int]:
    _require_max_only(mdp)
    D = liminf_sure_states(mdp, cap)
    win, _ = almost_sure_strategy(from_ocssg(mdp), D)
    return win


def liminf_values_mdp(mdp: OcSsg, cap: int = DEFAULT_ENUM_CAP) -> LiminfResult:
    _require_max_only(mdp)
    D, certified = _sure_with_certificates(mdp, cap)
    game = from_ocssg(mdp)
    T, steer = almost_sure_strategy(game, D)
    nu, reach = max_reach_values(game.with_targets(T))
    sigma = {}
    for q in mdp.states_of(Owner.MAX):
        if q in D:
            sigma[q] = certified[q]
        elif q in T:
            sigma[q] = game.edges[steer[q]].label
        else:
            sigma[q] = game.edges[reach.choice[q]].label
    return LiminfResult(tuple(nu), frozenset(T), CounterlessStrategy(Owner.MAX, sigma), None, frozenset(D))


def liminf_values_ssg(game: OcSsg, cap: int = DEFAULT_ENUM_CAP) -> LiminfResult:
    """Values for two-player games: Min's counterless strategies are enumerated.

    Min has an optimal pure counterless strategy that attains the pointwise
    minimum in every state at once; the lowest-index such strategy is
    returned.
    """
    if not game.has_min:
        return liminf_values_mdp(game, cap)
    runs = []
    for pi in enumerate_counterless(game, Owner.MIN, cap):
        fixed = game.fix_strategy(pi)
        runs.append((pi, fixed, liminf_values_mdp(fixed, cap)))
    n = game.n_states
    nu = tuple(min(res.nu[q] for _, _, res in runs) for q in range(n))
    for pi, fixed, res in runs:
        if res.nu == nu:
            sigma = res.sigma_star.translate(fixed, game)
            return LiminfResult(nu, res.T, sigma, pi, res.sure)
    raise InternalError("no counterless Min strategy attains the pointwise minimum; this is a bug")


def is_idling(strategy: CounterlessStrategy, mdp: OcSsg) -> int | None:
    """A state witnessing that ``strategy`` idles, or None.

    A state idles iff it lies in a bottom component of the induced chain in
    which every cycle has counter change zero (node potentials exist).
    """
    chain = induced_chain(mdp, strategy)
    for comp in bsccs(chain):
        if not _unbalanced(chain, comp):
            return comp[0]
    return None


def find_idling_strategy(mdp: OcSsg, cap: int = DEFAULT_ENUM_CAP) -> tuple[CounterlessStrategy, int] | None:
    _require_max_only(mdp)
    for strategy in enumerate_counterless(mdp, Owner.MAX, cap):
        q = is_idling(strategy, mdp)
        if q is not None:
            return strategy, q
    return None
