"""Independent checks: finite-horizon Bellman brackets and Monte-Carlo simulation."""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import kernels
from .errors import TableTooLarge
from .model import Config, CounterlessStrategy, OcSsg, Owner

DEFAULT_TABLE_CAP = 10**7


@dataclass(frozen=True)
class BoundPair:
    lower: Fraction
    upper: Fraction

    def to_json(self) -> dict:
        from .report import decimal, rational

        return {
            "lower": rational(self.lower),
            "upper": rational(self.upper),
            "lower_decimal": decimal(self.lower, "down", 20),
            "upper_decimal": decimal(self.upper, "up", 20),
        }


def _step(game: OcSsg, N, scale: int, D: int, width: int, top) -> np.ndarray:
    """One Bellman step on integer numerators (values are N / D**k)."""
    new = np.empty_like(N)
    new[:, 0] = scale * D
    new[:, width] = top
    for q in range(game.n_states):
        parts = []
        for i in game.out_rules[q]:
            r = game.rules[i]
            w = D if r.prob is None else r.prob.numerator * (D // r.prob.denominator)
            parts.append(N[r.dst, 1 + r.delta : width + r.delta] * w)
        owner = game.owner(q)
        if owner is Owner.RANDOM:
            row = functools.reduce(np.add, parts)
        elif owner is Owner.MAX:
            row = functools.reduce(np.maximum, parts)
        else:
            row = functools.reduce(np.minimum, parts)
        new[q, 1:width] = row
    return new


def horizon_table(game: OcSsg, horizon: int, max_counter: int, cap: int = DEFAULT_TABLE_CAP):
    """Exact lower and upper bounds on v(q, c) for all q and 0 <= c <= max_counter.

    lower is the optimal probability of terminating within ``horizon``
    steps; upper additionally counts runs still alive at the horizon as
    terminating.  Rows are indexed [q][c].
    """
    if horizon < 0 or max_counter < 0:
        raise ValueError("horizon and counter must be non-negative")
    width = max_counter + horizon + 1
    if game.n_states * (width + 1) > cap:
        raise TableTooLarge(f"bound table needs {game.n_states * (width + 1)} cells (cap {cap})")
    D = 1
    for r in game.rules:
        if r.prob is not None:
            D = math.lcm(D, r.prob.denominator)

    out = []
    for start_alive in (0, 1):
        N = np.empty((game.n_states, width + 1), dtype=object)
        N[:, :] = start_alive
        N[:, 0] = 1
        scale = 1
        for _ in range(horizon):
            # counters beyond the table are never reached in time from the queried
            # range; their cells hold the trivial bound 0 (lower) or 1 (upper)
            N = _step(game, N, scale, D, width, start_alive * scale * D)
            scale *= D
        out.append([[Fraction(int(N[q, c]), scale) for c in range(max_counter + 1)] for q in range(game.n_states)])
    return out[0], out[1]


def finite_horizon_bounds(game: OcSsg, start: Config, horizon: int, cap: int = DEFAULT_TABLE_CAP) -> BoundPair:
    if start.counter < 0:
        raise ValueError("start counter must be non-negative")
    lower, upper = horizon_table(game, horizon, start.counter, cap)
    return BoundPair(lower[start.state][start.counter], upper[start.state][start.counter])


# ---------------------------------------------------------------------------
# simulation


@dataclass(frozen=True)
class SimReport:
    runs: int
    terminated: int
    horizon: int
    seed: int
    frequency: Fraction

    @property
    def stderr(self) -> float:
        p = float(self.frequency)
        return math.sqrt(max(p * (1 - p), 0.0) / self.runs)

    def to_json(self) -> dict:
        from .report import decimal, rational

        return {
            "runs": self.runs,
            "terminated": self.terminated,
            "horizon": self.horizon,
            "seed": self.seed,
            "frequency": rational(self.frequency),
            "frequency_decimal": decimal(self.frequency, "down", 12),
        }


def _tables(game: OcSsg, strategies):
    width = max([1] + [getattr(s, "N", 0) for s in strategies if s is not None])
    table = np.zeros((2, game.n_states, width), dtype=np.int64)
    above = np.full((2, game.n_states), -1, dtype=np.int64)
    limit = np.zeros(2, dtype=np.int64)
    for slot, owner in ((0, Owner.MAX), (1, Owner.MIN)):
        states = game.states_of(owner)
        st = strategies[slot]
        if not states:
            continue
        if st is None:
            raise ValueError(f"a strategy for {owner.value} is required")
        counterless = st if isinstance(st, CounterlessStrategy) else st.at_or_above
        counterless.check(game)
        limit[slot] = 0 if isinstance(st, CounterlessStrategy) else st.N
        for q in states:
            above[slot, q] = counterless.choice[q]
            table[slot, q, :] = counterless.choice[q]
            if not isinstance(st, CounterlessStrategy):
                for i in range(1, st.N):
                    table[slot, q, i] = st.below[(q, i)]
    return table, above, limit


def simulate(game: OcSsg, sigma, pi, start: Config, horizon: int, runs: int, seed: int) -> SimReport:
    """Fraction of ``runs`` seeded runs whose counter reaches 0 within ``horizon`` steps.

    ``sigma`` and ``pi`` are mode-switch or counterless strategies (None for
    an absent player).  Rule indices refer to ``game``.
    """
    if runs < 1 or horizon < 0:
        raise ValueError("runs must be positive and horizon non-negative")
    order = [i for q in range(game.n_states) for i in game.out_rules[q]]
    pos = np.empty(len(order), dtype=np.int64)
    pos[order] = np.arange(len(order))
    rule_off = np.zeros(game.n_states + 1, dtype=np.int64)
    for q in range(game.n_states):
        rule_off[q + 1] = rule_off[q] + len(game.out_rules[q])
    rule_delta = np.array([game.rules[i].delta for i in order], dtype=np.int64)
    rule_dst = np.array([game.rules[i].dst for i in order], dtype=np.int64)
    cum = np.zeros(len(order))
    for q in range(game.n_states):
        acc = Fraction(0)
        for k, i in enumerate(game.out_rules[q]):
            acc += game.rule_prob(i)
            cum[rule_off[q] + k] = float(acc)
        cum[rule_off[q + 1] - 1] = 1.0
    code = {Owner.MAX: kernels.MAX, Owner.MIN: kernels.MIN, Owner.RANDOM: kernels.RAND}
    owner = np.array([code[o] for _, o in game.states], dtype=np.int64)
    table, above, limit = _tables(game, (sigma, pi))
    table = np.where(table >= 0, pos[np.maximum(table, 0)], -1)
    above = np.where(above >= 0, pos[np.maximum(above, 0)], -1)
    count = kernels.simulate_counts(
        rule_off, rule_delta, rule_dst, cum, owner, table, above, limit,
        start.state, start.counter, horizon, seed, runs,
    )
    return SimReport(runs, count, horizon, seed, Fraction(count, runs))
