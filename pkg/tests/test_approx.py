from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from octerm.approx import (
    analyze, approximate_termination, build_segment_game, fix_min_strategy, max_counter_drop,
    strategy_from_json, termination_tail_bound,
)
from octerm.errors import SegmentTooLarge
from octerm.finite_solver import ssg_reach_values
from octerm.generate import random_model
from octerm.martingale import tail_bound_value
from octerm.model import Config, CounterlessStrategy, Owner, parse_ocssg
from octerm.oracle import horizon_table
from octerm.qualitative import liminf_values_ssg

import oracles

F = Fraction
DOWN = parse_ocssg("state q max\nrule q -1 q\n")
CHOICE = parse_ocssg("state m min\nstate a max\nstate b max\nrule m 0 a\nrule m 0 b\nrule a -1 a\nrule b +1 b\n")
SHALLOW = parse_ocssg("state q max\nstate r max\nrule q -1 r\nrule q +1 q\nrule r +1 r\n")


def test_fix_min_strategy(fig2):
    assert fix_min_strategy(fig2, None) == fig2
    a = CHOICE.index["a"]
    fixed = fix_min_strategy(CHOICE, CounterlessStrategy(Owner.MIN, {0: 0}))
    assert fixed.owner(0) is Owner.RANDOM
    assert [(r.dst, r.prob) for r in fixed.rules if r.src == 0] == [(a, F(1))]
    assert not fixed.has_min


def test_fix_min_strategy_composes():
    from test_qualitative import FIG2_MIN_R

    res = liminf_values_ssg(FIG2_MIN_R)
    mdp = fix_min_strategy(FIG2_MIN_R, res.pi_star)
    assert not mdp.has_min
    assert res.nu == liminf_values_ssg(mdp).nu


def test_tail_bound_biased(biased):
    tb = termination_tail_bound(biased, None, F(1, 100))
    assert tb.route == "direct" and tb.source == "certificate"
    assert 188 <= tb.N <= 190
    assert tb.certificate.x_bar == F(1, 3) and tb.certificate.h == 0


def test_tail_bound_all_value_one():
    tb = termination_tail_bound(DOWN, None, F(1, 100))
    assert (tb.N, tb.certificate, tb.route) == (0, None, "value-one")


def test_tail_bound_fig2_pinned(fig2):
    pinned = {F(1, 8): 731, F(1, 100): 1004, F(1, 1000): 1253}
    for eps, N in pinned.items():
        tb = termination_tail_bound(fig2, None, eps)
        assert tb.N == N
        assert tb.certificate.x_bar == F(1, 6) and tb.certificate.z_span == F(1, 3) and tb.certificate.h == 1


def test_tail_bound_rising_modes(fig2, idle):
    always = termination_tail_bound(fig2, None, F(1, 8), rising="always")
    assert always.route == "rising" and always.rising.model.n_states == 1252
    assert termination_tail_bound(fig2, None, F(1, 8), rising="never").route == "direct"
    with pytest.raises(ValueError):
        termination_tail_bound(fig2, None, F(1, 8), rising="sometimes")
    # the idle loop idles, so the automatic mode takes the rising route
    assert termination_tail_bound(idle, None, F(1, 8)).route == "rising"


def test_counter_drop_bound():
    assert max_counter_drop(SHALLOW) == [1, 0]
    assert max_counter_drop(DOWN) == [None]
    tb = termination_tail_bound(SHALLOW, None, F(1, 100))
    assert tb.N == 3 and tb.source == "counter-drop"


def test_exponential_refinement(biased):
    tb = termination_tail_bound(biased, None, F(1, 100), segment_cap=100)
    assert tb.source == "exponential" and tb.N == 8
    r = approximate_termination(biased, Config(0, 1), F(1, 100), segment_cap=100)
    assert abs(r.value - F(1, 2)) <= F(1, 100)


def test_segment_too_large(fig2):
    with pytest.raises(SegmentTooLarge):
        analyze(fig2, F(1, 100), segment_cap=20)


def test_segment_game_sizes(fig2, biased):
    nu = liminf_values_ssg(fig2).nu
    seg = build_segment_game(fig2, nu, 3)
    assert seg.game.n_states == 22
    one = build_segment_game(fig2, nu, 1)
    assert one.game.n_states == 12
    assert all(one.game.owner(s) is Owner.RANDOM for s in range(12))
    with pytest.raises(ValueError):
        build_segment_game(fig2, nu, 0)


def test_segment_game_biased(biased):
    seg = build_segment_game(biased, [F(0)], 2)
    vals, _, _ = ssg_reach_values(seg.game)
    assert vals[seg.state(0, 1)] == F(1, 3)
    assert [e.prob for e in seg.game.edges if e.src == seg.state(0, 2)] == [F(1)]
    assert vals == oracles.ssg_values(seg.game)


def test_fig2_examples(fig2, fig2_no_st):
    eps = F(1, 100)
    r = approximate_termination(fig2, Config(fig2.index["s"], 1), eps)
    assert abs(r.value - F(3, 4)) <= eps
    assert r.N == 1004
    s = fig2.index["s"]
    assert fig2.describe_rule(r.sigma_bar.below[(s, 1)]) == "(s,0,r)"
    assert approximate_termination(fig2, Config(s, 0), eps).value == 1
    assert approximate_termination(fig2, Config(fig2.index["b"], 5), eps).value <= eps
    r = approximate_termination(fig2_no_st, Config(fig2_no_st.index["s"], 4), eps)
    assert abs(r.value - F(1, 16)) <= eps


def test_fig2_values_against_closed_form(fig2):
    a = analyze(fig2, F(1, 100))
    s = fig2.index["s"]
    for i in range(0, 40):
        assert abs(a.values[s][i] - oracles.fig2_value(i)) <= F(1, 100)


def test_start_above_N(biased):
    r = approximate_termination(biased, Config(0, 500), F(1, 100))
    assert r.value == 0 and r.value_at(0, 500) == 0


def test_bad_arguments(fig2):
    with pytest.raises(ValueError):
        approximate_termination(fig2, Config(0, -1), F(1, 100))
    with pytest.raises(ValueError):
        approximate_termination(fig2, Config(9, 1), F(1, 100))
    with pytest.raises(ValueError):
        approximate_termination(fig2, Config(0, 1), F(1))


def test_strategy_json_round_trip(fig2):
    a = analyze(fig2, F(1, 8))
    doc = a.sigma_bar.to_json(fig2)
    back = strategy_from_json(doc, fig2)
    assert back.below == a.sigma_bar.below
    assert back.at_or_above.choice == a.sigma_bar.at_or_above.choice
    assert back.N == a.N if hasattr(a, "N") else back.N == a.tail.N


def test_mode_switch_semantics(fig2):
    a = analyze(fig2, F(1, 8))
    sb = a.sigma_bar
    s = fig2.index["s"]
    rule, switched = sb.choose(s, sb.N, False)
    assert switched and rule == sb.at_or_above.choice[s]
    # once switched, low counters keep the counterless choice
    assert sb.choose(s, 1, True) == (sb.at_or_above.choice[s], True)
    assert sb.choose(s, 1, False) == (sb.below[(s, 1)], False)


def test_min_game(fig2):
    r = approximate_termination(CHOICE, Config(0, 3), F(1, 100))
    assert r.value == 0
    assert CHOICE.describe_rule(r.pi_bar.at_or_above.choice[0]) == "(m,0,b)"


@settings(max_examples=30)
@given(st.integers(0, 10**6), st.integers(1, 3), st.booleans())
def test_report_invariants(seed, n, with_min):
    owners = (Owner.MAX, Owner.MIN, Owner.RANDOM) if with_min else (Owner.MAX, Owner.RANDOM)
    m = random_model(np.random.default_rng(seed), n, owners=owners)
    eps = F(1, 10)
    a = analyze(m, eps)
    N = a.tail.N
    lower, upper = horizon_table(m, 40, min(N, 12))
    for q in range(m.n_states):
        row = a.values[q]
        assert row[0] == 1
        assert all(x >= y for x, y in zip(row, row[1:]))
        assert all(a.liminf.nu[q] <= v <= 1 for v in row)
        if N >= 1:
            assert row[N - 1] - a.liminf.nu[q] <= 2 * eps
        for i in range(min(N, 12) + 1):
            v = row[i]
            assert lower[q][i] - eps <= v <= upper[q][i] + eps
        cert = a.tail.certificate
        if cert is not None and not m.has_min and a.tail.route == "direct":
            for i in range(cert.h, min(N, cert.h + 5) + 1):
                assert row[i] <= a.liminf.nu[q] + tail_bound_value(cert, i) + eps
