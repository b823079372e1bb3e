from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from octerm.generate import random_model
from octerm.model import (
    BUILTIN_TEXT, CounterlessStrategy, ModelError, OcSsg, Owner, Rule, builtin_example, parse_ocssg,
    parse_rational, serialize_ocssg, validate,
)


def test_minimal_model_parses():
    m = parse_ocssg("state q rand\nrule q +1 q 2/3\nrule q -1 q 1/3")
    assert m.n_states == 1 and len(m.rules) == 2
    assert m.rules[0] == Rule(0, 1, 0, Fraction(2, 3))


def test_probability_sum_error_names_the_sum():
    with pytest.raises(ModelError) as exc:
        parse_ocssg("state q rand\nrule q +1 q 2/3\nrule q -1 q 1/2")
    assert "7/6 ≠ 1" in str(exc.value)
    assert [d.code for d in exc.value.diagnostics] == ["prob-sum"]


def test_delta_out_of_range():
    with pytest.raises(ModelError) as exc:
        parse_ocssg("state q rand\nrule q +2 q 1/1")
    assert "delta out of range" in str(exc.value)


def test_syntax_error_has_position():
    with pytest.raises(ModelError) as exc:
        parse_ocssg("state q rand\nrule q +1\n")
    d = exc.value.diagnostics[0]
    assert d.code == "syntax" and d.line == 2 and d.column is not None


def test_dangling_state():
    with pytest.raises(ModelError) as exc:
        parse_ocssg("state q max\nrule q 0 r\n")
    assert exc.value.diagnostics[0].code == "dangling"


def test_decimal_probability_rejected():
    with pytest.raises(ModelError):
        parse_ocssg("state q rand\nrule q +1 q 0.5\nrule q -1 q 1/2\n")


@pytest.mark.parametrize("text", ["1/2", "-3/4", " 2/6 "])
def test_parse_rational(text):
    assert parse_rational(text) == Fraction(text.strip())


@pytest.mark.parametrize("text", ["0.5", "1", "1/0", "a/b"])
def test_parse_rational_rejects(text):
    with pytest.raises(ValueError):
        parse_rational(text)


def test_builtin_fixtures(fig2, fig2_no_st, biased, idle):
    assert validate(fig2) == []
    assert (fig2.n_states, len(fig2.rules)) == (5, 8)
    assert (fig2_no_st.n_states, len(fig2_no_st.rules)) == (5, 7)
    assert (biased.n_states, len(biased.rules)) == (1, 2)
    assert idle.owner(0) is Owner.MAX and len(idle.rules) == 1
    # the fig2 rules, spelled out
    keys = {(fig2.name(r.src), r.delta, fig2.name(r.dst), r.prob) for r in fig2.rules}
    half, third = Fraction(1, 2), Fraction(1, 3)
    assert keys == {
        ("s", 0, "r", None), ("s", 0, "t", None),
        ("r", 1, "s", 2 * third), ("r", -1, "s", third),
        ("t", 0, "g", half), ("t", 0, "b", half),
        ("g", -1, "g", Fraction(1)), ("b", 1, "b", Fraction(1)),
    }


def test_unknown_builtin():
    with pytest.raises(KeyError):
        builtin_example("nope")


def test_validate_sum_below_one():
    m = OcSsg((("q", Owner.RANDOM),), (Rule(0, 1, 0, Fraction(9, 10)),))
    assert [d.code for d in validate(m)] == ["prob-sum"]


def test_validate_state_without_rules():
    m = OcSsg((("q", Owner.MAX), ("p", Owner.MAX)), (Rule(0, 0, 0),))
    diags = validate(m)
    assert len(diags) == 1 and diags[0].code == "no-rules"


def test_validate_probability_on_controlled_state():
    m = OcSsg((("q", Owner.MAX),), (Rule(0, 0, 0, Fraction(1)),))
    assert [d.code for d in validate(m)] == ["prob-unexpected"]


def test_comments_and_blank_lines():
    m = parse_ocssg("# a model\n\nstate q max  # controlled\nrule q 0 q\n")
    assert m.n_states == 1


@pytest.mark.parametrize("name", sorted(BUILTIN_TEXT))
def test_round_trip_builtins(name):
    m = builtin_example(name)
    again = parse_ocssg(serialize_ocssg(m))
    assert again == m
    assert serialize_ocssg(again) == serialize_ocssg(m)


def test_fix_strategy_keeps_other_rules(fig2):
    s = fig2.index["s"]
    pick = fig2.rule_index[(s, 0, fig2.index["t"])]
    fixed = fig2.fix_strategy(CounterlessStrategy(Owner.MAX, {s: pick}))
    assert fixed.owner(s) is Owner.RANDOM
    assert [fixed.describe_rule(i) for i in fixed.out_rules[s]] == ["(s,0,t)"]
    assert len(fixed.rules) == len(fig2.rules) - 1
    assert validate(fixed) == []


def test_strategy_check_rejects_foreign_rule(fig2):
    s = fig2.index["s"]
    with pytest.raises(ValueError):
        CounterlessStrategy(Owner.MAX, {s: 2}).check(fig2)
    with pytest.raises(ValueError):
        CounterlessStrategy(Owner.MAX, {}).check(fig2)


@given(st.integers(0, 2**32 - 1), st.integers(1, 5))
def test_round_trip_random(seed, n):
    import numpy as np

    m = random_model(np.random.default_rng(seed), n, owners=(Owner.MAX, Owner.MIN, Owner.RANDOM))
    assert validate(m) == []
    text = serialize_ocssg(m)
    assert parse_ocssg(text) == m
    # probabilities are positive and sum to one per chance state
    for q in m.states_of(Owner.RANDOM):
        probs = [m.rules[i].prob for i in m.out_rules[q]]
        assert all(p > 0 for p in probs) and sum(probs) == 1
