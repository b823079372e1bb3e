from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from octerm.finite_solver import (
    Edge, FiniteSsg, almost_sure_reach, chain_mean_and_decrease, chain_reach_values, decompose_end_components,
    ec_min_mean_payoff, from_ocssg, induced_chain, max_reach_values, min_reach_values, ssg_reach_values,
)
from octerm.errors import EnumerationCapExceeded
from octerm.linalg import SingularSystem, solve_sparse
from octerm.model import CounterlessStrategy, OcSsg, Owner, Rule

import oracles

F = Fraction
MAX, MIN, RAND = Owner.MAX, Owner.MIN, Owner.RANDOM


def _fig2_game(fig2, targets=("g",), relabel=None):
    game = from_ocssg(fig2, [fig2.index[t] for t in targets])
    if relabel:
        states = tuple((n, relabel.get(n, o)) for n, o in game.states)
        game = FiniteSsg(states, game.edges, game.targets)
    return game


def _named(game, vals):
    return {game.name(s): v for s, v in enumerate(vals)}


def test_fig2_max_reach(fig2):
    game = _fig2_game(fig2)
    vals, sigma = max_reach_values(game)
    half = F(1, 2)
    assert _named(game, vals) == {"s": half, "r": half, "t": half, "g": 1, "b": 0}
    s = fig2.index["s"]
    assert game.edges[sigma.choice[s]].dst == fig2.index["t"]


def test_all_and_no_targets(fig2):
    game = from_ocssg(fig2, range(fig2.n_states))
    assert max_reach_values(game)[0] == [1] * 5
    game = from_ocssg(fig2, [])
    assert max_reach_values(game)[0] == [0] * 5


def test_min_single_state():
    game = FiniteSsg((("m", MIN), ("t", RAND), ("z", RAND)), (Edge(0, 1), Edge(0, 2), Edge(1, 1, F(1)), Edge(2, 2, F(1))), frozenset([1]))
    vals, pi = min_reach_values(game)
    assert vals[0] == 0 and pi.choice[0] == 1


def test_chain_half():
    game = FiniteSsg((("a", RAND), ("t", RAND), ("z", RAND)),
                     (Edge(0, 1, F(1, 2)), Edge(0, 2, F(1, 2)), Edge(1, 1, F(1)), Edge(2, 2, F(1))), frozenset([1]))
    assert min_reach_values(game)[0][0] == F(1, 2)
    assert chain_reach_values(game)[0] == F(1, 2)


def test_fig2_with_min_s(fig2):
    game = _fig2_game(fig2, relabel={"s": MIN})
    vals, pi = min_reach_values(game)
    named = _named(game, vals)
    assert named["s"] == 0 and named["r"] == 0
    assert game.edges[pi.choice[fig2.index["s"]]].dst == fig2.index["r"]


def test_min_state_against_random_third():
    # m chooses between the target and a chance state reaching it w.p. 1/3
    game = FiniteSsg(
        (("m", MIN), ("c", RAND), ("t", RAND), ("z", RAND)),
        (Edge(0, 2), Edge(0, 1), Edge(1, 2, F(1, 3)), Edge(1, 3, F(2, 3)), Edge(2, 2, F(1)), Edge(3, 3, F(1))),
        frozenset([2]),
    )
    vals, sigma, pi = ssg_reach_values(game)
    assert vals[0] == F(1, 3) and pi.choice[0] == 1


def test_ssg_degenerate_cases(fig2):
    game = _fig2_game(fig2)
    assert ssg_reach_values(game)[0] == max_reach_values(game)[0]
    game = _fig2_game(fig2, relabel={"s": MIN})
    assert ssg_reach_values(game)[0] == min_reach_values(game)[0]


def test_almost_sure(fig2):
    assert almost_sure_reach(from_ocssg(fig2, [fig2.index["g"]])) == {fig2.index["g"]}
    got = almost_sure_reach(from_ocssg(fig2, [fig2.index["s"]]))
    assert got == {fig2.index["s"], fig2.index["r"]}
    assert almost_sure_reach(from_ocssg(fig2, [])) == set()


def test_end_components(fig2, biased):
    ecs = decompose_end_components(from_ocssg(fig2))
    names = [{fig2.name(s) for s in ec} for ec in ecs]
    assert sorted(map(sorted, names)) == [["b"], ["g"], ["r", "s"]]
    single = FiniteSsg((("a", RAND),), (Edge(0, 0, F(1)),))
    assert decompose_end_components(single) == [frozenset([0])]
    assert decompose_end_components(from_ocssg(biased)) == [frozenset([0])]


def test_ec_mean_payoff(fig2):
    game = from_ocssg(fig2)
    idx = fig2.index
    assert ec_min_mean_payoff(game, {idx["s"], idx["r"]})[0] == F(1, 6)
    assert ec_min_mean_payoff(game, {idx["g"]})[0] == -1
    assert ec_min_mean_payoff(game, {idx["b"]})[0] == 1


def test_ec_mean_payoff_cap(fig2):
    game = from_ocssg(fig2)
    with pytest.raises(EnumerationCapExceeded):
        ec_min_mean_payoff(game, {fig2.index["s"], fig2.index["r"]}, cap=0)


def test_chain_mean_and_decrease(biased, idle, fig2):
    (info,) = chain_mean_and_decrease(induced_chain(biased))
    assert info.mean == F(1, 3) and info.decreasing
    (info,) = chain_mean_and_decrease(induced_chain(idle, CounterlessStrategy(MAX, {0: 0})))
    assert info.mean == 0 and not info.decreasing and not info.unbalanced
    s, t = fig2.index["s"], fig2.index["t"]
    chain = induced_chain(fig2, CounterlessStrategy(MAX, {s: fig2.rule_index[(s, 0, t)]}))
    infos = {frozenset(fig2.name(q) for q in i.states): i for i in chain_mean_and_decrease(chain, s)}
    assert set(infos) == {frozenset("g"), frozenset("b")}
    assert (infos[frozenset("g")].mean, infos[frozenset("g")].decreasing) == (-1, True)
    assert (infos[frozenset("b")].mean, infos[frozenset("b")].decreasing) == (1, False)


def test_balanced_cycle_with_decrement():
    # a -(-1)-> b -(+1)-> a: mean 0, has a -1 edge, but the counter is bounded
    chain = FiniteSsg((("a", RAND), ("b", RAND)), (Edge(0, 1, F(1), -1), Edge(1, 0, F(1), 1)))
    (info,) = chain_mean_and_decrease(chain)
    assert info.mean == 0 and info.decreasing and not info.unbalanced


def test_solve_sparse_matches_dense():
    rows = [{0: F(2), 1: F(1)}, {0: F(1), 1: F(3), 2: F(-1)}, {1: F(1, 2), 2: F(1)}]
    rhs = [F(1), F(2), F(3)]
    dense = [[r.get(j, F(0)) for j in range(3)] for r in rows]
    assert solve_sparse(rows, rhs) == oracles.dense_solve(dense, rhs)
    assert all(isinstance(v, Fraction) for v in solve_sparse(rows, rhs))


def test_solve_sparse_pivot_swap_and_singular():
    assert solve_sparse([{1: F(1)}, {0: F(1)}], [F(2), F(3)]) == [3, 2]
    with pytest.raises(SingularSystem):
        solve_sparse([{0: F(1), 1: F(1)}, {0: F(2), 1: F(2)}], [F(1), F(2)])


# ---------------------------------------------------------------------------
# properties on random small games


def _random_game(seed, n, owners):
    rng = np.random.default_rng(seed)
    states = tuple((f"x{i}", owners[int(rng.integers(len(owners)))]) for i in range(n))
    edges = []
    for s, (_, o) in enumerate(states):
        k = int(rng.integers(1, 4))
        dsts = sorted(set(int(d) for d in rng.integers(0, n, size=k)))
        w = [int(x) for x in rng.integers(1, 4, size=len(dsts))]
        for d, wi in zip(dsts, w):
            edges.append(Edge(s, d, F(wi, sum(w)) if o is RAND else None))
    targets = frozenset(int(t) for t in rng.choice(n, size=int(rng.integers(0, min(n, 2) + 1)), replace=False))
    return FiniteSsg(states, tuple(edges), targets)


def _bellman_ok(game, vals):
    for s in range(game.n_states):
        if s in game.targets:
            assert vals[s] == 1
            continue
        succ = [vals[game.edges[e].dst] for e in game.out_edges[s]]
        o = game.owner(s)
        if o is MAX:
            assert vals[s] == max(succ)
        elif o is MIN:
            assert vals[s] == min(succ)
        else:
            assert vals[s] == sum(game.prob(e) * vals[game.edges[e].dst] for e in game.out_edges[s])


@given(st.integers(0, 10**6), st.integers(1, 6))
def test_ssg_matches_brute_force(seed, n):
    game = _random_game(seed, n, (MAX, MIN, RAND))
    vals, sigma, pi = ssg_reach_values(game)
    assert vals == oracles.ssg_values(game)
    _bellman_ok(game, vals)
    # each returned strategy attains the value against a best response
    assert min_reach_values(_fix(game, sigma.choice))[0] == vals
    assert max_reach_values(_fix(game, pi.choice))[0] == vals


@given(st.integers(0, 10**6), st.integers(1, 7))
def test_max_reach_and_almost_sure(seed, n):
    game = _random_game(seed, n, (MAX, RAND))
    vals, sigma = max_reach_values(game)
    assert vals == oracles.ssg_values(game)
    assert chain_reach_values(game, sigma.choice) == vals
    assert almost_sure_reach(game) == {s for s, v in enumerate(vals) if v == 1}


@given(st.integers(0, 10**6), st.integers(1, 6))
def test_warm_start_does_not_change_results(seed, n):
    game = _random_game(seed, n, (MAX, MIN, RAND))
    warm = ssg_reach_values(game, warm=True)
    cold = ssg_reach_values(game, warm=False)
    assert warm[0] == cold[0] and warm[1] == cold[1] and warm[2] == cold[2]


@given(st.integers(0, 10**6), st.integers(1, 6))
def test_end_components_are_maximal(seed, n):
    import itertools

    game = _random_game(seed, n, (MAX, RAND))
    ecs = decompose_end_components(game)
    flat = [s for ec in ecs for s in ec]
    assert len(flat) == len(set(flat))

    def is_ec(c):
        if not c:
            return False
        for s in c:
            dsts = [game.edges[e].dst for e in game.out_edges[s]]
            ok = all(d in c for d in dsts) if game.owner(s) is RAND else any(d in c for d in dsts)
            if not ok:
                return False
        # strongly connected inside the allowed moves
        for a in c:
            seen, stack = {a}, [a]
            while stack:
                u = stack.pop()
                es = game.out_edges[u]
                for e in es:
                    d = game.edges[e].dst
                    if d in c and d not in seen:
                        seen.add(d)
                        stack.append(d)
            if seen != c:
                return False
        return True

    for ec in ecs:
        assert is_ec(set(ec))
    # no end component, maximal or not, escapes the decomposition
    for k in range(1, n + 1):
        for cand in itertools.combinations(range(n), k):
            if is_ec(set(cand)):
                assert any(set(cand) <= ec for ec in ecs)


def _fix(game, choice):
    edges = tuple(e for i, e in enumerate(game.edges) if e.src not in choice or choice[e.src] == i)
    states = tuple((n, RAND if s in choice else o) for s, (n, o) in enumerate(game.states))
    edges = tuple(Edge(e.src, e.dst, F(1) if e.src in choice else e.prob, e.reward) for e in edges)
    return FiniteSsg(states, edges, game.targets)
