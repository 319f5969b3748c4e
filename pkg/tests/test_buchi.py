import random

import pytest
from conftest import PQ, random_formula

from ltlabel.buchi import (
    BuchiAutomaton,
    Guard,
    ResourceLimitError,
    Verdict,
    accepting_reach_set,
    accepts_lasso,
    build_monitor,
    ltl_to_buchi,
    run_monitor,
)
from ltlabel.ltl import Alphabet, parse_ltl, satisfies_lasso
from ltlabel.planner import SPLIT_LANE_FORMULA

SPLIT = Alphabet(["split_lane"])


def test_split_lane_monitor_shape():
    aut = ltl_to_buchi(parse_ltl(SPLIT_LANE_FORMULA, SPLIT), SPLIT)
    assert aut.n_states == 2
    assert set(aut.accepting) == {0, 1}
    edges = {(q, g.pos_mask, g.neg_mask, d) for q, g, d in aut.edges()}
    assert edges == {(0, 0, 1, 0), (0, 1, 0, 1), (1, 0, 1, 0)}
    assert accepting_reach_set(aut) == {0, 1}


@pytest.mark.parametrize(
    "word, expected",
    [((), "Undetermined"), ((0, 0, 0), "Undetermined"), ((1, 1), "BadPrefix 1"), ((0, 1, 0, 1, 1), "BadPrefix 4")],
)
def test_split_lane_verdicts(word, expected):
    m = build_monitor(parse_ltl(SPLIT_LANE_FORMULA, SPLIT), SPLIT)
    assert str(run_monitor(m, word)) == expected


def test_unsatisfiable_rejects_first_step():
    m = build_monitor(parse_ltl("false", PQ), PQ)
    assert m.live == frozenset()
    assert run_monitor(m, [0]) == Verdict(0)


def test_language_matches_semantics(lassos):
    rng = random.Random(5)
    for _ in range(40):
        f = random_formula(rng, 4)
        aut = ltl_to_buchi(f, PQ)
        for w in lassos:
            assert accepts_lasso(aut, w) == satisfies_lasso(w, f), (f, w)


def test_reduction_keeps_language(lassos):
    rng = random.Random(8)
    for _ in range(15):
        f = random_formula(rng, 3)
        big, small = ltl_to_buchi(f, PQ, reduce=False), ltl_to_buchi(f, PQ)
        assert small.n_states <= big.n_states
        assert all(accepts_lasso(big, w) == accepts_lasso(small, w) for w in lassos)


def test_state_cap():
    f = parse_ltl("G F p & G F q & G (p -> X X X q)", PQ)
    with pytest.raises(ResourceLimitError):
        ltl_to_buchi(f, PQ, state_cap=3)


def test_json_round_trip():
    aut = ltl_to_buchi(parse_ltl("G (p -> X q) & F p", PQ), PQ)
    assert BuchiAutomaton.from_json(aut.to_json()) == aut


def test_guard_letters():
    g = Guard(frozenset({0}), frozenset({1}))
    assert g.letters(2) == [1]
    assert g.matches(1) and not g.matches(3)
