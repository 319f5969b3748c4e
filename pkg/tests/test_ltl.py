import random

import pytest
from conftest import PQ, random_formula
from hypothesis import given, settings
from hypothesis import strategies as st

from ltlabel.ltl import (
    FALSE,
    TRUE,
    Alphabet,
    Always,
    And,
    Atom,
    Eventually,
    Implies,
    LassoWord,
    LtlSyntaxError,
    Next,
    Not,
    Or,
    Release,
    UnknownPropositionError,
    Until,
    desugar,
    is_core,
    is_nnf,
    negation_normal_form,
    parse_ltl,
    propositions_of,
    satisfies_lasso,
    to_text,
)

P, Q = Atom(PQ["p"]), Atom(PQ["q"])


class TestAlphabet:
    def test_symbols_and_names(self):
        a = Alphabet(["split_lane", "stop"])
        assert a.symbol(["stop"]) == 2
        assert a.names_of(3) == ("split_lane", "stop")
        assert list(a.letters()) == [0, 1, 2, 3]

    @pytest.mark.parametrize("names", [["a", "a"], ["1x"], ["G"], ["true"]])
    def test_rejects_bad_names(self, names):
        with pytest.raises(ValueError):
            Alphabet(names)


class TestParser:
    def test_split_lane(self):
        f = parse_ltl("G (split_lane -> X !split_lane)")
        a = Atom(f.child.left.prop)
        assert f == Always(Implies(a, Next(Not(a))))

    def test_precedence(self):
        assert parse_ltl("p | q & p", PQ) == Or(P, And(Q, P))
        assert parse_ltl("!p U q", PQ) == Until(Not(P), Q)
        assert parse_ltl("p -> q -> p", PQ) == Implies(P, Implies(Q, P))
        assert parse_ltl("p U q U p", PQ) == Until(P, Until(Q, P))
        assert parse_ltl("X p R q", PQ) == Release(Next(P), Q)

    def test_set_literal_is_conjunction(self):
        assert parse_ltl("{p, q}", PQ) == And(P, Q)
        assert parse_ltl("{}", PQ) == TRUE

    def test_derived_operators_normalised(self):
        assert parse_ltl("true U p", PQ) == Eventually(P)
        assert parse_ltl("false R p", PQ) == Always(P)

    def test_errors_report_position(self):
        with pytest.raises(LtlSyntaxError) as exc:
            parse_ltl("G (p -> ", PQ)
        assert exc.value.position == 8
        with pytest.raises(LtlSyntaxError) as exc:
            parse_ltl("p $ q", PQ)
        assert exc.value.position == 2

    def test_unknown_proposition(self):
        with pytest.raises(UnknownPropositionError):
            parse_ltl("G r", PQ)

    def test_inferred_alphabet_order(self):
        f = parse_ltl("q U p")
        assert [p.name for p in sorted(propositions_of(f), key=lambda p: p.id)] == ["q", "p"]


def _canonical(f):
    # the parser folds ``true U x`` and ``false R x`` into F and G
    if isinstance(f, Until) and f.left == TRUE:
        return Eventually(_canonical(f.right))
    if isinstance(f, Release) and f.left == FALSE:
        return Always(_canonical(f.right))
    for cls in (Not, Next, Eventually, Always):
        if isinstance(f, cls):
            return cls(_canonical(f.child))
    if hasattr(f, "left"):
        return type(f)(_canonical(f.left), _canonical(f.right))
    return f


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32), st.integers(0, 5))
def test_print_parse_round_trip(seed, depth):
    f = _canonical(random_formula(random.Random(seed), depth))
    assert parse_ltl(to_text(f), PQ) == f


class TestSemantics:
    def test_examples(self):
        w = LassoWord((1,), (0,))  # p then nothing forever
        assert satisfies_lasso(w, P)
        assert satisfies_lasso(w, Next(Always(Not(P))))
        assert not satisfies_lasso(w, Eventually(Q))
        assert satisfies_lasso(LassoWord((), (1, 2)), Always(Eventually(Q)))
        assert satisfies_lasso(LassoWord((1, 1), (2,)), Until(P, Q))
        assert not satisfies_lasso(LassoWord((), (1,)), Until(P, Q))
        assert satisfies_lasso(LassoWord((), (2,)), Release(P, Q))

    def test_rewrites_preserve_meaning(self, lassos):
        rng = random.Random(17)
        for _ in range(40):
            f = random_formula(rng, 4)
            g, h = negation_normal_form(f), desugar(f)
            assert is_nnf(g) and is_core(h)
            for w in lassos:
                assert satisfies_lasso(w, f) == satisfies_lasso(w, g) == satisfies_lasso(w, h)

    def test_shift_is_suffix(self):
        w = LassoWord((3,), (1, 2))
        assert [w.shift().letter(i) for i in range(5)] == [w.letter(i + 1) for i in range(5)]
