import itertools
import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ltlabel.ltl import (  # noqa: E402
    FALSE,
    TRUE,
    Alphabet,
    Always,
    And,
    Atom,
    Eventually,
    Iff,
    Implies,
    LassoWord,
    Next,
    Not,
    Or,
    Release,
    Until,
)

PQ = Alphabet(["p", "q"])


def random_formula(rng: random.Random, depth: int, alphabet: Alphabet = PQ):
    atoms = [Atom(p) for p in alphabet]
    if depth == 0 or rng.random() < 0.25:
        return rng.choice(atoms * 2 + [TRUE, FALSE])
    op = rng.choice("! X F G & | -> <-> U R".split())
    if op in ("!", "X", "F", "G"):
        return {"!": Not, "X": Next, "F": Eventually, "G": Always}[op](random_formula(rng, depth - 1, alphabet))
    a, b = random_formula(rng, depth - 1, alphabet), random_formula(rng, depth - 1, alphabet)
    return {"&": And, "|": Or, "->": Implies, "<->": Iff, "U": Until, "R": Release}[op](a, b)


def small_lassos(n_letters: int = 4, max_stem: int = 2, max_loop: int = 2):
    out = []
    for s in range(max_stem + 1):
        for l in range(1, max_loop + 1):
            for stem in itertools.product(range(n_letters), repeat=s):
                for loop in itertools.product(range(n_letters), repeat=l):
                    out.append(LassoWord(stem, loop))
    return out


@pytest.fixture(scope="session")
def lassos():
    return small_lassos()
