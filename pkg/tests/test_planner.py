import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ltlabel.buchi import build_monitor, run_monitor
from ltlabel.labeling import LabeledGraph
from ltlabel.ltl import Alphabet, parse_ltl
from ltlabel.planner import (
    AlphabetMismatchError,
    build_product,
    check_trace,
    plain_shortest_path,
    shortest_safe_path,
    split_lane_example,
    trace_word,
)

AB = Alphabet(["a", "b"])
FORMULAS = ["G (a -> X !a)", "G !b", "G (a -> X b)", "!a U b | G !a", "G (b -> X G !a)"]


def _brute_force(graph, monitor, v0, goal, max_len):
    """Cheapest safe path cost by depth-first search over edge sequences.

    Bad prefixes stay bad and costs are positive, so both prune soundly.
    """
    best = None
    stack = [(v0, ())]
    while stack:
        v, edges = stack.pop()
        cost = float(sum(graph.costs[e] for e in edges))
        if best is not None and cost >= best:
            continue
        if run_monitor(monitor, [int(graph.labels[e]) for e in edges]).is_bad:
            continue
        if v in goal:
            best = cost
            continue
        if len(edges) < max_len:
            for e in graph.out_edges(v):
                stack.append((int(graph.edges[e, 1]), edges + (int(e),)))
    return best


@st.composite
def graphs(draw):
    n = draw(st.integers(2, 6))
    m = draw(st.integers(1, 12))
    rng = np.random.default_rng(draw(st.integers(0, 2**32 - 1)))
    edges = rng.integers(0, n, (m, 2))
    costs = rng.integers(1, 4, m).astype(float)
    labels = rng.integers(0, 4, m)
    return LabeledGraph(n, edges, costs, labels, AB), draw(st.sampled_from(FORMULAS))


@settings(max_examples=80, deadline=None)
@given(graphs())
def test_safe_path_is_optimal_among_safe_paths(case):
    graph, text = case
    monitor = build_monitor(parse_ltl(text, AB), AB)
    goal = {graph.n_vertices - 1}
    path = shortest_safe_path(build_product(graph, monitor, 0), goal)
    # product paths are simple in (v, q), so longer ones never help
    best = _brute_force(graph, monitor, 0, goal, graph.n_vertices * monitor.automaton.n_states)
    if best is None:
        assert path is None
        return
    assert path.cost == best
    assert not run_monitor(monitor, [int(graph.labels[e]) for e in path.edges]).is_bad
    free = plain_shortest_path(graph, 0, goal)
    assert free.cost <= path.cost


def test_split_lane_product():
    graph, formula, v0, goal = split_lane_example()
    monitor = build_monitor(parse_ltl(formula, graph.alphabet), graph.alphabet)
    product = build_product(graph, monitor, v0)
    path = shortest_safe_path(product, goal)
    assert path.states == ((0, 0), (1, 1), (4, 0), (5, 0))
    assert path.cost == 1.0
    # a second split right after the first is pruned
    assert (1, 1) in product.index and (3, 1) not in product.index
    doc = json.loads(path.to_json(graph))
    assert [e["labels"] for e in doc["edges"]] == [["split_lane"], [], []]
    assert "digraph" in product.to_dot()
    free = plain_shortest_path(graph, v0, goal)
    assert free.vertices == (0, 1, 3, 5) and free.cost == 0.0
    assert str(check_trace(graph, monitor, free.vertices)) == "BadPrefix 1"


def test_no_path_and_errors():
    g = LabeledGraph(3, [(0, 1), (1, 2)], [1.0, 1.0], [1, 1], AB)
    m = build_monitor(parse_ltl("G (a -> X !a)", AB), AB)
    assert shortest_safe_path(build_product(g, m, 0), {2}) is None
    assert shortest_safe_path(build_product(g, m, 0), {1}).cost == 1.0
    with pytest.raises(ValueError, match="step 1"):
        trace_word(g, [0, 1, 0])
    with pytest.raises(ValueError):
        build_product(g, m, 5)
    neg = LabeledGraph(2, [(0, 1)], [-1.0], [0], AB)
    with pytest.raises(ValueError, match="negative"):
        shortest_safe_path(build_product(neg, m, 0), {1})


def test_alphabet_mapping():
    # the graph orders propositions differently from the monitor
    g = LabeledGraph(3, [(0, 1), (1, 2)], [1.0, 1.0], [2, 0], ["b", "a", "c"])
    m = build_monitor(parse_ltl("G !a", AB), AB)
    assert shortest_safe_path(build_product(g, m, 0), {2}) is None
    with pytest.raises(AlphabetMismatchError):
        build_product(g, build_monitor(parse_ltl("G !z", Alphabet(["z"])), Alphabet(["z"])), 0)
