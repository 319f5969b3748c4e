"""Minimum-cost paths that respect a safety monitor.

The product of a labeled graph with a monitor has vertices ``(v, q)``; an
edge ``(v, q) -> (v', q')`` exists when ``v -> v'`` is a graph edge with
letter ``a`` and ``q'`` is a live successor of ``q`` on ``a``.  Every path in
the product therefore induces a word that the monitor has not rejected.
"""

from __future__ import annotations

import heapq
import json
from collections import deque
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

from .buchi import MonitorNfa, Verdict, build_monitor, run_monitor
from .labeling import LabeledGraph
from .ltl import Alphabet, parse_ltl

__all__ = [
    "ProductGraph",
    "Path",
    "AlphabetMismatchError",
    "build_product",
    "shortest_safe_path",
    "plain_shortest_path",
    "check_trace",
    "trace_word",
    "split_lane_example",
    "SPLIT_LANE_FORMULA",
]

SPLIT_LANE_FORMULA = "G (split_lane -> X !split_lane)"


class AlphabetMismatchError(ValueError):
    pass


def _letter_map(labels, alphabet: Alphabet, monitor: MonitorNfa) -> np.ndarray:
    """Translate letters over ``alphabet`` into the monitor's proposition numbering."""
    missing = [n for n in monitor.alphabet.names if n not in alphabet]
    if missing:
        raise AlphabetMismatchError(f"monitor propositions {missing} are not labels of the graph")
    labels = np.asarray(labels, dtype=np.uint64)
    out = np.zeros(labels.shape, dtype=np.int64)
    for p in monitor.alphabet:
        bit = (labels >> np.uint64(alphabet[p.name].id)) & np.uint64(1)
        out |= bit.astype(np.int64) << p.id
    return out


@dataclass
class ProductGraph:
    graph: LabeledGraph
    monitor: MonitorNfa
    start: tuple[int, int]
    vertices: list[tuple[int, int]]
    index: dict[tuple[int, int], int]
    # adjacency: product vertex -> list of (successor, graph edge id)
    succ: list[list[tuple[int, int]]] = field(repr=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return sum(len(s) for s in self.succ)

    def edges(self):
        """``(src, dst, graph_edge, weight)`` over product vertex ids."""
        for i, out in enumerate(self.succ):
            for j, e in out:
                yield i, j, e, float(self.graph.costs[e])

    def to_dot(self) -> str:
        names = self.graph.alphabet
        lines = ["digraph product {", "  rankdir=LR;"]
        for i, (v, q) in enumerate(self.vertices):
            shape = "doublecircle" if i == 0 else "circle"
            lines.append(f'  n{i} [label="v{v},q{q}", shape={shape}];')
        for i, j, e, w in self.edges():
            lab = ",".join(names.names_of(int(self.graph.labels[e]))) or "{}"
            lines.append(f'  n{i} -> n{j} [label="{lab} / {w:g}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def build_product(graph: LabeledGraph, monitor: MonitorNfa, v0: int) -> ProductGraph:
    """Materialise the part of the product reachable from ``(v0, q0)``."""
    if not 0 <= v0 < graph.n_vertices:
        raise ValueError(f"start vertex {v0} is not in the graph")
    letters = _letter_map(graph.labels, graph.alphabet, monitor)
    aut = monitor.automaton
    live = monitor.live
    start = (int(v0), aut.initial)
    vertices = [start]
    index = {start: 0}
    succ: list[list[tuple[int, int]]] = [[]]
    queue = deque([0])
    while queue:
        i = queue.popleft()
        v, q = vertices[i]
        out = succ[i]
        for e in graph.out_edges(v):
            a = int(letters[e])
            w = int(graph.edges[e, 1])
            for guard, q2 in aut.transitions[q]:
                if q2 not in live or not guard.matches(a):
                    continue
                key = (w, q2)
                j = index.get(key)
                if j is None:
                    j = index[key] = len(vertices)
                    vertices.append(key)
                    succ.append([])
                    queue.append(j)
                out.append((j, int(e)))
    return ProductGraph(graph, monitor, start, vertices, index, succ)


@dataclass(frozen=True)
class Path:
    states: tuple[tuple[int, int], ...]
    edges: tuple[int, ...]
    cost: float

    @property
    def vertices(self) -> tuple[int, ...]:
        return tuple(v for v, _ in self.states)

    @property
    def monitor_states(self) -> tuple[int, ...]:
        return tuple(q for _, q in self.states)

    def to_json_dict(self, graph: LabeledGraph) -> dict:
        return {
            "cost": self.cost,
            "states": [{"v": v, "q": q} for v, q in self.states],
            "edges": [
                {
                    "src": int(graph.edges[e, 0]),
                    "dst": int(graph.edges[e, 1]),
                    "labels": list(graph.label_names(e)),
                    "cost": float(graph.costs[e]),
                }
                for e in self.edges
            ],
        }

    def to_json(self, graph: LabeledGraph) -> str:
        return json.dumps(self.to_json_dict(graph), indent=2)


def shortest_safe_path(product: ProductGraph, goal: Iterable[int]) -> Path | None:
    """Dijkstra over the product; ties are broken by hop count, then vertex sequence.

    Returns ``None`` when no goal vertex is reachable.
    """
    goal = {int(g) for g in goal}
    costs = product.graph.costs
    if costs.size and costs.min() < 0:
        raise ValueError("negative edge weight")
    dist: dict[int, tuple] = {}
    heap = [(0.0, 0, (product.start,), (), 0)]
    while heap:
        cost, hops, states, edges, i = heapq.heappop(heap)
        if i in dist:
            continue
        dist[i] = (cost, hops)
        if product.vertices[i][0] in goal:
            return Path(states, edges, float(cost))
        for j, e in product.succ[i]:
            if j not in dist:
                heapq.heappush(heap, (cost + costs[e], hops + 1, states + (product.vertices[j],), edges + (e,), j))
    return None


def plain_shortest_path(graph: LabeledGraph, v0: int, goal: Iterable[int]) -> Path | None:
    """Shortest path ignoring labels, reported with a constant monitor component 0."""
    universal = build_monitor(parse_ltl("true", Alphabet(())))
    product = build_product(LabeledGraph(graph.n_vertices, graph.edges, graph.costs, np.zeros(graph.n_edges), ()), universal, v0)
    return shortest_safe_path(product, goal)


def trace_word(graph: LabeledGraph, trace: Sequence[int]) -> list[int]:
    """Letters along a vertex sequence, in the graph's proposition numbering."""
    word = []
    for i, (u, v) in enumerate(zip(trace, trace[1:])):
        e = graph.find_edge(int(u), int(v)) if 0 <= u < graph.n_vertices else None
        if e is None:
            raise ValueError(f"step {i}: ({u}, {v}) is not an edge")
        word.append(int(graph.labels[e]))
    return word


def check_trace(graph: LabeledGraph, monitor: MonitorNfa, trace: Sequence[int]) -> Verdict:
    """Monitor verdict on the word induced by a vertex sequence."""
    word = trace_word(graph, trace)
    letters = _letter_map(word, graph.alphabet, monitor)
    return run_monitor(monitor, [int(a) for a in letters])


def split_lane_example() -> tuple[LabeledGraph, str, int, set[int]]:
    """Six states, nine transitions: the cheapest route splits lanes twice in a row.

    Returns ``(graph, formula, start, goal)``.
    """
    s = ("split_lane",)
    spec = [
        (0, 1, s, 0), (1, 3, s, 0), (3, 5, (), 0),
        (1, 4, (), 1), (4, 5, (), 0),
        (0, 2, (), 1), (2, 4, s, 1), (2, 3, (), 1), (3, 4, s, 1),
    ]
    alphabet = Alphabet(["split_lane"])
    graph = LabeledGraph(
        6,
        [(a, b) for a, b, _, _ in spec],
        [c for *_, c in spec],
        [alphabet.symbol(lab) for _, _, lab, _ in spec],
        alphabet,
    )
    return graph, SPLIT_LANE_FORMULA, 0, {5}
