"""LTL to Buchi translation and bad-prefix monitors.

The translation is the on-the-fly tableau of Gerth, Peled, Vardi and Wolper
over negation normal form.  It yields a generalized Buchi automaton with
one acceptance set per Until subformula, which is degeneralized with a
round-robin counter and then shrunk by a bisimulation quotient.

Guards are conjunctions of literals stored as ``(pos, neg)`` pairs of
proposition-id frozensets, so the transition relation never enumerates
``2^Pi`` unless asked to.
"""

from __future__ import annotations

import json
from collections import deque
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from functools import cached_property

import networkx as nx

from .ltl import (
    Alphabet,
    And,
    Atom,
    FalseF,
    Formula,
    LassoWord,
    Next,
    Not,
    Or,
    Release,
    TrueF,
    Until,
    negation_normal_form,
    propositions_of,
    subformulas,
)

__all__ = [
    "Guard",
    "BuchiAutomaton",
    "MonitorNfa",
    "Verdict",
    "UNDETERMINED",
    "ResourceLimitError",
    "ltl_to_buchi",
    "accepting_reach_set",
    "build_monitor",
    "run_monitor",
    "accepts_lasso",
]

DEFAULT_STATE_CAP = 10_000


class ResourceLimitError(RuntimeError):
    """The tableau exceeded its state budget."""


@dataclass(frozen=True)
class Guard:
    """Conjunction of positive and negated propositions, by id."""

    pos: frozenset[int] = frozenset()
    neg: frozenset[int] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "pos", frozenset(self.pos))
        object.__setattr__(self, "neg", frozenset(self.neg))

    @cached_property
    def pos_mask(self) -> int:
        return sum(1 << i for i in self.pos)

    @cached_property
    def neg_mask(self) -> int:
        return sum(1 << i for i in self.neg)

    def matches(self, letter: int) -> bool:
        return letter & self.pos_mask == self.pos_mask and letter & self.neg_mask == 0

    def letters(self, n_props: int) -> list[int]:
        return [a for a in range(1 << n_props) if self.matches(a)]

    def describe(self, alphabet: Alphabet) -> str:
        names = alphabet.names
        lits = [names[i] for i in sorted(self.pos)] + ["!" + names[i] for i in sorted(self.neg)]
        return " & ".join(lits) if lits else "true"

    def sort_key(self) -> tuple[list[int], list[int]]:
        return sorted(self.pos), sorted(self.neg)


@dataclass
class BuchiAutomaton:
    """Buchi automaton with states ``0..n_states-1``.

    ``transitions[q]`` lists ``(guard, q')`` pairs in a deterministic order.
    """

    alphabet: Alphabet
    n_states: int
    initial: int
    accepting: frozenset[int]
    transitions: list[list[tuple[Guard, int]]]

    def __post_init__(self):
        if not 0 <= self.initial < self.n_states:
            raise ValueError("initial state out of range")
        if len(self.transitions) != self.n_states:
            raise ValueError("one transition list per state is required")
        for q, out in enumerate(self.transitions):
            for guard, dst in out:
                if not 0 <= dst < self.n_states:
                    raise ValueError(f"transition {q} -> {dst} leaves the state set")
                if any(i >= len(self.alphabet) for i in guard.pos | guard.neg):
                    raise ValueError("guard mentions a proposition outside the alphabet")
        self.accepting = frozenset(self.accepting)

    @property
    def states(self) -> range:
        return range(self.n_states)

    def edges(self) -> Iterable[tuple[int, Guard, int]]:
        for q, out in enumerate(self.transitions):
            for guard, dst in out:
                yield q, guard, dst

    def successors(self, q: int, letter: int) -> set[int]:
        return {dst for guard, dst in self.transitions[q] if guard.matches(letter)}

    def expanded(self) -> dict[tuple[int, int], set[int]]:
        """Explicit relation ``(q, letter) -> successors`` over all of ``2^Pi``."""
        return {(q, a): self.successors(q, a) for q in self.states for a in self.alphabet.letters()}

    def renumbered(self, perm: Sequence[int]) -> "BuchiAutomaton":
        """Copy with state ``q`` renamed ``perm[q]``."""
        new_trans: list[list[tuple[Guard, int]]] = [[] for _ in range(self.n_states)]
        for q, out in enumerate(self.transitions):
            new_trans[perm[q]] = [(g, perm[d]) for g, d in out]
        return BuchiAutomaton(
            self.alphabet,
            self.n_states,
            perm[self.initial],
            frozenset(perm[q] for q in self.accepting),
            new_trans,
        )

    # -- serialization -----------------------------------------------------

    def to_json(self) -> str:
        names = self.alphabet.names
        doc = {
            "propositions": list(names),
            "states": self.n_states,
            "initial": self.initial,
            "accepting": sorted(self.accepting),
            "transitions": [
                {
                    "src": q,
                    "dst": d,
                    "pos": [names[i] for i in sorted(g.pos)],
                    "neg": [names[i] for i in sorted(g.neg)],
                }
                for q, g, d in self.edges()
            ],
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "BuchiAutomaton":
        doc = json.loads(text)
        alphabet = Alphabet(doc["propositions"])
        n = int(doc["states"])
        trans: list[list[tuple[Guard, int]]] = [[] for _ in range(n)]
        for t in doc["transitions"]:
            guard = Guard(
                frozenset(alphabet[p].id for p in t.get("pos", [])),
                frozenset(alphabet[p].id for p in t.get("neg", [])),
            )
            trans[int(t["src"])].append((guard, int(t["dst"])))
        return cls(alphabet, n, int(doc["initial"]), frozenset(doc["accepting"]), trans)

    def dump(self) -> str:
        """Line-oriented text form for documentation and diffing."""
        lines = [
            f"propositions: {' '.join(self.alphabet.names) or '-'}",
            f"states: {self.n_states}",
            f"initial: {self.initial}",
            f"accepting: {' '.join(map(str, sorted(self.accepting))) or '-'}",
        ]
        for q, g, d in self.edges():
            lines.append(f"{q} -> {d} [{g.describe(self.alphabet)}]")
        return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# tableau


def _is_literal(f: Formula) -> bool:
    return isinstance(f, (Atom, TrueF, FalseF)) or isinstance(f, Not) and isinstance(f.child, Atom)


def _negate_literal(f: Formula) -> Formula:
    if isinstance(f, TrueF):
        return FalseF()
    if isinstance(f, FalseF):
        return TrueF()
    return f.child if isinstance(f, Not) else Not(f)


def _unless(f: Formula) -> list[Formula]:
    # a | b == a | (!a & b); only cheap, and closure-preserving, for literals
    return [_negate_literal(f)] if _is_literal(f) else []


@dataclass
class _Node:
    incoming: set[int]
    new: list[Formula]
    old: set[Formula]
    next: set[Formula]
    name: int = -1


@dataclass
class _Tableau:
    cap: int
    nodes: dict[tuple[frozenset, frozenset], _Node] = field(default_factory=dict)
    order: list[_Node] = field(default_factory=list)

    def expand(self, root: _Node) -> None:
        stack = [root]
        while stack:
            node = stack.pop()
            if not node.new:
                key = (frozenset(node.old), frozenset(node.next))
                existing = self.nodes.get(key)
                if existing is not None:
                    existing.incoming |= node.incoming
                    continue
                if len(self.nodes) >= self.cap:
                    raise ResourceLimitError(f"tableau exceeded {self.cap} states")
                node.name = len(self.order) + 1  # 0 is the initial state
                self.nodes[key] = node
                self.order.append(node)
                stack.append(_Node({node.name}, list(node.next), set(), set()))
                continue
            eta = node.new.pop()
            if eta in node.old:
                stack.append(node)
                continue
            if _is_literal(eta):
                if isinstance(eta, FalseF) or _negate_literal(eta) in node.old:
                    continue
                node.old.add(eta)
                stack.append(node)
            elif isinstance(eta, (Until, Release, Or)):
                # branches are made disjoint where that costs a single literal
                if isinstance(eta, Until):
                    first, later, second = [eta.left] + _unless(eta.right), {eta}, [eta.right]
                elif isinstance(eta, Release):
                    first, later, second = [eta.right] + _unless(eta.left), {eta}, [eta.left, eta.right]
                else:
                    first, later, second = [eta.left], set(), [eta.right] + _unless(eta.left)
                old = node.old | {eta}
                n1 = _Node(set(node.incoming), node.new + [f for f in first if f not in old], set(old), node.next | later)
                n2 = _Node(set(node.incoming), node.new + [f for f in second if f not in old], set(old), set(node.next))
                stack.append(n2)
                stack.append(n1)
            elif isinstance(eta, And):
                node.old.add(eta)
                node.new.extend(f for f in (eta.left, eta.right) if f not in node.old)
                stack.append(node)
            elif isinstance(eta, Next):
                node.old.add(eta)
                node.next.add(eta.child)
                stack.append(node)
            else:
                raise TypeError(f"formula not in negation normal form: {eta!r}")


def _guard_of(old: Iterable[Formula]) -> Guard:
    pos, neg = set(), set()
    for f in old:
        if isinstance(f, Atom):
            pos.add(f.prop.id)
        elif isinstance(f, Not) and isinstance(f.child, Atom):
            neg.add(f.child.prop.id)
    return Guard(frozenset(pos), frozenset(neg))


def ltl_to_buchi(
    f: Formula,
    alphabet: Alphabet | Iterable[str] | None = None,
    *,
    state_cap: int = DEFAULT_STATE_CAP,
    reduce: bool = True,
) -> BuchiAutomaton:
    """Buchi automaton accepting exactly the words satisfying ``f``.

    ``alphabet`` defaults to the propositions mentioned in ``f``.  Raises
    :class:`ResourceLimitError` when the tableau or its degeneralization
    exceeds ``state_cap`` states.
    """
    if alphabet is None:
        alphabet = Alphabet.coerce(sorted(propositions_of(f), key=lambda p: p.id))
    alphabet = Alphabet.coerce(alphabet)
    for p in propositions_of(f):
        if p.name not in alphabet or alphabet[p.name].id != p.id:
            raise ValueError(f"proposition {p.name!r} does not belong to {alphabet!r}")

    g = negation_normal_form(f)
    tab = _Tableau(state_cap)
    tab.expand(_Node({0}, [g], set(), set()))
    nodes = tab.order

    n = len(nodes) + 1
    trans: list[list[tuple[Guard, int]]] = [[] for _ in range(n)]
    for node in nodes:
        guard = _guard_of(node.old)
        for src in sorted(node.incoming):
            trans[src].append((guard, node.name))

    untils = sorted({h for node in nodes for h in node.old if isinstance(h, Until)} | {
        h for h in subformulas(g) if isinstance(h, Until)}, key=str)
    acc_sets = [
        frozenset(node.name for node in nodes if u not in node.old or u.right in node.old) for u in untils
    ]
    aut = _degeneralize(alphabet, n, trans, acc_sets, state_cap)
    return _bisimulation_quotient(aut) if reduce else aut


def _degeneralize(
    alphabet: Alphabet,
    n: int,
    trans: list[list[tuple[Guard, int]]],
    acc_sets: list[frozenset[int]],
    cap: int,
) -> BuchiAutomaton:
    k = len(acc_sets)
    if k == 0:
        return BuchiAutomaton(alphabet, n, 0, frozenset(range(n)), trans)
    # (q, i) advances the counter when q is in the i-th set; accepting: i == 0, q in F_0
    index = {(0, 0): 0}
    queue = deque([(0, 0)])
    out: list[list[tuple[Guard, int]]] = [[]]
    accepting = set()
    while queue:
        q, i = queue.popleft()
        sid = index[(q, i)]
        hit = q != 0 and q in acc_sets[i]
        if hit and i == 0:
            accepting.add(sid)
        j = (i + 1) % k if hit else i
        for guard, dst in trans[q]:
            key = (dst, j)
            if key not in index:
                if len(index) >= cap:
                    raise ResourceLimitError(f"degeneralization exceeded {cap} states")
                index[key] = len(index)
                out.append([])
                queue.append(key)
            out[sid].append((guard, index[key]))
    return BuchiAutomaton(alphabet, len(index), 0, frozenset(accepting), out)


def _bisimulation_quotient(aut: BuchiAutomaton) -> BuchiAutomaton:
    """Merge states with equal acceptance and equal guarded successor blocks."""
    block = [int(q in aut.accepting) for q in aut.states]
    while True:
        sigs = [
            (block[q], frozenset((g, block[d]) for g, d in aut.transitions[q]))
            for q in aut.states
        ]
        ids: dict = {}
        new_block = [ids.setdefault(s, len(ids)) for s in sigs]
        if len(ids) == len(set(block)):
            block = new_block
            break
        block = new_block
    # number blocks in order of first appearance in a BFS from the initial state
    order: dict[int, int] = {}
    queue = deque([aut.initial])
    seen = {aut.initial}
    while queue:
        q = queue.popleft()
        order.setdefault(block[q], len(order))
        for _, d in aut.transitions[q]:
            if d not in seen:
                seen.add(d)
                queue.append(d)
    m = len(order)
    trans: list[list[tuple[Guard, int]]] = [[] for _ in range(m)]
    done = set()
    for q in sorted(seen):
        b = order[block[q]]
        if b in done:
            continue
        done.add(b)
        pairs = sorted({(g, order[block[d]]) for g, d in aut.transitions[q]}, key=lambda t: (t[1], t[0].sort_key()))
        trans[b] = pairs
    accepting = frozenset(order[block[q]] for q in aut.accepting if q in seen)
    return BuchiAutomaton(aut.alphabet, m, 0, accepting, trans)


# --------------------------------------------------------------------------
# acceptance and monitoring


def _graph(aut: BuchiAutomaton) -> nx.DiGraph:
    g = nx.DiGraph()
    g.add_nodes_from(aut.states)
    g.add_edges_from((q, d) for q, _, d in aut.edges())
    return g


def accepting_reach_set(aut: BuchiAutomaton) -> frozenset[int]:
    """States from which some accepting run exists.

    A strongly connected component qualifies when it holds an accepting
    state and at least one internal transition (a self-loop counts); the
    result is every state that can reach a qualifying component.
    """
    g = _graph(aut)
    good: set[int] = set()
    for comp in nx.strongly_connected_components(g):
        if not comp & aut.accepting:
            continue
        if len(comp) > 1 or any(g.has_edge(q, q) for q in comp):
            good |= comp
    live = set(good)
    rev = g.reverse(copy=False)
    for q in good:
        live |= nx.descendants(rev, q)
    return frozenset(live)


@dataclass(frozen=True)
class Verdict:
    """Monitor outcome: ``index`` is the first violating step, or ``None``."""

    index: int | None = None

    @property
    def is_bad(self) -> bool:
        return self.index is not None

    def __str__(self) -> str:
        return f"BadPrefix {self.index}" if self.is_bad else "Undetermined"


UNDETERMINED = Verdict(None)


@dataclass(frozen=True)
class MonitorNfa:
    """Buchi automaton read as an NFA whose live states are ``live``."""

    automaton: BuchiAutomaton
    live: frozenset[int]

    @property
    def alphabet(self) -> Alphabet:
        return self.automaton.alphabet

    @property
    def initial(self) -> int:
        return self.automaton.initial

    def start(self) -> frozenset[int]:
        q0 = self.automaton.initial
        return frozenset({q0}) if q0 in self.live else frozenset()

    def step(self, states: Iterable[int], letter: int) -> frozenset[int]:
        out: set[int] = set()
        for q in states:
            for guard, d in self.automaton.transitions[q]:
                if d in self.live and guard.matches(letter):
                    out.add(d)
        return frozenset(out)


def build_monitor(f: Formula | BuchiAutomaton, alphabet=None, **kwargs) -> MonitorNfa:
    aut = f if isinstance(f, BuchiAutomaton) else ltl_to_buchi(f, alphabet, **kwargs)
    return MonitorNfa(aut, accepting_reach_set(aut))


def run_monitor(m: MonitorNfa, trace: Iterable[int]) -> Verdict:
    """First step at which no live run survives, else undetermined."""
    states = m.start()
    for i, letter in enumerate(trace):
        if i == 0 and not states:
            return Verdict(0)
        states = m.step(states, letter)
        if not states:
            return Verdict(i)
    return UNDETERMINED


def accepts_lasso(aut: BuchiAutomaton, word: LassoWord) -> bool:
    """Whether ``aut`` accepts ``stem . loop^omega``.

    Searches the product of the automaton with the word's positions for a
    reachable accepting node that lies on a cycle.
    """
    n = len(word)
    succ = list(range(1, n)) + [len(word.stem)]
    letters = [word.letter(i) for i in range(n)]
    adj: dict[tuple[int, int], list[tuple[int, int]]] = {}
    start = (aut.initial, 0)
    stack = [start]
    adj[start] = []
    while stack:
        node = stack.pop()
        q, i = node
        out = adj[node]
        for guard, d in aut.transitions[q]:
            if guard.matches(letters[i]):
                nxt = (d, succ[i])
                out.append(nxt)
                if nxt not in adj:
                    adj[nxt] = []
                    stack.append(nxt)
    for node in adj:
        if node[0] in aut.accepting and node[1] >= len(word.stem) and _on_cycle(adj, node):
            return True
    return False


def _on_cycle(adj: dict, node) -> bool:
    seen = set()
    stack = list(adj[node])
    while stack:
        v = stack.pop()
        if v == node:
            return True
        if v not in seen:
            seen.add(v)
            stack.extend(adj[v])
    return False
