"""Topological Markov shifts presented as directed graphs.

A shift is represented by its transition graph: finitely many states with an
explicit edge list, or a countable graph given by pure successor/predecessor
functions explored lazily.  All global quantities downstream (word counts,
entropy, harmonic functions) are computed on finite balls of these graphs,
which is exact for any fixed word length.

State labels are plain strings; generated graphs use canonical labels such as
``l(3,2)`` so that reports are stable across runs.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Sequence

StateId = str


class StructuralViolation(Exception):
    """A structural hypothesis (degree bound, Markov property, ...) failed."""


# ---------------------------------------------------------------------------
# graph
# ---------------------------------------------------------------------------

class ShiftGraph:
    """Immutable directed graph of a topological Markov shift.

    ``kind`` is ``"finite"`` or ``"generated"``.  Generated graphs memoize the
    neighborhoods they explore; memoization is guarded by a lock so concurrent
    callers see bitwise-identical results.
    """

    def __init__(
        self,
        kind: str,
        base: StateId,
        successors_fn: Callable[[StateId], Sequence[StateId]],
        predecessors_fn: Callable[[StateId], Sequence[StateId]],
        states: Optional[Sequence[StateId]] = None,
        degree_bound: Optional[int] = None,
        contains_fn: Optional[Callable[[StateId], bool]] = None,
        name: str = "",
    ):
        self.kind = kind
        self.base = base
        self.name = name
        self.degree_bound = degree_bound
        self._succ_fn = successors_fn
        self._pred_fn = predecessors_fn
        self._contains_fn = contains_fn
        self._states = tuple(states) if states is not None else None
        self._succ_memo: dict[StateId, tuple[StateId, ...]] = {}
        self._pred_memo: dict[StateId, tuple[StateId, ...]] = {}
        self._lock = threading.Lock()

    # -- basic queries ------------------------------------------------------

    @property
    def is_finite(self) -> bool:
        return self._states is not None

    @property
    def states(self) -> tuple[StateId, ...]:
        if self._states is None:
            raise ValueError("generated graph has no finite state list")
        return self._states

    def contains(self, s: StateId) -> bool:
        if self._states is not None:
            return s in self._state_set
        if self._contains_fn is not None:
            return self._contains_fn(s)
        return True

    def check_state(self, s: StateId) -> StateId:
        if not self.contains(s):
            raise KeyError(f"unknown state {s!r}")
        return s

    def successors(self, s: StateId) -> tuple[StateId, ...]:
        self.check_state(s)
        memo = self._succ_memo
        if s not in memo:
            with self._lock:
                if s not in memo:
                    memo[s] = tuple(self._succ_fn(s))
        return memo[s]

    def predecessors(self, s: StateId) -> tuple[StateId, ...]:
        self.check_state(s)
        memo = self._pred_memo
        if s not in memo:
            with self._lock:
                if s not in memo:
                    memo[s] = tuple(self._pred_fn(s))
        return memo[s]

    def has_edge(self, a: StateId, b: StateId) -> bool:
        return b in self.successors(a)

    @property
    def _state_set(self) -> frozenset[StateId]:
        if not hasattr(self, "_state_set_cache"):
            self._state_set_cache = frozenset(self._states or ())
        return self._state_set_cache

    def __repr__(self) -> str:
        if self.is_finite:
            return f"ShiftGraph(finite, {len(self.states)} states)"
        return f"ShiftGraph(generated {self.name!r}, base={self.base!r})"


# ---------------------------------------------------------------------------
# words and cylinders
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Word:
    """A finite admissible path; ``edge_count`` is len(symbols) - 1."""

    symbols: tuple[StateId, ...]

    def __post_init__(self):
        if not self.symbols:
            raise ValueError("word must be nonempty")

    @property
    def edge_count(self) -> int:
        return len(self.symbols) - 1


@dataclass(frozen=True)
class Cylinder:
    """Symbol at time 0 plus the future symbols at times 1..N (N may be 0)."""

    root: StateId
    future: tuple[StateId, ...] = ()

    @property
    def depth(self) -> int:
        return len(self.future)

    @property
    def last(self) -> StateId:
        return self.future[-1] if self.future else self.root


def make_word(graph: ShiftGraph, symbols: Sequence[StateId]) -> Word:
    if not is_admissible(graph, symbols):
        raise ValueError(f"inadmissible word {list(symbols)!r}")
    return Word(tuple(symbols))


def make_cylinder(graph: ShiftGraph, root: StateId, future: Sequence[StateId]) -> Cylinder:
    if not is_admissible(graph, [root, *future]):
        raise ValueError(f"inadmissible cylinder ({root!r}; {list(future)!r})")
    return Cylinder(root, tuple(future))


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def is_admissible(graph: ShiftGraph, symbols: Sequence[StateId]) -> bool:
    """True iff every consecutive pair of symbols is an edge."""
    if not symbols:
        raise ValueError("empty symbol list")
    for s in symbols:
        graph.check_state(s)
    return all(graph.has_edge(a, b) for a, b in zip(symbols, symbols[1:]))


def ball(graph: ShiftGraph, center: StateId, radius: int) -> frozenset[StateId]:
    """States reachable from or reaching ``center`` within ``radius`` edges.

    Monotone in ``radius`` and deterministic; exact on generated graphs.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    graph.check_state(center)
    out = {center}
    frontier = [center]
    for _ in range(radius):
        nxt = []
        for s in frontier:
            for t in graph.successors(s):
                if t not in out:
                    out.add(t)
                    nxt.append(t)
        frontier = nxt
    inn = {center}
    frontier = [center]
    for _ in range(radius):
        nxt = []
        for s in frontier:
            for t in graph.predecessors(s):
                if t not in inn:
                    inn.add(t)
                    nxt.append(t)
        frontier = nxt
    return frozenset(out | inn)


@dataclass
class GraphReport:
    max_out_degree: int
    max_in_degree: int
    transitive_on_ball: bool
    explored: int
    witness: Optional[StateId] = None
    ball_states: frozenset[StateId] = field(repr=False, default=frozenset())


def validate_graph(graph: ShiftGraph, radius: int = 0, path_cap: int = 256) -> GraphReport:
    """Degree and transitivity check, exact on the explored region.

    Finite graphs are checked in full (``radius`` ignored).  On generated
    graphs the degree check runs over ``ball(base, radius)``, and transitivity
    means every ball state reaches and is reached from the base through the
    lazily explored graph within ``path_cap`` edges (connecting paths may
    legitimately leave the ball).  A declared degree bound that is violated
    raises :class:`StructuralViolation` naming the offending state.
    """
    if graph.is_finite:
        region = frozenset(graph.states)
    else:
        region = ball(graph, graph.base, radius)
    max_out = max_in = 0
    for s in sorted(region):
        od, idg = len(graph.successors(s)), len(graph.predecessors(s))
        if graph.degree_bound is not None and max(od, idg) > graph.degree_bound:
            raise StructuralViolation(
                f"state {s!r} has degree {max(od, idg)} > bound {graph.degree_bound}"
            )
        max_out = max(max_out, od)
        max_in = max(max_in, idg)

    if graph.is_finite:
        transitive, witness = _transitive_finite(graph)
    else:
        fwd = _reachable(graph, graph.base, path_cap, forward=True)
        bwd = _reachable(graph, graph.base, path_cap, forward=False)
        witness = next((s for s in sorted(region) if s not in fwd or s not in bwd), None)
        transitive = witness is None
    return GraphReport(max_out, max_in, transitive, len(region), witness, region)


def _reachable(graph: ShiftGraph, start: StateId, cap: int, forward: bool) -> set[StateId]:
    step = graph.successors if forward else graph.predecessors
    seen = {start}
    frontier = [start]
    for _ in range(cap):
        nxt = []
        for s in frontier:
            for t in step(s):
                if t not in seen:
                    seen.add(t)
                    nxt.append(t)
        if not nxt:
            break
        frontier = nxt
    return seen


def _transitive_finite(graph: ShiftGraph) -> tuple[bool, Optional[StateId]]:
    states = sorted(graph.states)
    for a in states:
        seen = _reachable(graph, a, len(states), forward=True)
        if len(seen) != len(states):
            missing = next(s for s in states if s not in seen)
            return False, missing
    return True, None


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

def build_finite_graph(states: Sequence[StateId], edges: Iterable[tuple[StateId, StateId]],
                       base: Optional[StateId] = None, name: str = "") -> ShiftGraph:
    states = [str(s) for s in states]
    if len(set(states)) != len(states):
        raise ValueError("duplicate state labels")
    state_set = set(states)
    succ: dict[StateId, list[StateId]] = {s: [] for s in states}
    pred: dict[StateId, list[StateId]] = {s: [] for s in states}
    for a, b in edges:
        a, b = str(a), str(b)
        if a not in state_set or b not in state_set:
            raise ValueError(f"edge ({a!r}, {b!r}) references unknown state")
        if b not in succ[a]:
            succ[a].append(b)
            pred[b].append(a)
    if not states:
        raise ValueError("finite graph needs at least one state")
    bound = max(max(len(v) for v in succ.values()), max(len(v) for v in pred.values()))
    return ShiftGraph(
        "finite",
        base=str(base) if base is not None else states[0],
        successors_fn=lambda s: succ[s],
        predecessors_fn=lambda s: pred[s],
        states=states,
        degree_bound=bound,
        name=name,
    )


def _renewal_graph(max_len: int = 64) -> ShiftGraph:
    """Loops of every length 1..max_len at a base state ``b``.

    The length-n loop (n >= 2) passes through fresh states l(n,1)..l(n,n-1).
    ``max_len`` truncates the loop family; every count of words with at most
    ``max_len`` edges agrees exactly with the untruncated graph.
    """
    if max_len < 2:
        raise ValueError("renewal needs max_len >= 2")

    def parse(s: StateId) -> Optional[tuple[int, int]]:
        if s.startswith("l(") and s.endswith(")"):
            n, k = s[2:-1].split(",")
            return int(n), int(k)
        return None

    def contains(s: StateId) -> bool:
        if s == "b":
            return True
        nk = parse(s)
        return nk is not None and 2 <= nk[0] <= max_len and 1 <= nk[1] <= nk[0] - 1

    def succ(s: StateId) -> list[StateId]:
        if s == "b":
            return ["b"] + [f"l({n},1)" for n in range(2, max_len + 1)]
        n, k = parse(s)
        return [f"l({n},{k + 1})"] if k < n - 1 else ["b"]

    def pred(s: StateId) -> list[StateId]:
        if s == "b":
            return ["b"] + [f"l({n},{n - 1})" for n in range(2, max_len + 1)]
        n, k = parse(s)
        return [f"l({n},{k - 1})"] if k > 1 else ["b"]

    return ShiftGraph("generated", "b", succ, pred, degree_bound=max_len,
                      contains_fn=contains, name="renewal")


def _ladder_graph() -> ShiftGraph:
    """Two-colored half-line: up moves choose a color, down moves are forced.

    States (n,c) with n >= 0 and c in {1,2}; edges (n,c)->(n+1,1),
    (n,c)->(n+1,2), and (n,c)->(n-1,1) for n >= 1.
    """

    def parse(s: StateId) -> Optional[tuple[int, int]]:
        if s.startswith("(") and s.endswith(")"):
            n, c = s[1:-1].split(",")
            return int(n), int(c)
        return None

    def contains(s: StateId) -> bool:
        nc = parse(s)
        return nc is not None and nc[0] >= 0 and nc[1] in (1, 2)

    def succ(s: StateId) -> list[StateId]:
        n, _ = parse(s)
        out = [f"({n + 1},1)", f"({n + 1},2)"]
        if n >= 1:
            out.append(f"({n - 1},1)")
        return out

    def pred(s: StateId) -> list[StateId]:
        n, c = parse(s)
        out = []
        if n >= 1:
            out += [f"({n - 1},1)", f"({n - 1},2)"]
        if c == 1:
            out += [f"({n + 1},1)", f"({n + 1},2)"]
        return out

    return ShiftGraph("generated", "(0,1)", succ, pred, degree_bound=4,
                      contains_fn=contains, name="ladder")


def _full_graph(symbols: int = 2) -> ShiftGraph:
    if symbols < 1:
        raise ValueError("full shift needs >= 1 symbol")
    states = [str(i) for i in range(symbols)]
    return build_finite_graph(states, [(a, b) for a in states for b in states],
                              name=f"full-{symbols}")


GENERATORS: Mapping[str, Callable[..., ShiftGraph]] = {
    "renewal": _renewal_graph,
    "ladder": _ladder_graph,
    "full": _full_graph,
}


def build_graph(spec: Mapping) -> ShiftGraph:
    """Build a graph from a parsed description (see the graph file format)."""
    kind = spec.get("kind")
    if kind == "finite":
        return build_finite_graph(
            spec["states"],
            [tuple(e) for e in spec["edges"]],
            base=spec.get("base"),
        )
    if kind == "generator":
        name = spec.get("name")
        if name not in GENERATORS:
            raise ValueError(f"unknown generator name {name!r}")
        params = dict(spec.get("params", {}))
        return GENERATORS[name](**params)
    raise ValueError(f"unknown graph kind {kind!r}")


def graph_from_json(text: str) -> ShiftGraph:
    return build_graph(json.loads(text))


def load_graph(path: str) -> ShiftGraph:
    with open(path, "r", encoding="utf-8") as fh:
        return graph_from_json(fh.read())
