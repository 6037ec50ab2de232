"""Influence graphs: agents, labelled directed edges and their weights.

Agents are stored 0-based and printed 1-based. Every edge carries a short
label (``"a"``, ``"b"``, ...) which is how words and traces refer to it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    label: str

    def __str__(self) -> str:
        return f"{self.label}:({self.src + 1},{self.dst + 1})"


@dataclass(frozen=True)
class GPath:
    """A simple directed path, given as its edge sequence."""

    edges: tuple[Edge, ...]

    def __post_init__(self):
        if not self.edges:
            raise ValueError("a g-path has at least one edge")
        for e1, e2 in zip(self.edges, self.edges[1:]):
            if e1.dst != e2.src:
                raise ValueError(f"edges {e1} and {e2} do not chain")
        agents = self.agents
        if len(set(agents)) != len(agents):
            raise ValueError("a g-path visits pairwise distinct agents")

    @property
    def agents(self) -> tuple[int, ...]:
        return (self.edges[0].src,) + tuple(e.dst for e in self.edges)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(e.label for e in self.edges)

    @property
    def start(self) -> int:
        return self.edges[0].src

    @property
    def end(self) -> int:
        return self.edges[-1].dst

    def __len__(self) -> int:
        return len(self.edges)

    def __str__(self) -> str:
        return "".join(self.labels)


@dataclass(frozen=True)
class InfluenceGraph:
    """Directed graph ``G = (A, E, I)`` with static weights.

    Construction only checks that agent indices are in range; semantic
    problems (weights outside (0,1], self-loops, duplicates) are reported by
    :func:`validate` so that malformed configs can be diagnosed in full.
    """

    n: int
    edges: tuple[Edge, ...]
    weights: tuple[float, ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(self.edges))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if len(self.edges) != len(self.weights):
            raise ValueError("one weight per edge is required")
        for e in self.edges:
            if not (0 <= e.src < self.n and 0 <= e.dst < self.n):
                raise ValueError(f"edge {e.label} references an agent outside 1..{self.n}")
        index = {}
        for k, e in enumerate(self.edges):
            index.setdefault(e.label, k)
        object.__setattr__(self, "_index", index)

    @classmethod
    def build(
        cls,
        n: int,
        pairs: Sequence[tuple[int, int]],
        weights: float | Sequence[float] = 0.5,
        labels: Sequence[str] | None = None,
        one_based: bool = True,
    ) -> "InfluenceGraph":
        """Convenience constructor from ``(i, j)`` pairs (1-based by default)."""
        off = 1 if one_based else 0
        if labels is None:
            labels = [f"e{k}" for k in range(len(pairs))]
        if isinstance(weights, (int, float)):
            weights = [float(weights)] * len(pairs)
        edges = tuple(Edge(i - off, j - off, lab) for (i, j), lab in zip(pairs, labels))
        return cls(n, edges, tuple(weights))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(e.label for e in self.edges)

    def index(self, label: str) -> int:
        try:
            return self._index[label]
        except KeyError:
            raise KeyError(f"no edge labelled {label!r}") from None

    def edge(self, label: str) -> Edge:
        return self.edges[self.index(label)]

    def weight(self, edge: Edge | str) -> float:
        label = edge if isinstance(edge, str) else edge.label
        return self.weights[self.index(label)]

    def has_edge(self, edge: Edge) -> bool:
        k = self._index.get(edge.label)
        return k is not None and self.edges[k] == edge

    def out_edges(self, i: int) -> list[Edge]:
        return [e for e in self.edges if e.src == i]

    def with_weights(self, weights: float | Sequence[float]) -> "InfluenceGraph":
        if isinstance(weights, (int, float)):
            weights = [float(weights)] * len(self.edges)
        return InfluenceGraph(self.n, self.edges, tuple(weights))

    def to_spec(self) -> dict:
        return {
            "agents": self.n,
            "edges": [
                {"from": e.src + 1, "to": e.dst + 1, "label": e.label, "weight": w}
                for e, w in zip(self.edges, self.weights)
            ],
        }


def validate(graph: InfluenceGraph) -> list[str]:
    """Return one message per violated well-formedness rule (empty if fine)."""
    problems = []
    if graph.n < 2:
        problems.append(f"need at least 2 agents, got {graph.n}")
    seen_pairs: set[tuple[int, int]] = set()
    seen_labels: set[str] = set()
    for e, w in zip(graph.edges, graph.weights):
        if e.src == e.dst:
            problems.append(f"edge {e}: self-loop")
        if not (w > 0 and w <= 1):
            problems.append(f"edge {e}: weight not in (0,1] ({w!r})")
        if (e.src, e.dst) in seen_pairs:
            problems.append(f"edge {e}: duplicate edge")
        if e.label in seen_labels:
            problems.append(f"edge {e}: duplicate label")
        seen_pairs.add((e.src, e.dst))
        seen_labels.add(e.label)
    return problems


def strongly_connected_components(graph: InfluenceGraph) -> list[list[int]]:
    """Tarjan's algorithm, iterative."""
    succ = [[] for _ in range(graph.n)]
    for e in graph.edges:
        succ[e.src].append(e.dst)

    index = [-1] * graph.n
    low = [0] * graph.n
    on_stack = [False] * graph.n
    stack: list[int] = []
    comps: list[list[int]] = []
    counter = 0

    for root in range(graph.n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            v, pos = work.pop()
            if pos == 0:
                index[v] = low[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            recurse = False
            for k in range(pos, len(succ[v])):
                u = succ[v][k]
                if index[u] == -1:
                    work.append((v, k + 1))
                    work.append((u, 0))
                    recurse = True
                    break
                if on_stack[u]:
                    low[v] = min(low[v], index[u])
            if recurse:
                continue
            if low[v] == index[v]:
                comp = []
                while True:
                    u = stack.pop()
                    on_stack[u] = False
                    comp.append(u)
                    if u == v:
                        break
                comps.append(sorted(comp))
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
    return comps


def is_strongly_connected(graph: InfluenceGraph) -> bool:
    return len(strongly_connected_components(graph)) == 1


def is_puppet_free(graph: InfluenceGraph) -> bool:
    return all(w < 1 for w in graph.weights)


def influence_extrema(graph: InfluenceGraph) -> tuple[float, float]:
    if not graph.weights:
        raise ValueError("graph has no edges")
    return min(graph.weights), max(graph.weights)


def simple_paths_from(graph: InfluenceGraph, i: int) -> set[GPath]:
    """All simple directed paths (length >= 1) starting at agent ``i``."""
    out: dict[int, list[Edge]] = {a: [] for a in range(graph.n)}
    for e in graph.edges:
        if e.src != e.dst:
            out[e.src].append(e)

    paths: set[GPath] = set()

    def extend(prefix: tuple[Edge, ...], visited: frozenset):
        last = prefix[-1].dst if prefix else i
        for e in out[last]:
            if e.dst in visited:
                continue
            p = prefix + (e,)
            paths.add(GPath(p))
            extend(p, visited | {e.dst})

    extend((), frozenset({i}))
    return paths


def random_graph(
    n: int,
    edge_probability: float,
    weight: float | tuple[float, float],
    seed: int | Sequence[int],
) -> InfluenceGraph:
    """Erdos-Renyi style digraph; each ordered pair kept with ``edge_probability``.

    ``weight`` is either a constant or a ``(low, high)`` range, in which case
    each kept edge gets an independent uniform weight from it.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if not (0 < edge_probability <= 1):
        raise ValueError("edge_probability must be in (0, 1]")
    if isinstance(weight, tuple):
        lo, hi = weight
        if not (0 < lo <= hi <= 1):
            raise ValueError("weight range must satisfy 0 < low <= high <= 1")
    elif not (0 < weight <= 1):
        raise ValueError("weight must be in (0, 1]")

    rng = np.random.default_rng(seed)
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    keep = rng.random(len(pairs)) < edge_probability
    kept = [p for p, k in zip(pairs, keep) if k]
    if isinstance(weight, tuple):
        ws = [float(x) for x in rng.uniform(weight[0], weight[1], size=len(kept))]
    else:
        ws = [float(weight)] * len(kept)
    return InfluenceGraph.build(n, kept, ws, one_based=False)


def random_strongly_connected(
    n: int,
    edge_probability: float,
    weight: float | tuple[float, float],
    seed: int,
    max_tries: int = 10_000,
) -> InfluenceGraph:
    """First strongly connected draw of :func:`random_graph` along a seeded sequence of attempts."""
    for attempt in range(max_tries):
        g = random_graph(n, edge_probability, weight, seed=(seed, attempt))
        if is_strongly_connected(g):
            return g
    raise RuntimeError(f"no strongly connected graph in {max_tries} draws")
