"""Opinion states and the single-action update rule.

A transition labelled ``(i, j)`` moves agent ``j`` towards agent ``i``::

    B'_j = B_j + (B_i - B_j) * w

where ``w`` is the static weight of the edge or, for dynamic influence, a
function of the edge and the source state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .graph import Edge, InfluenceGraph

OpinionState = tuple[float, ...]


def make_state(values: Sequence[float]) -> OpinionState:
    state = tuple(float(v) for v in values)
    for k, v in enumerate(state):
        if not (0.0 <= v <= 1.0):
            raise ValueError(f"opinion of agent {k + 1} is {v!r}, outside [0,1]")
    return state


def clamp01(r: float) -> float:
    if not math.isfinite(r):
        raise ValueError(f"cannot clamp non-finite value {r!r}")
    return min(max(r, 0.0), 1.0)


def pull(bj: float, bi: float, w: float) -> float:
    """New opinion of the listening agent ``j`` after hearing ``i`` at weight ``w``.

    The result is confined to ``[min(bi, bj), max(bi, bj)]`` so that rounding
    can never push an opinion past the extremes of the source state.
    """
    if w == 1.0:
        return bi
    v = bj + (bi - bj) * w
    if bi < bj:
        return bi if v < bi else (bj if v > bj else v)
    return bj if v < bj else (bi if v > bi else v)


# -- influence functions -----------------------------------------------------


class InfluenceFunction:
    """Evaluates the weight of an edge in a given (source) state."""

    bounds: tuple[float, float] | None = None
    is_static = False

    def __call__(self, graph: InfluenceGraph, edge: Edge, state: Sequence[float]) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class Static(InfluenceFunction):
    is_static = True

    def __call__(self, graph, edge, state):
        return graph.weight(edge)


@dataclass(frozen=True)
class ConfirmationBias(InfluenceFunction):
    """Weight ``1 - |B_j - B_i|``: closer opinions persuade more."""

    def __call__(self, graph, edge, state):
        return confirmation_bias(graph, edge, state)


@dataclass(frozen=True)
class BoundedScaled(InfluenceFunction):
    inner: InfluenceFunction
    low: float
    high: float

    def __post_init__(self):
        _check_bounds(self.low, self.high)

    @property
    def bounds(self):
        return (self.low, self.high)

    def __call__(self, graph, edge, state):
        return bounded_scale(self.inner(graph, edge, state), self.low, self.high)


@dataclass(frozen=True)
class Fig5a(InfluenceFunction):
    L: float
    U: float

    def __call__(self, graph, edge, state):
        return fig5a_influence(edge, state, self.L, self.U)


@dataclass(frozen=True)
class Fig5b(InfluenceFunction):
    L: float
    U: float

    def __call__(self, graph, edge, state):
        return fig5b_influence(edge, state, self.L, self.U)


@dataclass(frozen=True)
class Table(InfluenceFunction):
    """Piecewise-constant influence looked up from ``|B_j - B_i|``.

    ``table[label]`` holds ``bins`` values; the distance between the two
    opinions selects the bucket. Labels missing from the table fall back to the
    static weight. This is an experimentation hook, not a model from the
    literature.
    """

    table: Mapping[str, Sequence[float]] = field(default_factory=dict)
    bins: int = 10

    def __post_init__(self):
        for label, row in self.table.items():
            if len(row) != self.bins:
                raise ValueError(f"table row for {label!r} must have {self.bins} entries")
            if any(not (0.0 <= v <= 1.0) for v in row):
                raise ValueError(f"table row for {label!r} has values outside [0,1]")

    def __call__(self, graph, edge, state):
        row = self.table.get(edge.label)
        if row is None:
            return graph.weight(edge)
        d = abs(state[edge.dst] - state[edge.src])
        return row[min(int(d * self.bins), self.bins - 1)]


def _check_bounds(low: float, high: float) -> None:
    if not (0.0 < low < high < 1.0):
        raise ValueError(f"need 0 < I_L < I_U < 1, got I_L={low!r}, I_U={high!r}")


def confirmation_bias(graph: InfluenceGraph, edge: Edge, state: Sequence[float]) -> float:
    return 1.0 - abs(state[edge.dst] - state[edge.src])


def bounded_scale(raw: float, low: float, high: float) -> float:
    _check_bounds(low, high)
    if not (0.0 <= raw <= 1.0):
        raise ValueError(f"raw influence {raw!r} outside [0,1]")
    v = low + (high - low) * raw
    return min(max(v, low), high)


def fig5a_influence(edge: Edge, state: Sequence[float], L: float, U: float) -> float:
    """Two-agent counter-example: influences steer the agents towards L and U."""
    b1, b2 = state[0], state[1]
    if edge.label not in ("a", "b"):
        raise ValueError(f"fig5a influence is defined for edges a and b, not {edge.label!r}")
    if b1 == b2:
        return 0.5
    if edge.label == "a":
        return clamp01((U - b2) / (2 * (b1 - b2)))
    return clamp01((L - b1) / (2 * (b2 - b1)))


def fig5b_influence(edge: Edge, state: Sequence[float], L: float, U: float) -> float:
    b1, b2, b3 = state[0], state[1], state[2]
    if edge.label in ("b", "d"):
        return 0.5
    if edge.label == "a":
        if b1 == b2:
            return 0.5
        return clamp01((0.5 * (b1 + L) - b2) / (b1 - b2))
    if edge.label == "c":
        if b2 == b3:
            return 0.5
        return clamp01((0.5 * (b3 + U) - b2) / (b3 - b2))
    raise ValueError(f"fig5b influence is defined for edges a-d, not {edge.label!r}")


# -- the transition -----------------------------------------------------------


def step(
    state: Sequence[float],
    edge: Edge,
    influence: InfluenceFunction,
    graph: InfluenceGraph,
) -> OpinionState:
    """Perform one action and return the successor state.

    The influence is evaluated on the state the transition fires from.
    """
    if not graph.has_edge(edge):
        raise ValueError(f"edge {edge} is not in the graph")
    w = influence(graph, edge, state)
    new = list(state)
    new[edge.dst] = pull(state[edge.dst], state[edge.src], w)
    return tuple(new)
