"""The small influence graphs and initial states used throughout the examples."""

from __future__ import annotations

from .graph import InfluenceGraph

FIG1A_INITIAL = (0.0, 0.5, 1.0)
FIG2A_INITIAL = (0.4, 0.5, 0.45, 0.55, 0.5, 0.6)
FIG4A_INITIAL = (0.0, 0.2, 0.8, 1.0)
FIG5A_INITIAL = (0.0, 1.0)
FIG5B_INITIAL = (0.0, 0.5, 1.0)
FIG1C_INITIAL = tuple(k / 10 for k in range(11))


def fig1a(weight: float = 0.5) -> InfluenceGraph:
    """Three agents on a line: a:(1,2), b:(2,1), c:(3,2), d:(2,3)."""
    return InfluenceGraph.build(3, [(1, 2), (2, 1), (3, 2), (2, 3)], weight, labels="abcd")


def fig2a() -> InfluenceGraph:
    """Groups {1,2} and {5,6} feed group {3,4} but hear nobody outside."""
    pairs = [
        (1, 2),  # a0
        (2, 1),  # a1
        (3, 4),  # a2
        (4, 3),  # a3
        (5, 6),  # a4
        (6, 5),  # a5
        (5, 3),  # a6
        (6, 4),  # a7
        (1, 3),  # a8
        (2, 4),  # a9
    ]
    return InfluenceGraph.build(6, pairs, 0.5, labels=[f"a{k}" for k in range(10)])


def fig4a() -> InfluenceGraph:
    """Four agents on a line: a:(1,2) b:(2,1) d:(2,3) c:(3,2) f:(3,4) e:(4,3)."""
    pairs = [(1, 2), (2, 1), (3, 2), (2, 3), (4, 3), (3, 4)]
    return InfluenceGraph.build(4, pairs, 0.5, labels="abcdef")


def fig5a() -> InfluenceGraph:
    # a pulls agent 2 and b pulls agent 1; with this orientation the caption's
    # influence formulas steer agent 1 to L and agent 2 to U.
    return InfluenceGraph.build(2, [(1, 2), (2, 1)], 0.5, labels="ab")


def fig5b() -> InfluenceGraph:
    return InfluenceGraph.build(3, [(1, 2), (2, 1), (3, 2), (2, 3)], 0.5, labels="abcd")
