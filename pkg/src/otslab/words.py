"""Schedulers: producers of the (infinite) action word driving a run.

Every scheduler is bound to a graph and hands out edge indices one at a time
through :meth:`Scheduler.next_index`. State-feedback schedulers (the two
counter-example processes) read the current opinion state to decide; the
others ignore it and can also be drained in bulk with :meth:`Scheduler.take`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .fairness import FairnessTag, WordPrefix, minimal_uniform_k
from .graph import Edge, InfluenceGraph

__all__ = [
    "FairnessTag",
    "GuardExhausted",
    "Scheduler",
    "Periodic",
    "RandomWord",
    "Cons12",
    "Cons23",
    "GrowingBlocks",
    "Extended",
    "GameScheduler",
    "periodic",
    "random_word",
    "cons12",
    "cons23",
    "growing_blocks",
    "extend_to_bounded_fair",
    "CFlood",
    "SingleEdge",
    "MultiWindow",
    "banach_mazur_game",
]


class GuardExhausted(RuntimeError):
    """A counter-example loop ran past its guard without meeting its exit test."""


class Scheduler:
    kind = "scheduler"
    feedback = False

    def __init__(self, graph: InfluenceGraph):
        self.graph = graph
        self.emitted = 0

    @property
    def tag(self) -> FairnessTag:
        return FairnessTag.unknown()

    def next_index(self, state: Sequence[float] | None) -> int:
        raise NotImplementedError

    def next_edge(self, state: Sequence[float] | None = None) -> Edge:
        return self.graph.edges[self.next_index(state)]

    def take(self, count: int) -> list[str]:
        """Labels of the next ``count`` actions (state-independent schedulers only)."""
        if self.feedback:
            raise TypeError(f"{self.kind} reads the opinion state; run it with analysis.execute")
        labels = self.graph.labels
        return [labels[self.next_index(None)] for _ in range(count)]

    def _indices(self, labels: Sequence[str]) -> list[int]:
        return [self.graph.index(lab) for lab in labels]


class Periodic(Scheduler):
    kind = "periodic"

    def __init__(self, graph: InfluenceGraph, pattern: Sequence[str]):
        super().__init__(graph)
        if not pattern:
            raise ValueError("periodic pattern must be nonempty")
        self.pattern = tuple(pattern)
        self._idx = self._indices(self.pattern)
        self._cursor = 0

    def next_index(self, state=None):
        k = self._idx[self._cursor]
        self._cursor = (self._cursor + 1) % len(self._idx)
        self.emitted += 1
        return k

    @property
    def missing(self) -> list[str]:
        present = set(self.pattern)
        return [lab for lab in self.graph.labels if lab not in present]

    @property
    def tag(self):
        if self.missing:
            return FairnessTag.unknown("not strongly fair; never emits " + ", ".join(self.missing))
        # one rotation plus a full copy covers every window of the periodic word
        doubled = WordPrefix(self.pattern * 2, self.graph.labels)
        return FairnessTag.k_fair(minimal_uniform_k(doubled))


class RandomWord(Scheduler):
    """I.i.d. draws from a (normalised) distribution over the edges."""

    kind = "random"
    _CHUNK = 4096

    def __init__(self, graph: InfluenceGraph, probabilities: Mapping[str, float] | None = None, seed: int = 0):
        super().__init__(graph)
        if probabilities is None:
            probabilities = {lab: 1.0 for lab in graph.labels}
        for lab, p in probabilities.items():
            if not (p > 0):
                raise ValueError(f"probability of {lab!r} must be positive, got {p!r}")
        self._support = np.array(self._indices(list(probabilities)), dtype=np.int64)
        weights = np.array(list(probabilities.values()), dtype=float)
        self.probabilities = weights / weights.sum()
        self.seed = seed
        self._rng = np.random.default_rng(seed)
        self._buffer = np.empty(0, dtype=np.int64)
        self._pos = 0

    def _refill(self, at_least: int) -> None:
        size = max(self._CHUNK, at_least)
        draws = self._rng.choice(len(self._support), size=size, p=self.probabilities)
        self._buffer = np.concatenate([self._buffer[self._pos:], self._support[draws]])
        self._pos = 0

    def next_index(self, state=None):
        if self._pos >= len(self._buffer):
            self._refill(1)
        k = int(self._buffer[self._pos])
        self._pos += 1
        self.emitted += 1
        return k

    def take_indices(self, count: int) -> np.ndarray:
        if len(self._buffer) - self._pos < count:
            self._refill(count)
        out = self._buffer[self._pos:self._pos + count].copy()
        self._pos += count
        self.emitted += count
        return out

    def take(self, count):
        labels = self.graph.labels
        return [labels[k] for k in self.take_indices(count)]

    @property
    def tag(self):
        if len(self._support) < len(self.graph.edges):
            return FairnessTag.unknown("some edges have probability zero")
        return FairnessTag.m_bounded_fair(None, almost_surely=True)


def _require_edges(graph: InfluenceGraph, expected: Mapping[str, tuple[int, int]], what: str) -> None:
    for label, (i, j) in expected.items():
        try:
            e = graph.edge(label)
        except KeyError:
            raise ValueError(f"{what} needs edge {label}:({i},{j})") from None
        if (e.src + 1, e.dst + 1) != (i, j):
            raise ValueError(f"{what} needs edge {label}:({i},{j}), graph has {e}")


FIG1A_EDGES = {"a": (1, 2), "b": (2, 1), "c": (3, 2), "d": (2, 3)}
FIG4A_EDGES = {"a": (1, 2), "b": (2, 1), "c": (3, 2), "d": (2, 3), "e": (4, 3), "f": (3, 4)}


class Cons12(Scheduler):
    """State-feedback process producing a strongly fair word of shape (a+ b c+ d)^w.

    Each block: a's until agent 2 drops below L, one b, c's until agent 2
    rises above U, one d. Agent 1 then stays below L and agent 3 above U.
    """

    kind = "cons12"
    feedback = True

    def __init__(self, graph: InfluenceGraph, L: float, U: float, guard: int = 10**6):
        super().__init__(graph)
        _require_edges(graph, FIG1A_EDGES, "cons12")
        if not L < U:
            raise ValueError("need L < U")
        self.L, self.U, self.guard = L, U, guard
        self._a, self._b, self._c, self._d = self._indices("abcd")
        self._phase = 0
        self._count = 0
        self._checked = False
        self.blocks: list[tuple[int, int]] = []
        self._n_a = 0

    def _check_start(self, state):
        b1, b2, b3 = state[0], state[1], state[2]
        if not (b1 < self.L < b2 < self.U < b3):
            raise ValueError(
                f"cons12 needs B1 < L < B2 < U < B3, got B={tuple(state)}, L={self.L}, U={self.U}"
            )
        self._checked = True

    def next_index(self, state):
        if not self._checked:
            self._check_start(state)
        self.emitted += 1
        phase = self._phase
        if phase == 0:
            if self._count == 0 or state[1] >= self.L:
                self._count += 1
                if self._count > self.guard:
                    raise GuardExhausted("counter-example loop did not terminate within guard")
                return self._a
            self._n_a = self._count
            self._phase, self._count = 2, 0
            return self._b
        if phase == 2:
            if self._count == 0 or state[1] <= self.U:
                self._count += 1
                if self._count > self.guard:
                    raise GuardExhausted("counter-example loop did not terminate within guard")
                return self._c
            self.blocks.append((self._n_a, self._count))
            self._phase, self._count = 0, 0
            return self._d
        raise AssertionError("unreachable phase")

    @property
    def tag(self):
        return FairnessTag.strongly_fair()


class Cons23(Scheduler):
    """State-feedback process producing (bfdace a* e*)^w on the four-agent line.

    The fixed block ``bfdace`` is a complete (1,6) multi-window recurring
    forever, so the word is 1-bounded fair, yet agents 1 and 4 stay apart.
    """

    kind = "cons23"
    feedback = True
    BLOCK = "bfdace"

    def __init__(self, graph: InfluenceGraph, L: float, U: float, guard: int = 10**6):
        super().__init__(graph)
        _require_edges(graph, FIG4A_EDGES, "cons23")
        if not L < U:
            raise ValueError("need L < U")
        self.L, self.U, self.guard = L, U, guard
        self._block = self._indices(self.BLOCK)
        self._a, self._e = self.graph.index("a"), self.graph.index("e")
        self._phase = 0  # 0: fixed block, 1: a*, 2: e*
        self._pos = 0
        self._count = 0
        self._n_a = 0
        self._checked = False
        self.blocks: list[tuple[int, int]] = []

    def _check_start(self, state):
        b1, b2, b3, b4 = state[0], state[1], state[2], state[3]
        if not (b1 < b2 <= self.L < self.U <= b3 < b4):
            raise ValueError(
                f"cons23 needs B1 < B2 <= L < U <= B3 < B4, got B={tuple(state)}, L={self.L}, U={self.U}"
            )
        self._checked = True

    def next_index(self, state):
        if not self._checked:
            self._check_start(state)
        self.emitted += 1
        while True:
            if self._phase == 0:
                k = self._block[self._pos]
                self._pos += 1
                if self._pos == len(self._block):
                    self._pos, self._phase, self._count = 0, 1, 0
                return k
            if self._phase == 1:
                if state[1] >= self.L:
                    self._count += 1
                    if self._count > self.guard:
                        raise GuardExhausted("counter-example loop did not terminate within guard")
                    return self._a
                self._n_a, self._phase, self._count = self._count, 2, 0
                continue
            if state[2] <= self.U:
                self._count += 1
                if self._count > self.guard:
                    raise GuardExhausted("counter-example loop did not terminate within guard")
                return self._e
            self.blocks.append((self._n_a, self._count))
            self._phase, self._count = 0, 0

    @property
    def tag(self):
        return FairnessTag.mk_fair(1, len(self.BLOCK))


class GrowingBlocks(Scheduler):
    """The word (a^n b c^n d) for n = start, start+1, ... on the three-agent line."""

    kind = "blocks"

    def __init__(self, graph: InfluenceGraph, start: int = 1):
        super().__init__(graph)
        _require_edges(graph, FIG1A_EDGES, "growing blocks")
        if start < 1:
            raise ValueError("start must be >= 1")
        self.start = start
        self._a, self._b, self._c, self._d = self._indices("abcd")
        self._n = start
        self._pos = 0

    def next_index(self, state=None):
        n, p = self._n, self._pos
        self.emitted += 1
        self._pos += 1
        if p < n:
            return self._a
        if p == n:
            return self._b
        if p <= 2 * n:
            return self._c
        self._n, self._pos = n + 1, 0
        return self._d

    @property
    def tag(self):
        return FairnessTag.strongly_fair()


class Extended(Scheduler):
    """A finite prefix followed by the full edge cycle, forever."""

    kind = "extend"

    def __init__(self, graph: InfluenceGraph, prefix: Sequence[str] = ()):
        super().__init__(graph)
        self.prefix = tuple(prefix)
        self._prefix = self._indices(self.prefix)
        self._cycle = list(range(len(graph.edges)))

    def next_index(self, state=None):
        t = self.emitted
        self.emitted += 1
        if t < len(self._prefix):
            return self._prefix[t]
        return self._cycle[(t - len(self._prefix)) % len(self._cycle)]

    @property
    def tag(self):
        return FairnessTag.bounded_fair(len(self.prefix) + len(self._cycle))


def periodic(graph: InfluenceGraph, pattern: Sequence[str]) -> Periodic:
    return Periodic(graph, pattern)


def random_word(graph: InfluenceGraph, probabilities: Mapping[str, float] | None = None, seed: int = 0) -> RandomWord:
    return RandomWord(graph, probabilities, seed)


def cons12(graph: InfluenceGraph, L: float, U: float, guard: int = 10**6) -> Cons12:
    return Cons12(graph, L, U, guard)


def cons23(graph: InfluenceGraph, L: float, U: float, guard: int = 10**6) -> Cons23:
    return Cons23(graph, L, U, guard)


def growing_blocks(graph: InfluenceGraph, start: int = 1) -> GrowingBlocks:
    return GrowingBlocks(graph, start)


def extend_to_bounded_fair(graph: InfluenceGraph, prefix: Sequence[str]) -> Extended:
    return Extended(graph, prefix)


# -- the scheduler/opponent game -------------------------------------------------

Strategy = Callable[[Sequence[str]], Sequence[str]]


@dataclass
class CFlood:
    """Opponent playing ``c^n`` on its n-th turn."""

    label: str = "c"
    turn: int = 0

    def __call__(self, word):
        self.turn += 1
        return [self.label] * self.turn


@dataclass
class SingleEdge:
    """Opponent making the smallest possible move: one fixed edge."""

    label: str

    def __call__(self, word):
        return [self.label]


@dataclass
class MultiWindow:
    """Scheduler appending a complete (m, |E|) multi-window on every turn."""

    alphabet: Sequence[str]
    m: int = 1

    @property
    def k(self) -> int:
        return len(self.alphabet)

    def __call__(self, word):
        return list(self.alphabet) * self.m


class GameScheduler(Scheduler):
    """Word built by alternating opponent and scheduler moves, opponent first."""

    kind = "game"

    def __init__(self, graph: InfluenceGraph, scheduler_strategy: Strategy, opponent_strategy: Strategy):
        super().__init__(graph)
        self.scheduler_strategy = scheduler_strategy
        self.opponent_strategy = opponent_strategy
        self.word: list[str] = []
        self.moves: list[tuple[str, int]] = []
        self._pending: list[int] = []
        self._turn = 0

    def play_turn(self) -> list[str]:
        player = self.opponent_strategy if self._turn % 2 == 0 else self.scheduler_strategy
        who = "opponent" if self._turn % 2 == 0 else "scheduler"
        move = list(player(tuple(self.word)))
        if not move:
            raise ValueError(f"{who} strategy returned an empty extension")
        self._indices(move)
        self._turn += 1
        self.word.extend(move)
        self.moves.append((who, len(move)))
        return move

    def next_index(self, state=None):
        while not self._pending:
            self._pending = self._indices(self.play_turn())[::-1]
        self.emitted += 1
        return self._pending.pop()

    @property
    def tag(self):
        m = getattr(self.scheduler_strategy, "m", None)
        k = getattr(self.scheduler_strategy, "k", None)
        if m is not None and k is not None and k == len(self.graph.edges):
            return FairnessTag.mk_fair(m, k)
        return FairnessTag.unknown()


@dataclass
class RoundDiagnostics:
    round: int
    opponent_len: int
    scheduler_len: int
    length: int
    multiwindows: int
    minimal_uniform_k: int | None
    max_gap: int


def banach_mazur_game(
    scheduler_strategy: Strategy,
    opponent_strategy: Strategy,
    rounds: int,
    alphabet: Sequence[str],
    m: int | None = None,
    k: int | None = None,
) -> tuple[list[str], list[RoundDiagnostics]]:
    """Play ``rounds`` rounds (opponent move, then scheduler move).

    Returns the concatenated word and, per round, the multi-window and
    window diagnostics of the word built so far. ``m`` and ``k`` default to
    the scheduler strategy's own parameters when it has them.
    """
    from .fairness import find_multiwindows, max_edge_gaps

    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    m = m if m is not None else getattr(scheduler_strategy, "m", 1)
    k = k if k is not None else getattr(scheduler_strategy, "k", len(alphabet))
    alphabet = tuple(alphabet)
    word: list[str] = []
    diags = []
    for r in range(1, rounds + 1):
        lens = []
        for who, player in (("opponent", opponent_strategy), ("scheduler", scheduler_strategy)):
            move = list(player(tuple(word)))
            if not move:
                raise ValueError(f"{who} strategy returned an empty extension")
            bad = [x for x in move if x not in alphabet]
            if bad:
                raise ValueError(f"{who} played labels outside the alphabet: {bad}")
            word.extend(move)
            lens.append(len(move))
        prefix = WordPrefix(word, alphabet)
        diags.append(
            RoundDiagnostics(
                round=r,
                opponent_len=lens[0],
                scheduler_len=lens[1],
                length=len(word),
                multiwindows=len(find_multiwindows(prefix, m, k)),
                minimal_uniform_k=minimal_uniform_k(prefix) if len(word) >= len(alphabet) else None,
                max_gap=max(max_edge_gaps(prefix).values()),
            )
        )
    return word, diags
