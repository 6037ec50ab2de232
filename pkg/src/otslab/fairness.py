"""Finite-prefix fairness diagnostics.

Fairness of an infinite word cannot be decided from a prefix, so everything
here is a necessary-condition check with an explicit horizon. The analytic
:class:`FairnessTag` attached by a scheduler is the complementary claim.

Windows are contiguous factors. An (m, k) multi-window starting at ``s`` is
split at fixed offsets: ``[s, s+k), [s+k, s+2k), ...``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

STRONG = "strongly_fair"
K_FAIR = "k_fair"
BOUNDED = "bounded_fair"
MK_FAIR = "mk_fair"
M_BOUNDED = "m_bounded_fair"
UNKNOWN = "unknown"


@dataclass(frozen=True)
class FairnessTag:
    """Analytic fairness claim a generator makes about its own infinite word.

    ``m=None`` on an m-bounded tag means "for every m". ``almost_surely``
    marks probabilistic claims.
    """

    kind: str
    k: int | None = None
    m: int | None = None
    almost_surely: bool = False
    note: str = ""

    @classmethod
    def strongly_fair(cls) -> "FairnessTag":
        return cls(STRONG)

    @classmethod
    def k_fair(cls, k: int) -> "FairnessTag":
        return cls(K_FAIR, k=k)

    @classmethod
    def bounded_fair(cls, k: int | None = None) -> "FairnessTag":
        return cls(BOUNDED, k=k)

    @classmethod
    def mk_fair(cls, m: int, k: int) -> "FairnessTag":
        return cls(MK_FAIR, k=k, m=m)

    @classmethod
    def m_bounded_fair(cls, m: int | None, almost_surely: bool = False) -> "FairnessTag":
        return cls(M_BOUNDED, m=m, almost_surely=almost_surely)

    @classmethod
    def unknown(cls, note: str = "") -> "FairnessTag":
        return cls(UNKNOWN, note=note)

    def implies(self, other: "FairnessTag") -> bool:
        """Whether every word carrying ``self`` also satisfies ``other``."""
        if other.kind == UNKNOWN:
            return True
        if self.kind == UNKNOWN:
            return False
        if other.kind == STRONG:
            return True
        if self.kind == STRONG:
            return False

        windowed = self.kind in (K_FAIR, BOUNDED)
        if other.kind in (K_FAIR, BOUNDED):
            if not windowed:
                return False
            if other.k is None:
                return True
            return self.k is not None and self.k <= other.k
        if other.kind == MK_FAIR:
            if windowed:
                return self.k is not None and self.k <= other.k
            if self.kind == MK_FAIR:
                return self.k == other.k and self.m >= other.m
            return False
        if other.kind == M_BOUNDED:
            if windowed:
                return True
            if self.m is None:
                return True
            return other.m is not None and self.m >= other.m
        raise ValueError(f"unknown tag kind {other.kind!r}")

    def __str__(self) -> str:
        prefix = "almost surely " if self.almost_surely else ""
        if self.kind == K_FAIR:
            return f"{prefix}{self.k}-fair"
        if self.kind == BOUNDED:
            return f"{prefix}bounded fair" + (f" (k={self.k})" if self.k else "")
        if self.kind == MK_FAIR:
            return f"{prefix}({self.m},{self.k})-fair"
        if self.kind == M_BOUNDED:
            return f"{prefix}{'every-m' if self.m is None else self.m}-bounded fair"
        if self.kind == STRONG:
            return f"{prefix}strongly fair"
        return "unknown" + (f" ({self.note})" if self.note else "")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "k": self.k, "m": self.m, "almost_surely": self.almost_surely,
                "note": self.note, "text": str(self)}


class WordPrefix:
    """A finite word over a fixed alphabet of edge labels."""

    def __init__(self, labels: Sequence[str], alphabet: Sequence[str]):
        self.alphabet = tuple(alphabet)
        if len(set(self.alphabet)) != len(self.alphabet):
            raise ValueError("alphabet has repeated labels")
        code = {lab: c for c, lab in enumerate(self.alphabet)}
        try:
            self.codes = np.fromiter((code[x] for x in labels), dtype=np.int64, count=len(labels))
        except KeyError as exc:
            raise ValueError(f"label {exc.args[0]!r} is not in the alphabet") from None

    @classmethod
    def from_codes(cls, codes: np.ndarray, alphabet: Sequence[str]) -> "WordPrefix":
        obj = cls.__new__(cls)
        obj.alphabet = tuple(alphabet)
        obj.codes = np.asarray(codes, dtype=np.int64)
        if len(obj.codes) and (obj.codes.min() < 0 or obj.codes.max() >= len(obj.alphabet)):
            raise ValueError("code outside the alphabet")
        return obj

    def __len__(self) -> int:
        return len(self.codes)

    @property
    def labels(self) -> list[str]:
        return [self.alphabet[c] for c in self.codes]

    def head(self, n: int) -> "WordPrefix":
        return WordPrefix.from_codes(self.codes[:n], self.alphabet)

    def tail(self, start: int) -> "WordPrefix":
        return WordPrefix.from_codes(self.codes[start:], self.alphabet)


def _as_prefix(prefix) -> WordPrefix:
    if not isinstance(prefix, WordPrefix):
        raise TypeError("expected a WordPrefix")
    return prefix


def _next_occurrence(codes: np.ndarray, symbol: int) -> np.ndarray:
    """``out[s]`` = first position >= s holding ``symbol`` (len(codes) if none)."""
    n = len(codes)
    pos = np.flatnonzero(codes == symbol)
    idx = np.searchsorted(pos, np.arange(n + 1))
    padded = np.append(pos, n)
    return padded[idx]


def complete_windows(prefix: WordPrefix, k: int) -> np.ndarray:
    """Boolean array over window starts ``0..len-k``: is the k-window complete?"""
    prefix = _as_prefix(prefix)
    n = len(prefix)
    if k < 1 or k > n:
        return np.zeros(max(n - k + 1, 0), dtype=bool)
    reach = np.zeros(n + 1, dtype=np.int64)
    for sym in range(len(prefix.alphabet)):
        np.maximum(reach, _next_occurrence(prefix.codes, sym), out=reach)
    starts = np.arange(n - k + 1)
    return reach[: n - k + 1] < starts + k


def window_complete(prefix: WordPrefix, start: int, k: int) -> bool:
    prefix = _as_prefix(prefix)
    if k < 1 or start < 0 or start + k > len(prefix):
        raise ValueError(f"window [{start}, {start + k}) is outside the prefix of length {len(prefix)}")
    window = prefix.codes[start:start + k]
    return len(np.unique(window)) == len(prefix.alphabet)


def max_edge_gaps(prefix: WordPrefix) -> dict[str, int]:
    """Largest distance between consecutive occurrences of each edge.

    Positions -1 and ``len`` count as virtual occurrences, so an edge that
    never occurs gets ``len + 1``.
    """
    prefix = _as_prefix(prefix)
    n = len(prefix)
    gaps = {}
    for sym, lab in enumerate(prefix.alphabet):
        pos = np.concatenate(([-1], np.flatnonzero(prefix.codes == sym), [n]))
        gaps[lab] = int(np.diff(pos).max())
    return gaps


def minimal_uniform_k(prefix: WordPrefix) -> int | None:
    """Smallest k for which every k-window of the prefix is complete.

    A k-window misses an edge exactly when it fits strictly between two
    consecutive (possibly virtual) occurrences, so the answer is the largest
    per-edge gap. ``None`` if some edge is absent altogether.
    """
    prefix = _as_prefix(prefix)
    n = len(prefix)
    if n < len(prefix.alphabet):
        raise ValueError(f"prefix of length {n} is shorter than the alphabet ({len(prefix.alphabet)})")
    k = max(max_edge_gaps(prefix).values())
    return k if k <= n else None


def stable_uniform_k(prefix: WordPrefix, levels: int = 4) -> int | None:
    """Uniform window size that persists as the horizon grows.

    Evaluates :func:`minimal_uniform_k` on the prefix and on its heads of
    length ``len/2, len/4, ...`` (``levels`` horizons in total, each at least
    the alphabet size). Returns the common value if all agree, else ``None``:
    a minimal k that keeps changing with the horizon is evidence that no
    fixed k works for the infinite word.
    """
    prefix = _as_prefix(prefix)
    n = len(prefix)
    horizons = [n >> j for j in range(levels) if (n >> j) >= len(prefix.alphabet)]
    if not horizons:
        return None
    values = {minimal_uniform_k(prefix.head(h)) for h in horizons}
    if len(values) == 1:
        return values.pop()
    return None


def find_multiwindows(prefix: WordPrefix, m: int, k: int) -> list[int]:
    """All starts ``s`` whose m consecutive k-windows are each complete."""
    prefix = _as_prefix(prefix)
    if m < 1 or k < 1:
        raise ValueError("m and k must be >= 1")
    n = len(prefix)
    if m * k > n:
        return []
    ok = complete_windows(prefix, k)
    last = n - m * k
    hits = ok[: last + 1].copy()
    for j in range(1, m):
        hits &= ok[j * k: j * k + last + 1]
    return [int(s) for s in np.flatnonzero(hits)]


def density_gap(prefix: WordPrefix, m: int, k: int) -> int | None:
    """Largest distance between consecutive multi-window starts (None if < 2 starts)."""
    hits = find_multiwindows(prefix, m, k)
    if len(hits) < 2:
        return None
    return int(np.diff(hits).max())


def density_check(prefix: WordPrefix, m: int, k: int, G: int) -> bool:
    """Does every length-G window of the prefix contain a multi-window start?

    Only multi-windows finishing inside the prefix count. A prefix shorter
    than G has no length-G windows and passes vacuously.
    """
    if G < m * k:
        raise ValueError(f"horizon G={G} is smaller than m*k={m * k}")
    prefix = _as_prefix(prefix)
    n = len(prefix)
    if n < G:
        return True
    hits = find_multiwindows(prefix, m, k)
    if not hits:
        return False
    if hits[0] > G - 1 or hits[-1] < n - G:
        return False
    return bool(len(hits) == 1 or np.diff(hits).max() <= G)


@dataclass
class FairnessReport:
    length: int
    per_edge_max_gap: dict[str, int]
    minimal_uniform_k: int | None
    stable_uniform_k: int | None
    m: int
    k: int
    multiwindow_positions: list[int]
    density_gap: int | None
    density_horizon: int | None = None
    density_ok: bool | None = None
    analytic_tag: FairnessTag | None = None
    absent_edges: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "length": self.length,
            "per_edge_max_gap": self.per_edge_max_gap,
            "absent_edges": self.absent_edges,
            "minimal_uniform_k": self.minimal_uniform_k,
            "stable_uniform_k": self.stable_uniform_k,
            "m": self.m,
            "k": self.k,
            "multiwindow_count": len(self.multiwindow_positions),
            "multiwindow_positions": self.multiwindow_positions,
            "density_gap": self.density_gap,
            "density_horizon": self.density_horizon,
            "density_ok": self.density_ok,
            "analytic_tag": None if self.analytic_tag is None else self.analytic_tag.to_dict(),
        }


def fairness_report(
    prefix: WordPrefix,
    m: int = 1,
    k: int | None = None,
    G: int | None = None,
    tag: FairnessTag | None = None,
) -> FairnessReport:
    prefix = _as_prefix(prefix)
    k = len(prefix.alphabet) if k is None else k
    gaps = max_edge_gaps(prefix)
    hits = find_multiwindows(prefix, m, k)
    enough = len(prefix) >= len(prefix.alphabet)
    return FairnessReport(
        length=len(prefix),
        per_edge_max_gap=gaps,
        minimal_uniform_k=minimal_uniform_k(prefix) if enough else None,
        stable_uniform_k=stable_uniform_k(prefix) if enough else None,
        m=m,
        k=k,
        multiwindow_positions=hits,
        density_gap=int(np.diff(hits).max()) if len(hits) > 1 else None,
        density_horizon=G,
        density_ok=density_check(prefix, m, k, G) if G is not None else None,
        analytic_tag=tag,
        absent_edges=[lab for lab, g in gaps.items() if g == len(prefix) + 1],
    )


# -- witnesses for the strictness of the fairness hierarchy ---------------------


@dataclass(frozen=True)
class Assertion:
    name: str
    check: Callable[[WordPrefix], bool]
    expected: bool


@dataclass(frozen=True)
class Witness:
    name: str
    claim: str
    alphabet: tuple[str, ...]
    generate: Callable[[int], list[str]]
    horizons: tuple[int, ...]
    assertions: tuple[Assertion, ...]

    def prefix(self, n: int) -> WordPrefix:
        return WordPrefix(self.generate(n), self.alphabet)

    def evaluate(self) -> list[tuple[int, str, bool, bool]]:
        """(horizon, assertion, expected, observed) for every horizon and assertion."""
        rows = []
        for h in self.horizons:
            p = self.prefix(h)
            for a in self.assertions:
                rows.append((h, a.name, a.expected, bool(a.check(p))))
        return rows

    def holds(self) -> bool:
        return all(exp == obs for _, _, exp, obs in self.evaluate())


def _alphabet(size: int) -> tuple[str, ...]:
    return tuple(f"e{j}" for j in range(1, size + 1))


def _cycle_word(period: Sequence[str]) -> Callable[[int], list[str]]:
    period = list(period)

    def gen(n: int) -> list[str]:
        reps = -(-n // len(period))
        return (period * reps)[:n]

    return gen


def _all_complete(prefix: WordPrefix, k: int) -> bool:
    return bool(complete_windows(prefix, k).all())


def k_plus_one_witness(k: int = 4, edges: int = 4) -> Witness:
    """A (k+1)-fair periodic word with an incomplete k-window."""
    if edges < 2 or k < edges - 1:
        raise ValueError("need at least 2 edges and k >= |E| - 1")
    alpha = _alphabet(edges)
    v = [alpha[0]] * (k - edges + 2) + list(alpha[1:-1])
    period = v + [alpha[-1]]
    return Witness(
        name="k_plus_one",
        claim=f"{k + 1}-fair but not {k}-fair",
        alphabet=alpha,
        generate=_cycle_word(period),
        horizons=(4 * len(period), 50 * len(period), 1000),
        assertions=(
            Assertion(f"every {k + 1}-window complete", lambda p: _all_complete(p, k + 1), True),
            Assertion(f"every {k}-window complete", lambda p: _all_complete(p, k), False),
            Assertion(f"leading {k}-window complete", lambda p: window_complete(p, 0, k), False),
            Assertion(f"minimal uniform k is {k + 1}", lambda p: minimal_uniform_k(p) == k + 1, True),
        ),
    )


def _is_power_of_two(i: np.ndarray) -> np.ndarray:
    return (i > 0) & ((i & (i - 1)) == 0)


def power_of_two_witness(max_exponent: int = 16) -> Witness:
    """Strongly fair, yet the first edge's spacing doubles forever."""
    alpha = _alphabet(2)

    def gen(n: int) -> list[str]:
        marks = _is_power_of_two(np.arange(n))
        return [alpha[0] if b else alpha[1] for b in marks]

    def both_in_every_suffix(p: WordPrefix) -> bool:
        # last occurrence of the sparse edge is the largest power of two below len
        n = len(p)
        starts = np.linspace(0, n // 2 - 1, num=64, dtype=np.int64)
        return all(len(np.unique(p.codes[s:])) == 2 for s in starts)

    def grows_with_horizon(p: WordPrefix) -> bool:
        return minimal_uniform_k(p) >= len(p) // 2

    return Witness(
        name="power_of_two",
        claim="strongly fair but not bounded fair",
        alphabet=alpha,
        generate=gen,
        horizons=tuple(2**j for j in range(4, max_exponent + 1)),
        assertions=(
            Assertion("both edges occur in every tested suffix", both_in_every_suffix, True),
            Assertion("minimal uniform k grows to half the horizon", grows_with_horizon, True),
            Assertion("a uniform k persists across horizons", lambda p: stable_uniform_k(p) is not None, False),
        ),
    )


def multiwindow_witness(m: int = 2, k: int = 4) -> Witness:
    """(m,k)-fair but not (m+1,k)-fair, and not k-fair.

    One period is m complete k-windows ``e2 e1^(k-1)`` followed by an
    incomplete block ``e1^k``.
    """
    if m < 1 or k < 2:
        raise ValueError("need m >= 1 and k >= 2")
    alpha = _alphabet(2)
    block = [alpha[1]] + [alpha[0]] * (k - 1)
    period = block * m + [alpha[0]] * k
    plen = len(period)

    def one_per_period(p: WordPrefix) -> bool:
        hits = np.array(find_multiwindows(p, m, k), dtype=np.int64)
        full = (len(p) - m * k) // plen
        if full < 1:
            return False
        counts = np.bincount(hits // plen, minlength=full)[:full]
        return bool((counts >= 1).all())

    return Witness(
        name="multiwindow",
        claim=f"({m},{k})-fair but not ({m + 1},{k})-fair",
        alphabet=alpha,
        generate=_cycle_word(period),
        horizons=(3 * plen, 40 * plen, 1000),
        assertions=(
            Assertion(f"({m},{k}) multi-window in every period", one_per_period, True),
            Assertion(f"any ({m + 1},{k}) multi-window", lambda p: bool(find_multiwindows(p, m + 1, k)), False),
            Assertion(f"every {k}-window complete", lambda p: _all_complete(p, k), False),
        ),
    )


def hierarchy_witnesses(k: int = 4, edges: int = 4, m: int = 2, max_exponent: int = 16) -> list[Witness]:
    return [
        k_plus_one_witness(k, edges),
        power_of_two_witness(max_exponent),
        multiwindow_witness(m, k),
    ]
