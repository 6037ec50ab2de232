"""Running an opinion transition system and auditing what comes out.

:func:`execute` produces a :class:`RunTrace`. Everything else here reads
traces: convergence summaries, the path-delay machinery (``delta``/``Delta``)
and the auditors that re-evaluate the contraction inequalities behind the
consensus results at every applicable time step.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .dynamics import InfluenceFunction, Static, make_state, pull
from .fairness import FairnessTag, WordPrefix
from .graph import GPath, InfluenceGraph, influence_extrema

SLACK = 1e-12

StepRule = Callable[[float, float, float], float]


class InvariantViolation(AssertionError):
    """A trace broke a property every correct run satisfies."""


@dataclass
class RunTrace:
    graph: InfluenceGraph
    initial: tuple[float, ...]
    actions: np.ndarray  # edge index per step, shape (T,)
    states: np.ndarray  # shape (T+1, n); row t is the state before action t
    influences: np.ndarray  # weight used by each action, shape (T,)
    influence: InfluenceFunction = field(default_factory=Static)
    generator: str = ""
    tag: FairnessTag | None = None
    blocks: list[tuple[int, int]] = field(default_factory=list)

    @property
    def steps(self) -> int:
        return len(self.actions)

    @property
    def labels(self) -> list[str]:
        names = self.graph.labels
        return [names[k] for k in self.actions]

    @property
    def word(self) -> WordPrefix:
        return WordPrefix.from_codes(self.actions, self.graph.labels)

    @property
    def maxima(self) -> np.ndarray:
        return self.states.max(axis=1)

    @property
    def minima(self) -> np.ndarray:
        return self.states.min(axis=1)

    @property
    def gaps(self) -> np.ndarray:
        return self.maxima - self.minima

    @property
    def final(self) -> tuple[float, ...]:
        return tuple(float(x) for x in self.states[-1])

    def influence_range(self) -> tuple[float, float]:
        """(I_min, I_max) to use in the contraction bounds for this trace.

        Static runs use the graph's weights, bounded dynamic runs their
        declared interval, and other dynamic runs the extremes observed.
        """
        if self.influence.is_static:
            return influence_extrema(self.graph)
        if self.influence.bounds is not None:
            return self.influence.bounds
        if self.steps == 0:
            return influence_extrema(self.graph)
        return float(self.influences.min()), float(self.influences.max())

    def check(self) -> None:
        """Raise :class:`InvariantViolation` unless the trace is well formed."""
        st = self.states
        if st.shape[0] != self.steps + 1:
            raise InvariantViolation("states and actions disagree in length")
        changed = (st[1:] != st[:-1]).sum(axis=1)
        if (changed > 1).any():
            t = int(np.flatnonzero(changed > 1)[0])
            raise InvariantViolation(f"step {t}: more than one opinion changed")
        hi, lo = self.maxima, self.minima
        dst = np.array([e.dst for e in self.graph.edges], dtype=np.int64)
        if self.steps:
            new = st[np.arange(1, self.steps + 1), dst[self.actions]]
            bad = (new > hi[:-1]) | (new < lo[:-1])
            if bad.any():
                t = int(np.flatnonzero(bad)[0])
                raise InvariantViolation(
                    f"step {t}: updated opinion {new[t]!r} left [{lo[t]!r}, {hi[t]!r}]"
                )
        if (hi[1:] > hi[:-1]).any() or (lo[1:] < lo[:-1]).any():
            raise InvariantViolation("extreme opinions are not monotone")


def execute(
    graph: InfluenceGraph,
    initial: Sequence[float],
    influence: InfluenceFunction | None,
    scheduler,
    T: int,
    *,
    stop_gap: float | None = None,
    step_rule: StepRule | None = None,
    check_invariants: bool = True,
) -> RunTrace:
    """Run ``T`` actions chosen by ``scheduler``.

    With ``stop_gap`` the run ends early at the first step whose resulting
    gap is below it. ``step_rule`` replaces the update rule (used to build
    deliberately broken traces for negative tests); invariant checking is
    the caller's business in that case.
    """
    if T < 0:
        raise ValueError("T must be >= 0")
    state = list(make_state(initial))
    if len(state) != graph.n:
        raise ValueError(f"initial state has {len(state)} opinions for {graph.n} agents")
    influence = influence or Static()
    rule = step_rule or pull
    src = [e.src for e in graph.edges]
    dst = [e.dst for e in graph.edges]
    weights = graph.weights
    edges = graph.edges
    static = influence.is_static
    nxt = scheduler.next_index
    bulk = getattr(scheduler, "take_indices", None)
    acts: list[int] = []
    vals: list[float] = []
    used: list[float] = []
    start = list(state)

    t = 0
    while t < T:
        if bulk is not None:
            chunk = bulk(min(4096, T - t)).tolist()
        else:
            chunk = None
        span = len(chunk) if chunk is not None else T - t
        for j in range(span):
            k = chunk[j] if chunk is not None else nxt(state)
            s, d = src[k], dst[k]
            w = weights[k] if static else influence(graph, edges[k], state)
            v = rule(state[d], state[s], w)
            state[d] = v
            acts.append(k)
            vals.append(v)
            used.append(w)
            t += 1
            if stop_gap is not None and max(state) - min(state) < stop_gap:
                T = t
                break

    trace = RunTrace(
        graph=graph,
        initial=tuple(start),
        actions=np.array(acts, dtype=np.int64),
        states=_rebuild_states(start, np.array(acts, dtype=np.int64), np.array(vals, dtype=float), dst),
        influences=np.array(used, dtype=float),
        influence=influence,
        generator=getattr(scheduler, "kind", type(scheduler).__name__),
        tag=getattr(scheduler, "tag", None),
        blocks=list(getattr(scheduler, "blocks", [])),
    )
    if check_invariants:
        trace.check()
    return trace


def _rebuild_states(initial, actions, values, dst) -> np.ndarray:
    """Expand per-step (agent, new value) records into the full state matrix."""
    T, n = len(actions), len(initial)
    states = np.empty((T + 1, n), dtype=float)
    states[0] = initial
    if T == 0:
        return states
    who = np.asarray(dst, dtype=np.int64)[actions]
    steps = np.arange(T)
    for j in range(n):
        last = np.maximum.accumulate(np.where(who == j, steps, -1))
        states[1:, j] = np.where(last >= 0, values[np.maximum(last, 0)], initial[j])
    return states


# -- convergence ---------------------------------------------------------------


@dataclass
class ConvergenceReport:
    U_hat: float
    L_hat: float
    gap: float
    consensus: bool
    tolerance: float
    steps: int
    first_below: int | None
    gap_series: list[tuple[int, float]]

    @property
    def limit(self) -> float:
        return 0.5 * (self.U_hat + self.L_hat)

    def to_dict(self) -> dict:
        return {
            "U_hat": self.U_hat,
            "L_hat": self.L_hat,
            "gap": self.gap,
            "consensus": self.consensus,
            "tolerance": self.tolerance,
            "steps": self.steps,
            "first_below": self.first_below,
        }


def convergence(trace: RunTrace, tolerance: float = 1e-9, samples: int = 200) -> ConvergenceReport:
    """Final extremes of the run; they bound the limits because extremes are monotone."""
    gaps = trace.gaps
    hi, lo = float(trace.maxima[-1]), float(trace.minima[-1])
    below = np.flatnonzero(gaps < tolerance)
    idx = np.unique(np.linspace(0, len(gaps) - 1, num=min(samples, len(gaps)), dtype=np.int64))
    return ConvergenceReport(
        U_hat=hi,
        L_hat=lo,
        gap=hi - lo,
        consensus=hi - lo < tolerance,
        tolerance=tolerance,
        steps=trace.steps,
        first_below=int(below[0]) if len(below) else None,
        gap_series=[(int(t), float(gaps[t])) for t in idx],
    )


# -- path delays ----------------------------------------------------------------


def _codes_for(word: WordPrefix | Sequence[str] | np.ndarray, graph: InfluenceGraph) -> np.ndarray:
    if isinstance(word, np.ndarray):
        return word.astype(np.int64)
    labels = word.labels if isinstance(word, WordPrefix) else list(word)
    return np.array([graph.index(lab) for lab in labels], dtype=np.int64)


def delta_of_path(word: WordPrefix | Sequence[str], path: GPath) -> int | None:
    """Length of the shortest prefix containing the path's edges as a subsequence."""
    labels = word.labels if isinstance(word, WordPrefix) else list(word)
    want = path.labels
    j = 0
    for pos, lab in enumerate(labels):
        if lab == want[j]:
            j += 1
            if j == len(want):
                return pos + 1
    return None


def _next_table(actions: np.ndarray, n_edges: int) -> np.ndarray:
    """``tab[e, p]``: first time >= p at which edge e fires, ``T`` if never.

    Width ``T + 2`` so that lookups one past the end stay in range.
    """
    T = len(actions)
    tab = np.full((n_edges, T + 2), T, dtype=np.int64)
    for e in range(n_edges):
        pos = np.flatnonzero(actions == e)
        idx = np.searchsorted(pos, np.arange(T + 1))
        tab[e, : T + 1] = np.append(pos, T)[idx]
    return tab


def _delta_table(graph: InfluenceGraph, actions: np.ndarray, starts: Sequence[int]) -> np.ndarray:
    """Delta of every agent on every suffix ``actions[s:]``; -1 where undefined.

    Returns shape (n, len(starts)). Runs a dynamic programme over
    (end agent, visited set): the position reached after embedding a path
    is a monotone function of the position it starts from, so keeping only
    the latest position per (agent, visited set) yields the maximum over
    all simple paths.
    """
    n = graph.n
    if n > 16:
        raise ValueError("path-delay tables are limited to 16 agents")
    T = len(actions)
    tab = _next_table(actions, len(graph.edges))
    starts = np.asarray(starts, dtype=np.int64)
    S = len(starts)
    B = n * S
    p0 = np.tile(starts, n)
    best = np.full((n, 1 << n, B), -1, dtype=np.int64)
    for a in range(n):
        best[a, 1 << a, a * S:(a + 1) * S] = starts
    out_edges = [[(k, e.dst) for k, e in enumerate(graph.edges) if e.src == v and e.dst != v] for v in range(n)]
    reach = p0.copy()
    failed = np.zeros(B, dtype=bool)
    for mask in range(1, 1 << n):
        for v in range(n):
            if not mask >> v & 1:
                continue
            cur = best[v, mask]
            live = cur >= 0
            if not live.any():
                continue
            safe = np.where(live, cur, 0)
            for k, u in out_edges[v]:
                if mask >> u & 1:
                    continue
                nxt = tab[k, safe] + 1
                bad = live & (nxt > T)
                failed |= bad
                good = live & ~bad
                cand = np.where(good, nxt, -1)
                tgt = best[u, mask | (1 << u)]
                np.maximum(tgt, cand, out=tgt)
                np.maximum(reach, cand, out=reach)
    delta = reach - p0
    delta[failed] = -1
    return delta.reshape(n, S)


def Delta_of_agent(word: WordPrefix | Sequence[str], graph: InfluenceGraph, i: int) -> int | None:
    """Largest path delay over the simple paths leaving agent ``i`` (0-based)."""
    codes = _codes_for(word, graph)
    d = int(_delta_table(graph, codes, [0])[i, 0])
    return None if d < 0 else d


def min_opinion_agent(state: Sequence[float]) -> int:
    """0-based index of the least agent holding the minimum opinion."""
    return int(np.argmin(np.asarray(state, dtype=float)))


def _sample_starts(T: int, stride: int) -> np.ndarray:
    return np.arange(0, max(T, 1), max(stride, 1), dtype=np.int64)


def delta_bound_scan(trace: RunTrace, beta: int, suffix_stride: int = 100) -> list[int]:
    """Sampled suffix starts at which ``beta`` bounds Delta of the minimum-opinion agent."""
    starts = _sample_starts(trace.steps, suffix_stride)
    table = _delta_table(trace.graph, trace.actions, starts)
    hits = []
    for col, s in enumerate(starts):
        d = table[min_opinion_agent(trace.states[s]), col]
        if 0 <= d <= beta:
            hits.append(int(s))
    return hits


def epsilon_decrement(
    trace: RunTrace,
    beta: int,
    U: float | None = None,
    L: float | None = None,
    *,
    suffix_stride: int = 100,
    hits: Sequence[int] | None = None,
) -> list[tuple[int, float, float]]:
    """(t, max(B^t) - max(B^{t+beta}), epsilon) at every Delta-bound hit.

    ``U`` and ``L`` default to the final extremes of the trace. Hits whose
    ``t + beta`` lies beyond the trace are skipped.
    """
    hi = trace.maxima
    U = float(hi[-1]) if U is None else U
    L = float(trace.minima[-1]) if L is None else L
    if U < L:
        raise ValueError("need U >= L")
    i_min, i_max = trace.influence_range()
    eps = i_min ** trace.graph.n * (1 - i_max) ** beta * (U - L)
    if hits is None:
        hits = delta_bound_scan(trace, beta, suffix_stride)
    return [(t, float(hi[t] - hi[t + beta]), eps) for t in hits if t + beta <= trace.steps]


# -- the auditor ---------------------------------------------------------------

CHECKS = (
    "extremes_monotone",
    "step_range",
    "one_step_upper",
    "idle_decay",
    "edge_pull",
    "path_pull",
    "spread_drop",
    "recurrent_drop",
)

CHECK_DESCRIPTIONS = {
    "extremes_monotone": "max(B) never rises and min(B) never falls",
    "step_range": "an updated opinion stays within the previous extremes",
    "one_step_upper": "B'_k <= B_k (1 - I_max) + max(B) I_max",
    "idle_decay": "B^{s+n}_i <= max(B^s) - (1 - I_max)^n (max(B^s) - B^s_i)",
    "edge_pull": "firing (i,j) at s+n caps B_j at max(B^s) - I_min (1 - I_max)^n (max(B^s) - B^s_i)",
    "path_pull": "a path from i to j embedded within d steps caps B_j at time s+d",
    "spread_drop": "max drops by I_min^|A| (1 - I_max)^Delta(i) (max - B_i) within Delta(i) steps",
    "recurrent_drop": "at Delta-bound hits, max drops by at least epsilon within beta steps",
}


@dataclass
class CheckResult:
    checked: int = 0
    violations: int = 0
    worst: float = 0.0  # largest excess of the left side over the bound
    first: str | None = None

    def record(self, excess: np.ndarray, describe: Callable[[int], str]) -> None:
        excess = np.asarray(excess, dtype=float).ravel()
        self.checked += excess.size
        if excess.size == 0:
            return
        bad = excess > SLACK
        if bad.any():
            self.violations += int(bad.sum())
            self.worst = max(self.worst, float(excess.max()))
            if self.first is None:
                self.first = describe(int(np.flatnonzero(bad)[0]))


@dataclass
class AuditReport:
    results: dict[str, CheckResult]
    i_min: float
    i_max: float
    beta: int | None

    @property
    def violations(self) -> int:
        return sum(r.violations for r in self.results.values())

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "I_min": self.i_min,
            "I_max": self.i_max,
            "beta": self.beta,
            "checks": {
                name: {"checked": r.checked, "violations": r.violations, "worst_excess": r.worst,
                       "first_violation": r.first, "statement": CHECK_DESCRIPTIONS[name]}
                for name, r in self.results.items()
            },
        }


def _random_path(rng: np.random.Generator, graph: InfluenceGraph, out: list[list[int]]) -> list[int] | None:
    """Random self-avoiding walk, returned as edge indices."""
    start = int(rng.integers(graph.n))
    visited = {start}
    here, path = start, []
    limit = int(rng.integers(1, graph.n))
    while len(path) < limit:
        options = [k for k in out[here] if graph.edges[k].dst not in visited]
        if not options:
            break
        k = options[int(rng.integers(len(options)))]
        path.append(k)
        here = graph.edges[k].dst
        visited.add(here)
    return path or None


def audit_bounds(
    trace: RunTrace,
    *,
    budget: int = 10_000,
    horizon: int = 256,
    starts: int = 200,
    beta: int | None = None,
    seed: int = 0,
    max_agents: int = 12,
) -> AuditReport:
    """Re-check every contraction inequality on a trace; report, never raise.

    Per-step inequalities are checked at every step. Multi-step ones are
    checked from up to ``starts`` sampled start times (``horizon`` steps
    ahead), and path bounds on up to ``budget`` sampled (time, path) pairs.
    The Delta-based checks enumerate agent subsets and are skipped on graphs
    with more than ``max_agents`` agents.
    """
    rng = np.random.default_rng(seed)
    graph, st, acts = trace.graph, trace.states, trace.actions
    T, n = trace.steps, graph.n
    i_min, i_max = trace.influence_range()
    hi, lo = trace.maxima, trace.minima
    src = np.array([e.src for e in graph.edges], dtype=np.int64)
    dst = np.array([e.dst for e in graph.edges], dtype=np.int64)
    res = {name: CheckResult() for name in CHECKS}
    at = lambda fmt: (lambda k: fmt.format(k=k))  # noqa: E731

    # single-step checks, every step
    res["extremes_monotone"].record(
        np.concatenate([hi[1:] - hi[:-1], lo[:-1] - lo[1:]]), at("pair {k}")
    )
    if T:
        new = st[np.arange(1, T + 1), dst[acts]]
        res["step_range"].record(
            np.maximum(new - hi[:-1], lo[:-1] - new), at("step {k}")
        )
        bound = st[:-1] * (1 - i_max) + hi[:-1, None] * i_max
        res["one_step_upper"].record(st[1:] - bound, lambda k: f"step {k // n}, agent {k % n + 1}")

    # multi-step checks from sampled starts
    s_all = np.sort(rng.choice(T, size=min(starts, T), replace=False)) if T else np.empty(0, np.int64)
    decay = (1 - i_max) ** np.arange(horizon + 1)
    for s in s_all:
        s = int(s)
        h = min(horizon, T - s)
        gap0 = hi[s] - st[s]
        idle = hi[s] - decay[: h + 1, None] * gap0[None, :]
        res["idle_decay"].record(st[s:s + h + 1] - idle, lambda k, s=s: f"s={s}, n={k // n}, agent {k % n + 1}")
        if h >= 1:
            steps = np.arange(h)
            e = acts[s:s + h]
            lhs = st[s + steps + 1, dst[e]]
            rhs = hi[s] - i_min * decay[:h] * (hi[s] - st[s, src[e]])
            res["edge_pull"].record(lhs - rhs, lambda k, s=s: f"s={s}, n={k}")

    # path bounds on sampled (time, path) pairs
    if T:
        tab = _next_table(acts, len(graph.edges))
        out = [[k for k, e in enumerate(graph.edges) if e.src == v and e.dst != v] for v in range(n)]
        excess, where = [], []
        for _ in range(budget):
            s = int(rng.integers(T))
            path = _random_path(rng, graph, out)
            if path is None:
                continue
            pos = s
            for k in path:
                pos = int(tab[k, pos]) + 1
                if pos > T:
                    break
            if pos > T:
                continue
            d = pos - s
            i, j = graph.edges[path[0]].src, graph.edges[path[-1]].dst
            rhs = hi[s] - i_min ** len(path) * (1 - i_max) ** d * (hi[s] - st[s, i])
            excess.append(st[s + d, j] - rhs)
            where.append(f"s={s}, path={''.join(graph.edges[k].label for k in path)}")
        res["path_pull"].record(np.array(excess), lambda k: where[k])

    # spread drop for every agent from sampled starts
    if T and n <= max_agents:
        sample = s_all if len(s_all) else np.array([0])
        table = _delta_table(graph, acts, sample)
        lhs, rhs, where = [], [], []
        for col, s in enumerate(sample):
            for i in range(n):
                d = int(table[i, col])
                if d < 0:
                    continue
                lhs.append(hi[s] - hi[s + d])
                rhs.append(i_min ** n * (1 - i_max) ** d * (hi[s] - st[s, i]))
                where.append(f"s={int(s)}, agent {i + 1}, Delta={d}")
        res["spread_drop"].record(np.array(rhs) - np.array(lhs), lambda k: where[k])

        # recurrent drop at Delta-bound hits for the minimum-opinion agent
        mins = np.array([table[min_opinion_agent(st[s]), c] for c, s in enumerate(sample)])
        defined = mins[mins >= 0]
        if beta is None and len(defined):
            beta = int(np.percentile(defined, 75))
        if beta is not None:
            hits = [int(s) for c, s in enumerate(sample) if 0 <= mins[c] <= beta]
            rows = epsilon_decrement(trace, beta, hits=hits)
            res["recurrent_drop"].record(
                np.array([eps - l for _, l, eps in rows]), lambda k: f"t={rows[k][0]}"
            )
    return AuditReport(results=res, i_min=i_min, i_max=i_max, beta=beta)


# -- minimum effort and block growth --------------------------------------------


def min_effort(b_i: float, b_j: float, U: float) -> int:
    """Half-weight pulls of agent i by agent j needed for agent i to reach U.

    Evaluated exactly: the least t with ``2**t >= (b_j - b_i) / (b_j - U)``.
    """
    if not (b_i < U < b_j):
        raise ValueError(f"need B_i < U < B_j, got B_i={b_i!r}, U={U!r}, B_j={b_j!r}")
    ratio = (Fraction(b_j) - Fraction(b_i)) / (Fraction(b_j) - Fraction(U))
    t = max(math.ceil(math.log2(ratio)) - 1, 0)
    while Fraction(2) ** t < ratio:
        t += 1
    return t


_CONS12_BLOCK = re.compile(r"(a+)b(c+)d")


def c_block_growth(trace: RunTrace) -> list[int]:
    """Number of c actions in each complete block of a counter-example run."""
    if trace.generator != "cons12":
        raise ValueError(f"block growth needs a cons12 trace, got {trace.generator or 'unnamed'!r}")
    word = "".join(trace.labels)
    counts, pos = [], 0
    for match in _CONS12_BLOCK.finditer(word):
        if match.start() != pos:
            raise ValueError(f"trace word breaks the block shape at position {pos}")
        counts.append(len(match.group(2)))
        pos = match.end()
    return counts


def growth_witnessed(counts: Sequence[int], upto: int, within: int) -> list[int]:
    """Block indices m <= upto (1-based) with no larger count among the next ``within`` blocks."""
    failures = []
    for m in range(1, upto + 1):
        later = counts[m:m + within]
        if not any(c > counts[m - 1] for c in later):
            failures.append(m)
    return failures
