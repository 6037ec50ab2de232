from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from otslab import reference as ref
from otslab.analysis import (
    Delta_of_agent,
    InvariantViolation,
    audit_bounds,
    c_block_growth,
    convergence,
    delta_bound_scan,
    delta_of_path,
    epsilon_decrement,
    execute,
    growth_witnessed,
    min_effort,
    min_opinion_agent,
)
from otslab.dynamics import BoundedScaled, ConfirmationBias
from otslab.graph import GPath, InfluenceGraph, random_strongly_connected, simple_paths_from
from otslab.words import cons12, extend_to_bounded_fair, growing_blocks, periodic, random_word

EX7 = [(0.0, 0.5, 1.0), (0.0, 0.25, 1.0), (0.125, 0.25, 1.0), (0.125, 0.625, 1.0), (0.125, 0.625, 0.8125)]


def blocks_word(start: int, length: int) -> list[str]:
    out, n = [], start
    while len(out) < length:
        out += ["a"] * n + ["b"] + ["c"] * n + ["d"]
        n += 1
    return out[:length]


# -- oracles -----------------------------------------------------------------------


def oracle_delta(word, labels):
    """Shortest prefix length containing ``labels`` as a subsequence, by exhaustive search."""
    for n in range(len(labels), len(word) + 1):
        for idx in itertools.combinations(range(n), len(labels)):
            if idx[-1] == n - 1 and all(word[i] == lab for i, lab in zip(idx, labels)):
                return n
    return None


def oracle_Delta(word, graph, i):
    best = 0
    for p in simple_paths_from(graph, i):
        d = delta_of_path(word, p)
        if d is None:
            return None
        best = max(best, d)
    return best


def oracle_effort(b_i, b_j, U):
    x, target, bj, t = Fraction(b_i), Fraction(U), Fraction(b_j), 0
    while x < target:
        x = x + (bj - x) / 2
        t += 1
    return t


# -- execution -----------------------------------------------------------------------


def test_worked_run_is_exact():
    g = ref.fig1a()
    tr = execute(g, ref.FIG1A_INITIAL, None, periodic(g, "abcd"), 4)
    assert [tuple(r) for r in tr.states.tolist()] == EX7
    assert tr.labels == list("abcd")
    assert tr.influences.tolist() == [0.5] * 4


def test_consensual_state_is_fixed():
    g = ref.fig1a()
    tr = execute(g, (0.4, 0.4, 0.4), None, random_word(g, seed=3), 500)
    assert (tr.states == 0.4).all()
    assert convergence(tr).gap == 0.0


def test_puppets_oscillate():
    g = ref.fig1a(weight=1.0)
    tr = execute(g, ref.FIG1A_INITIAL, None, periodic(g, "abcd"), 40)
    b2 = tr.states[1:, 1]
    assert set(b2.tolist()) == {0.0, 1.0}
    assert convergence(tr).gap == 1.0


def test_execute_validation_and_early_stop():
    g = ref.fig1a()
    with pytest.raises(ValueError):
        execute(g, (0.0, 1.0), None, periodic(g, "abcd"), 3)
    with pytest.raises(ValueError):
        execute(g, ref.FIG1A_INITIAL, None, periodic(g, "abcd"), -1)
    assert execute(g, ref.FIG1A_INITIAL, None, periodic(g, "abcd"), 0).states.shape == (1, 3)
    tr = execute(g, ref.FIG1A_INITIAL, None, periodic(g, "abcd"), 5000, stop_gap=1e-6)
    assert tr.gaps[-1] < 1e-6 <= tr.gaps[-2]


def test_broken_update_rule_is_caught():
    g = ref.fig1a()

    def overshoot(bj, bi, w):
        return bi + (bi - bj) * w

    with pytest.raises(InvariantViolation):
        execute(g, (0.2, 0.5, 0.8), None, periodic(g, "abcd"), 10, step_rule=lambda bj, bi, w: min(1.0, max(0.0, overshoot(bj, bi, w))))
    tr = execute(g, (0.2, 0.5, 0.8), None, periodic(g, "abcd"), 10, step_rule=overshoot, check_invariants=False)
    report = audit_bounds(tr)
    assert report.results["step_range"].violations > 0
    assert not report.ok


def test_convergence_reports():
    g = ref.fig1a()
    tr = execute(g, ref.FIG1A_INITIAL, None, periodic(g, "abcd"), 2000)
    rep = convergence(tr, 1e-6)
    assert rep.consensus and abs(rep.limit - 0.5) < 1e-3
    assert rep.U_hat >= rep.L_hat
    tr = execute(g, ref.FIG1A_INITIAL, None, cons12(g, 0.25, 0.75), 5000)
    rep = convergence(tr, 1e-6)
    assert not rep.consensus and rep.gap >= 0.5
    assert convergence(execute(g, (0.7, 0.7, 0.7), None, periodic(g, "a"), 0)).gap == 0.0


# -- path delays ----------------------------------------------------------------------


@pytest.mark.parametrize("labels,expected", [("a", 1), ("ad", 4), ("c", 3), ("cb", 6)])
def test_delta_of_path_examples(labels, expected):
    g = ref.fig1a()
    p = GPath(tuple(g.edge(x) for x in labels))
    word = list("abcd") * 5
    assert delta_of_path(word, p) == expected == oracle_delta(word, list(labels))


def test_delta_absent():
    g = ref.fig1a()
    assert delta_of_path(list("aaaa"), GPath((g.edge("c"),))) is None
    assert Delta_of_agent(list("aaaa"), g, 0) is None


def test_Delta_line_examples():
    g = ref.fig1a()
    w = list("abcd") * 10
    assert Delta_of_agent(w, g, 0) == 4 == oracle_Delta(w, g, 0)
    assert Delta_of_agent(w, g, 2) == 6 == oracle_Delta(w, g, 2)


def test_Delta_growing_blocks():
    g = ref.fig1a()
    u = blocks_word(1, 400)
    # the first block is "abcd", so the path ad completes at step 4
    assert Delta_of_agent(u, g, 0) == 4 == oracle_Delta(u, g, 0)
    assert Delta_of_agent(u, g, 2) == 7 == oracle_Delta(u, g, 2)
    v = blocks_word(10, 400)
    assert Delta_of_agent(v, g, 0) == 22 == oracle_Delta(v, g, 0)
    assert Delta_of_agent(v, g, 2) == 34 == oracle_Delta(v, g, 2)


def test_Delta_two_agents():
    g = InfluenceGraph.build(2, [(1, 2), (2, 1)], 0.5, labels=["e1", "e2"])
    w = ["e1", "e2"] * 5
    assert Delta_of_agent(w, g, 0) == 1 and Delta_of_agent(w, g, 1) == 2


@st.composite
def graph_and_word(draw):
    seed = draw(st.integers(0, 10_000))
    n = draw(st.integers(2, 5))
    g = random_strongly_connected(n, 0.5, 0.5, seed=seed)
    word = draw(st.lists(st.sampled_from(g.labels), min_size=1, max_size=120))
    return g, word


@settings(max_examples=60, deadline=None)
@given(graph_and_word())
def test_Delta_matches_path_enumeration(gw):
    g, word = gw
    for i in range(g.n):
        assert Delta_of_agent(word, g, i) == oracle_Delta(word, g, i)


@settings(max_examples=60, deadline=None)
@given(graph_and_word(), st.data())
def test_delta_matches_subsequence_search(gw, data):
    g, word = gw
    word = word[:14]
    paths = sorted(simple_paths_from(g, 0), key=str)
    p = data.draw(st.sampled_from(paths))
    assert delta_of_path(word, p) == oracle_delta(word, list(p.labels))


@pytest.mark.parametrize("state,expected", [((0, 0.5, 1), 0), ((0.3, 0.3, 0.9), 0), ((0.4,) * 3, 0), ((0.5, 0.1, 0.1), 1)])
def test_min_opinion_agent(state, expected):
    assert min_opinion_agent(state) == expected


def test_delta_bound_scans():
    g = ref.fig1a()
    tr = execute(g, ref.FIG1A_INITIAL, None, periodic(g, "abcd"), 2000)
    hits = delta_bound_scan(tr, 8, 100)
    assert hits == list(range(0, 2000, 100))[: len(hits)] and len(hits) >= 19

    tr = execute(g, ref.FIG1A_INITIAL, None, cons12(g, 0.25, 0.75), 20_000)
    hits = delta_bound_scan(tr, 40, 100)
    assert hits and max(hits) < 5000

    g2 = InfluenceGraph.build(2, [(1, 2), (2, 1)], 0.5, labels="ab")
    tr = execute(g2, (0.1, 0.9), None, periodic(g2, "ab"), 1000)
    assert len(delta_bound_scan(tr, 2, 10)) == 100


# -- auditors ------------------------------------------------------------------------------


def test_one_step_bound_on_worked_run():
    g = ref.fig1a()
    tr = execute(g, ref.FIG1A_INITIAL, None, periodic(g, "abcd"), 4)
    b = tr.states
    assert b[1, 1] <= b[0, 1] * (1 - 0.5) + b[0].max() * 0.5
    assert audit_bounds(tr).ok


def test_audit_clean_on_reference_runs():
    g = ref.fig1a()
    for sched, T in ((periodic(g, "abcd"), 3000), (cons12(g, 0.25, 0.75), 5000), (growing_blocks(g), 5000)):
        report = audit_bounds(execute(g, ref.FIG1A_INITIAL, None, sched, T))
        assert report.ok, report.to_dict()
        assert all(r.checked > 0 for name, r in report.results.items() if name != "recurrent_drop")


def test_audit_bounded_dynamic_uses_declared_interval():
    g = ref.fig1a()
    tr = execute(g, ref.FIG1A_INITIAL, BoundedScaled(ConfirmationBias(), 0.1, 0.9), periodic(g, "abcd"), 3000)
    report = audit_bounds(tr)
    assert (report.i_min, report.i_max) == (0.1, 0.9)
    assert report.ok


def test_epsilon_decrement():
    g = ref.fig1a()
    flat = execute(g, (0.6, 0.6, 0.6), None, periodic(g, "abcd"), 500)
    rows = epsilon_decrement(flat, 8)
    assert rows and all(lhs == 0 and eps == 0 for _, lhs, eps in rows)

    tr = execute(g, ref.FIG1A_INITIAL, None, periodic(g, "abcd"), 2000)
    rows = epsilon_decrement(tr, 8)
    assert rows and all(lhs >= eps - 1e-12 for _, lhs, eps in rows)

    tr = execute(g, ref.FIG1A_INITIAL, None, cons12(g, 0.25, 0.75), 20_000)
    rows = epsilon_decrement(tr, 40)
    assert rows and max(t for t, _, _ in rows) < 5000
    with pytest.raises(ValueError):
        epsilon_decrement(tr, 8, U=0.1, L=0.9)


def test_audit_battery_small():
    for seed in range(8):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 7))
        g = random_strongly_connected(n, 0.4, (0.05, 0.95), seed=seed)
        tr = execute(g, rng.random(n), None, random_word(g, seed=seed), 3000)
        assert audit_bounds(tr, budget=2000).ok


# -- minimum effort and block growth ----------------------------------------------------------


@pytest.mark.parametrize("args,expected", [((0, 1, 0.5), 1), ((0, 1, 0.75), 2), ((0.25, 1, 0.8), 2)])
def test_min_effort_examples(args, expected):
    assert min_effort(*args) == expected == oracle_effort(*args)


@pytest.mark.parametrize("args", [(0.5, 1, 0.4), (0, 1, 1), (0.6, 0.5, 0.55)])
def test_min_effort_rejects_bad_order(args):
    with pytest.raises(ValueError):
        min_effort(*args)


@settings(max_examples=300)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_min_effort_matches_simulation(a, b, c):
    b_i, U, b_j = sorted((a, b, c))
    if b_i < U < b_j:
        assert min_effort(b_i, b_j, U) == oracle_effort(b_i, b_j, U)


def test_c_block_growth():
    g = ref.fig1a()
    tr = execute(g, ref.FIG1A_INITIAL, None, cons12(g, 0.25, 0.75), 20_000)
    counts = c_block_growth(tr)
    assert counts == [c for _, c in tr.blocks]
    assert all(c >= 1 for c in counts)
    assert growth_witnessed(counts[:50], 40, 10) == []
    with pytest.raises(ValueError):
        c_block_growth(execute(g, ref.FIG1A_INITIAL, None, periodic(g, "abcd"), 10))


# -- empirical convergence properties ----------------------------------------------------------


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 6), st.integers(0, 5))
def test_extremes_monotone_on_random_runs(seed, n, prefix_len):
    g = random_strongly_connected(n, 0.5, (0.05, 0.95), seed=seed)
    rng = np.random.default_rng(seed)
    tr = execute(g, rng.random(n), None, random_word(g, seed=seed), 2000)
    assert (np.diff(tr.maxima) <= 0).all() and (np.diff(tr.minima) >= 0).all()
    assert (np.diff(tr.gaps) <= 0).all()
    assert (np.count_nonzero(np.diff(tr.states, axis=0), axis=1) <= 1).all()


def test_fair_schedulers_reach_consensus():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 7))
        g = random_strongly_connected(n, 0.4, (0.1, 0.9), seed=seed)
        prefix = [g.labels[int(k)] for k in rng.integers(len(g.labels), size=30)]
        tr = execute(g, rng.random(n), None, extend_to_bounded_fair(g, prefix), 200_000, stop_gap=1e-6)
        assert tr.gaps[-1] < 1e-6
        assert (np.diff(tr.gaps) <= 0).all()


def test_recurrent_delta_bound_comes_with_shrinking_gap():
    for seed in range(5):
        rng = np.random.default_rng(100 + seed)
        n = int(rng.integers(2, 6))
        g = random_strongly_connected(n, 0.5, (0.2, 0.8), seed=100 + seed)
        tr = execute(g, rng.random(n), None, periodic(g, g.labels), 4000)
        beta = (n - 1) * len(g.labels)
        hits = delta_bound_scan(tr, beta, 100)
        assert len(hits) >= 30
        assert tr.gaps[-1] < 1e-6
