"""One-command reproductions of the reference runs.

Each preset is an :class:`ExperimentConfig`, so ``reproduce`` and
``simulate`` share one code path. Horizons ``T`` are chosen long enough for
the qualitative behaviour to be visible:

========  =======================================================  ========
id        run                                                      T
========  =======================================================  ========
fig1b     3-agent line, (abcd)^w                                   2000
fig1c     random 11-agent graph (p=0.3, w=0.5), uniform edges      20000
fig2b     6-agent two-source graph, grouped periodic word          3000
fig2c     3-agent line with all weights 1, (abcd)^w                40
fig3a     3-agent line, (a^n b c^n d) for n = 1, 2, ...            20000
fig3b     3-agent line, state-feedback word, L=0.25, U=0.75        10000
fig4b     4-agent line, state-feedback word, L=0.2, U=0.8          10000
fig4c     4-agent line, ((bfdace)^3 a^10 e^10)^w                   3000
fig5c     2 agents, steering influence, (ab)^w, L=0.2, U=0.8        200
fig5d     3-agent line, steering influence, (abcd)^w, L=0.2, U=0.8  400
========  =======================================================  ========
"""

from __future__ import annotations

from . import reference as ref
from .config import ExperimentConfig
from .graph import InfluenceGraph, random_strongly_connected

FIG1C_SEED = 7
FIG1C_EDGE_PROBABILITY = 0.3


def fig1c_graph() -> InfluenceGraph:
    return random_strongly_connected(11, FIG1C_EDGE_PROBABILITY, 0.5, seed=FIG1C_SEED)


def _config(graph: InfluenceGraph, initial, scheduler: dict, steps: int, influence: dict | None = None,
            seed: int = 0) -> ExperimentConfig:
    return ExperimentConfig.model_validate(
        {
            "graph": graph.to_spec(),
            "initial": list(initial),
            "influence": influence or {"mode": "static"},
            "scheduler": scheduler,
            "steps": steps,
            "tolerance": 1e-6,
            "seed": seed,
        }
    )


def _periodic(word) -> dict:
    return {"type": "periodic", "word": list(word)}


FIG2B_WORD = ["a2", "a3"] * 5 + ["a4", "a5"] * 5 + ["a0", "a1"] * 5 + ["a6", "a7", "a8", "a9"]
FIG4C_WORD = list("bfdace") * 3 + ["a"] * 10 + ["e"] * 10


def _fig1b():
    return _config(ref.fig1a(), ref.FIG1A_INITIAL, _periodic("abcd"), 2000)


def _fig1c():
    return _config(fig1c_graph(), ref.FIG1C_INITIAL, {"type": "random", "seed": FIG1C_SEED}, 20000,
                   seed=FIG1C_SEED)


def _fig2b():
    return _config(ref.fig2a(), ref.FIG2A_INITIAL, _periodic(FIG2B_WORD), 3000)


def _fig2c():
    return _config(ref.fig1a(weight=1.0), ref.FIG1A_INITIAL, _periodic("abcd"), 40)


def _fig3a():
    return _config(ref.fig1a(), ref.FIG1A_INITIAL, {"type": "blocks", "start": 1}, 20000)


def _fig3b():
    return _config(ref.fig1a(), ref.FIG1A_INITIAL, {"type": "cons12", "L": 0.25, "U": 0.75}, 10000)


def _fig4b():
    return _config(ref.fig4a(), ref.FIG4A_INITIAL, {"type": "cons23", "L": 0.2, "U": 0.8}, 10000)


def _fig4c():
    return _config(ref.fig4a(), ref.FIG4A_INITIAL, _periodic(FIG4C_WORD), 3000)


def _fig5c():
    return _config(ref.fig5a(), ref.FIG5A_INITIAL, _periodic("ab"), 200, {"mode": "fig5a", "L": 0.2, "U": 0.8})


def _fig5d():
    return _config(ref.fig5b(), ref.FIG5B_INITIAL, _periodic("abcd"), 400, {"mode": "fig5b", "L": 0.2, "U": 0.8})


PRESETS = {
    "fig1b": _fig1b,
    "fig1c": _fig1c,
    "fig2b": _fig2b,
    "fig2c": _fig2c,
    "fig3a": _fig3a,
    "fig3b": _fig3b,
    "fig4b": _fig4b,
    "fig4c": _fig4c,
    "fig5c": _fig5c,
    "fig5d": _fig5d,
}

TITLES = {
    "fig1b": "three agents, (abcd)^w",
    "fig1c": "random 11-agent graph, uniform random edges",
    "fig2b": "two isolated source groups, grouped periodic word",
    "fig2c": "three agents with weight 1, (abcd)^w",
    "fig3a": "three agents, (a^n b c^n d) with growing n",
    "fig3b": "three agents, state-feedback word (L=0.25, U=0.75)",
    "fig4b": "four agents, state-feedback word (L=0.2, U=0.8)",
    "fig4c": "four agents, ((bfdace)^3 a^10 e^10)^w",
    "fig5c": "two agents, steering influence, (ab)^w",
    "fig5d": "three agents, steering influence, (abcd)^w",
}


def preset(figure_id: str) -> ExperimentConfig:
    try:
        return PRESETS[figure_id]()
    except KeyError:
        raise KeyError(f"unknown figure id {figure_id!r}; valid ids: {', '.join(PRESETS)}") from None
