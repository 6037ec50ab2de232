"""JSON experiment configuration (strict: unknown fields are rejected)."""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from . import words
from .dynamics import (
    BoundedScaled,
    ConfirmationBias,
    Fig5a,
    Fig5b,
    InfluenceFunction,
    Static,
    Table,
)
from .graph import InfluenceGraph, validate

SEED_ENV = "OTSLAB_SEED"


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class EdgeSpec(Strict):
    src: int = Field(alias="from")
    dst: int = Field(alias="to")
    label: str
    weight: float = 0.5


class GraphSpec(Strict):
    agents: int
    edges: list[EdgeSpec]

    def build(self) -> InfluenceGraph:
        g = InfluenceGraph.build(
            self.agents,
            [(e.src, e.dst) for e in self.edges],
            [e.weight for e in self.edges],
            labels=[e.label for e in self.edges],
        )
        problems = validate(g)
        if problems:
            raise ValueError("invalid graph: " + "; ".join(problems))
        return g

    @model_validator(mode="after")
    def _agents_in_range(self):
        for e in self.edges:
            for a in (e.src, e.dst):
                if not 1 <= a <= self.agents:
                    raise ValueError(f"edge {e.label} references agent {a}, expected 1..{self.agents}")
        return self


class Bounds(Strict):
    IL: float
    IU: float


class StaticInfluence(Strict):
    mode: Literal["static"] = "static"


class ConfirmationInfluence(Strict):
    mode: Literal["confirmation_bias"]
    scaled: Bounds | None = None


class Fig5aInfluence(Strict):
    mode: Literal["fig5a"]
    L: float
    U: float


class Fig5bInfluence(Strict):
    mode: Literal["fig5b"]
    L: float
    U: float


class TableInfluence(Strict):
    mode: Literal["table"]
    table: dict[str, list[float]]
    bins: int = 10


InfluenceSpec = Annotated[
    Union[StaticInfluence, ConfirmationInfluence, Fig5aInfluence, Fig5bInfluence, TableInfluence],
    Field(discriminator="mode"),
]


class PeriodicSpec(Strict):
    type: Literal["periodic"]
    word: list[str] = Field(min_length=1)


class RandomSpec(Strict):
    type: Literal["random"]
    seed: int | None = None
    probs: dict[str, float] | None = None


class Cons12Spec(Strict):
    type: Literal["cons12"]
    L: float
    U: float
    guard: int = 10**6


class Cons23Spec(Strict):
    type: Literal["cons23"]
    L: float
    U: float
    guard: int = 10**6


class ExtendSpec(Strict):
    type: Literal["extend"]
    prefix: list[str] = Field(default_factory=list)


class BlocksSpec(Strict):
    type: Literal["blocks"]
    start: int = 1


SchedulerSpec = Annotated[
    Union[PeriodicSpec, RandomSpec, Cons12Spec, Cons23Spec, ExtendSpec, BlocksSpec],
    Field(discriminator="type"),
]


class Outputs(Strict):
    csv: str | None = None
    svg: str | None = None


class ExperimentConfig(Strict):
    graph: GraphSpec
    initial: list[float]
    influence: InfluenceSpec = Field(default_factory=StaticInfluence)
    scheduler: SchedulerSpec
    steps: int = Field(ge=1)
    tolerance: float = 1e-6
    seed: int = 0
    outputs: Outputs = Field(default_factory=Outputs)

    @field_validator("initial")
    @classmethod
    def _in_unit_interval(cls, v):
        for k, x in enumerate(v):
            if not 0.0 <= x <= 1.0:
                raise ValueError(f"initial opinion of agent {k + 1} is {x}, outside [0,1]")
        return v

    @model_validator(mode="after")
    def _consistent(self):
        if len(self.initial) != self.graph.agents:
            raise ValueError(f"initial has {len(self.initial)} values for {self.graph.agents} agents")
        known = {e.label for e in self.graph.edges}
        used: list[str] = []
        sch = self.scheduler
        if isinstance(sch, PeriodicSpec):
            used += sch.word
        elif isinstance(sch, RandomSpec) and sch.probs:
            used += list(sch.probs)
        elif isinstance(sch, ExtendSpec):
            used += sch.prefix
        if isinstance(self.influence, TableInfluence):
            used += list(self.influence.table)
        missing = sorted(set(used) - known)
        if missing:
            raise ValueError(f"unknown edge labels: {', '.join(missing)}")
        return self

    # -- builders --------------------------------------------------------------

    def effective_seed(self) -> int:
        env = os.environ.get(SEED_ENV)
        if env is not None and env.strip():
            return int(env)
        if isinstance(self.scheduler, RandomSpec) and self.scheduler.seed is not None:
            return self.scheduler.seed
        return self.seed

    def build_graph(self) -> InfluenceGraph:
        return self.graph.build()

    def build_influence(self) -> InfluenceFunction:
        spec = self.influence
        if isinstance(spec, StaticInfluence):
            return Static()
        if isinstance(spec, ConfirmationInfluence):
            if spec.scaled is None:
                return ConfirmationBias()
            return BoundedScaled(ConfirmationBias(), spec.scaled.IL, spec.scaled.IU)
        if isinstance(spec, Fig5aInfluence):
            return Fig5a(spec.L, spec.U)
        if isinstance(spec, Fig5bInfluence):
            return Fig5b(spec.L, spec.U)
        return Table(spec.table, spec.bins)

    def build_scheduler(self, graph: InfluenceGraph, seed: int | None = None) -> words.Scheduler:
        spec = self.scheduler
        if isinstance(spec, PeriodicSpec):
            return words.periodic(graph, spec.word)
        if isinstance(spec, RandomSpec):
            return words.random_word(graph, spec.probs, self.effective_seed() if seed is None else seed)
        if isinstance(spec, Cons12Spec):
            return words.cons12(graph, spec.L, spec.U, spec.guard)
        if isinstance(spec, Cons23Spec):
            return words.cons23(graph, spec.L, spec.U, spec.guard)
        if isinstance(spec, ExtendSpec):
            return words.extend_to_bounded_fair(graph, spec.prefix)
        return words.growing_blocks(graph, spec.start)


def load_config(path: str | Path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return ExperimentConfig.model_validate(data)
