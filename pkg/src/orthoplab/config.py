"""Versioned JSON run configurations for the command line interface."""

from __future__ import annotations

import hashlib
import json
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from .energy import ProblemSpec
from .exact import ModelSolution, sample
from .grid import Domain, GridFunction
from .solver import DEFAULT_SCHEDULE, SolverConfig

__all__ = [
    "ProblemConfig",
    "SolverSettings",
    "SolveRun",
    "TraceRun",
    "VerifyRun",
    "InequalitiesRun",
    "StreamRun",
    "RUNS",
    "parse_config",
    "config_hash",
]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ProblemConfig(_Strict):
    """Dirichlet data on the square ``[lo, hi]^2``.

    ``source="solve"`` minimises the energy; ``source="sample"`` takes the
    boundary function itself on the whole grid, which is a solution only for
    the model and affine data.
    """

    p: float = Field(gt=1)
    n: int = Field(33, ge=3)
    lo: float = -1.0
    hi: float = 1.0
    boundary: Literal["model", "affine", "saddle", "constant", "dip"] = "model"
    a: float = 1.0
    b: float = 0.0
    c: float = 0.0
    regime: Optional[Literal["degenerate", "singular"]] = None
    source: Literal["solve", "sample"] = "solve"

    def domain(self) -> Domain:
        return Domain.square(self.n, self.lo, self.hi)

    def boundary_function(self) -> GridFunction:
        d = self.domain()
        if self.boundary == "model":
            return sample(ModelSolution("separable", self.p), d)
        if self.boundary == "affine":
            return sample(ModelSolution("affine", self.p, self.a, self.b), d)
        if self.boundary == "constant":
            return GridFunction(d, np.full(d.n, self.c))
        if self.boundary == "saddle":
            return GridFunction.from_callable(d, lambda x1, x2: x1 * x2 + 0.3 * np.sin(2 * x1) + 0.2 * x2**2)
        return GridFunction.from_callable(d, lambda x1, x2: x1 * (1 - 0.5 * np.exp(-(x1**2 + x2**2) / 0.02)))

    def spec(self) -> ProblemSpec:
        regime = self.regime or ProblemSpec.regime_for(self.p)
        return ProblemSpec(self.p, 0.1, regime, self.domain(), self.boundary_function())


class SolverSettings(_Strict):
    grad_tol: float = Field(1e-9, gt=0)
    max_newton_iters: int = Field(100, ge=0)
    max_cg_iters: int = Field(5000, ge=1)
    cg_tol: float = Field(1e-10, gt=0)
    armijo_c: float = Field(1e-4, gt=0, lt=0.5)
    backtrack: float = Field(0.5, gt=0, lt=1)
    eps_schedule: list[float] = list(DEFAULT_SCHEDULE)

    @field_validator("eps_schedule")
    @classmethod
    def _positive(cls, v: list[float]) -> list[float]:
        if not v or any(e <= 0 for e in v):
            raise ValueError("eps_schedule must hold positive values")
        if any(b >= a for a, b in zip(v, v[1:])):
            raise ValueError("eps_schedule must be strictly decreasing")
        return v

    def build(self) -> SolverConfig:
        data = self.model_dump()
        data["eps_schedule"] = tuple(data["eps_schedule"])
        return SolverConfig(**data)


class SolveRun(_Strict):
    schema_: Literal["orthoplab.solve/1"] = Field(alias="schema")
    problem: ProblemConfig
    solver: SolverSettings = SolverSettings()


class TraceRun(_Strict):
    schema_: Literal["orthoplab.trace/1"] = Field(alias="schema")
    problem: ProblemConfig
    solver: SolverSettings = SolverSettings()
    center: tuple[float, float] = (0.0, 0.3)
    radius: float = Field(0.4, gt=0)
    component: Literal[1, 2] = 1
    alpha: float = Field(0.25, gt=0, lt=1)
    C0: Optional[float] = Field(None, ge=1)
    delta_min: Optional[float] = Field(None, gt=0, lt=0.5)
    max_stages: int = Field(64, ge=1)


class VerifyRun(_Strict):
    schema_: Literal["orthoplab.verify/1"] = Field(alias="schema")
    problems: list[ProblemConfig] = []
    solver: SolverSettings = SolverSettings()
    batteries: list[Literal["alternatives", "level", "min_principle"]] = ["alternatives", "level", "min_principle"]
    balls: int = Field(30, ge=1)
    min_principle_balls: int = Field(20, ge=1)
    negative_control: bool = False


class InequalitiesRun(_Strict):
    schema_: Literal["orthoplab.inequalities/1"] = Field(alias="schema")
    samples: int = Field(100_000, ge=1)
    q_grid: list[float] = [1.1, 1.25, 1.5, 1.75, 2.0]
    p_grid: list[float] = [2.5, 3.0, 4.0, 6.0]


class StreamRun(_Strict):
    schema_: Literal["orthoplab.stream/1"] = Field(alias="schema")
    problem: ProblemConfig
    solver: SolverSettings = SolverSettings()
    threshold: Optional[float] = Field(None, gt=0)


RUNS: dict[str, type[_Strict]] = {
    "solve": SolveRun,
    "trace": TraceRun,
    "verify": VerifyRun,
    "inequalities": InequalitiesRun,
    "stream": StreamRun,
}


def parse_config(command: str, text: str) -> _Strict:
    """Validate a JSON config for ``command``; raises ``ValueError`` on any schema error."""
    return RUNS[command].model_validate(json.loads(text))


def config_hash(command: str, cfg: _Strict, seed: int) -> str:
    """Content hash of the fully defaulted config, used to name the output directory."""
    payload = {"command": command, "seed": seed, "config": cfg.model_dump(mode="json", by_alias=True)}
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]
