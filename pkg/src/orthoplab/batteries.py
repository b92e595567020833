"""Reference problems and randomised batteries shared by the tests and the CLI."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .energy import ProblemSpec
from .exact import ModelSolution, sample
from .grid import BallSpec, Domain, GridFunction
from .regularity import (
    alternatives_diagnose,
    ball_params,
    degiorgi_level_check,
    min_principle_check,
    nonlinear_gradient,
)
from .solver import SolverConfig, continuation_solve

__all__ = [
    "STANDARD_PROBLEMS",
    "standard_spec",
    "solve_standard",
    "random_balls",
    "alternatives_battery",
    "level_battery",
    "calibrate_c0",
    "min_principle_battery",
    "dip_control",
]

STANDARD_PROBLEMS = ("model_p4", "model_p1.5", "saddle_p4", "saddle_p1.5")


def _boundary(name: str, domain: Domain) -> tuple[float, GridFunction]:
    kind, p_text = name.split("_p")
    p = float(p_text)
    if kind == "model":
        return p, sample(ModelSolution("separable", p), domain)
    if kind == "saddle":
        return p, GridFunction.from_callable(domain, lambda x1, x2: x1 * x2 + 0.3 * np.sin(2 * x1) + 0.2 * x2**2)
    raise KeyError(name)


def standard_spec(name: str, n: int = 33) -> ProblemSpec:
    """Dirichlet problem on ``[-1, 1]^2`` with model or saddle boundary data."""
    domain = Domain.square(n)
    p, bc = _boundary(name, domain)
    return ProblemSpec(p, 0.1, ProblemSpec.regime_for(p), domain, bc)


@lru_cache(maxsize=32)
def solve_standard(name: str, n: int = 33) -> tuple[ProblemSpec, GridFunction]:
    spec = standard_spec(name, n)
    u, _ = continuation_solve(spec, SolverConfig())
    return spec, u


def random_balls(domain: Domain, count: int, seed: int, r_range=(0.15, 0.5), margin: float = 0.0) -> list[BallSpec]:
    """Balls fully inside the grid, keeping ``margin`` to the boundary."""
    rng = np.random.default_rng(seed)
    (ox, oy), (ex, ey) = domain.origin, domain.extent
    out = []
    while len(out) < count:
        r = rng.uniform(*r_range)
        lo_x, hi_x = ox + r + margin, ox + ex - r - margin
        lo_y, hi_y = oy + r + margin, oy + ey - r - margin
        if lo_x >= hi_x or lo_y >= hi_y:
            continue
        out.append(BallSpec((rng.uniform(lo_x, hi_x), rng.uniform(lo_y, hi_y)), r))
    return out


@dataclass(frozen=True)
class BatteryResult:
    checks: int
    violations: list[dict]

    @property
    def ok(self) -> bool:
        return not self.violations


def alternatives_battery(u: GridFunction, p: float, balls: list[BallSpec], *, C0: float | None = None) -> BatteryResult:
    """At least one alternative must hold for each ball and component."""
    bad = []
    checks = 0
    for k, ball in enumerate(balls):
        for j in (1, 2):
            v, params = ball_params(u, p, ball, j, C0=C0)
            if params.M == 0:
                continue
            rep = alternatives_diagnose(v, ball, params)
            checks += 1
            if not rep.ok:
                bad.append({"ball": k, "center": list(ball.center), "radius": ball.radius, "j": j, **vars(rep)})
    return BatteryResult(checks, bad)


def level_battery(u: GridFunction, p: float, balls: list[BallSpec], C0: float | None, alpha: float = 0.25) -> tuple[BatteryResult, dict]:
    """Level-set step on every ball; also counts how often the hypothesis is met.

    ``C0=None`` uses the calibrated value.
    """
    bad = []
    counts: dict[str, int] = {}
    for k, ball in enumerate(balls):
        for j in (1, 2):
            v, params = ball_params(u, p, ball, j, alpha=alpha, C0=C0)
            verdict = degiorgi_level_check(v, ball, params)
            counts[verdict.verdict] = counts.get(verdict.verdict, 0) + 1
            if verdict.verdict == "VIOLATION":
                bad.append({"ball": k, "center": list(ball.center), "radius": ball.radius, "j": j, **vars(verdict)})
    return BatteryResult(sum(counts.values()), bad), counts


def calibrate_c0(problems, p: float, alpha: float = 0.25, *, max_power: int = 20) -> int:
    """Smallest power of two ``C0 >= 1`` giving no level-set violation across ``problems``.

    ``problems`` is a sequence of ``(u, balls)`` pairs solved at exponent ``p``.
    """
    for k in range(max_power + 1):
        C0 = float(2**k)
        if all(level_battery(u, p, balls, C0, alpha)[0].ok for u, balls in problems):
            return int(C0)
    raise RuntimeError("no admissible C0 found")


def min_principle_battery(u: GridFunction, p: float, balls: list[BallSpec], grad_tol: float = 1e-9) -> BatteryResult:
    """Minimum principle for both components of the nonlinear gradient."""
    ng = nonlinear_gradient(u, p)
    bad = []
    for k, ball in enumerate(balls):
        for j in (1, 2):
            rep = min_principle_check(ng[j], ball, grad_tol=grad_tol)
            if not rep.ok:
                bad.append({"ball": k, "center": list(ball.center), "radius": ball.radius, "j": j, **vars(rep)})
    return BatteryResult(2 * len(balls), bad)


def dip_control(domain: Domain) -> GridFunction:
    """Not a solution: ``u_x1`` has an interior minimum at the origin."""
    return GridFunction.from_callable(domain, lambda x1, x2: x1 * (1 - 0.5 * np.exp(-(x1**2 + x2**2) / 0.02)))
