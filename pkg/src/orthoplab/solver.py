"""Newton-CG minimisation of the regularised energy and epsilon continuation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .energy import (
    InvalidSpec,
    ProblemSpec,
    energy_gradient,
    energy_orthotropic,
    energy_regularized,
    g,
    edge_weights,
    hessian_apply,
    hessian_diagonal,
)
from .grid import Domain, GridFunction, discrete_gradient

__all__ = [
    "SolverConfig",
    "SolveReport",
    "StageRecord",
    "NonConvergence",
    "InvalidSpec",
    "DEFAULT_SCHEDULE",
    "boundary_extension",
    "solve_regularized",
    "continuation_solve",
    "weak_residual",
    "grad_norm",
]

logger = logging.getLogger(__name__)

DEFAULT_SCHEDULE: tuple[float, ...] = tuple(10.0**-k for k in range(1, 7))

# Slack for energy comparisons once decreases reach the size of rounding noise.
_ROUNDING = 4 * np.finfo(float).eps


@dataclass(frozen=True)
class SolverConfig:
    """Newton-CG settings.

    ``grad_tol`` bounds the sup-norm of the energy gradient divided by the
    cell area, which is the strong-form residual of the discrete equation.
    """

    grad_tol: float = 1e-9
    max_newton_iters: int = 100
    max_cg_iters: int = 5000
    cg_tol: float = 1e-10
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    eps_schedule: tuple[float, ...] = DEFAULT_SCHEDULE

    def __post_init__(self) -> None:
        object.__setattr__(self, "eps_schedule", tuple(float(e) for e in self.eps_schedule))
        if self.grad_tol <= 0 or self.cg_tol <= 0:
            raise InvalidSpec("tolerances must be positive")
        if self.max_newton_iters < 0 or self.max_cg_iters < 1:
            raise InvalidSpec("iteration limits must be nonnegative")
        if not 0 < self.armijo_c < 0.5 or not 0 < self.backtrack < 1:
            raise InvalidSpec("need Armijo constant in (0, 1/2) and backtrack factor in (0, 1)")
        _check_schedule(self.eps_schedule)


def _check_schedule(schedule) -> None:
    if not schedule or any(e <= 0 for e in schedule):
        raise InvalidSpec("eps schedule must be a nonempty list of positive values")
    if any(b >= a for a, b in zip(schedule, schedule[1:])):
        raise InvalidSpec("eps schedule must be strictly decreasing")


@dataclass(frozen=True)
class StageRecord:
    eps: float
    energy: float
    p_energy: float
    grad_norm: float
    iters: int
    sup_change: float


@dataclass
class SolveReport:
    iters: int
    energy_history: list[float]
    final_grad_norm: float
    converged: bool
    eps_trace: list[StageRecord] = field(default_factory=list)
    energy_bound_C: float | None = None

    def to_dict(self) -> dict:
        return {
            "iters": self.iters,
            "energy_history": list(self.energy_history),
            "final_grad_norm": self.final_grad_norm,
            "converged": self.converged,
            "eps_trace": [vars(s) for s in self.eps_trace],
            "energy_bound_C": self.energy_bound_C,
        }


class NonConvergence(RuntimeError):
    """Newton iteration stopped before reaching the gradient tolerance."""

    def __init__(self, message: str, best: GridFunction, report: SolveReport):
        super().__init__(message)
        self.best = best
        self.report = report


Initial = Union[str, GridFunction]


def boundary_extension(boundary: GridFunction) -> GridFunction:
    """Transfinite bilinear (Coons) interpolation of the boundary values.

    Reproduces bilinear, hence affine, data exactly.
    """
    b = boundary.values
    nx, ny = boundary.domain.n
    s = np.linspace(0.0, 1.0, nx)[:, None]
    t = np.linspace(0.0, 1.0, ny)[None, :]
    edges = (1 - s) * b[0:1, :] + s * b[-1:, :] + (1 - t) * b[:, 0:1] + t * b[:, -1:]
    corners = (
        (1 - s) * (1 - t) * b[0, 0]
        + s * (1 - t) * b[-1, 0]
        + (1 - s) * t * b[0, -1]
        + s * t * b[-1, -1]
    )
    out = edges - corners
    mask = boundary.domain.interior_mask()
    return boundary.with_values(np.where(mask, out, b))


def _initial_iterate(spec: ProblemSpec, initial: Initial) -> GridFunction:
    mask = spec.domain.interior_mask()
    if isinstance(initial, GridFunction):
        return spec.boundary.with_values(np.where(mask, initial.values, spec.boundary.values))
    if initial == "coons":
        return boundary_extension(spec.boundary)
    if initial == "zero":
        return spec.boundary.with_values(np.where(mask, 0.0, spec.boundary.values))
    raise InvalidSpec(f"unknown initial iterate {initial!r}")


def grad_norm(spec: ProblemSpec, u: GridFunction) -> float:
    """Sup-norm of the energy gradient per unit cell area."""
    return float(np.max(np.abs(energy_gradient(spec, u).values)) / spec.domain.cell_area)


def _newton_direction(spec, u, grad, config, forcing, secant=False):
    mask = spec.domain.interior_mask()
    size = int(mask.sum())
    diag = hessian_diagonal(spec, u, secant)[mask]

    def matvec(x):
        w = np.zeros(spec.domain.n)
        w[mask] = x
        return hessian_apply(spec, u, u.with_values(w), secant).values[mask]

    op = LinearOperator((size, size), matvec=matvec, dtype=float)
    prec = LinearOperator((size, size), matvec=lambda x: x / diag, dtype=float)
    sol, _ = cg(op, -grad[mask], rtol=forcing, atol=0.0, maxiter=config.max_cg_iters, M=prec)
    d = np.zeros(spec.domain.n)
    d[mask] = sol
    return d


def solve_regularized(
    spec: ProblemSpec,
    config: SolverConfig | None = None,
    initial: Initial = "coons",
) -> tuple[GridFunction, SolveReport]:
    """Minimise the regularised energy for fixed ``spec.eps > 0``.

    Raises:
        InvalidSpec: if ``spec.eps == 0``.
        NonConvergence: if the gradient tolerance is not met; carries the
            last iterate and the report.
    """
    config = config or SolverConfig()
    if spec.eps <= 0:
        raise InvalidSpec("eps = 0 is not solvable directly; use continuation_solve")
    u = _initial_iterate(spec, initial)
    energy = energy_regularized(spec, u).total
    history = [energy]
    area = spec.domain.cell_area
    grad = energy_gradient(spec, u).values
    gnorm = float(np.max(np.abs(grad))) / area
    gnorm0 = max(gnorm, 1e-300)
    iters = 0
    while gnorm > config.grad_tol and iters < config.max_newton_iters:
        forcing = max(config.cg_tol, min(0.1, np.sqrt(gnorm / gnorm0)))
        d = _newton_direction(spec, u, grad, config, forcing)
        slope = float(np.sum(grad * d))
        if not slope < 0:
            d = -grad / hessian_diagonal(spec, u)
            slope = float(np.sum(grad * d))
        step = 1.0
        while True:
            trial = u.with_values(u.values + step * d)
            e_trial = energy_regularized(spec, trial).total
            if e_trial <= energy + config.armijo_c * step * slope + _ROUNDING * abs(energy):
                break
            step *= config.backtrack
            if step < 1e-14:
                report = SolveReport(iters, history, gnorm, False)
                raise NonConvergence("line search failed", u, report)
        if spec.regime == "singular":
            # Newton overshoots where |t| >> sqrt(eps), and a single node can flip
            # sign every step while the rest still pass Armijo. The secant-weighted
            # step minimises a quadratic majorant, so a full step never raises the energy.
            d_mm = _newton_direction(spec, u, grad, config, forcing, secant=True)
            mm = u.with_values(u.values + d_mm)
            e_mm = energy_regularized(spec, mm).total
            if e_mm < e_trial:
                trial, e_trial, step = mm, e_mm, 1.0
        u, energy = trial, e_trial
        history.append(energy)
        grad = energy_gradient(spec, u).values
        gnorm = float(np.max(np.abs(grad))) / area
        iters += 1
        logger.debug("newton %d: energy %.16g residual %.3e step %.3g", iters, energy, gnorm, step)
    converged = gnorm <= config.grad_tol
    report = SolveReport(iters, history, gnorm, converged)
    if not converged:
        raise NonConvergence(f"residual {gnorm:.3e} after {iters} Newton steps", u, report)
    return u, report


def _bound_exponent(spec: ProblemSpec) -> float | None:
    if spec.regime == "singular":
        return spec.p / 2
    return spec.p / (spec.p - 2) if spec.p > 2 else None


def continuation_solve(
    spec: ProblemSpec,
    config: SolverConfig | None = None,
    schedule: tuple[float, ...] | None = None,
    initial: Initial = "coons",
) -> tuple[GridFunction, SolveReport]:
    """Solve along a decreasing eps schedule, warm-starting each stage.

    The report's ``energy_bound_C`` is the smallest ``C`` with
    ``sum_i |u_xi|_p^p <= C * (sum_i |Phi_xi|_p^p + eps**kappa * |Omega|)``
    over all stages, ``Phi`` being the boundary extension.
    """
    config = config or SolverConfig()
    schedule = tuple(config.eps_schedule if schedule is None else schedule)
    _check_schedule(schedule)
    u = _initial_iterate(spec, initial)
    stages: list[StageRecord] = []
    total_iters = 0
    report = None
    for k, eps in enumerate(schedule):
        stage_spec = spec.with_eps(eps)
        try:
            new, report = solve_regularized(stage_spec, config, u)
        except NonConvergence as exc:
            total_iters += exc.report.iters
            exc.report.iters = total_iters
            exc.report.eps_trace = stages
            raise NonConvergence(f"stage {k} (eps={eps:g}): {exc}", exc.best, exc.report) from exc
        total_iters += report.iters
        stages.append(
            StageRecord(
                eps=eps,
                energy=report.energy_history[-1],
                p_energy=spec.p * energy_orthotropic(new, spec.p),
                grad_norm=report.final_grad_norm,
                iters=report.iters,
                sup_change=float(np.max(np.abs(new.values - u.values))),
            )
        )
        u = new
    kappa = _bound_exponent(spec)
    area = spec.domain.extent[0] * spec.domain.extent[1]
    ref = spec.p * energy_orthotropic(boundary_extension(spec.boundary), spec.p)
    bound_c = 0.0
    for s in stages:
        denom = ref + (s.eps**kappa * area if kappa is not None else 0.0)
        if denom > 0:
            bound_c = max(bound_c, s.p_energy / denom)
    assert report is not None
    final = SolveReport(total_iters, report.energy_history, report.final_grad_norm, True, stages, bound_c)
    return u, final


def _bump(r: np.ndarray) -> np.ndarray:
    out = np.zeros_like(r)
    inside = r < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
    return out


def _test_functions(box: tuple[tuple[float, float], tuple[float, float]], trials: int, seed: int):
    """Parameters of smooth test functions supported in random discs inside ``box``."""
    rng = np.random.default_rng(seed)
    (ox, oy), (ex, ey) = box
    out = []
    for _ in range(trials):
        c = (ox + ex * rng.uniform(0.3, 0.7), oy + ey * rng.uniform(0.3, 0.7))
        room = min(c[0] - ox, ox + ex - c[0], c[1] - oy, oy + ey - c[1])
        rho = room * rng.uniform(0.5, 0.95)
        out.append((c, rho, rng.normal(size=6)))
    return out


def _eval_test_function(domain: Domain, params) -> np.ndarray:
    (cx, cy), rho, a = params
    x1, x2 = domain.coords()
    s1, s2 = (x1 - cx) / rho, (x2 - cy) / rho
    poly = a[0] + a[1] * s1 + a[2] * s2 + a[3] * s1 * s2 + a[4] * np.sin(np.pi * s1) + a[5] * np.cos(np.pi * s2)
    return _bump(np.hypot(s1, s2)) * poly


def weak_residual(
    spec: ProblemSpec | float,
    u: GridFunction,
    *,
    trials: int = 16,
    seed: int = 0,
    box: tuple[tuple[float, float], tuple[float, float]] | None = None,
) -> float:
    """Largest ``|sum_i sum_edges w g_{p-2}(D_i u) D_i phi|`` over random test functions.

    Each ``phi`` is a smooth bump, supported in a disc inside ``box`` (default
    the grid's bounding box), normalised so that
    ``(sum_i sum_edges w |D_i phi|**p') ** (1/p') == 1``.  The test functions
    depend only on ``seed`` and ``box``, never on the resolution.
    """
    p = spec.p if isinstance(spec, ProblemSpec) else float(spec)
    q = p / (p - 1)
    d = u.domain
    box = box or (d.origin, d.extent)
    w1, w2 = edge_weights(d)
    du1, du2 = discrete_gradient(u).components
    f1, f2 = w1 * g(p - 2, du1), w2 * g(p - 2, du2)
    worst = 0.0
    for params in _test_functions(box, trials, seed):
        phi = GridFunction(d, _eval_test_function(d, params))
        dp1, dp2 = discrete_gradient(phi).components
        norm = (np.sum(w1 * np.abs(dp1) ** q) + np.sum(w2 * np.abs(dp2) ** q)) ** (1 / q)
        if norm == 0:
            continue
        worst = max(worst, abs(float(np.sum(f1 * dp1) + np.sum(f2 * dp2))) / norm)
    return worst
