"""Discrete diagnostics for the gradient regularity estimates.

Fields are :class:`GridFunction` objects on whatever grid they naturally live
on: forward differences of a nodal ``u`` on the staggered edge grids, cell
averages on the cell-centre grid.  Ball membership always uses the physical
point locations, and the measure of a discrete set is its point count times
the cell area.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from importlib import resources
from typing import Literal

import numpy as np

from .energy import g
from .grid import BallSpec, Domain, GridFunction, ball_mask, circle_nodes, discrete_gradient, distance_to
from .inequalities import F_beta, FBetaSpec, Z_of_zeta, Zeta

__all__ = [
    "EmptyBall",
    "BallTooSmall",
    "InvalidCatalogueChoice",
    "ZeroGradient",
    "NonlinearGradient",
    "Phi",
    "DeGiorgiParams",
    "LevelVerdict",
    "AlternativeReport",
    "TraceStage",
    "OscillationTrace",
    "MinPrincipleReport",
    "YnTrace",
    "SVReport",
    "nonlinear_gradient",
    "cell_gradient",
    "oscillation",
    "fit_slope",
    "dirichlet_energy",
    "bump_cutoff",
    "apriori_lipschitz_check",
    "apriori_sobolev_check",
    "caccioppoli_ratio_degenerate",
    "caccioppoli_ratio_singular",
    "degiorgi_params",
    "ball_params",
    "degiorgi_level_check",
    "alternatives_diagnose",
    "decay_trace",
    "min_principle_check",
    "fast_convergence_Yn",
    "sv_alternative_check",
    "poincare_check",
    "chain_rule_defect",
    "load_c0",
]

Regime = Literal["degenerate", "singular"]


class EmptyBall(ValueError):
    """The ball contains no grid points of the field."""


class BallTooSmall(ValueError):
    """The ball radius is below the resolution floor."""


class InvalidCatalogueChoice(ValueError):
    """The test-function pair is outside the admissible catalogue."""


class ZeroGradient(ValueError):
    """A nonzero grid function with vanishing discrete gradient."""


@dataclass(frozen=True, eq=False)
class NonlinearGradient:
    """``v1, v2`` with the regime that chose the transform."""

    v1: GridFunction
    v2: GridFunction
    regime: Regime

    def __getitem__(self, j: int) -> GridFunction:
        """Component ``j`` in 1-based axis numbering."""
        return (self.v1, self.v2)[j - 1]


def cell_gradient(u: GridFunction) -> tuple[GridFunction, GridFunction]:
    """Forward differences averaged onto cell centres."""
    d1, d2 = discrete_gradient(u).components
    dual = u.domain.dual()
    return GridFunction(dual, 0.5 * (d1[:, :-1] + d1[:, 1:])), GridFunction(dual, 0.5 * (d2[:-1, :] + d2[1:, :]))


def _regime(p: float, regime: Regime | None) -> Regime:
    return regime or ("degenerate" if p >= 2 else "singular")


def nonlinear_gradient(
    u: GridFunction, p: float, regime: Regime | None = None, location: str = "staggered"
) -> NonlinearGradient:
    """``v_j = g_{(p-2)/2}(u_xj)`` for ``p >= 2``; ``v_j = u_xj`` in the singular regime.

    ``location="staggered"`` keeps each component on its own edge grid, where
    it is the exact forward difference; ``"cell"`` uses cell averages so both
    components share one grid.
    """
    if location == "staggered":
        vf = discrete_gradient(u)
        comps = (vf.component(0), vf.component(1))
    elif location == "cell":
        comps = cell_gradient(u)
    else:
        raise ValueError(f"unknown location {location!r}")
    regime = _regime(p, regime)
    if regime == "degenerate":
        a = (p - 2) / 2
        comps = tuple(c.with_values(g(a, c.values)) for c in comps)
    return NonlinearGradient(*comps, regime)


def _ball_values(f: GridFunction, ball: BallSpec) -> np.ndarray:
    return f.values[ball_mask(f.domain, ball)]


def oscillation(f: GridFunction, ball: BallSpec) -> float:
    vals = _ball_values(f, ball)
    if vals.size == 0:
        raise EmptyBall(f"no grid points within radius {ball.radius:g} of {ball.center}")
    return float(vals.max() - vals.min())


def fit_slope(radii, values) -> float:
    """Least-squares slope of ``log(values)`` against ``log(radii)``."""
    return float(np.polyfit(np.log(np.asarray(radii)), np.log(np.asarray(values)), 1)[0])


def _energy_terms(f: GridFunction, center, r_hi: float, r_lo: float | None = None) -> np.ndarray:
    vf = discrete_gradient(f)
    parts = []
    for axis in (0, 1):
        comp = vf.component(axis)
        d = distance_to(comp.domain, center)
        sel = d <= r_hi
        if r_lo is not None:
            sel &= d > r_lo
        parts.append(comp.values[sel] ** 2 * f.domain.cell_area)
    return np.concatenate(parts)


def dirichlet_energy(f: GridFunction, center, r_hi: float, r_lo: float | None = None) -> float:
    """``sum |D f|**2 * h1 * h2`` over difference points with ``r_lo < |x - c| <= r_hi``.

    Summed with ``math.fsum``: the correctly rounded sum never decreases when
    terms are added, so energies of nested regions compare exactly.
    """
    return math.fsum(_energy_terms(f, center, r_hi, r_lo))


def bump_cutoff(domain: Domain, ball: BallSpec) -> GridFunction:
    """Smooth cutoff ``exp(1 - 1/(1 - s**2))`` with ``s = |x - c|/R``; 1 at the centre."""
    s = distance_to(domain, ball.center) / ball.radius
    out = np.zeros(domain.n)
    inside = s < 1
    out[inside] = np.exp(1 - 1 / (1 - s[inside] ** 2))
    return GridFunction(domain, out)


def _mean_p_energy(cells: tuple[GridFunction, GridFunction], p: float, ball: BallSpec) -> float:
    mask = ball_mask(cells[0].domain, ball)
    if not mask.any():
        raise EmptyBall("ball contains no cell centres")
    return float(np.mean(sum(np.abs(c.values[mask]) ** p for c in cells)))


def apriori_lipschitz_check(u: GridFunction, p: float, ball: BallSpec) -> float:
    """``max_i sup_{B_{R/2}} |u_xi| / (mean_{B_R} sum_i |u_xi|**p)**(1/p)``.

    A vanishing denominator returns 0.
    """
    cells = cell_gradient(u)
    denom = _mean_p_energy(cells, p, ball) ** (1 / p)
    if denom == 0:
        return 0.0
    half = ball_mask(cells[0].domain, ball.scaled(0.5))
    if not half.any():
        raise EmptyBall("half ball contains no cell centres")
    return max(float(np.max(np.abs(c.values[half]))) for c in cells) / denom


def apriori_sobolev_check(u: GridFunction, p: float, alpha: float, ball: BallSpec) -> float:
    """``sum_i int_{B_{R/2}} |grad g_{alpha-1}(u_xi)|**2 / (mean_{B_R} sum_i |u_xi|**p)**(2 alpha/p)``."""
    if alpha < p / 2:
        raise ValueError("alpha must be at least p/2")
    cells = cell_gradient(u)
    denom = _mean_p_energy(cells, p, ball) ** (2 * alpha / p)
    if denom == 0:
        return 0.0
    num = sum(dirichlet_energy(c.with_values(g(alpha - 1, c.values)), ball.center, ball.radius / 2) for c in cells)
    return num / denom


@dataclass(frozen=True)
class Phi:
    """Catalogue of ``Phi`` with ``Phi * Phi'' >= 0``: identity, ``g_m`` (``m >= 1``), exp, cosh, sinh."""

    name: str
    m: float = 1.0

    NAMES = ("identity", "power", "exp", "cosh", "sinh")

    def __post_init__(self) -> None:
        if self.name not in self.NAMES:
            raise InvalidCatalogueChoice(f"unknown Phi {self.name!r}")
        if self.name == "power" and self.m < 1:
            raise InvalidCatalogueChoice("odd power g_m needs m >= 1")

    def value(self, t: np.ndarray) -> np.ndarray:
        if self.name == "identity":
            return t
        if self.name == "power":
            return g(self.m, t)
        return getattr(np, self.name)(t)

    def deriv(self, t: np.ndarray) -> np.ndarray:
        if self.name == "identity":
            return np.ones_like(t)
        if self.name == "power":
            return (self.m + 1) * np.abs(t) ** self.m
        return {"exp": np.exp, "cosh": np.sinh, "sinh": np.cosh}[self.name](t)


def _fwd(f: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Forward difference cropped to the common base points ``[:-1, :-1]``."""
    d = np.diff(f, axis=axis) / h
    return d[:, :-1] if axis == 0 else d[:-1, :]


def _base(f: np.ndarray) -> np.ndarray:
    return f[:-1, :-1]


def caccioppoli_ratio_degenerate(
    u: GridFunction, p: float, phi: Phi, zeta: Zeta, eta: GridFunction, j: int, k: int
) -> tuple[float, float, float]:
    """``(lhs, rhs, lhs/rhs)`` of the energy estimate for ``v_i = g_{(p-2)/2}(u_xi)``.

    The right side is the constant-free product of the two square-rooted sums.

    ``eta`` must live on the cell-centre grid of ``u``; indices ``j, k`` are 1-based.
    """
    if not isinstance(phi, Phi):
        raise InvalidCatalogueChoice("Phi must come from the catalogue")
    if not zeta.convex_nonnegative:
        raise InvalidCatalogueChoice(f"zeta {zeta.name!r} is not convex and nonnegative")
    cells = [c.values for c in cell_gradient(u)]
    if eta.domain != u.domain.dual():
        raise ValueError("eta must live on the cell-centre grid")
    h = eta.domain.h
    a = (p - 2) / 2
    uk, uj = _base(cells[k - 1]), _base(cells[j - 1])
    e = _base(eta.values)
    lhs = 0.0
    for i in (0, 1):
        vi = g(a, cells[i])
        lhs += float(np.sum(_fwd(vi, k - 1, h[k - 1]) ** 2 * phi.deriv(uk) ** 2 * zeta.value(uj) * e**2))
    A = B = 0.0
    for i in (0, 1):
        w = np.abs(_base(cells[i])) ** (p - 2) * _fwd(eta.values, i, h[i]) ** 2
        A += float(np.sum(w * phi.value(uk) ** 4))
        B += float(np.sum(w * zeta.value(uj) ** 2))
    rhs = math.sqrt(A * B)
    return lhs, rhs, _ratio(lhs, rhs)


def _ratio(lhs: float, rhs: float) -> float:
    if rhs == 0:
        return 0.0 if lhs == 0 else math.inf
    return lhs / rhs


def caccioppoli_ratio_singular(
    u: GridFunction, p: float, zeta: Zeta, eta: GridFunction, j: int
) -> tuple[float, float, float]:
    """``(lhs, rhs, lhs/rhs)`` of the singular-regime energy estimate for ``Z(u_xj)``.

    The LHS skips points with ``|u_xi| <= 1e-12`` where the weight is singular.
    """
    if not zeta.monotone:
        raise InvalidCatalogueChoice(f"zeta {zeta.name!r} is not monotone")
    cells = [c.values for c in cell_gradient(u)]
    if eta.domain != u.domain.dual():
        raise ValueError("eta must live on the cell-centre grid")
    h = eta.domain.h
    uj = cells[j - 1]
    Z = Z_of_zeta(zeta, uj)
    e = _base(eta.values)
    lhs = 0.0
    for i in (0, 1):
        gi = np.abs(_base(cells[i]))
        mask = gi > 1e-12
        w = np.where(mask, np.power(np.where(mask, gi, 1.0), p - 2), 0.0)
        lhs += float(np.sum(w * _fwd(Z, i, h[i]) ** 2 * e**2))
    grad_norm = np.hypot(_base(cells[0]), _base(cells[1]))
    eta_grad2 = _fwd(eta.values, 0, h[0]) ** 2 + _fwd(eta.values, 1, h[1]) ** 2
    e11 = np.gradient(np.gradient(eta.values, h[0], axis=0), h[0], axis=0)
    e22 = np.gradient(np.gradient(eta.values, h[1], axis=1), h[1], axis=1)
    e12 = np.gradient(np.gradient(eta.values, h[0], axis=0), h[1], axis=1)
    hess = _base(np.sqrt(e11**2 + e22**2 + 2 * e12**2))
    ujb = _base(uj)
    rhs = float(
        np.sum(grad_norm ** (p - 1) * (grad_norm * np.abs(zeta.deriv(ujb)) + np.abs(zeta.value(ujb))) * (eta_grad2 + hess))
    )
    return lhs, rhs, _ratio(lhs, rhs)


@dataclass(frozen=True)
class DeGiorgiParams:
    """Constants of the oscillation-reduction step on one ball.

    ``expo`` is the power of ``M`` multiplying ``nu`` in the level-set
    threshold: ``2p + 4(1 - 2/p)`` for ``p > 2`` and ``2`` in the singular regime.
    """

    p: float
    alpha: float
    C0: float
    L_R: float
    M: float
    regime: Regime
    nu: float
    expo: float
    delta: float

    @property
    def level_threshold(self) -> float:
        return self.nu * self.M**self.expo

    @property
    def energy_threshold(self) -> float:
        """Annulus energy lower bound in the second alternative."""
        return self.nu * self.M**2 * self.M**self.expo / (512 * math.pi)


def degiorgi_params(p: float, alpha: float, C0: float, L_R: float, M: float, regime: Regime | None = None) -> DeGiorgiParams:
    regime = _regime(p, regime)
    if C0 < 1:
        raise ValueError("C0 must be at least 1")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if regime == "degenerate":
        nu = (2.0 ** (p + 4)) ** -6 / (C0**2 * math.pi) * L_R ** (4 - p * p - 2 * p)
        expo = 2 * p + 4 * (1 - 2 / p)
    else:
        nu = 16.0**-2 / (C0**2 * math.pi) * L_R**-2
        expo = 2.0
    delta = math.sqrt(nu / 2 * M**expo)
    return DeGiorgiParams(p, alpha, C0, L_R, M, regime, nu, expo, delta)


def _field(u: GridFunction, p: float, j: int, regime: Regime | None) -> GridFunction:
    return nonlinear_gradient(u, p, regime)[j]


def _lipschitz_bound(u: GridFunction, ball: BallSpec) -> float:
    g1, g2 = cell_gradient(u)
    norm = np.hypot(g1.values, g2.values)
    d = distance_to(g1.domain, ball.center)
    mask = d <= ball.radius
    if not mask.any():
        mask = d == d.min()
    return 1.0 + float(norm[mask].max())


def ball_params(
    u: GridFunction, p: float, ball: BallSpec, j: int = 1, *, alpha: float = 0.25, C0: float | None = None,
    regime: Regime | None = None,
) -> tuple[GridFunction, DeGiorgiParams]:
    """The field ``v_j`` and the step constants for ``ball``; ``C0`` defaults to the calibrated value."""
    regime = _regime(p, regime)
    v = _field(u, p, j, regime)
    C0 = load_c0(p, alpha, regime) if C0 is None else C0
    M = oscillation(v, ball)
    return v, degiorgi_params(p, alpha, C0, _lipschitz_bound(u, ball), M, regime)


@dataclass(frozen=True)
class LevelVerdict:
    verdict: str
    fraction: float
    threshold: float
    sup_half: float
    bound_half: float

    @property
    def slack(self) -> float:
        """How far below the conclusion bound the half-ball supremum stays."""
        return self.bound_half - self.sup_half


def degiorgi_level_check(v: GridFunction, ball: BallSpec, params: DeGiorgiParams) -> LevelVerdict:
    """Small super-level set on ``B_R`` should force ``V <= (1 - alpha/2) M`` on ``B_{R/2}``.

    Verdicts: ``holds``, ``hypothesis-fails`` and ``VIOLATION``.
    """
    vals = _ball_values(v, ball)
    if vals.size == 0:
        raise EmptyBall("ball contains no field points")
    m = vals.min()
    V = vals - m
    M = float(V.max())
    half = _ball_values(v, ball.scaled(0.5)) - m
    sup_half = float(half.max()) if half.size else 0.0
    bound = (1 - params.alpha / 2) * M
    if M == 0:
        return LevelVerdict("holds", 0.0, 0.0, sup_half, bound)
    fraction = float(np.count_nonzero(V > (1 - params.alpha) * M)) / vals.size
    threshold = params.nu * M**params.expo
    if fraction > threshold:
        return LevelVerdict("hypothesis-fails", fraction, threshold, sup_half, bound)
    ok = sup_half <= bound * (1 + 1e-12)
    return LevelVerdict("holds" if ok else "VIOLATION", fraction, threshold, sup_half, bound)


@dataclass(frozen=True)
class AlternativeReport:
    b1: bool
    b2: bool
    delta: float
    osc_inner: float
    osc_outer: float
    inner_points: int
    annulus_energy: float
    energy_threshold: float

    @property
    def ok(self) -> bool:
        return self.b1 or self.b2


def alternatives_diagnose(v: GridFunction, ball: BallSpec, params: DeGiorgiParams, delta: float | None = None) -> AlternativeReport:
    """Evaluate both alternatives: oscillation decay on ``B_{delta R}`` or annulus energy.

    An inner ball holding no field points has zero oscillation.
    """
    delta = params.delta if delta is None else delta
    outer = oscillation(v, ball)
    inner_vals = _ball_values(v, ball.scaled(delta)) if delta > 0 else np.empty(0)
    inner = float(np.ptp(inner_vals)) if inner_vals.size else 0.0
    energy = dirichlet_energy(v, ball.center, ball.radius, ball.radius * delta)
    thr = params.energy_threshold
    return AlternativeReport(
        b1=inner <= 7 / 8 * outer,
        b2=energy >= thr and energy > 0,
        delta=delta,
        osc_inner=inner,
        osc_outer=outer,
        inner_points=int(inner_vals.size),
        annulus_energy=energy,
        energy_threshold=thr,
    )


@dataclass(frozen=True)
class TraceStage:
    n: int
    R_n: float
    M_n: float
    delta_n: float
    alternative: str
    annulus_energy: float


@dataclass
class OscillationTrace:
    stages: list[TraceStage]
    total_energy: float
    b2_energy_sum: float
    b1_contraction_ok: bool

    @property
    def bookkeeping_ok(self) -> bool:
        """Exact comparison; both sides are correctly rounded sums of the same terms."""
        return self.b2_energy_sum <= self.total_energy

    @property
    def monotone(self) -> bool:
        ms = [s.M_n for s in self.stages]
        return all(b <= a for a, b in zip(ms, ms[1:]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "R_n", "M_n", "delta_n", "alternative", "annulus_energy"])
        for s in self.stages:
            w.writerow([s.n, f"{s.R_n:.17g}", f"{s.M_n:.17g}", f"{s.delta_n:.17g}", s.alternative, f"{s.annulus_energy:.17g}"])
        return buf.getvalue()


def decay_trace(
    u: GridFunction,
    p: float,
    x0,
    R0: float,
    *,
    j: int = 1,
    alpha: float = 0.25,
    C0: float | None = None,
    regime: Regime | None = None,
    delta_min: float | None = None,
    max_stages: int = 64,
) -> OscillationTrace:
    """Iterate the oscillation-reduction step on shrinking concentric balls.

    ``R_{n+1} = delta_n R_n`` with ``delta_n`` from :func:`degiorgi_params`,
    raised to ``delta_min`` when given.  A stage is labelled ``B1`` when the
    oscillation contracts by 7/8 and ``B2`` otherwise; the energy bookkeeping
    sums the annulus energies of every stage where the energy alternative
    holds, whatever its label.  The run ends with a ``stopped`` row once the
    radius drops below three grid steps, the oscillation vanishes or
    ``max_stages`` is reached; an empty ball there has zero oscillation.

    Raises:
        BallTooSmall: if ``R0`` is already below the resolution floor.
    """
    regime = _regime(p, regime)
    v = _field(u, p, j, regime)
    C0 = load_c0(p, alpha, regime) if C0 is None else C0
    floor = 3 * max(v.domain.h)
    if R0 < floor:
        raise BallTooSmall(f"R0 = {R0:g} is below the resolution floor {floor:g}")
    center = (float(x0[0]), float(x0[1]))
    total = dirichlet_energy(v, center, R0)
    stages: list[TraceStage] = []
    R = R0
    b2_terms = []
    contraction_ok = True
    for n in range(max_stages):
        ball = BallSpec(center, R)
        vals = _ball_values(v, ball)
        M = float(np.ptp(vals)) if vals.size else 0.0
        if M == 0 or (n > 0 and R < floor) or n == max_stages - 1:
            delta = degiorgi_params(p, alpha, C0, _lipschitz_bound(u, ball), M, regime).delta
            stages.append(TraceStage(n, R, M, delta, "stopped", 0.0))
            break
        params = degiorgi_params(p, alpha, C0, _lipschitz_bound(u, ball), M, regime)
        delta = params.delta if delta_min is None else max(params.delta, delta_min)
        rep = alternatives_diagnose(v, ball, params, delta)
        if rep.b2:
            b2_terms.append(_energy_terms(v, center, R, R * delta))
        label = "B1" if rep.b1 else "B2" if rep.b2 else "none"
        if rep.b1:
            contraction_ok &= rep.osc_inner <= 7 / 8 * M
        stages.append(TraceStage(n, R, M, delta, label, rep.annulus_energy))
        R *= delta
    b2_sum = math.fsum(np.concatenate(b2_terms)) if b2_terms else 0.0
    return OscillationTrace(stages, total, b2_sum, contraction_ok)


@dataclass(frozen=True)
class MinPrincipleReport:
    ok: bool
    circle_min: float
    interior_min: float
    tol: float


def min_principle_check(
    v: GridFunction, ball: BallSpec, *, grad_tol: float = 1e-9, C_h: float = 1e-2, band: float | None = None
) -> MinPrincipleReport:
    """``v >= min_{circle} v`` inside the disc, up to ``max(10 grad_tol, C_h h)``.

    The circle is the band of points within half a band width of the radius;
    the interior is everything nearer the centre.
    """
    h = max(v.domain.h)
    band = h if band is None else band
    circle = circle_nodes(v.domain, ball, band)
    if len(circle) == 0:
        raise EmptyBall("circle band holds no field points")
    d = distance_to(v.domain, ball.center)
    inner = v.values[d <= ball.radius - band / 2]
    cmin = float(v.values[circle].min())
    imin = float(inner.min()) if inner.size else cmin
    tol = max(10 * grad_tol, C_h * h)
    return MinPrincipleReport(imin >= cmin - tol, cmin, imin, tol)


@dataclass(frozen=True)
class YnTrace:
    values: list[float]
    threshold: float
    diverged: bool

    @property
    def monotone_decreasing(self) -> bool:
        return all(b < a for a, b in zip(self.values, self.values[1:]))


def fast_convergence_Yn(c: float, b: float, beta: float, Y1: float, N: int) -> YnTrace:
    """Iterate ``Y_{n+1} = c * b**n * Y_n**(1 + beta)`` from ``Y_1``; values above 1e300 count as diverged."""
    if not (c > 0 and b > 1 and beta > 0):
        raise ValueError("need c > 0, b > 1, beta > 0")
    threshold = c ** (-1 / beta) * b ** (-(1 + beta) / beta**2)
    values = [float(Y1)]
    diverged = False
    for n in range(1, N):
        y = values[-1]
        if y == 0:
            values.append(0.0)
            continue
        log_next = math.log(c) + n * math.log(b) + (1 + beta) * math.log(y)
        if log_next > math.log(1e300):
            diverged = True
            values.append(math.inf)
            break
        values.append(c * b**n * y ** (1 + beta))
    return YnTrace(values, threshold, diverged)


@dataclass(frozen=True)
class SVReport:
    verdict: str
    delta: float
    fraction: float
    annulus_energy: float
    energy_threshold: float
    circle_radius: float | None


def sv_alternative_check(phi: GridFunction, M: float, gamma: float, ball: BallSpec) -> SVReport:
    """Either the annulus energy is large or some circle in ``[delta R, R]`` keeps ``phi >= 5M/8``.

    Requires ``0 <= phi <= M`` on the ball; ``delta = sqrt(gamma/2)``.
    Verdicts: ``A1``, ``A2``, ``both``, ``hypothesis-fails`` and ``VIOLATION``.
    """
    if not 0 < gamma <= 1:
        raise ValueError("gamma must lie in (0, 1]")
    vals = _ball_values(phi, ball)
    if vals.size == 0:
        raise EmptyBall("ball contains no points")
    if vals.min() < -1e-12 * M or vals.max() > M * (1 + 1e-12):
        raise ValueError("phi must take values in [0, M] on the ball")
    delta = math.sqrt(gamma / 2)
    fraction = float(np.count_nonzero(vals > 0.75 * M)) / vals.size
    energy = dirichlet_energy(phi, ball.center, ball.radius, delta * ball.radius)
    thr = gamma * M * M / (512 * math.pi)
    if fraction < gamma:
        return SVReport("hypothesis-fails", delta, fraction, energy, thr, None)
    h = max(phi.domain.h)
    found = None
    s = delta * ball.radius
    while s <= ball.radius + 1e-12:
        idx = circle_nodes(phi.domain, BallSpec(ball.center, s), h)
        if len(idx) and phi.values[idx].min() >= 0.625 * M:
            found = s
            break
        s += h
    a1, a2 = energy >= thr, found is not None
    verdict = "both" if a1 and a2 else "A1" if a1 else "A2" if a2 else "VIOLATION"
    return SVReport(verdict, delta, fraction, energy, thr, found)


def poincare_check(f: GridFunction, ball: BallSpec | None = None) -> float:
    """``sum f**2 h**2 / (|{f != 0}| * sum |grad f|**2 h**2)``; ``f`` must vanish outside ``ball``."""
    if ball is not None and np.any(f.values[~ball_mask(f.domain, ball)] != 0):
        raise ValueError("f must vanish outside the ball")
    support = np.count_nonzero(f.values) * f.domain.cell_area
    if support == 0:
        return 0.0
    energy = dirichlet_energy(f, f.domain.origin, math.inf)
    if energy == 0:
        raise ZeroGradient("nonzero f with zero discrete gradient")
    return float(np.sum(f.values**2) * f.domain.cell_area) / (support * energy)


def chain_rule_defect(u: GridFunction, p: float, beta: float, j: int, k: int) -> float:
    """Sup of ``D_k F_beta(u_xj) - D_k(v_j) * (u_xj - beta)_+``, which is ``O(h)``."""
    vf = nonlinear_gradient(u, p, "degenerate")[j]
    uj = discrete_gradient(u).component(j - 1)
    F = uj.with_values(F_beta(FBetaSpec(p, beta), uj.values))
    h = uj.domain.h[k - 1]
    dF = np.diff(F.values, axis=k - 1) / h
    dv = np.diff(vf.values, axis=k - 1) / h
    mid = np.maximum(uj.values - beta, 0.0)
    mid = 0.5 * (mid[:-1] + mid[1:]) if k == 1 else 0.5 * (mid[:, :-1] + mid[:, 1:])
    return float(np.max(np.abs(dF - dv * mid)))


def _c0_table() -> dict:
    with resources.files("orthoplab").joinpath("data/c0_calibration.json").open() as fh:
        return json.load(fh)


def load_c0(p: float, alpha: float = 0.25, regime: Regime | None = None) -> float:
    """Calibrated level-set constant ``C0`` for ``(p, alpha)``; the nearest tabulated ``p`` of the regime is used."""
    regime = _regime(p, regime)
    entries = [e for e in _c0_table()["entries"] if e["regime"] == regime and e["alpha"] == alpha]
    if not entries:
        return 1.0
    return float(min(entries, key=lambda e: abs(e["p"] - p))["C0"])
