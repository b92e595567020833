"""Scalar and vector inequalities behind the regularity estimates, with batteries.

Each check returns the two sides it compares so that batteries can report the
worst observed ratio ``lhs / rhs`` (a value above 1 is a violation).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .energy import g

__all__ = [
    "FBetaSpec",
    "BoundCheck",
    "BatteryRow",
    "CatalogueMiss",
    "Zeta",
    "F_beta",
    "F_plus",
    "F_minus",
    "F_lower_constant",
    "F_upper_constant",
    "check_F_bounds",
    "check_dibene",
    "check_cor_dibene",
    "elementary_constants",
    "Z_of_zeta",
    "xi_delta",
    "run_batteries",
    "equality_witnesses",
    "battery_csv",
    "Q_GRID",
]

Q_GRID: tuple[float, ...] = (1.1, 1.25, 1.5, 1.75, 2.0)

# Relative slack for comparisons of two floating point expressions.
REL_SLACK = 1e-12


class CatalogueMiss(ValueError):
    """No closed form is known for the requested catalogue entry."""


@dataclass(frozen=True)
class FBetaSpec:
    p: float
    beta: float

    def __post_init__(self) -> None:
        if not self.p > 2:
            raise ValueError(f"F_beta is defined for p > 2, got {self.p}")


def _series_coeffs(a: float, terms: int = 48) -> np.ndarray:
    c = np.empty(terms)
    c[0] = 1.0
    for k in range(terms - 1):
        c[k + 1] = c[k] * (a - k) / (k + 1)
    return c / (np.arange(terms) + 2)


def F_beta(spec: FBetaSpec, t):
    """``(p/2) * int_beta^t |s|**((p-2)/2) * (s - beta)_+ ds``, zero for ``t <= beta``.

    Uses the antiderivative away from ``beta`` and a binomial series in
    ``(t - beta)/beta`` close to it, where the closed form cancels.
    """
    p, beta = spec.p, spec.beta
    a = (p - 2) / 2
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    above = t > beta
    tt = t[above]
    closed = (p / (p + 2)) * (np.abs(tt) ** ((p + 2) / 2) - abs(beta) ** ((p + 2) / 2)) - beta * (
        g(a, tt) - g(a, beta)
    )
    if beta != 0:
        y = (tt - beta) / beta
        near = np.abs(y) < 0.25
        if np.any(near):
            coeffs = _series_coeffs(a)
            yn = y[near]
            series = np.polynomial.polynomial.polyval(yn, coeffs) * yn**2
            closed = np.asarray(closed, dtype=float)
            closed[near] = (p / 2) * abs(beta) ** a * beta**2 * series
    out[above] = closed
    return out if out.ndim else float(out)


def F_plus(X, p: float):
    """Scale-free form for ``beta > 0``: ``F(t) = beta**((p+2)/2) * F_plus(t / beta)``."""
    return F_beta(FBetaSpec(p, 1.0), X)


def F_minus(X, p: float):
    """Scale-free form for ``beta < 0``: ``F(t) = |beta|**((p+2)/2) * F_minus(t / |beta|)``."""
    return F_beta(FBetaSpec(p, -1.0), X)


def _lower_negative(p: float) -> float:
    from scipy.optimize import minimize_scalar

    # sup over X > -1 of (X+1)**((p+2)/2) / F_minus(X); the ratio tends to
    # 0 at X = -1 and to (p+2)/p at infinity, so bracket in log(1 + X).
    def neg_ratio(s: float) -> float:
        x = math.expm1(s)
        return -((x + 1) ** ((p + 2) / 2)) / F_minus(np.array([x]), p)[0]

    grid = np.linspace(-20, 20, 4001)
    vals = np.array([neg_ratio(s) for s in grid])
    k = int(np.argmin(vals))
    res = minimize_scalar(neg_ratio, bounds=(grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]), method="bounded")
    return max(-res.fun, -vals.min(), (p + 2) / p)


_LOWER_NEG_CACHE: dict[float, float] = {}


def F_lower_constant(p: float, beta: float) -> float:
    """``C`` with ``(t - beta)_+**((p+2)/2) <= C * F_beta(t)``.

    For ``beta >= 0`` this is the Hoelder-step constant ``2**(p/2) * 2/p``.
    For ``beta < 0`` no closed form is available; the supremum of the
    scale-free ratio is computed numerically and inflated by ``1e-9``.
    """
    if beta >= 0:
        return 2 ** (p / 2) * 2 / p
    if p not in _LOWER_NEG_CACHE:
        _LOWER_NEG_CACHE[p] = _lower_negative(p) * (1 + 1e-9)
    return _LOWER_NEG_CACHE[p]


def F_upper_constant(p: float, beta: float) -> float:
    """``C`` with ``F_beta(t) <= C * (|t|**a + max(0,-beta)**a) * (t - beta)_+**2``."""
    if beta >= 0:
        return p * p / 8
    return max(2.0, p * p / 8 + 0.5)


@dataclass(frozen=True)
class BoundCheck:
    lower_ok: bool
    upper_ok: bool
    lower_ratio: float
    upper_ratio: float

    @property
    def slack(self) -> float:
        """Distance of the worse side from equality; negative means violated."""
        return 1.0 - max(self.lower_ratio, self.upper_ratio)


def _bound_ratios(spec: FBetaSpec, t: np.ndarray, c_lo: float, c_up: float) -> tuple[np.ndarray, np.ndarray]:
    p, beta = spec.p, spec.beta
    a = (p - 2) / 2
    F = np.asarray(F_beta(spec, t))
    d = np.maximum(t - beta, 0.0)
    lower = d ** ((p + 2) / 2) / c_lo
    upper = c_up * (np.abs(t) ** a + max(0.0, -beta) ** a) * d**2
    with np.errstate(divide="ignore", invalid="ignore"):
        r_lo = np.where(d > 0, lower / F, 0.0)
        r_up = np.where(d > 0, F / upper, 0.0)
    return r_lo, r_up


def check_F_bounds(spec: FBetaSpec, t, C: float | None = None) -> BoundCheck:
    """Two-sided bound on ``F_beta`` over the samples ``t``.

    With ``C`` given, the same constant is used on both sides; otherwise the
    explicit candidates from :func:`F_lower_constant` and :func:`F_upper_constant`.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    c_lo = C if C is not None else F_lower_constant(spec.p, spec.beta)
    c_up = C if C is not None else F_upper_constant(spec.p, spec.beta)
    r_lo, r_up = _bound_ratios(spec, t, c_lo, c_up)
    lo, up = float(np.max(r_lo, initial=0.0)), float(np.max(r_up, initial=0.0))
    return BoundCheck(lo <= 1 + REL_SLACK, up <= 1 + REL_SLACK, lo, up)


def check_dibene(q: float, z0, z1) -> tuple[np.ndarray, np.ndarray, bool]:
    """``||z0|**(q-2) z0 - |z1|**(q-2) z1| <= 2**(2-q) |z0 - z1|**(q-1)`` for ``1 < q <= 2``.

    Vectors are given along the last axis.
    """
    if not 1 < q <= 2:
        raise ValueError("q must lie in (1, 2]")
    z0, z1 = np.asarray(z0, dtype=float), np.asarray(z1, dtype=float)

    def power(z):
        n = np.linalg.norm(z, axis=-1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(n > 0, z * np.power(np.where(n > 0, n, 1.0), q - 2), 0.0)

    lhs = np.linalg.norm(power(z0) - power(z1), axis=-1)
    rhs = 2 ** (2 - q) * np.linalg.norm(z0 - z1, axis=-1) ** (q - 1)
    return lhs, rhs, bool(np.all(lhs <= rhs * (1 + REL_SLACK)))


def check_cor_dibene(p: float, eps: float, t, s) -> tuple[np.ndarray, np.ndarray, bool]:
    """``|(eps+t^2)^((p-2)/4) t - (eps+s^2)^((p-2)/4) s| <= 2^((2-p)/2) |t-s|^(p/2)``."""
    if not 1 < p <= 2:
        raise ValueError("p must lie in (1, 2]")
    t, s = np.asarray(t, dtype=float), np.asarray(s, dtype=float)

    def power(x):
        # The weight is singular at eps = x = 0, where the product tends to 0.
        base = eps + x * x
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(base > 0, np.power(np.where(base > 0, base, 1.0), (p - 2) / 4) * x, 0.0)

    lhs = np.abs(power(t) - power(s))
    rhs = 2 ** ((2 - p) / 2) * np.abs(t - s) ** (p / 2)
    return lhs, rhs, bool(np.all(lhs <= rhs * (1 + REL_SLACK)))


def elementary_constants(p: float) -> dict[str, float]:
    """Sharp constants of the two scalar inequalities used for ``p > 2``.

    ``square``: ``|t-s|**p <= C |g_a(t) - g_a(s)|**2``; worst case ``s = -t``.
    ``lipschitz``: ``|g_a(t) - g_a(s)| <= C (|t|**a + |s|**a) |t-s|``; worst
    case ``s = 0`` or ``s -> t``.  Here ``a = (p-2)/2``.
    """
    return {"square": 2 ** (p - 2), "lipschitz": max(1.0, p / 4)}


@dataclass(frozen=True)
class Zeta:
    """Catalogue of test functions ``zeta`` used in the energy estimates.

    ``constant`` (value ``c``), ``identity``, ``square`` (``t**2``),
    ``positive_part_sq`` (``(t-beta)_+**2``) and ``xi`` (``xi_delta(t-beta)``).
    """

    name: str
    beta: float = 0.0
    delta: float = 1.0
    c: float = 1.0

    NAMES = ("constant", "identity", "square", "positive_part_sq", "xi")

    def __post_init__(self) -> None:
        if self.name not in self.NAMES:
            raise CatalogueMiss(f"unknown zeta {self.name!r}")

    def value(self, t):
        t = np.asarray(t, dtype=float)
        if self.name == "constant":
            return np.full_like(t, self.c)
        if self.name == "identity":
            return t
        if self.name == "square":
            return t * t
        if self.name == "positive_part_sq":
            return np.maximum(t - self.beta, 0.0) ** 2
        return xi_delta(t - self.beta, self.delta)[0]

    def deriv(self, t):
        t = np.asarray(t, dtype=float)
        if self.name == "constant":
            return np.zeros_like(t)
        if self.name == "identity":
            return np.ones_like(t)
        if self.name == "square":
            return 2 * t
        if self.name == "positive_part_sq":
            return 2 * np.maximum(t - self.beta, 0.0)
        return xi_delta(t - self.beta, self.delta)[1]

    @property
    def monotone(self) -> bool:
        return self.name in ("constant", "identity", "positive_part_sq", "xi")

    @property
    def convex_nonnegative(self) -> bool:
        return self.name in ("constant", "square", "positive_part_sq") and (self.name != "constant" or self.c >= 0)


def xi_delta(t, delta: float):
    """Convex ``C^1`` ramp: 0 for ``t <= 0``, ``t^3/delta^2`` on ``(0, delta)``, ``3t - 2 delta`` beyond.

    Returns ``(value, derivative)``.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    t = np.asarray(t, dtype=float)
    mid = (t > 0) & (t < delta)
    big = t >= delta
    val = np.where(mid, t**3 / delta**2, np.where(big, 3 * t - 2 * delta, 0.0))
    der = np.where(mid, 3 * t**2 / delta**2, np.where(big, 3.0, 0.0))
    if val.ndim == 0:
        return float(val), float(der)
    return val, der


def _sqrt_deriv_antiderivative(zeta: Zeta, t: np.ndarray) -> np.ndarray:
    """An antiderivative of ``sqrt(|zeta'|)``."""
    k = 2 * math.sqrt(2) / 3
    if zeta.name == "constant":
        return np.zeros_like(t)
    if zeta.name == "identity":
        return t
    if zeta.name == "square":
        return k * g(0.5, t)
    if zeta.name == "positive_part_sq":
        return k * np.maximum(t - zeta.beta, 0.0) ** 1.5
    s = t - zeta.beta
    dl = zeta.delta
    r3 = math.sqrt(3)
    return np.where(s <= 0, 0.0, np.where(s < dl, r3 * s * s / (2 * dl), r3 * (dl / 2 + s - dl)))


def Z_of_zeta(zeta: Zeta | str, t, **params):
    """``Z(t) = int_0^t sqrt(|zeta'(s)|) ds`` in closed form."""
    if isinstance(zeta, str):
        if zeta not in Zeta.NAMES:
            raise CatalogueMiss(f"no closed form for zeta {zeta!r}")
        zeta = Zeta(zeta, **params)
    t = np.asarray(t, dtype=float)
    out = np.asarray(_sqrt_deriv_antiderivative(zeta, t) - _sqrt_deriv_antiderivative(zeta, np.zeros_like(t)))
    return out if out.ndim else float(out)


def _g_diff(a: float, t: np.ndarray, s: np.ndarray) -> np.ndarray:
    """``|g_a(t) - g_a(s)|`` without cancellation when ``t`` and ``s`` are close."""
    t, s = np.asarray(t, dtype=float), np.asarray(s, dtype=float)
    naive = np.abs(g(a, t) - g(a, s))
    same = (np.sign(t) == np.sign(s)) & (s != 0)
    at, as_ = np.abs(t), np.where(same, np.abs(s), 1.0)
    # |t| - |s| is exact for close arguments, and expm1/log1p keep the relative accuracy.
    stable = as_ ** (a + 1) * np.abs(np.expm1((a + 1) * np.log1p((at - as_) / as_)))
    return np.where(same, stable, naive)


@dataclass(frozen=True)
class BatteryRow:
    id: str
    samples: int
    worst_ratio: float
    argmax: str

    @property
    def ok(self) -> bool:
        return self.worst_ratio <= 1 + REL_SLACK


def _log_uniform(rng, lo, hi, size):
    return np.exp(rng.uniform(np.log(lo), np.log(hi), size))


def _signed(rng, size):
    return rng.choice([-1.0, 1.0], size) * _log_uniform(rng, 1e-4, 1e4, size)


def _row(name: str, ratio: np.ndarray, samples: dict[str, np.ndarray]) -> BatteryRow:
    ratio = np.where(np.isfinite(ratio), ratio, np.inf)
    k = int(np.argmax(ratio))
    arg = ";".join(f"{key}={val[k]:.17g}" for key, val in samples.items())
    return BatteryRow(name, int(ratio.size), float(ratio[k]), arg)


def run_batteries(samples: int = 100_000, seed: int = 0, q_grid=Q_GRID, p_grid=(2.5, 3.0, 4.0, 6.0)) -> list[BatteryRow]:
    """Random batteries for every inequality; deterministic for a given seed."""
    rng = np.random.default_rng(seed)
    rows = []
    for q in q_grid:
        ang = rng.uniform(0, 2 * np.pi, (2, samples))
        rad = _log_uniform(rng, 1e-4, 1e4, (2, samples))
        # Half the pairs have comparable moduli, where the bound is tight.
        half = samples // 2
        rad[1, :half] = rad[0, :half] * _log_uniform(rng, 0.5, 2.0, half)
        z0 = np.stack([rad[0] * np.cos(ang[0]), rad[0] * np.sin(ang[0])], axis=-1)
        z1 = np.stack([rad[1] * np.cos(ang[1]), rad[1] * np.sin(ang[1])], axis=-1)
        lhs, rhs, _ = check_dibene(q, z0, z1)
        rows.append(_row(f"dibene_q{q:g}", lhs / rhs, {"z0x": z0[:, 0], "z0y": z0[:, 1], "z1x": z1[:, 0], "z1y": z1[:, 1]}))
    for p in q_grid:
        eps = _log_uniform(rng, 1e-8, 1e2, samples)
        t, s = _signed(rng, samples), _signed(rng, samples)
        lhs, rhs, _ = check_cor_dibene(p, eps, t, s)
        rows.append(_row(f"cor_dibene_p{p:g}", lhs / rhs, {"eps": eps, "t": t, "s": s}))
    for p in p_grid:
        beta = _signed(rng, samples)
        t = beta + _log_uniform(rng, 1e-6, 1e2, samples) * np.maximum(np.abs(beta), 1e-2)
        r_lo = np.empty(samples)
        r_up = np.empty(samples)
        for sign in (-1.0, 1.0):
            sel = np.sign(beta) == sign
            # Scale invariance: F_beta(t) = |beta|**((p+2)/2) * F_{sign}(t/|beta|).
            spec = FBetaSpec(p, sign)
            X = t[sel] / np.abs(beta[sel])
            lo, up = _bound_ratios(spec, X, F_lower_constant(p, sign), F_upper_constant(p, sign))
            r_lo[sel], r_up[sel] = lo, up
        rows.append(_row(f"F_lower_p{p:g}", r_lo, {"beta": beta, "t": t}))
        rows.append(_row(f"F_upper_p{p:g}", r_up, {"beta": beta, "t": t}))
        a = (p - 2) / 2
        consts = elementary_constants(p)
        t, s = _signed(rng, samples), _signed(rng, samples)
        diff = _g_diff(a, t, s)
        with np.errstate(divide="ignore", invalid="ignore"):
            r_sq = np.abs(t - s) ** p / (consts["square"] * diff**2)
            r_lip = diff / (consts["lipschitz"] * (np.abs(t) ** a + np.abs(s) ** a) * np.abs(t - s))
        rows.append(_row(f"elementary_square_p{p:g}", r_sq, {"t": t, "s": s}))
        rows.append(_row(f"elementary_lipschitz_p{p:g}", r_lip, {"t": t, "s": s}))
    q = rng.uniform(-0.9, 3.0, samples)
    r = rng.uniform(-0.9, 3.0, samples)
    ok = (1 + q) * (1 + r) > 0.05
    q, r = q[ok], r[ok]
    t = _signed(rng, q.size) * 1e-2
    lhs = g(q, g(r, t))
    rhs = g(q + r + q * r, t)
    rel = np.abs(lhs - rhs) / np.maximum(np.abs(rhs), 1e-300) / 1e-12
    rows.append(_row("g_composition_rel1e-12", rel, {"q": q, "r": r, "t": t}))
    return rows


def equality_witnesses() -> list[tuple[str, float, float]]:
    """Cases where an inequality is attained: ``(id, lhs, rhs)``."""
    out = []
    for q in Q_GRID:
        lhs, rhs, _ = check_dibene(q, [1.0, 0.0], [-1.0, 0.0])
        out.append((f"dibene_antipodal_q{q:g}", float(lhs), float(rhs)))
    lhs, rhs, _ = check_cor_dibene(2.0, 0.3, 1.7, -0.4)
    out.append(("cor_dibene_p2", float(lhs), float(rhs)))
    for p in (2.5, 4.0):
        a = (p - 2) / 2
        lhs = 2.0**p
        rhs = elementary_constants(p)["square"] * (g(a, 1.0) - g(a, -1.0)) ** 2
        out.append((f"elementary_square_antipodal_p{p:g}", lhs, float(rhs)))
    return out


def battery_csv(rows: list[BatteryRow]) -> str:
    lines = ["id,samples,worst_ratio,argmax"]
    lines += [f"{r.id},{r.samples},{r.worst_ratio:.17g},{r.argmax}" for r in rows]
    return "\n".join(lines) + "\n"
