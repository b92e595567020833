"""Discrete orthotropic p-energies, their gradients and Hessian actions.

The energy is a sum over grid edges.  An edge along axis ``i`` carries the
difference quotient ``D_i u`` and the quadrature weight ``hx * hy``, halved
for edges lying on the boundary lines parallel to axis ``i``.  With these
weights affine functions integrate exactly, and because the energy is
separable per axis its gradient is the exact adjoint divergence of the
per-edge flux.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Literal

import numpy as np

from .grid import Domain, GridFunction, discrete_gradient

__all__ = [
    "Regime",
    "ProblemSpec",
    "EnergyValue",
    "InvalidSpec",
    "g",
    "edge_weights",
    "energy_orthotropic",
    "energy_regularized",
    "energy_gradient",
    "hessian_apply",
    "hessian_diagonal",
    "residual",
    "flux",
]

Regime = Literal["degenerate", "singular"]

_TINY = 1e-300


class InvalidSpec(ValueError):
    """Raised for inconsistent problem parameters."""


def g(q: float, t):
    """Power map ``|t|**q * t``; zero at ``t = 0`` for every ``q > -1``."""
    t = np.asarray(t, dtype=float)
    a = np.abs(t)
    out = np.where(a < _TINY, 0.0, np.sign(t) * np.power(np.maximum(a, _TINY), q + 1.0))
    return out if out.ndim else float(out)


def _abs_pow(t: np.ndarray, q: float) -> np.ndarray:
    """``|t|**q`` with the value at zero taken as 0 (``q > 0``) or 1 (``q == 0``)."""
    a = np.abs(t)
    if q == 0:
        return np.ones_like(a)
    return np.where(a < _TINY, 0.0, np.power(np.maximum(a, _TINY), q))


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Dirichlet problem for the regularised orthotropic p-Laplacian.

    ``boundary`` supplies the Dirichlet data on the boundary nodes; its
    interior values are ignored.
    """

    p: float
    eps: float
    regime: Regime
    domain: Domain
    boundary: GridFunction

    def __post_init__(self) -> None:
        p, eps = float(self.p), float(self.eps)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "eps", eps)
        if not p > 1:
            raise InvalidSpec(f"p must exceed 1, got {p}")
        if not eps >= 0:
            raise InvalidSpec(f"eps must be nonnegative, got {eps}")
        if self.regime == "degenerate" and p < 2:
            raise InvalidSpec("degenerate regime needs p >= 2")
        if self.regime == "singular" and p > 2:
            raise InvalidSpec("singular regime needs p <= 2")
        if self.regime not in ("degenerate", "singular"):
            raise InvalidSpec(f"unknown regime {self.regime!r}")
        if min(self.domain.n) < 3:
            raise InvalidSpec("problem grids need at least 3 nodes per axis")
        if self.boundary.domain != self.domain:
            raise InvalidSpec("boundary data lives on a different grid")

    @staticmethod
    def regime_for(p: float) -> Regime:
        return "degenerate" if p >= 2 else "singular"

    def with_eps(self, eps: float) -> ProblemSpec:
        return replace(self, eps=eps)


@dataclass(frozen=True)
class EnergyValue:
    total: float
    per_axis: tuple[float, float]
    eps_part: float


def edge_weights(domain: Domain) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature weights for the two families of edges."""
    nx, ny = domain.n
    w1 = np.full((nx - 1, ny), domain.cell_area)
    w1[:, [0, -1]] *= 0.5
    w2 = np.full((nx, ny - 1), domain.cell_area)
    w2[[0, -1], :] *= 0.5
    return w1, w2


def _density(spec: ProblemSpec, t: np.ndarray) -> np.ndarray:
    p, eps = spec.p, spec.eps
    if spec.regime == "degenerate":
        return _abs_pow(t, p) / p + 0.5 * (p - 1) * eps * t * t
    return np.power(eps + t * t, p / 2) / p if eps > 0 else _abs_pow(t, p) / p


def flux(spec: ProblemSpec, t: np.ndarray) -> np.ndarray:
    """Derivative of the per-edge density."""
    p, eps = spec.p, spec.eps
    if spec.regime == "degenerate":
        return g(p - 2, t) + (p - 1) * eps * t
    return np.power(eps + t * t, (p - 2) / 2) * t if eps > 0 else g(p - 2, t)


def _curvature(spec: ProblemSpec, t: np.ndarray) -> np.ndarray:
    p, eps = spec.p, spec.eps
    if spec.regime == "degenerate":
        return (p - 1) * (_abs_pow(t, p - 2) + eps)
    if eps <= 0:
        raise InvalidSpec("singular regime Hessian needs eps > 0")
    s = eps + t * t
    return np.power(s, (p - 4) / 2) * (eps + (p - 1) * t * t)


def energy_orthotropic(u: GridFunction, p: float) -> float:
    """``(1/p) * sum_i sum_edges w |D_i u|**p``."""
    w1, w2 = edge_weights(u.domain)
    d1, d2 = discrete_gradient(u).components
    return float(np.sum(w1 * _abs_pow(d1, p)) / p + np.sum(w2 * _abs_pow(d2, p)) / p)


def energy_regularized(spec: ProblemSpec, u: GridFunction) -> EnergyValue:
    w1, w2 = edge_weights(u.domain)
    d1, d2 = discrete_gradient(u).components
    p, eps = spec.p, spec.eps
    if spec.regime == "degenerate":
        per_axis = (float(np.sum(w1 * _abs_pow(d1, p)) / p), float(np.sum(w2 * _abs_pow(d2, p)) / p))
        eps_part = 0.5 * (p - 1) * eps * float(np.sum(w1 * d1 * d1) + np.sum(w2 * d2 * d2))
        return EnergyValue(per_axis[0] + per_axis[1] + eps_part, per_axis, eps_part)
    per_axis = (float(np.sum(w1 * _density(spec, d1))), float(np.sum(w2 * _density(spec, d2))))
    total = per_axis[0] + per_axis[1]
    return EnergyValue(total, per_axis, total - energy_orthotropic(u, p))


def _adjoint(domain: Domain, f1: np.ndarray, f2: np.ndarray) -> np.ndarray:
    """Transpose of the forward-difference gradient applied to edge data."""
    hx, hy = domain.h
    out = np.zeros(domain.n)
    out[:-1, :] -= f1 / hx
    out[1:, :] += f1 / hx
    out[:, :-1] -= f2 / hy
    out[:, 1:] += f2 / hy
    return out


def energy_gradient(spec: ProblemSpec, u: GridFunction) -> GridFunction:
    """Exact gradient of the discrete energy with respect to interior nodal values."""
    w1, w2 = edge_weights(u.domain)
    d1, d2 = discrete_gradient(u).components
    grad = _adjoint(u.domain, w1 * flux(spec, d1), w2 * flux(spec, d2))
    grad[~u.domain.interior_mask()] = 0.0
    return u.with_values(grad)


def residual(spec: ProblemSpec, u: GridFunction) -> GridFunction:
    """Energy gradient per unit cell area: the discrete divergence of the flux."""
    return energy_gradient(spec, u) * (1.0 / u.domain.cell_area)


def _secant(spec: ProblemSpec, t: np.ndarray) -> np.ndarray:
    # flux(t) / t; bounds the curvature from above when p <= 2
    if spec.regime == "degenerate":
        return _abs_pow(t, spec.p - 2) + (spec.p - 1) * spec.eps
    return np.power(spec.eps + t * t, (spec.p - 2) / 2)


def _edge_curvatures(spec: ProblemSpec, u: GridFunction, secant: bool = False) -> tuple[np.ndarray, np.ndarray]:
    w1, w2 = edge_weights(u.domain)
    d1, d2 = discrete_gradient(u).components
    c = _secant if secant else _curvature
    return w1 * c(spec, d1), w2 * c(spec, d2)


def hessian_apply(spec: ProblemSpec, u: GridFunction, w: GridFunction, secant: bool = False) -> GridFunction:
    """Hessian of the energy at ``u`` applied to ``w``, restricted to interior nodes.

    ``secant=True`` swaps the curvature for the secant weight ``flux(t) / t``.
    """
    c1, c2 = _edge_curvatures(spec, u, secant)
    mask = u.domain.interior_mask()
    wv = np.where(mask, w.values, 0.0)
    dw = discrete_gradient(u.with_values(wv)).components
    out = _adjoint(u.domain, c1 * dw[0], c2 * dw[1])
    out[~mask] = 0.0
    return u.with_values(out)


def hessian_diagonal(spec: ProblemSpec, u: GridFunction, secant: bool = False) -> np.ndarray:
    """Diagonal of the interior Hessian, with ones on boundary nodes."""
    c1, c2 = _edge_curvatures(spec, u, secant)
    hx, hy = u.domain.h
    diag = np.zeros(u.domain.n)
    diag[:-1, :] += c1 / hx**2
    diag[1:, :] += c1 / hx**2
    diag[:, :-1] += c2 / hy**2
    diag[:, 1:] += c2 / hy**2
    diag[~u.domain.interior_mask()] = 1.0
    return diag
