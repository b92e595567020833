"""Closed-form solutions, the discrete stream function and the duality check."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .energy import g
from .grid import Domain, GridFunction, discrete_gradient
from .solver import weak_residual

__all__ = [
    "ModelSolution",
    "CurlTooLarge",
    "model_eval",
    "model_gradient",
    "model_stream",
    "sample",
    "sample_nonlinear_gradient",
    "stream_function",
    "flux_curl",
    "duality_residual",
    "conjugate_exponent",
]

Kind = Literal["separable", "affine", "p2_harmonic"]


class CurlTooLarge(ValueError):
    """The rotated flux is too far from curl-free to integrate."""

    def __init__(self, defect: float, threshold: float):
        super().__init__(f"curl defect {defect:.3e} exceeds threshold {threshold:.3e}")
        self.defect = defect
        self.threshold = threshold


@dataclass(frozen=True)
class ModelSolution:
    """Known weak solutions.

    ``separable``: ``|x1|**k - |x2|**k`` with ``k = p/(p-1)``.
    ``affine``: ``a*x1 + b*x2``, a solution for every ``p``.
    ``p2_harmonic``: ``x1**3 - 3*x1*x2**2``, a solution for ``p = 2`` only.
    """

    kind: Kind
    p: float
    a: float = 0.0
    b: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("separable", "affine", "p2_harmonic"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if not self.p > 1:
            raise ValueError("p must exceed 1")
        if self.kind == "p2_harmonic" and self.p != 2:
            raise ValueError("p2_harmonic solves the equation only for p = 2")


def conjugate_exponent(p: float) -> float:
    return p / (p - 1)


def model_eval(m: ModelSolution, x1, x2):
    x1, x2 = np.asarray(x1, dtype=float), np.asarray(x2, dtype=float)
    if m.kind == "separable":
        k = conjugate_exponent(m.p)
        return np.abs(x1) ** k - np.abs(x2) ** k
    if m.kind == "affine":
        return m.a * x1 + m.b * x2
    return x1**3 - 3 * x1 * x2**2


def model_gradient(m: ModelSolution, x1, x2):
    x1, x2 = np.asarray(x1, dtype=float), np.asarray(x2, dtype=float)
    if m.kind == "separable":
        k = conjugate_exponent(m.p)
        q = 1 / (m.p - 1)
        return k * g(q - 1, x1) if q != 1 else k * x1, -(k * g(q - 1, x2) if q != 1 else k * x2)
    if m.kind == "affine":
        return np.full_like(x1, m.a), np.full_like(x2, m.b)
    return 3 * x1**2 - 3 * x2**2, -6 * x1 * x2


def model_stream(m: ModelSolution, x1, x2):
    """Closed-form stream function, normalised to vanish at the coordinate origin."""
    x1, x2 = np.asarray(x1, dtype=float), np.asarray(x2, dtype=float)
    if m.kind == "separable":
        return -conjugate_exponent(m.p) ** (m.p - 1) * x1 * x2
    if m.kind == "affine":
        return g(m.p - 2, m.b) * x1 - g(m.p - 2, m.a) * x2
    return x2**3 - 3 * x1**2 * x2


def sample(m: ModelSolution, domain: Domain) -> GridFunction:
    return GridFunction.from_callable(domain, lambda x1, x2: model_eval(m, x1, x2))


def sample_nonlinear_gradient(m: ModelSolution, domain: Domain) -> tuple[GridFunction, GridFunction]:
    """Closed-form ``v_j`` at the nodes: ``g_{(p-2)/2}(u_xj)``, or ``u_xj`` when ``p < 2``."""
    x1, x2 = domain.coords()
    grads = model_gradient(m, x1, x2)
    a = (m.p - 2) / 2 if m.p >= 2 else 0.0
    return tuple(GridFunction(domain, g(a, c)) for c in grads)


def _fluxes(u: GridFunction, p: float) -> tuple[np.ndarray, np.ndarray]:
    d1, d2 = discrete_gradient(u).components
    return g(p - 2, d1), g(p - 2, d2)


def flux_curl(u: GridFunction, p: float) -> np.ndarray:
    """Per-area curl of the rotated flux around each interior node.

    Equals minus the discrete divergence of ``g_{p-2}(D u)``, so it vanishes
    exactly for discrete solutions of the unregularised equation.
    """
    f1, f2 = _fluxes(u, p)
    hx, hy = u.domain.h
    return -(np.diff(f1, axis=0)[:, 1:-1] / hx + np.diff(f2, axis=1)[1:-1, :] / hy)


def stream_function(
    u: GridFunction, p: float, threshold: float | None = None
) -> tuple[GridFunction, float]:
    """Integrate ``(g_{p-2}(u_x2), -g_{p-2}(u_x1))`` on the cell-centre grid.

    The path runs along axis 1 from the first cell centre, then along axis 2.
    Returns ``(v, defect)`` where ``defect`` is the sup of :func:`flux_curl`.

    Raises:
        CurlTooLarge: if ``threshold`` is given and the defect exceeds it.
    """
    f1, f2 = _fluxes(u, p)
    hx, hy = u.domain.h
    nx, ny = u.domain.n
    defect = float(np.max(np.abs(flux_curl(u, p)))) if nx > 2 and ny > 2 else 0.0
    if threshold is not None and defect > threshold:
        raise CurlTooLarge(defect, threshold)
    v = np.zeros((nx - 1, ny - 1))
    v[1:, 0] = np.cumsum(hx * f2[1:-1, 0])
    v[:, 1:] = v[:, :1] + np.cumsum(-hy * f1[:, 1:-1], axis=1)
    return GridFunction(u.domain.dual(), v), defect


def duality_residual(v: GridFunction, p: float, **kwargs) -> float:
    """Weak residual of ``v`` for the conjugate exponent of ``p``."""
    return weak_residual(conjugate_exponent(p), v, **kwargs)
