"""Uniform tensor grids on rectangles and the discrete calculus used throughout.

Nodal values are stored as ``values[i, j]`` with ``x1 = ox + i * hx`` and
``x2 = oy + j * hy``.  Forward differences along axis ``k`` live on the
staggered grid shifted by half a step along ``k``, so every derived field is
again a :class:`GridFunction` on its own :class:`Domain`.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import ndimage

__all__ = [
    "Domain",
    "GridFunction",
    "VectorField",
    "BallSpec",
    "IndexSet",
    "GridError",
    "discrete_gradient",
    "ball_nodes",
    "annulus_nodes",
    "circle_nodes",
    "ball_mask",
    "mollify",
    "to_csv",
    "from_csv",
    "to_json",
    "from_json",
]


class GridError(ValueError):
    """Raised for malformed grids, fields or balls."""


@dataclass(frozen=True)
class Domain:
    """Uniform grid ``origin + (i * hx, j * hy)`` with ``n`` nodes per axis.

    The spacing is stored rather than the extent so that staggered grids and
    serialised copies reproduce node coordinates bit for bit.
    """

    origin: tuple[float, float]
    h: tuple[float, float]
    n: tuple[int, int]

    def __post_init__(self) -> None:
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))
        object.__setattr__(self, "h", tuple(float(e) for e in self.h))
        object.__setattr__(self, "n", tuple(int(k) for k in self.n))
        if len(self.origin) != 2 or len(self.h) != 2 or len(self.n) != 2:
            raise GridError("domain must be two-dimensional")
        if min(self.n) < 2:
            raise GridError(f"need at least 2 nodes per axis, got {self.n}")
        if not all(e > 0 and math.isfinite(e) for e in self.h):
            raise GridError(f"spacing must be positive, got {self.h}")

    @classmethod
    def from_extent(cls, origin, extent, n, *, min_nodes: int = 3) -> Domain:
        n = tuple(int(k) for k in n)
        if min(n) < min_nodes:
            raise GridError(f"need at least {min_nodes} nodes per axis, got {n}")
        return cls(tuple(origin), (extent[0] / (n[0] - 1), extent[1] / (n[1] - 1)), n)

    @classmethod
    def square(cls, n: int, lo: float = -1.0, hi: float = 1.0) -> Domain:
        return cls.from_extent((lo, lo), (hi - lo, hi - lo), (n, n))

    @property
    def extent(self) -> tuple[float, float]:
        return ((self.n[0] - 1) * self.h[0], (self.n[1] - 1) * self.h[1])

    @property
    def cell_area(self) -> float:
        return self.h[0] * self.h[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.n

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        """1D node coordinates along each axis."""
        xs = self.origin[0] + self.h[0] * np.arange(self.n[0])
        ys = self.origin[1] + self.h[1] * np.arange(self.n[1])
        return xs, ys

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Full coordinate arrays ``(X1, X2)`` of shape ``n``."""
        xs, ys = self.axes()
        return np.meshgrid(xs, ys, indexing="ij")

    def staggered(self, axis: int) -> Domain:
        """Grid of midpoints between consecutive nodes along ``axis``."""
        origin = list(self.origin)
        n = list(self.n)
        origin[axis] += 0.5 * self.h[axis]
        n[axis] -= 1
        return Domain(tuple(origin), self.h, tuple(n))

    def dual(self) -> Domain:
        """Grid of cell centres."""
        return self.staggered(0).staggered(1)

    def interior_mask(self) -> np.ndarray:
        mask = np.zeros(self.n, dtype=bool)
        mask[1:-1, 1:-1] = True
        return mask

    def to_dict(self) -> dict:
        return {"origin": list(self.origin), "h": list(self.h), "n": list(self.n)}

    @classmethod
    def from_dict(cls, data: dict) -> Domain:
        return cls(tuple(data["origin"]), tuple(data["h"]), tuple(data["n"]))


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Finite nodal values on a :class:`Domain`."""

    domain: Domain
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.domain.shape:
            raise GridError(f"values of shape {values.shape} do not fit grid {self.domain.shape}")
        if not np.all(np.isfinite(values)):
            raise GridError("grid function values must be finite")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_callable(cls, domain: Domain, fn) -> GridFunction:
        x1, x2 = domain.coords()
        return cls(domain, np.broadcast_to(fn(x1, x2), domain.shape).astype(float))

    def with_values(self, values: np.ndarray) -> GridFunction:
        return GridFunction(self.domain, values)

    def __add__(self, other: GridFunction) -> GridFunction:
        _same_domain(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other: GridFunction) -> GridFunction:
        _same_domain(self, other)
        return self.with_values(self.values - other.values)

    def __mul__(self, scalar: float) -> GridFunction:
        return self.with_values(self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> GridFunction:
        return self.with_values(-self.values)


def _same_domain(a: GridFunction, b: GridFunction) -> None:
    if a.domain != b.domain:
        raise GridError("grid functions live on different domains")


@dataclass(frozen=True, eq=False)
class VectorField:
    """Forward-difference gradient: component ``k`` is one node shorter along axis ``k``."""

    domain: Domain
    components: tuple[np.ndarray, np.ndarray]

    def __post_init__(self) -> None:
        nx, ny = self.domain.n
        c1, c2 = (np.asarray(c, dtype=float) for c in self.components)
        if c1.shape != (nx - 1, ny) or c2.shape != (nx, ny - 1):
            raise GridError("vector field components have the wrong staggered shapes")
        object.__setattr__(self, "components", (c1, c2))

    def component(self, axis: int) -> GridFunction:
        """Component ``axis`` as a grid function on its staggered domain."""
        return GridFunction(self.domain.staggered(axis), self.components[axis])


@dataclass(frozen=True)
class BallSpec:
    """Closed disc ``|x - center| <= radius``."""

    center: tuple[float, float]
    radius: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "radius", float(self.radius))
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise GridError(f"radius must be positive, got {self.radius}")

    def scaled(self, factor: float) -> BallSpec:
        return BallSpec(self.center, self.radius * factor)

    def inside(self, domain: Domain) -> bool:
        """True when the disc is contained in the closed rectangle."""
        (cx, cy), r = self.center, self.radius
        (ox, oy), (ex, ey) = domain.origin, domain.extent
        return cx - r >= ox and cx + r <= ox + ex and cy - r >= oy and cy + r <= oy + ey


class IndexSet(NamedTuple):
    """Row-major node indices; usable directly as a numpy fancy index."""

    i: np.ndarray
    j: np.ndarray

    def __len__(self) -> int:  # type: ignore[override]
        return int(self.i.size)


def discrete_gradient(u: GridFunction) -> VectorField:
    """Forward differences of ``u`` along each axis."""
    hx, hy = u.domain.h
    return VectorField(u.domain, (np.diff(u.values, axis=0) / hx, np.diff(u.values, axis=1) / hy))


def distance_to(domain: Domain, center: tuple[float, float]) -> np.ndarray:
    x1, x2 = domain.coords()
    return np.hypot(x1 - center[0], x2 - center[1])


def ball_mask(domain: Domain, ball: BallSpec) -> np.ndarray:
    return distance_to(domain, ball.center) <= ball.radius


def _as_index(mask: np.ndarray) -> IndexSet:
    i, j = np.nonzero(mask)
    return IndexSet(i, j)


def ball_nodes(domain: Domain, ball: BallSpec) -> IndexSet:
    """Nodes with ``|x - c| <= r`` in row-major order."""
    return _as_index(ball_mask(domain, ball))


def annulus_nodes(domain: Domain, outer: BallSpec, inner: BallSpec) -> IndexSet:
    """Nodes of ``outer`` that are not in ``inner``; the balls must be concentric."""
    if outer.center != inner.center:
        raise GridError("annulus requires concentric balls")
    if inner.radius > outer.radius:
        raise GridError("inner radius exceeds outer radius")
    return _as_index(ball_mask(domain, outer) & ~ball_mask(domain, inner))


def circle_nodes(domain: Domain, ball: BallSpec, band: float | None = None) -> IndexSet:
    """Nodes with ``r - band/2 < |x - c| <= r + band/2``; ``band`` defaults to ``max(h)``."""
    band = max(domain.h) if band is None else float(band)
    if band <= 0:
        raise GridError("band must be positive")
    d = distance_to(domain, ball.center)
    return _as_index((d > ball.radius - band / 2) & (d <= ball.radius + band / 2))


def _bump(r: np.ndarray) -> np.ndarray:
    out = np.zeros_like(r)
    inside = r < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
    return out


def mollify(u: GridFunction, eps: float) -> GridFunction:
    """Convolve with the standard compactly supported bump of radius ``eps``.

    Near the boundary the kernel is truncated to in-domain nodes and
    renormalised, so the result is a convex combination of nodal values.  For
    ``eps`` below the grid spacing the input is returned unchanged.
    """
    hx, hy = u.domain.h
    if eps < min(hx, hy):
        return u
    kx, ky = int(eps // hx), int(eps // hy)
    ox, oy = np.meshgrid(hx * np.arange(-kx, kx + 1), hy * np.arange(-ky, ky + 1), indexing="ij")
    kernel = _bump(np.hypot(ox, oy) / eps)
    kernel /= kernel.sum()
    num = ndimage.correlate(u.values, kernel, mode="constant", cval=0.0)
    den = ndimage.correlate(np.ones_like(u.values), kernel, mode="constant", cval=0.0)
    out = num / den
    # A convex combination cannot leave [min u, max u]; clip away rounding.
    return u.with_values(np.clip(out, u.values.min(), u.values.max()))


_CSV_HEADER = "nx,ny,hx,hy,ox,oy"


def to_csv(u: GridFunction) -> str:
    """CSV with a geometry header, then one line per ``i`` holding ``values[i, :]``."""
    d = u.domain
    buf = io.StringIO()
    buf.write(_CSV_HEADER + "\n")
    buf.write(",".join([str(d.n[0]), str(d.n[1])] + [f"{x:.17g}" for x in (*d.h, *d.origin)]) + "\n")
    for row in u.values:
        buf.write(",".join(f"{x:.17g}" for x in row) + "\n")
    return buf.getvalue()


def from_csv(text: str) -> GridFunction:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != _CSV_HEADER:
        raise GridError("missing grid CSV header")
    fields = lines[1].split(",")
    nx, ny = int(fields[0]), int(fields[1])
    hx, hy, ox, oy = (float(f) for f in fields[2:6])
    values = np.array([[float(x) for x in ln.split(",")] for ln in lines[2:]])
    domain = Domain((ox, oy), (hx, hy), (nx, ny))
    return GridFunction(domain, values.reshape(nx, ny))


def to_json(u: GridFunction) -> str:
    """JSON envelope ``{domain, values}``; floats use the shortest round-trip repr."""
    return json.dumps({"domain": u.domain.to_dict(), "values": u.values.tolist()})


def from_json(text: str) -> GridFunction:
    data = json.loads(text)
    return GridFunction(Domain.from_dict(data["domain"]), np.array(data["values"], dtype=float))
