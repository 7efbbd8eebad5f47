#!/usr/bin/env python3
"""
Permuton Density - closed-form limit-shape density, masses, height function and grids

On every rectangle with I=1 the density has the form

    g(x, y) = -(ad - bc) r E F / (a + b F + c E + d E F)^2

with E = exp(r (x - x0)) and F = exp(r (y - y0)) measured from the lower-left
corner (x0, y0) of the rectangle. At r = 0 each rectangle carries a constant.
"""
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Tuple, Union

import numpy as np

from .boundary_solver import BoundaryValues, mass_matrix
from .errors import NegativeDensity, OutOfRectangle, PoleOnRectangle
from .projective import ProjectiveValue, det
from .region import RegionSpec

SCREEN_POINTS = 32
SOURCES = ("ipf", "simple", "continuation", "quadratic3x3", "oracle")
# boundary-value method -> field source tag
METHOD_SOURCES = {"ipf": "ipf", "simple": "simple", "continuation": "continuation", "quad3x3": "quadratic3x3"}

Number = Union[float, np.ndarray]


@dataclass(frozen=True)
class RectCoeffs:
    """Moebius coefficients of the density on rectangle (u, v), in local coordinates"""

    u: int
    v: int
    x0: float
    x1: float
    y0: float
    y1: float
    a: float
    b: float
    c: float
    d: float
    r: float

    @classmethod
    def from_global(cls, u, v, x0, x1, y0, y1, a, b, c, d, r) -> "RectCoeffs":
        """Coefficients written against exp(rx), exp(ry) moved to the rectangle corner"""
        ex, ey = math.exp(r * x0), math.exp(r * y0)
        return cls(u, v, x0, x1, y0, y1, a, b * ey, c * ex, d * ex * ey, r)

    @property
    def determinant(self) -> float:
        return self.a * self.d - self.b * self.c

    def _E(self, x: Number) -> Number:
        return np.exp(self.r * (np.asarray(x, dtype=float) - self.x0))

    def _F(self, y: Number) -> Number:
        return np.exp(self.r * (np.asarray(y, dtype=float) - self.y0))

    def Q(self, x: Number, y: Number) -> Number:
        E, F = self._E(x), self._F(y)
        return self.a + self.b * F + self.c * E + self.d * E * F

    def g(self, x: Number, y: Number) -> Number:
        E, F = self._E(x), self._F(y)
        Q = self.a + self.b * F + self.c * E + self.d * E * F
        return -self.determinant * self.r * E * F / (Q * Q)

    def mass(self, x1: Number, x2: Number, y1: Number, y2: Number) -> Number:
        ratio = (self.Q(x2, y2) * self.Q(x1, y1)) / (self.Q(x1, y2) * self.Q(x2, y1))
        return -np.log(ratio) / self.r

    def column_integral(self, x: Number, ya: Number, yb: Number) -> Number:
        """Integral of g(x, .) over [ya, yb]"""
        E = self._E(x)
        Fa, Fb = self._F(ya), self._F(yb)
        Qa = self.a + self.b * Fa + self.c * E + self.d * E * Fa
        Qb = self.a + self.b * Fb + self.c * E + self.d * E * Fb
        return -E * ((self.c + self.d * Fb) / Qb - (self.c + self.d * Fa) / Qa)

    def row_integral(self, y: Number, xa: Number, xb: Number) -> Number:
        """Integral of g(., y) over [xa, xb]"""
        F = self._F(y)
        Ea, Eb = self._E(xa), self._E(xb)
        Qa = self.a + self.b * F + self.c * Ea + self.d * Ea * F
        Qb = self.a + self.b * F + self.c * Eb + self.d * Eb * F
        return -F * ((self.b + self.d * Eb) / Qb - (self.b + self.d * Ea) / Qa)

    def perturbed(self, factor: float) -> "RectCoeffs":
        return RectCoeffs(self.u, self.v, self.x0, self.x1, self.y0, self.y1,
                          self.a * factor, self.b, self.c, self.d, self.r)

    def to_document(self) -> Dict[str, Any]:
        return {"u": self.u, "v": self.v, "kind": "moebius",
                "a": self.a, "b": self.b, "c": self.c, "d": self.d}


@dataclass(frozen=True)
class ConstantRect:
    """Constant density on rectangle (u, v), the r = 0 limit"""

    u: int
    v: int
    x0: float
    x1: float
    y0: float
    y1: float
    value: float

    def g(self, x: Number, y: Number) -> Number:
        return self.value * np.ones(np.broadcast(np.asarray(x), np.asarray(y)).shape)

    def mass(self, x1: Number, x2: Number, y1: Number, y2: Number) -> Number:
        return self.value * (np.asarray(x2) - x1) * (np.asarray(y2) - y1)

    def column_integral(self, x: Number, ya: Number, yb: Number) -> Number:
        return self.value * (np.asarray(yb) - ya) * np.ones_like(np.asarray(x, dtype=float))

    def row_integral(self, y: Number, xa: Number, xb: Number) -> Number:
        return self.value * (np.asarray(xb) - xa) * np.ones_like(np.asarray(y, dtype=float))

    def perturbed(self, factor: float) -> "ConstantRect":
        return ConstantRect(self.u, self.v, self.x0, self.x1, self.y0, self.y1, self.value * factor)

    def to_document(self) -> Dict[str, Any]:
        return {"u": self.u, "v": self.v, "kind": "constant", "value": self.value}


Rect = Union[RectCoeffs, ConstantRect]


@dataclass(frozen=True)
class DensityField:
    """Piecewise closed-form density over the region, one entry per I=1 cell"""

    spec: RegionSpec
    rects: Tuple[Rect, ...]
    source: str = "simple"
    _index: Dict[Tuple[int, int], Rect] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"unknown field source {self.source!r}")
        self._index.update({(rect.u, rect.v): rect for rect in self.rects})

    @property
    def r(self) -> float:
        return self.spec.r

    def rect(self, u: int, v: int) -> Optional[Rect]:
        return self._index.get((u, v))

    def cells(self, x: Number, y: Number, side: str = "right") -> Tuple[np.ndarray, np.ndarray]:
        """Cell indices holding (x, y); "left" takes the cell to the left or below on a breakpoint"""
        xs, ys = np.asarray(self.spec.x), np.asarray(self.spec.y)
        u = np.searchsorted(xs, x, side=side) - 1
        v = np.searchsorted(ys, y, side=side) - 1
        return np.clip(u, 0, self.spec.k - 1), np.clip(v, 0, self.spec.ell - 1)

    def g(self, x: Number, y: Number, side: str = "right") -> Number:
        return eval_g(self, x, y, side)

    def to_document(self) -> Dict[str, Any]:
        return {
            "source": self.source,
            "region": self.spec.to_document(),
            "rects": [rect.to_document() for rect in self.rects],
        }

    @classmethod
    def from_document(cls, document: Dict[str, Any]) -> "DensityField":
        from ..utils.validation import validate_field_document
        from .errors import InvalidRegion
        from .region import region_from_document

        errors = validate_field_document(document)
        if errors:
            raise InvalidRegion("; ".join(errors))
        spec = region_from_document(document["region"])
        rects: List[Rect] = []
        for entry in document["rects"]:
            u, v = int(entry["u"]), int(entry["v"])
            box = (u, v, spec.x[u], spec.x[u + 1], spec.y[v], spec.y[v + 1])
            if entry.get("kind", "moebius") == "constant":
                rects.append(ConstantRect(*box, float(entry["value"])))
            else:
                rects.append(RectCoeffs(*box, *(float(entry[key]) for key in "abcd"), spec.r))
        return cls(spec, tuple(rects), document.get("source", "oracle"))

    def perturbed(self, u: int, v: int, factor: float = 1.01) -> "DensityField":
        """Copy with one rectangle's coefficients scaled, for sensitivity checks"""
        rects = tuple(rect.perturbed(factor) if (rect.u, rect.v) == (u, v) else rect for rect in self.rects)
        return DensityField(self.spec, rects, self.source)


def _support_run(line: np.ndarray) -> Tuple[int, int]:
    ones = np.flatnonzero(line)
    return int(ones[0]), int(ones[-1])


def _column_map(spec: RegionSpec, bv: BoundaryValues, u: int) -> Tuple[ProjectiveValue, ProjectiveValue]:
    """phi on column u as (A + B E) / ..., E = exp(r (x - x_u))"""
    lo, hi = _support_run(spec.mask[u, :])
    S0, S1, P = bv.psi[lo], bv.psi[hi + 1], bv.phi[u]
    A = (det(S1, P) * S0.num, det(S1, P) * S0.den)
    B = (-det(S0, P) * S1.num, -det(S0, P) * S1.den)
    return A, B


def _row_map(spec: RegionSpec, bv: BoundaryValues, v: int):
    lo, hi = _support_run(spec.mask[:, v])
    P0, P1, S = bv.phi[lo], bv.phi[hi + 1], bv.psi[v]
    C = (det(P1, S) * P0.num, det(P1, S) * P0.den)
    D = (-det(P0, S) * P1.num, -det(P0, S) * P1.den)
    return C, D


def _cross(X, Y) -> float:
    return X[0] * Y[1] - X[1] * Y[0]


def moebius_rect(u: int, v: int, box: Tuple[float, float, float, float], A, B, C, D, r: float) -> RectCoeffs:
    """Rectangle coefficients from phi = (A + B E) and psi = (C + D F) as homogeneous pairs"""
    coeffs = np.array([_cross(A, C), _cross(A, D), _cross(B, C), _cross(B, D)])
    scale = np.max(np.abs(coeffs))
    if scale == 0.0 or not np.isfinite(scale):
        raise PoleOnRectangle(u, v, "degenerate Moebius coefficients")
    a, b, c, d = (float(value) for value in coeffs / scale)
    return RectCoeffs(u, v, *box, a, b, c, d, r)


def screen_rect(rect: RectCoeffs, points: int = SCREEN_POINTS) -> Tuple[float, float]:
    """Raise unless the density is finite and positive on the closed rectangle; return (min, max)"""
    corners = [rect.Q(x, y) for x in (rect.x0, rect.x1) for y in (rect.y0, rect.y1)]
    signs = {np.sign(q) for q in corners}
    if 0.0 in signs or len(signs) != 1:
        raise PoleOnRectangle(rect.u, rect.v, f"denominator changes sign, corner values {corners}")
    if not -rect.determinant * rect.r > 0.0:
        raise NegativeDensity(rect.u, rect.v, f"-(ad-bc) r = {-rect.determinant * rect.r:.3e}")
    xs = np.linspace(rect.x0, rect.x1, points)
    ys = np.linspace(rect.y0, rect.y1, points)
    values = rect.g(xs[:, None], ys[None, :])
    if not np.all(np.isfinite(values)) or np.any(values <= 0.0):
        raise PoleOnRectangle(rect.u, rect.v, "screening grid hit a non-finite or non-positive value")
    return float(values.min()), float(values.max())


def build_field(spec: RegionSpec, bv: BoundaryValues, source: Optional[str] = None) -> DensityField:
    """Extend the boundary values to phi(x), psi(y) and assemble the rectangle coefficients"""
    source = source or METHOD_SOURCES.get(bv.method, "oracle")
    rects: List[Rect] = []

    if bv.r == 0.0:
        masses = mass_matrix(spec, bv)
        for u, v in zip(*np.nonzero(spec.mask)):
            box = (int(u), int(v), spec.x[u], spec.x[u + 1], spec.y[v], spec.y[v + 1])
            rects.append(ConstantRect(*box, float(masses[u, v] / (spec.dx[u] * spec.dy[v]))))
        return DensityField(spec, tuple(rects), source)

    columns = {u: _column_map(spec, bv, u) for u in range(spec.k)}
    rows = {v: _row_map(spec, bv, v) for v in range(spec.ell)}
    for u, v in zip(*np.nonzero(spec.mask)):
        box = (spec.x[u], spec.x[u + 1], spec.y[v], spec.y[v + 1])
        rect = moebius_rect(int(u), int(v), box, *columns[u], *rows[v], bv.r)
        screen_rect(rect)
        rects.append(rect)
    return DensityField(spec, tuple(rects), source)


def rect_mass(field: DensityField, u: int, v: int, x1: float, x2: float, y1: float, y2: float) -> float:
    """Mass of [x1, x2] x [y1, y2] inside rectangle (u, v), in closed form"""
    spec = field.spec
    if not (0 <= u < spec.k and 0 <= v < spec.ell):
        raise OutOfRectangle(f"no rectangle ({u}, {v}) in a {spec.k}x{spec.ell} region")
    eps = 1e-12
    inside = (
        spec.x[u] - eps <= x1 <= x2 <= spec.x[u + 1] + eps
        and spec.y[v] - eps <= y1 <= y2 <= spec.y[v + 1] + eps
    )
    if not inside:
        raise OutOfRectangle(
            f"[{x1}, {x2}] x [{y1}, {y2}] is not inside rectangle ({u}, {v}) = "
            f"[{spec.x[u]}, {spec.x[u + 1]}] x [{spec.y[v]}, {spec.y[v + 1]}]"
        )
    rect = field.rect(u, v)
    if rect is None or x1 == x2 or y1 == y2:
        return 0.0
    return float(rect.mass(x1, x2, y1, y2))


def box_mass(field: DensityField, x1: Number, x2: Number, y1: Number, y2: Number) -> Number:
    """Mass of an arbitrary box [x1, x2] x [y1, y2], summed over the rectangles it meets"""
    total = 0.0
    for rect in field.rects:
        xa = np.clip(x1, rect.x0, rect.x1)
        xb = np.clip(x2, rect.x0, rect.x1)
        ya = np.clip(y1, rect.y0, rect.y1)
        yb = np.clip(y2, rect.y0, rect.y1)
        piece = rect.mass(xa, xb, ya, yb)
        total = total + np.where((xb > xa) & (yb > ya), piece, 0.0)
    return total


def eval_g(field: DensityField, x: Number, y: Number, side: str = "right") -> Number:
    """Density at (x, y); zero on rectangles with I=0"""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    u, v = field.cells(x, y, side)
    out = np.zeros(np.broadcast(x, y).shape)
    u, v = np.broadcast_arrays(u, v)
    xb, yb = np.broadcast_arrays(x, y)
    for rect in field.rects:
        hit = (u == rect.u) & (v == rect.v)
        if np.any(hit):
            out[hit] = rect.g(xb[hit], yb[hit])
    return out if out.ndim else float(out)


def eval_height(field: DensityField, x: Number, y: Number) -> Number:
    """h(x, y), the mass of [x, 1] x [0, y]"""
    value = box_mass(field, x, 1.0, 0.0, y)
    return value if np.ndim(value) else float(value)


def column_partial(field: DensityField, x: Number, y: Number) -> Number:
    """Integral of g(x, t) for t in [0, y]"""
    u, _ = field.cells(x, 0.0)
    total = np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)
    for rect in field.rects:
        top = np.clip(y, rect.y0, rect.y1)
        # other columns may sit on a pole of this rectangle's closed form
        with np.errstate(all="ignore"):
            piece = rect.column_integral(x, rect.y0, top)
        total = total + np.where(u == rect.u, piece, 0.0)
    return total


def row_partial(field: DensityField, x: Number, y: Number) -> Number:
    """Integral of g(s, y) for s in [x, 1]"""
    _, v = field.cells(0.0, y)
    total = np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)
    for rect in field.rects:
        left = np.clip(x, rect.x0, rect.x1)
        with np.errstate(all="ignore"):
            piece = rect.row_integral(y, left, rect.x1)
        total = total + np.where(v == rect.v, piece, 0.0)
    return total


@dataclass(frozen=True)
class DensityGrid:
    """g at cell centers ((i+1/2)/n, (j+1/2)/n) and h at corners (i/n, j/n)"""

    n: int
    g_values: np.ndarray
    h_values: np.ndarray
    r: float
    h_centers: Optional[np.ndarray] = None

    def rows(self) -> Iterator[Tuple[float, float, float, float]]:
        centers = (np.arange(self.n) + 0.5) / self.n
        h = self.h_centers if self.h_centers is not None else self.g_values * np.nan
        for i, x in enumerate(centers):
            for j, y in enumerate(centers):
                yield float(x), float(y), float(self.g_values[i, j]), float(h[i, j])

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        with open(path, "w") as f:
            f.write("x,y,g,h\n")
            for row in self.rows():
                f.write(",".join(f"{value:.17g}" for value in row) + "\n")
        return path

    @classmethod
    def from_csv(cls, path: Union[str, Path], r: float = 0.0) -> "DensityGrid":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        n = int(round(math.sqrt(data.shape[0])))
        if n * n != data.shape[0]:
            raise ValueError(f"{path} holds {data.shape[0]} rows, not a square grid")
        g = data[:, 2].reshape(n, n)
        h = data[:, 3].reshape(n, n)
        return cls(n, g, np.full((n + 1, n + 1), np.nan), r, h)

    def to_document(self) -> Dict[str, Any]:
        return {"n": self.n, "r": self.r, "g_values": self.g_values.tolist(), "h_values": self.h_values.tolist()}


def grid(field: DensityField, n: int) -> DensityGrid:
    """Sample the field on an n x n lattice"""
    if n < 2:
        raise ValueError(f"grid needs n >= 2, got {n}")
    centers = (np.arange(n) + 0.5) / n
    corners = np.arange(n + 1) / n
    g_values = eval_g(field, centers[:, None], centers[None, :])
    h_values = box_mass(field, corners[:, None], 1.0, 0.0, corners[None, :])
    h_centers = box_mass(field, centers[:, None], 1.0, 0.0, centers[None, :])
    h_values = np.asarray(h_values) * np.ones((n + 1, n + 1))
    return DensityGrid(n, np.asarray(g_values), h_values, field.r, np.asarray(h_centers) * np.ones((n, n)))


def density_bounds(field: DensityField, points: int = SCREEN_POINTS) -> Dict[Tuple[int, int], Tuple[float, float]]:
    """(min, max) of g over a points x points grid on every support rectangle"""
    bounds = {}
    for rect in field.rects:
        if isinstance(rect, ConstantRect):
            bounds[(rect.u, rect.v)] = (rect.value, rect.value)
            continue
        xs = np.linspace(rect.x0, rect.x1, points)
        ys = np.linspace(rect.y0, rect.y1, points)
        values = rect.g(xs[:, None], ys[None, :])
        bounds[(rect.u, rect.v)] = (float(values.min()), float(values.max()))
    return bounds


def permuton_energy(field: DensityField, r: Optional[float] = None, order: int = 16) -> float:
    """Entropy of g plus r times the integral of h_x h_y, by Gauss-Legendre quadrature per rectangle"""
    r = field.r if r is None else r
    nodes, weights = np.polynomial.legendre.leggauss(order)
    total = 0.0
    for rect in field.rects:
        hx, hy = (rect.x1 - rect.x0) / 2, (rect.y1 - rect.y0) / 2
        xs = rect.x0 + hx * (nodes + 1)
        ys = rect.y0 + hy * (nodes + 1)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        g = rect.g(X, Y)
        # h_x = -column_partial, h_y = row_partial
        integrand = -g * np.log(g) + r * column_partial(field, X, Y) * row_partial(field, X, Y)
        total += hx * hy * float(weights @ integrand @ weights)
    return total
