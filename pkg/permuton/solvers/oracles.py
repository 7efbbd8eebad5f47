#!/usr/bin/env python3
"""
Permuton Oracles - closed-form reference densities for tests and figures
"""
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .density import DensityField, RectCoeffs, moebius_rect
from .errors import NotSimple
from .region import RegionSpec

NONCONVEX_X = (0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0)
NONCONVEX_Y = (0.0, 2.0 / 3.0, 1.0)
# rows top to bottom; the middle of the top row is missing
NONCONVEX_ROWS = [[1, 0, 1], [1, 1, 1]]


def _check_staircase(a: float, b: float, r: float) -> None:
    if not (0 < a < 1 and 0 < b < 1 and a + b > 1):
        raise ValueError(f"staircase oracle needs 0<a,b<1 and a+b>1, got a={a}, b={b}")
    if r == 0:
        raise ValueError("staircase oracle needs r != 0")


def _staircase_pieces(a: float, b: float, r: float):
    """phi on [0,a] and [a,1], psi = N / D on [0,b] and [b,1], each with derivatives"""
    s = 1.0 - math.exp(-r * (a + b - 1))
    top = s / (1.0 - math.exp(-r * a))

    def phi_left(x):
        return top * (1 - np.exp(-r * x)), top * r * np.exp(-r * x)

    def phi_right(x):
        return 1 - np.exp(-r * (x + b - 1)), r * np.exp(-r * (x + b - 1))

    def psi_low(y):
        # N, D, N', D'
        D = 1 - np.exp(-r * y)
        return 1.0 - math.exp(-r * b), D, 0.0, r * np.exp(-r * y)

    def psi_high(y):
        D = 1 - np.exp(-r * (a + y - 1))
        return s, D, 0.0, r * np.exp(-r * (a + y - 1))

    return phi_left, phi_right, psi_low, psi_high


def oracle_staircase_2x2(a: float, b: float, r: float, x, y):
    """Density for x=(0,a,1), y=(0,b,1) with the top-right cell removed"""
    _check_staircase(a, b, r)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    phi_left, phi_right, psi_low, psi_high = _staircase_pieces(a, b, r)
    left = x < a
    low = y < b
    with np.errstate(all="ignore"):
        phi, dphi = np.where(left, phi_left(x), phi_right(x))
        N, D, dN, dD = (np.where(low, p, q) for p, q in zip(
            np.broadcast_arrays(*psi_low(y)), np.broadcast_arrays(*psi_high(y))))
        # g = -(1/r) phi' psi' / (phi - psi)^2 with psi = N / D, finite at psi = infinity
        g = -dphi * (dN * D - N * dD) / (r * (phi * D - N) ** 2)
    g = np.where(left | low, g, 0.0)
    return g if g.ndim else float(g)


def staircase_2x2_field(a: float, b: float, r: float) -> DensityField:
    """The staircase oracle as rectangle coefficients"""
    _check_staircase(a, b, r)
    spec = RegionSpec.from_rows((0.0, a, 1.0), (0.0, b, 1.0), [[1, 0], [1, 1]], r, "staircase_2x2")
    s = math.exp(-r * (a + b - 1))
    top = (1.0 - s) / (1.0 - math.exp(-r * a))
    columns = {
        0: ((-top, 0.0), (top, 1.0)),
        1: ((-s, 0.0), (1.0, 1.0)),
    }
    rows = {
        0: ((0.0, -1.0), (1.0 - math.exp(-r * b), 1.0)),
        1: ((0.0, -s), (1.0 - s, 1.0)),
    }
    rects = []
    for u, v in zip(*np.nonzero(spec.mask)):
        box = (spec.x[u], spec.x[u + 1], spec.y[v], spec.y[v + 1])
        rects.append(moebius_rect(int(u), int(v), box, *columns[u], *rows[v], r))
    return DensityField(spec, tuple(rects), "oracle")


def _nonconvex_coefficients(r: float) -> List[Tuple[int, int, float, float, float, float]]:
    """(u, v, a, b, c, d) against exp(rx), exp(ry) for the five support cells"""
    def e(t):
        return math.exp(-r * t)

    return [
        (0, 0, 1.0, -1.0, -1.0, -e(1 / 2) + e(2 / 3) + e(7 / 6)),
        (0, 1, 1.0, -e(1 / 6) + e(1 / 2) - e(2 / 3), -1.0, e(1)),
        (1, 0, 1.0, -1.0, e(1 / 6) - 1.0 - e(1 / 3), e(2 / 3) - e(5 / 6) + e(1)),
        (2, 0, e(1 / 6), -e(1 / 6), -e(1 / 2) + e(2 / 3) - 1.0, e(7 / 6)),
        (2, 1, 1.0 - e(1 / 6) + e(1 / 2), -e(2 / 3), -e(2 / 3), e(5 / 3)),
    ]


def nonconvex_region(r: float) -> RegionSpec:
    return RegionSpec.from_rows(NONCONVEX_X, NONCONVEX_Y, NONCONVEX_ROWS, r, "nonconvex_3x2")


def oracle_nonconvex_3x2(r: float, x, y):
    """Density of the non-convex 3x2 example, branch by branch"""
    if r == 0:
        raise ValueError("non-convex oracle needs r != 0")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)

    def e(t):
        return math.exp(-r * t)

    with np.errstate(all="ignore"):
        X, Y, XY = np.exp(r * x), np.exp(r * y), np.exp(r * (x + y))
        g1 = r * XY * (1 + e(1 / 2)) * (1 - e(2 / 3)) / (
            1 - Y - X + (-e(1 / 2) + e(2 / 3) + e(7 / 6)) * XY
        ) ** 2
        g2 = r * XY * (1 - e(1 / 3)) * (e(1 / 6) + e(2 / 3)) / (
            1 + (-e(1 / 6) + e(1 / 2) - e(2 / 3)) * Y - X + e(1) * XY
        ) ** 2
        g3 = r * XY * (1 - e(1 / 6) + e(1 / 3)) * (1 - e(2 / 3)) / (
            1 - Y + (e(1 / 6) - 1 - e(1 / 3)) * X + (e(2 / 3) - e(5 / 6) + e(1)) * XY
        ) ** 2
        g5 = r * XY * (1 - e(2 / 3)) * (e(1 / 6) + e(2 / 3)) / (
            e(1 / 6) - e(1 / 6) * Y + (-e(1 / 2) + e(2 / 3) - 1) * X + e(7 / 6) * XY
        ) ** 2
        g6 = r * XY * e(4 / 3) * (1 - e(1 / 3)) * (1 + e(1 / 2)) / (
            (1 - e(1 / 6) + e(1 / 2)) - e(2 / 3) * Y - e(2 / 3) * X + e(5 / 3) * XY
        ) ** 2
    low = y < 2 / 3
    g = np.select(
        [
            (x < 1 / 3) & low,
            (x < 1 / 3) & ~low,
            (x < 2 / 3) & low,
            (x < 2 / 3) & ~low,
            low,
        ],
        [g1, g2, g3, np.zeros_like(g1), g5],
        default=g6,
    )
    return g if g.ndim else float(g)


def nonconvex_3x2_field(r: float) -> DensityField:
    """The non-convex oracle as rectangle coefficients"""
    if r == 0:
        raise ValueError("non-convex oracle needs r != 0")
    spec = nonconvex_region(r)
    rects = []
    for u, v, a, b, c, d in _nonconvex_coefficients(r):
        rects.append(
            RectCoeffs.from_global(u, v, spec.x[u], spec.x[u + 1], spec.y[v], spec.y[v + 1], a, b, c, d, r)
        )
    return DensityField(spec, tuple(rects), "oracle")


def oracle_field(spec: RegionSpec) -> DensityField:
    """Closed-form field for a region one of the coefficient oracles covers"""
    mask = spec.mask
    if spec.r != 0 and mask.shape == (2, 2) and mask.sum() == 3 and not mask[1, 1]:
        a, b = spec.x[1], spec.y[1]
        if a + b > 1:
            return staircase_2x2_field(a, b, spec.r)
    if spec.r != 0 and np.allclose(spec.x, NONCONVEX_X) and np.allclose(spec.y, NONCONVEX_Y):
        if np.array_equal(mask, nonconvex_region(spec.r).mask):
            return nonconvex_3x2_field(spec.r)
    raise NotSimple(f"no closed-form oracle covers {spec.name} at r = {spec.r}")


def _check_triangle(a: float, b: float) -> None:
    if not (a > 1 and b > 1):
        raise ValueError(f"triangle oracle needs a, b > 1, got a={a}, b={b}")
    if a == b:
        raise ValueError("triangle oracle needs a != b")


def oracle_triangle(a: float, b: float, x, y):
    """r=0 density of the square with the region below ax+by=1 removed"""
    _check_triangle(a, b)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    left = x < 1 / a
    low = y < 1 / b
    with np.errstate(all="ignore"):
        X = (a - b) * x + b - 1
        Y = (b - a) * y + a - 1
        corner = b * (b - 1) ** (b / (a - b)) * X ** (a / (b - a))
        side = a * (a - 1) ** (a / (b - a)) * Y ** (b / (a - b))
        inner = b ** (a / (a - b)) * a ** (b / (b - a)) * X ** (a / (b - a)) * Y ** (b / (a - b))
        plateau = (b / (b - 1)) ** (b / (b - a)) * (a / (a - 1)) ** (a / (a - b))
    g = np.select(
        [a * x + b * y < 1, left & ~low, ~left & low, left & low],
        [0.0, corner, side, inner],
        default=plateau,
    )
    return g if g.ndim else float(g)


def triangle_staircase(a: float, b: float, m: int) -> RegionSpec:
    """m x m rectilinear approximation of {ax+by>1}: a cell is kept when its center is inside"""
    _check_triangle(a, b)
    ticks = tuple(np.linspace(0.0, 1.0, m + 1))
    centers = (np.arange(m) + 0.5) / m
    I = (a * centers[:, None] + b * centers[None, :] > 1).astype(int)
    return RegionSpec(ticks, ticks, I, 0.0, f"triangle_{m}x{m}")


@dataclass(frozen=True)
class PointwiseField:
    """A density known only pointwise, with the breakpoints where it may jump or kink.

    ``x_kinks(y)`` and ``y_kinks(x)`` list extra non-smooth points of the
    sections g(., y) and g(x, .); quadrature splits there.
    """

    name: str
    density: Callable
    r: float
    x: Tuple[float, ...]
    y: Tuple[float, ...]
    x_kinks: Optional[Callable[[float], Sequence[float]]] = field(default=None, compare=False)
    y_kinks: Optional[Callable[[float], Sequence[float]]] = field(default=None, compare=False)
    rectilinear: bool = True

    def g(self, x, y):
        return self.density(x, y)

    def split_x(self, y: float) -> List[float]:
        extra = list(self.x_kinks(y)) if self.x_kinks else []
        return sorted(p for p in set(self.x) | set(extra) if 0.0 <= p <= 1.0)

    def split_y(self, x: float) -> List[float]:
        extra = list(self.y_kinks(x)) if self.y_kinks else []
        return sorted(p for p in set(self.y) | set(extra) if 0.0 <= p <= 1.0)


def staircase_2x2_pointwise(a: float, b: float, r: float) -> PointwiseField:
    _check_staircase(a, b, r)
    return PointwiseField(
        "staircase_2x2", lambda x, y: oracle_staircase_2x2(a, b, r, x, y), r, (0.0, a, 1.0), (0.0, b, 1.0)
    )


def nonconvex_3x2_pointwise(r: float) -> PointwiseField:
    return PointwiseField(
        "nonconvex_3x2", lambda x, y: oracle_nonconvex_3x2(r, x, y), r, NONCONVEX_X, NONCONVEX_Y
    )


def triangle_pointwise(a: float, b: float) -> PointwiseField:
    _check_triangle(a, b)
    return PointwiseField(
        "triangle",
        lambda x, y: oracle_triangle(a, b, x, y),
        0.0,
        (0.0, 1 / a, 1.0),
        (0.0, 1 / b, 1.0),
        x_kinks=lambda y: [(1 - b * y) / a],
        y_kinks=lambda x: [(1 - a * x) / b],
        rectilinear=False,
    )
