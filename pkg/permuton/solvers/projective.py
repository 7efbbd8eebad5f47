#!/usr/bin/env python3
"""
Permuton Projective - points of the real projective line, cross ratios and Moebius maps
"""
import math
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

import numpy as np


@dataclass(frozen=True)
class ProjectiveValue:
    """Homogeneous pair [num:den], normalized so max(|num|, |den|) = 1; infinity is [1:0]"""

    num: float
    den: float

    def __post_init__(self):
        n, d = float(self.num), float(self.den)
        scale = max(abs(n), abs(d))
        if scale == 0.0 or not math.isfinite(scale):
            raise ValueError(f"[{self.num}:{self.den}] is not a point of the projective line")
        # sign fixed by the first nonzero coordinate
        if d < 0 or (d == 0 and n < 0):
            scale = -scale
        object.__setattr__(self, "num", n / scale)
        object.__setattr__(self, "den", d / scale)

    @classmethod
    def from_float(cls, value: float) -> "ProjectiveValue":
        if math.isinf(value):
            return INFINITY
        return cls(value, 1.0)

    @classmethod
    def from_pair(cls, pair: Sequence[float]) -> "ProjectiveValue":
        return cls(pair[0], pair[1])

    @property
    def is_infinite(self) -> bool:
        return self.den == 0.0

    def to_float(self) -> float:
        if self.is_infinite:
            return math.inf
        return self.num / self.den

    def to_list(self) -> List[float]:
        return [self.num, self.den]

    def __repr__(self):
        return f"[{self.num:.17g}:{self.den:.17g}]"


INFINITY = ProjectiveValue(1.0, 0.0)
ZERO = ProjectiveValue(0.0, 1.0)
ONE = ProjectiveValue(1.0, 1.0)


def det(a: ProjectiveValue, b: ProjectiveValue) -> float:
    """a_n b_d - b_n a_d; vanishes iff a == b"""
    return a.num * b.den - b.num * a.den


def cross_ratio(
    p: ProjectiveValue, p1: ProjectiveValue, s: ProjectiveValue, s1: ProjectiveValue
) -> float:
    """Cross ratio of a rectangle with corner values phi = p, p1 and psi = s, s1.

    Its logarithm divided by r is the mass of the rectangle.
    """
    numerator = det(s1, p) * det(s, p1)
    denominator = det(s, p) * det(s1, p1)
    if denominator == 0.0:
        return math.inf if numerator != 0.0 else math.nan
    return numerator / denominator


def _combine(a: ProjectiveValue, b: ProjectiveValue, wa: float, wb: float) -> ProjectiveValue:
    return ProjectiveValue(wa * a.num - wb * b.num, wa * a.den - wb * b.den)


# slot -> unknown corner; the remaining three corners are known
SLOTS = ("p_lo", "p_hi", "s_lo", "s_hi")


def solve_slot(
    slot: str,
    p: ProjectiveValue,
    p1: ProjectiveValue,
    s: ProjectiveValue,
    s1: ProjectiveValue,
    log_target: float,
) -> ProjectiveValue:
    """Corner value making log cross_ratio(p, p1, s, s1) equal log_target.

    The corner named by ``slot`` is ignored on input. The equation is linear in
    the homogeneous coordinates of the unknown: det(A, z) Md = det(B, z) Mn has
    the solution z = Md A - Mn B.
    """
    K = math.exp(log_target)
    if slot == "p_lo":
        A, B, Mn, Md = s1, s, K * det(s1, p1), det(s, p1)
    elif slot == "p_hi":
        A, B, Mn, Md = s, s1, K * det(s, p), det(s1, p)
    elif slot == "s_lo":
        A, B, Mn, Md = p1, p, K * det(s1, p1), det(s1, p)
    elif slot == "s_hi":
        A, B, Mn, Md = p, p1, K * det(s, p), det(s, p1)
    else:
        raise ValueError(f"unknown slot {slot!r}, expected one of {SLOTS}")
    return _combine(A, B, Md, Mn)


def midpoint(a: ProjectiveValue, b: ProjectiveValue) -> ProjectiveValue:
    """A point distinct from a and b"""
    return ProjectiveValue(a.num + b.num, a.den + b.den)


class MoebiusMap:
    """Real Moebius map z -> (alpha z + beta) / (gamma z + delta) acting on homogeneous pairs"""

    def __init__(self, alpha: float, beta: float, gamma: float, delta: float):
        self.matrix = np.array([[alpha, beta], [gamma, delta]], dtype=float)
        determinant = float(np.linalg.det(self.matrix))
        if determinant == 0.0:
            raise ValueError("Moebius map needs alpha*delta - beta*gamma != 0")
        self.matrix /= math.sqrt(abs(determinant))

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "MoebiusMap":
        return cls(*np.asarray(matrix, dtype=float).ravel())

    @property
    def coefficients(self) -> Tuple[float, float, float, float]:
        return tuple(float(c) for c in self.matrix.ravel())

    def inverse(self) -> "MoebiusMap":
        return MoebiusMap.from_matrix(np.linalg.inv(self.matrix))

    def compose(self, other: "MoebiusMap") -> "MoebiusMap":
        """self after other"""
        return MoebiusMap.from_matrix(self.matrix @ other.matrix)

    def __call__(self, z: ProjectiveValue) -> ProjectiveValue:
        n, d = self.matrix @ np.array([z.num, z.den])
        return ProjectiveValue(n, d)

    def apply(self, values: Iterable[ProjectiveValue]) -> Tuple[ProjectiveValue, ...]:
        return tuple(self(z) for z in values)

    @classmethod
    def points_to_01inf(
        cls, z1: ProjectiveValue, z2: ProjectiveValue, z3: ProjectiveValue
    ) -> "MoebiusMap":
        """The map sending z1, z2, z3 to 0, 1, infinity"""
        k1 = det(z2, z3)
        k3 = det(z2, z1)
        return cls(k1 * z1.den, -k1 * z1.num, k3 * z3.den, -k3 * z3.num)

    @classmethod
    def points_to_points(
        cls, Z: Sequence[ProjectiveValue], W: Sequence[ProjectiveValue]
    ) -> "MoebiusMap":
        """The map sending the three points Z to the three points W"""
        return cls.points_to_01inf(*W).inverse().compose(cls.points_to_01inf(*Z))

    def __repr__(self):
        return "MoebiusMap(" + ", ".join(f"{c:.6g}" for c in self.coefficients) + ")"


def distance(a: ProjectiveValue, b: ProjectiveValue) -> float:
    """Chordal distance on the projective line"""
    return abs(det(a, b)) / (math.hypot(a.num, a.den) * math.hypot(b.num, b.den))
