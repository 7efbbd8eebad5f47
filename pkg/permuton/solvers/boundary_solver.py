#!/usr/bin/env python3
"""
Permuton Boundary Solver - values of phi and psi at the breakpoints

Three exact or numerical routes lead to the same BoundaryValues:

* solve_simple replays the reduction sequence of a simple array, solving one
  cross-ratio equation per step;
* solve_continuation walks r away from the r=0 scaling solution with Newton steps;
* solve_3x3_nonsimple solves the quadratic for the two convex 3x3 arrays that are
  not simple.

Every cross-ratio equation says that the mass of a rectangle, ln(CR)/r, equals
the length of the line it fills.
"""
import math
import sys
import threading
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    AmbiguousBranch,
    ContinuationCancelled,
    Degenerate,
    NotSimple,
    RZero,
    StepBlowup,
)
from .ipf import ScalingSolution, solve_r0
from .projective import (
    INFINITY,
    ONE,
    ZERO,
    MoebiusMap,
    ProjectiveValue,
    cross_ratio,
    distance,
    midpoint,
    solve_slot,
)
from .region import LENGTH_TOL, RegionSpec, apply_reduction, is_convex, is_simple

# smallest rectangle mass accepted as positive
MASS_FLOOR = 1e-12
METHODS = ("ipf", "simple", "continuation", "quad3x3")


@dataclass(frozen=True)
class BoundaryValues:
    """phi at x_0..x_k and psi at y_0..y_l, plus the gauge that pinned them"""

    phi: Tuple[ProjectiveValue, ...]
    psi: Tuple[ProjectiveValue, ...]
    r: float
    gauge: Dict[str, Any] = field(default_factory=dict, compare=False)
    method: str = field(default="simple", compare=False)
    # continuation coordinates, phi = 1/(r*chi); the only data at r = 0
    chi: Optional[Tuple[float, ...]] = None

    def to_document(self) -> Dict[str, Any]:
        document = {
            "method": self.method,
            "r": self.r,
            "phi": [value.to_list() for value in self.phi],
            "psi": [value.to_list() for value in self.psi],
            "gauge": self.gauge,
        }
        if self.chi is not None:
            document["chi"] = list(self.chi)
        return document

    @classmethod
    def from_document(cls, document: Dict[str, Any]) -> "BoundaryValues":
        chi = document.get("chi")
        return cls(
            phi=tuple(ProjectiveValue.from_pair(pair) for pair in document["phi"]),
            psi=tuple(ProjectiveValue.from_pair(pair) for pair in document["psi"]),
            r=float(document["r"]),
            gauge=document.get("gauge", {}),
            method=document.get("method", "simple"),
            chi=tuple(float(c) for c in chi) if chi is not None else None,
        )


def cell_log_ratio(bv: BoundaryValues, u: int, v: int) -> float:
    """log of the cross ratio of cell (u, v); nan if the cross ratio is not positive"""
    value = cross_ratio(bv.phi[u], bv.phi[u + 1], bv.psi[v], bv.psi[v + 1])
    if not math.isfinite(value) or value <= 0.0:
        return math.nan
    return math.log(value)


def mass_matrix(spec: RegionSpec, bv: BoundaryValues) -> np.ndarray:
    """Rectangle masses implied by bv, zero where I=0 and nan where undefined"""
    masses = np.zeros((spec.k, spec.ell))
    if bv.r == 0.0:
        if bv.chi is None:
            raise ValueError("r = 0 boundary values need chi coordinates")
        psi = np.array([value.to_float() for value in bv.psi])
        return np.where(spec.mask, np.outer(np.diff(bv.chi), np.diff(psi)), 0.0)
    for u, v in zip(*np.nonzero(spec.mask)):
        masses[u, v] = cell_log_ratio(bv, u, v) / bv.r
    return masses


def residual(spec: RegionSpec, bv: BoundaryValues) -> np.ndarray:
    """Signed residuals of the k row and l column equations, in log form.

    Entry u is r*(x_u - x_{u-1}) - sum_v I[u][v] log CR(u, v), then the columns
    the same way. At r = 0 the linearized equations in chi and psi are used.
    """
    mask = spec.mask
    if bv.r == 0.0:
        masses = mass_matrix(spec, bv)
        return np.concatenate([spec.dx - masses.sum(axis=1), spec.dy - masses.sum(axis=0)])
    logs = np.zeros((spec.k, spec.ell))
    for u, v in zip(*np.nonzero(mask)):
        logs[u, v] = cell_log_ratio(bv, u, v)
    logs = np.where(np.isnan(logs), np.inf, logs)
    return np.concatenate(
        [bv.r * spec.dx - logs.sum(axis=1), bv.r * spec.dy - logs.sum(axis=0)]
    )


def _check_positive(spec: RegionSpec, bv: BoundaryValues) -> None:
    masses = mass_matrix(spec, bv)
    bad = [(int(u), int(v)) for u, v in zip(*np.nonzero(spec.mask & ~(masses > MASS_FLOOR)))]
    if bad:
        raise Degenerate(f"cells {bad} get non-positive mass at r = {bv.r}")


# ----------------------------------------------------------------------------
# Simple arrays


@dataclass
class _Equation:
    slot: str
    p: Tuple[int, int]
    s: Tuple[int, int]
    length: float
    freed: Optional[Tuple[str, int]] = None


def _record_equations(spec: RegionSpec, steps) -> Tuple[List[_Equation], Tuple[int, int, int, int], float]:
    mask = spec.mask
    px = list(range(spec.k + 1))
    py = list(range(spec.ell + 1))
    alpha = list(spec.dx)
    beta = list(spec.dy)
    equations: List[_Equation] = []

    for step in steps:
        if step.rule == 1 and step.axis == "x":
            i, j = step.index, step.partner
            slot = "p_lo" if i == 0 else "p_hi"
            eq = _Equation(slot, (px[i], px[i + 1]), (py[j], py[j + 1]), alpha[i])
            beta[j] -= alpha[i]
            px.pop(0 if i == 0 else len(px) - 1)
            alpha.pop(i)
            if step.isolated:
                if abs(beta[j]) > 1e-9:
                    raise Degenerate(f"isolated cell leaves length {beta[j]:.3e} in row {py[j]}")
                outer = 0 if j == 0 else len(py) - 1
                eq.freed = ("psi", py.pop(outer))
                beta.pop(j)
            elif beta[j] <= LENGTH_TOL:
                raise Degenerate(f"reduction leaves no length for row starting at y_{py[j]}")
        elif step.rule == 1:
            j, i = step.index, step.partner
            slot = "s_lo" if j == 0 else "s_hi"
            eq = _Equation(slot, (px[i], px[i + 1]), (py[j], py[j + 1]), beta[j])
            alpha[i] -= beta[j]
            py.pop(0 if j == 0 else len(py) - 1)
            beta.pop(j)
            if step.isolated:
                if abs(alpha[i]) > 1e-9:
                    raise Degenerate(f"isolated cell leaves length {alpha[i]:.3e} in column {px[i]}")
                outer = 0 if i == 0 else len(px) - 1
                eq.freed = ("phi", px.pop(outer))
                alpha.pop(i)
            elif alpha[i] <= LENGTH_TOL:
                raise Degenerate(f"reduction leaves no length for column starting at x_{px[i]}")
        elif step.axis == "x":
            i = step.index
            eq = _Equation("p_hi", (px[i], px[i + 1]), (py[0], py[-1]), alpha[i])
            alpha[i] += alpha.pop(i + 1)
            px.pop(i + 1)
        else:
            j = step.index
            eq = _Equation("s_hi", (px[0], px[-1]), (py[j], py[j + 1]), beta[j])
            beta[j] += beta.pop(j + 1)
            py.pop(j + 1)
        equations.append(eq)
        mask = apply_reduction(mask, step)

    if abs(alpha[0] - beta[0]) > 1e-9:
        raise Degenerate(f"final cell has width {alpha[0]:.6g} but height {beta[0]:.6g}")
    return equations, (px[0], px[1], py[0], py[1]), alpha[0]


def solve_simple(spec: RegionSpec) -> BoundaryValues:
    """Exact boundary values of a simple array, gauge phi(x_0)=0, psi(y_0)=inf, psi(y_1)=1
    of the fully reduced system"""
    if spec.r == 0.0:
        raise RZero("solve_simple needs r != 0; use the ipf solver at r = 0")
    steps = is_simple(spec.mask) if is_convex(spec.mask) else None
    if steps is None:
        raise NotSimple(f"{spec.name} does not reduce to a single cell")

    equations, (p0, p1, s0, s1), length = _record_equations(spec, steps)
    r = spec.r
    phi: List[Optional[ProjectiveValue]] = [None] * (spec.k + 1)
    psi: List[Optional[ProjectiveValue]] = [None] * (spec.ell + 1)
    phi[p0], psi[s0], psi[s1] = ZERO, INFINITY, ONE
    phi[p1] = solve_slot("p_hi", ZERO, ZERO, INFINITY, ONE, r * length)

    def corners(eq: _Equation) -> Dict[str, Optional[ProjectiveValue]]:
        return {
            "p_lo": phi[eq.p[0]],
            "p_hi": phi[eq.p[1]],
            "s_lo": psi[eq.s[0]],
            "s_hi": psi[eq.s[1]],
        }

    for eq in reversed(equations):
        if eq.freed is not None:
            # a detached cell: its outer value is free, any distinct point will do
            kind, index = eq.freed
            known = [value for key, value in corners(eq).items() if value is not None and key != eq.slot]
            (phi if kind == "phi" else psi)[index] = midpoint(known[0], known[1])
        # the unknown corner is ignored by solve_slot, ZERO only fills its place
        known = {key: value if value is not None else ZERO for key, value in corners(eq).items()}
        unknown = solve_slot(
            eq.slot, known["p_lo"], known["p_hi"], known["s_lo"], known["s_hi"], r * eq.length
        )
        if eq.slot.startswith("p"):
            phi[eq.p[0] if eq.slot == "p_lo" else eq.p[1]] = unknown
        else:
            psi[eq.s[0] if eq.slot == "s_lo" else eq.s[1]] = unknown

    gauge = {
        "kind": "three_point",
        "fixed": [["phi", p0, ZERO.to_list()], ["psi", s0, INFINITY.to_list()], ["psi", s1, ONE.to_list()]],
    }
    bv = BoundaryValues(tuple(phi), tuple(psi), r, gauge, "simple")
    _check_positive(spec, bv)
    return bv


# ----------------------------------------------------------------------------
# Continuation in r


def _used_corners(mask: np.ndarray) -> np.ndarray:
    k, ell = mask.shape
    used = np.zeros((k + 1, ell + 1), dtype=bool)
    for du in (0, 1):
        for dv in (0, 1):
            used[du : du + k, dv : dv + ell] |= mask
    return used


class _AffineSystem:
    """Row and column equations in the coordinates chi, psi with phi = 1/(r chi)"""

    def __init__(self, spec: RegionSpec):
        self.mask = spec.mask
        self.k, self.ell = spec.k, spec.ell
        self.dx, self.dy = spec.dx, spec.dy
        self.used = _used_corners(self.mask)
        self.cells = list(zip(*np.nonzero(self.mask)))

    def unpack(self, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        chi = np.concatenate(([0.0], z[: self.k - 1], [1.0]))
        psi = np.concatenate(([0.0], z[self.k - 1 :]))
        return chi, psi

    def masses(self, z: np.ndarray, r: float) -> Optional[Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]]:
        chi, psi = self.unpack(z)
        T = np.outer(chi, psi)
        factor = 1.0 - r * T
        if np.any(factor[self.used] <= 0.0):
            return None
        safe = np.where(self.used, factor, 1.0)
        m = -T if r == 0.0 else np.log(safe) / r
        dm = -1.0 / safe
        mass = m[:-1, 1:] - m[:-1, :-1] + m[1:, :-1] - m[1:, 1:]
        return np.where(self.mask, mass, 0.0), dm, chi, psi

    def evaluate(self, z: np.ndarray, r: float) -> Optional[Tuple[np.ndarray, np.ndarray, np.ndarray]]:
        state = self.masses(z, r)
        if state is None:
            return None
        mass, dm, chi, psi = state
        F = np.concatenate([mass.sum(axis=1) - self.dx, (mass.sum(axis=0) - self.dy)[:-1]])

        k, ell = self.k, self.ell
        J = np.zeros((k + ell, k + 1 + ell + 1))
        for u, v in self.cells:
            d_chi_lo = dm[u, v + 1] * psi[v + 1] - dm[u, v] * psi[v]
            d_chi_hi = dm[u + 1, v] * psi[v] - dm[u + 1, v + 1] * psi[v + 1]
            d_psi_lo = -dm[u, v] * chi[u] + dm[u + 1, v] * chi[u + 1]
            d_psi_hi = dm[u, v + 1] * chi[u] - dm[u + 1, v + 1] * chi[u + 1]
            for row in (u, k + v):
                J[row, u] += d_chi_lo
                J[row, u + 1] += d_chi_hi
                J[row, k + 1 + v] += d_psi_lo
                J[row, k + 1 + v + 1] += d_psi_hi
        unknowns = list(range(1, k)) + list(range(k + 2, k + 2 + ell))
        return F, J[: k + ell - 1][:, unknowns], mass


def _newton(
    system: _AffineSystem, z: np.ndarray, r: float, tol: float, max_iter: int
) -> Optional[np.ndarray]:
    previous = math.inf
    for _ in range(max_iter):
        state = system.evaluate(z, r)
        if state is None:
            return None
        F, J, mass = state
        size = float(np.max(np.abs(F)))
        if not math.isfinite(size):
            return None
        positive = bool(np.all(mass[system.mask] > MASS_FLOOR))
        if size < tol or (size < 1e-10 and size >= 0.5 * previous):
            # converged, or stalled at rounding level
            return z if positive else None
        if size > 1e3 * max(previous, 1.0) and math.isfinite(previous):
            return None
        previous = size
        try:
            z = z - np.linalg.solve(J, F)
        except np.linalg.LinAlgError:
            return None
    return None


def _affine_start(spec: RegionSpec, scaling: ScalingSolution) -> Tuple[np.ndarray, float]:
    c = float(scaling.lam.sum())
    chi = np.cumsum(scaling.lam) / c
    psi = np.cumsum(scaling.mu) * c
    return np.concatenate([chi[:-1], psi]), c


def _affine_values(system: _AffineSystem, z: np.ndarray, r: float, method: str) -> BoundaryValues:
    chi, psi = system.unpack(z)
    phi = tuple(ProjectiveValue(1.0, r * c) for c in chi)
    gauge = {"kind": "affine", "chi0": 0.0, "psi0": 0.0, "chik": 1.0}
    return BoundaryValues(
        phi,
        tuple(ProjectiveValue(p, 1.0) for p in psi),
        r,
        gauge,
        method,
        tuple(float(c) for c in chi),
    )


def solve_continuation(
    spec: RegionSpec,
    r_target: Optional[float] = None,
    dr: float = 1e-3,
    tol: float = 1e-12,
    max_halvings: int = 10,
    newton_iter: int = 50,
    cancel: Optional[threading.Event] = None,
    verbose: bool = False,
) -> BoundaryValues:
    """Follow the solution from r = 0 to r_target in steps of at most dr"""
    if r_target is None:
        r_target = spec.r
    if not is_convex(spec.mask):
        raise NotSimple(f"{spec.name}: continuation needs a convex array")
    if dr <= 0:
        raise ValueError(f"dr must be positive, got {dr}")

    system = _AffineSystem(spec)
    scaling = solve_r0(spec)
    z, _ = _affine_start(spec, scaling)
    if r_target == 0.0:
        return _affine_values(system, z, 0.0, "ipf")

    direction = 1.0 if r_target > 0 else -1.0
    r, step = 0.0, dr
    z_prev, r_prev = None, None
    halvings, accepted = 0, 0
    if verbose:
        print(f"🚀 Continuation from r=0 to r={r_target} (dr={dr})", file=sys.stderr)

    while r != r_target:
        if cancel is not None and cancel.is_set():
            raise ContinuationCancelled(r)
        r_new = r + direction * step
        if direction * (r_new - r_target) > 0 or abs(r_target - r_new) < 1e-14:
            r_new = r_target
        if z_prev is None:
            guess = z
        else:
            guess = z + (z - z_prev) * (r_new - r) / (r - r_prev)
        solved = _newton(system, guess, r_new, tol, newton_iter)
        if solved is None and z_prev is not None:
            solved = _newton(system, z, r_new, tol, newton_iter)
        if solved is None:
            halvings += 1
            if halvings > max_halvings:
                raise StepBlowup(r, f"Newton failed at r = {r_new:.6g} after {max_halvings} halvings")
            step /= 2.0
            continue
        z_prev, r_prev = z, r
        z, r = solved, r_new
        halvings = 0
        accepted += 1
        step = min(step * 2.0, dr)
        if verbose and accepted % 500 == 0:
            print(f"📦 r = {r:.6g} after {accepted} steps", file=sys.stderr)

    if verbose:
        print(f"✅ Continuation reached r={r} in {accepted} steps", file=sys.stderr)
    return _affine_values(system, z, r, "continuation")


# ----------------------------------------------------------------------------
# Non-simple 3x3 arrays

# zeros at cells (0, 2) and (2, 0), and the mirror image with zeros at (0, 0) and (2, 2)
_NONSIMPLE_PATTERNS = (
    np.array([[1, 1, 0], [1, 1, 1], [0, 1, 1]], dtype=bool),
    np.array([[0, 1, 1], [1, 1, 1], [1, 1, 0]], dtype=bool),
)


def nonsimple_3x3_pattern(I) -> Optional[int]:
    """0 or 1 when I is one of the two non-simple convex 3x3 arrays, else None"""
    mask = np.asarray(I, dtype=bool)
    if mask.shape != (3, 3):
        return None
    for index, pattern in enumerate(_NONSIMPLE_PATTERNS):
        if np.array_equal(mask, pattern):
            return index
    return None


def _quadratic_roots(x: Sequence[float], y: Sequence[float], r: float) -> List[Tuple[float, float]]:
    a1, a2 = x[1], x[2]
    b1, b2 = y[1], y[2]

    def E(t):
        return math.exp(-r * t)

    A2 = 1.0 - E(b2 - a1)
    A1 = E(1 - a1) + E(b2) + E(a2 - a1 + b2 - b1) - E(1 - b1) - E(a2) - 1.0
    A0 = E(1 - b1) + E(a2) + E(1 + a2 - b1) - E(1 - a1 + a2 - b1) - E(b2 + a2 - b1) - E(1)

    if abs(A2) < 1e-15:
        roots = [-A0 / A1]
    else:
        disc = A1 * A1 - 4.0 * A2 * A0
        if disc < 0.0:
            raise AmbiguousBranch(f"no real root at r = {r} (discriminant {disc:.3e})")
        root = math.sqrt(disc)
        roots = [(-A1 + root) / (2.0 * A2), (-A1 - root) / (2.0 * A2)]

    C = E(1 - a1) + E(b2) - E(1 - b1) - E(a2)
    D1 = 1.0 - E(a2 - b1)
    D2 = 1.0 - E(b2 - a1)
    pairs = []
    for X in roots:
        if abs(D1) > 1e-15:
            Y = (C + X * D2) / D1
        else:
            X = -C / D2
            Y = (E(1 - a1) + E(b2) - X * E(b2 - a1) - E(1)) / (1.0 - X)
        pairs.append((X, Y))
    return pairs


def _back_substitute(x, y, r: float, X: float, Y: float) -> Tuple[Tuple[ProjectiveValue, ...], Tuple[ProjectiveValue, ...]]:
    def E(t):
        return math.exp(-r * t)

    scale = X * Y - E(1)
    phi = (
        ZERO,
        ProjectiveValue((X - E(x[1])) * Y, scale),
        ProjectiveValue((X - E(x[2])) * Y, scale),
        ONE,
    )
    psi = (
        INFINITY,
        ProjectiveValue(Y, Y - E(y[1])),
        ProjectiveValue(Y, Y - E(y[2])),
        ProjectiveValue(X * Y, scale),
    )
    return phi, psi


def quadratic_3x3_candidates(spec: RegionSpec) -> List[Dict[str, Any]]:
    """Both roots of the quadratic with their boundary values, masses and acceptance"""
    if spec.r == 0.0:
        raise RZero("the quadratic solver needs r != 0; use the ipf solver at r = 0")
    pattern = nonsimple_3x3_pattern(spec.mask)
    if pattern is None:
        raise NotSimple(f"{spec.name} is not one of the non-simple 3x3 arrays")

    mirrored = pattern == 1
    work = spec
    if mirrored:
        work = RegionSpec(
            tuple(1.0 - t for t in reversed(spec.x)),
            spec.y,
            spec.mask[::-1, :].astype(int),
            -spec.r,
            spec.name,
        )

    candidates = []
    for X, Y in _quadratic_roots(work.x, work.y, work.r):
        try:
            phi, psi = _back_substitute(work.x, work.y, work.r, X, Y)
        except ValueError:
            continue
        if mirrored:
            phi = tuple(reversed(phi))
            gauge = {"kind": "three_point", "fixed": [["phi", 3, ZERO.to_list()], ["phi", 0, ONE.to_list()], ["psi", 0, INFINITY.to_list()]]}
        else:
            gauge = {"kind": "three_point", "fixed": [["phi", 0, ZERO.to_list()], ["phi", 3, ONE.to_list()], ["psi", 0, INFINITY.to_list()]]}
        bv = BoundaryValues(phi, psi, spec.r, gauge, "quad3x3")
        masses = mass_matrix(spec, bv)
        res = residual(spec, bv)
        worst = float(np.max(np.abs(res)))
        positive = bool(np.all(masses[spec.mask] > MASS_FLOOR))
        candidates.append(
            {
                "X": X,
                "Y": Y,
                "values": bv,
                "masses": masses,
                "residual": worst,
                "accepted": positive and worst < 1e-8,
            }
        )
    return candidates


def solve_3x3_nonsimple(spec: RegionSpec) -> BoundaryValues:
    """Boundary values of a non-simple convex 3x3 array from the root with all masses positive"""
    candidates = quadratic_3x3_candidates(spec)
    accepted = [c for c in candidates if c["accepted"]]
    if len(accepted) != 1:
        summary = ", ".join(f"X={c['X']:.6g} residual={c['residual']:.1e}" for c in candidates)
        raise AmbiguousBranch(
            f"{len(accepted)} of {len(candidates)} roots give positive masses at r = {spec.r} ({summary})"
        )
    return accepted[0]["values"]


# ----------------------------------------------------------------------------
# Gauges


def _anchors(source: BoundaryValues, target: BoundaryValues) -> List[Tuple[str, int]]:
    chosen: List[Tuple[str, int]] = []
    slots = [("phi", i) for i in range(len(source.phi))] + [("psi", i) for i in range(len(source.psi))]
    for slot in slots:
        s_value = getattr(source, slot[0])[slot[1]]
        t_value = getattr(target, slot[0])[slot[1]]
        if all(
            distance(s_value, getattr(source, o[0])[o[1]]) > 1e-6
            and distance(t_value, getattr(target, o[0])[o[1]]) > 1e-6
            for o in chosen
        ):
            chosen.append(slot)
        if len(chosen) == 3:
            return chosen
    raise ValueError("boundary values have fewer than three distinct points")


def align(
    source: BoundaryValues,
    target: BoundaryValues,
    anchors: Optional[Sequence[Tuple[str, int]]] = None,
) -> BoundaryValues:
    """Move source into the gauge of target by the Moebius map agreeing on three anchors"""
    if len(source.phi) != len(target.phi) or len(source.psi) != len(target.psi):
        raise ValueError("boundary values belong to different regions")
    anchors = list(anchors) if anchors is not None else _anchors(source, target)
    Z = [getattr(source, kind)[i] for kind, i in anchors]
    W = [getattr(target, kind)[i] for kind, i in anchors]
    moebius = MoebiusMap.points_to_points(Z, W)
    return replace(
        source,
        phi=moebius.apply(source.phi),
        psi=moebius.apply(source.psi),
        gauge={"kind": "aligned", "anchors": [list(a) for a in anchors]},
        chi=None,
    )


def transform(bv: BoundaryValues, moebius: MoebiusMap) -> BoundaryValues:
    """Apply one Moebius map to every phi and psi value"""
    return replace(
        bv,
        phi=moebius.apply(bv.phi),
        psi=moebius.apply(bv.psi),
        gauge={"kind": "moebius", "map": list(moebius.coefficients)},
        chi=None,
    )


def affine_coordinates(bv: BoundaryValues) -> Tuple[np.ndarray, np.ndarray]:
    """chi and psi in the gauge chi(x_0)=0, psi(y_0)=0, chi(x_k)=1 with phi = 1/(r chi)"""
    if bv.chi is not None:
        return np.array(bv.chi), np.array([value.to_float() for value in bv.psi])
    if bv.r == 0.0:
        raise RZero("affine coordinates at r = 0 need the chi record")
    anchor_to = (INFINITY, ZERO, ProjectiveValue(1.0, bv.r))
    moebius = MoebiusMap.points_to_points((bv.phi[0], bv.psi[0], bv.phi[-1]), anchor_to)
    phi = moebius.apply(bv.phi)
    psi = moebius.apply(bv.psi)
    chi = np.array([value.den / (bv.r * value.num) if value.num else math.inf for value in phi])
    return chi, np.array([value.to_float() for value in psi])


# ----------------------------------------------------------------------------
# Dispatch


def choose_method(spec: RegionSpec) -> str:
    """ipf at r=0, simple for simple arrays, quad3x3 for the two 3x3 patterns, else continuation"""
    if spec.r == 0.0:
        return "ipf"
    if is_simple(spec.mask) is not None:
        return "simple"
    if nonsimple_3x3_pattern(spec.mask) is not None:
        return "quad3x3"
    return "continuation"


def solve_boundary(spec: RegionSpec, method: str = "auto", **options) -> BoundaryValues:
    """Solve for the boundary values with the named method"""
    if not is_convex(spec.mask):
        raise NotSimple(f"{spec.name} is not convex; only the built-in non-convex oracle is available")
    if method == "auto":
        method = choose_method(spec)
    if method == "ipf":
        if spec.r != 0.0:
            raise ValueError(f"method ipf solves only r = 0, got r = {spec.r}")
        return solve_continuation(spec, 0.0)
    if method == "simple":
        return solve_simple(spec)
    if method == "quad3x3":
        return solve_3x3_nonsimple(spec)
    if method == "continuation":
        return solve_continuation(spec, spec.r, **options)
    raise ValueError(f"unknown method {method!r}, expected auto or one of {METHODS}")
