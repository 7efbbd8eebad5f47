#!/usr/bin/env python3
"""
Permuton Verify - solver-agnostic check battery for density fields
"""
import math
import sys
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from scipy import integrate

from .density import DensityField, box_mass, density_bounds
from .oracles import PointwiseField
from .region import is_convex

AnyField = Union[DensityField, PointwiseField]

DEFAULT_TOLERANCES = {
    "four_point": 1e-8,
    "marginals": 1e-7,
    "jumps": 1e-8,
    "liouville": 1e-3,
}


@dataclass(frozen=True)
class CheckReport:
    """Outcome of one check, with the worst point found"""

    name: str
    max_residual: float
    witness: Optional[Dict[str, Any]]
    passed: bool
    tol: float
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "max_residual": self.max_residual,
            "witness": self.witness,
            "passed": self.passed,
            "tol": self.tol,
            "details": self.details,
        }


def _report(name: str, worst: float, witness, tol: float, **details) -> CheckReport:
    passed = bool(np.isfinite(worst) and worst <= tol)
    return CheckReport(name, float(worst), witness, passed, tol, details)


def _skipped(name: str, tol: float, reason: str) -> CheckReport:
    return CheckReport(name, 0.0, None, True, tol, {"skipped": reason})


def _breaks(f: AnyField) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(f, DensityField):
        return np.asarray(f.spec.x), np.asarray(f.spec.y)
    return np.asarray(f.x), np.asarray(f.y)


def limit_g(f: AnyField, x: float, y: float, x_side: str, y_side: str) -> float:
    """One-sided limit of g at (x, y); "left" approaches from smaller coordinates"""
    if isinstance(f, PointwiseField):
        eps = 1e-13
        return float(f.g(x - eps if x_side == "left" else x + eps, y - eps if y_side == "left" else y + eps))
    xs, ys = _breaks(f)
    u = int(np.clip(np.searchsorted(xs, x, side=x_side) - 1, 0, len(xs) - 2))
    v = int(np.clip(np.searchsorted(ys, y, side=y_side) - 1, 0, len(ys) - 2))
    rect = f.rect(u, v)
    return 0.0 if rect is None else float(rect.g(x, y))


def _support_cells(f: AnyField) -> List[Tuple[int, int]]:
    if isinstance(f, DensityField):
        return [(rect.u, rect.v) for rect in f.rects]
    xs, ys = _breaks(f)
    cells = []
    for u in range(len(xs) - 1):
        for v in range(len(ys) - 1):
            if f.g((xs[u] + xs[u + 1]) / 2, (ys[v] + ys[v + 1]) / 2) > 0:
                cells.append((u, v))
    return cells


def _sub_box(rng: np.random.Generator, lo_x, hi_x, lo_y, hi_y) -> Tuple[float, float, float, float]:
    x1, x2 = np.sort(rng.uniform(lo_x, hi_x, 2))
    y1, y2 = np.sort(rng.uniform(lo_y, hi_y, 2))
    roll = rng.uniform()
    if roll < 0.1:
        x2 = x1
    elif roll < 0.2:
        y2 = y1
    return float(x1), float(x2), float(y1), float(y2)


def _mass(f: AnyField, x1, x2, y1, y2) -> float:
    if x1 == x2 or y1 == y2:
        return 0.0
    if isinstance(f, DensityField):
        return float(box_mass(f, x1, x2, y1, y2))
    value, _ = integrate.dblquad(lambda y, x: f.g(x, y), x1, x2, y1, y2, epsabs=1e-13, epsrel=1e-12)
    return value


def _four_point_residual(f: AnyField, x1, x2, y1, y2, limits: bool) -> float:
    if limits:
        g11 = limit_g(f, x1, y1, "left", "left")
        g22 = limit_g(f, x2, y2, "right", "right")
        g12 = limit_g(f, x1, y2, "left", "right")
        g21 = limit_g(f, x2, y1, "right", "left")
    else:
        g11, g22, g12, g21 = (float(f.g(x, y)) for x, y in ((x1, y1), (x2, y2), (x1, y2), (x2, y1)))
    if min(g11, g22, g12, g21) <= 0:
        return math.nan
    log_ratio = math.log(g11) + math.log(g22) - math.log(g12) - math.log(g21)
    mass = 0.0 if f.r == 0 else _mass(f, x1, x2, y1, y2)
    return abs(log_ratio - 2 * f.r * mass)


def check_four_point(
    f: AnyField,
    n_rects: int = 100,
    tol: float = DEFAULT_TOLERANCES["four_point"],
    seed: int = 0,
    mode: str = "auto",
) -> CheckReport:
    """Four-point relation on seeded random rectangles.

    mode "global" draws rectangles anywhere with all four corners in the support,
    using one-sided limits at the corners; "per_rect" keeps each rectangle
    inside a single support cell.
    """
    if mode == "auto":
        if isinstance(f, DensityField):
            mode = "global" if is_convex(f.spec.mask) else "per_rect"
        else:
            mode = "per_rect" if f.rectilinear and f.r != 0 else "global"
    rng = np.random.default_rng(seed)
    xs, ys = _breaks(f)
    cells = _support_cells(f)
    worst, witness, drawn, attempts = 0.0, None, 0, 0

    while drawn < n_rects:
        attempts += 1
        if attempts > 100 * n_rects:
            break
        if mode == "per_rect":
            u, v = cells[rng.integers(len(cells))]
            box = _sub_box(rng, xs[u], xs[u + 1], ys[v], ys[v + 1])
            residual = _four_point_residual(f, *box, limits=False)
        else:
            box = list(_sub_box(rng, 0.0, 1.0, 0.0, 1.0))
            # snap some corners to breakpoints so the limits are exercised
            if rng.uniform() < 0.2:
                box[rng.integers(2)] = float(xs[rng.integers(len(xs))])
                box[2 + rng.integers(2)] = float(ys[rng.integers(len(ys))])
                box = [min(box[0], box[1]), max(box[0], box[1]), min(box[2], box[3]), max(box[2], box[3])]
            residual = _four_point_residual(f, *box, limits=True)
            if math.isnan(residual):
                continue
        drawn += 1
        if math.isnan(residual) or residual > worst:
            worst = math.inf if math.isnan(residual) else residual
            witness = {"x1": box[0], "x2": box[1], "y1": box[2], "y2": box[3], "residual": worst}
    return _report("four_point", worst, witness, tol, mode=mode, seed=seed, rectangles=drawn)


def _pointwise_line_integral(f: PointwiseField, fixed: float, axis: str) -> float:
    points = f.split_y(fixed) if axis == "column" else f.split_x(fixed)
    total = 0.0
    for lo, hi in zip(points, points[1:]):
        if hi <= lo:
            continue
        if axis == "column":
            piece, _ = integrate.quad(lambda t: f.g(fixed, t), lo, hi, epsabs=1e-10, limit=200)
        else:
            piece, _ = integrate.quad(lambda t: f.g(t, fixed), lo, hi, epsabs=1e-10, limit=200)
        total += piece
    return total


def _field_line_integral(f: DensityField, fixed: float, axis: str) -> float:
    if axis == "column":
        u, _ = f.cells(fixed, 0.0)
        return float(sum(rect.column_integral(fixed, rect.y0, rect.y1) for rect in f.rects if rect.u == u))
    _, v = f.cells(0.0, fixed)
    return float(sum(rect.row_integral(fixed, rect.x0, rect.x1) for rect in f.rects if rect.v == v))


def check_marginals(
    f: AnyField, n_abscissae: int = 50, tol: float = DEFAULT_TOLERANCES["marginals"], seed: int = 0
) -> CheckReport:
    """Both marginals equal 1 at seeded abscissae: exact for coefficient fields, quadrature otherwise"""
    rng = np.random.default_rng(seed)
    worst, witness = 0.0, None
    integral = _field_line_integral if isinstance(f, DensityField) else _pointwise_line_integral
    for axis in ("column", "row"):
        for t in rng.uniform(0.0, 1.0, n_abscissae):
            deviation = abs(integral(f, float(t), axis) - 1.0)
            if not deviation <= worst:
                worst = deviation if math.isfinite(deviation) else math.inf
                witness = {"axis": axis, "at": float(t), "deviation": worst}
    return _report("marginals", worst, witness, tol, abscissae=n_abscissae, seed=seed)


def check_jumps(f: AnyField, tol: float = DEFAULT_TOLERANCES["jumps"], points: int = 16) -> CheckReport:
    """Constant multiplicative jumps between consecutive support cells, and unit corner products"""
    if not isinstance(f, DensityField):
        return _skipped("jumps", tol, "pointwise field has no rectangle structure")
    spec = f.spec
    mask = spec.mask
    xs, ys = spec.x, spec.y
    worst, witness = 0.0, None
    constants: Dict[str, float] = {}

    def record(residual: float, where: Dict[str, Any]):
        nonlocal worst, witness
        if not residual <= worst:
            worst = residual if math.isfinite(residual) else math.inf
            witness = dict(where, residual=worst)

    for u in range(spec.k):
        support = np.flatnonzero(mask[u, :])
        for v1, v2 in zip(support, support[1:]):
            t = np.linspace(xs[u], xs[u + 1], points + 2)[1:-1]
            with np.errstate(all="ignore"):
                ratio = np.log(f.rect(u, v2).g(t, ys[v2])) - np.log(f.rect(u, v1).g(t, ys[v1 + 1]))
            record(float(np.ptp(ratio)), {"kind": "vertical", "u": u, "v1": int(v1), "v2": int(v2)})
            constants[f"u{u}:v{v1}->v{v2}"] = float(np.exp(ratio.mean()))
    for v in range(spec.ell):
        support = np.flatnonzero(mask[:, v])
        for u1, u2 in zip(support, support[1:]):
            t = np.linspace(ys[v], ys[v + 1], points + 2)[1:-1]
            with np.errstate(all="ignore"):
                ratio = np.log(f.rect(u2, v).g(xs[u2], t)) - np.log(f.rect(u1, v).g(xs[u1 + 1], t))
            record(float(np.ptp(ratio)), {"kind": "horizontal", "v": v, "u1": int(u1), "u2": int(u2)})
            constants[f"v{v}:u{u1}->u{u2}"] = float(np.exp(ratio.mean()))

    corners = 0
    for u1 in range(spec.k):
        for u2 in range(u1 + 1, spec.k):
            for v1 in range(spec.ell):
                for v2 in range(v1 + 1, spec.ell):
                    if not (mask[u1, v1] and mask[u1, v2] and mask[u2, v1] and mask[u2, v2]):
                        continue
                    if mask[u1 + 1 : u2, v1 + 1 : v2].any():
                        continue
                    g11 = f.rect(u1, v1).g(xs[u1 + 1], ys[v1 + 1])
                    g22 = f.rect(u2, v2).g(xs[u2], ys[v2])
                    g12 = f.rect(u1, v2).g(xs[u1 + 1], ys[v2])
                    g21 = f.rect(u2, v1).g(xs[u2], ys[v1 + 1])
                    with np.errstate(all="ignore"):
                        residual = abs(float(np.log(g11 * g22 / (g12 * g21))))
                    record(residual, {"kind": "corner", "u1": u1, "u2": u2, "v1": v1, "v2": v2})
                    corners += 1
    return _report("jumps", worst, witness, tol, constants=constants, corners=corners)


def check_liouville(
    f: AnyField,
    n_points: int = 50,
    step: float = 1e-4,
    tol: float = DEFAULT_TOLERANCES["liouville"],
    seed: int = 0,
) -> CheckReport:
    """(log g)_xy = 2 r g by central differences at interior points"""
    rng = np.random.default_rng(seed)
    xs, ys = _breaks(f)
    cells = _support_cells(f)
    worst, witness, done = 0.0, None, 0
    for _ in range(20 * n_points):
        if done >= n_points:
            break
        u, v = cells[rng.integers(len(cells))]
        margin = 2 * step
        if xs[u + 1] - xs[u] <= 2 * margin or ys[v + 1] - ys[v] <= 2 * margin:
            continue
        x = rng.uniform(xs[u] + margin, xs[u + 1] - margin)
        y = rng.uniform(ys[v] + margin, ys[v + 1] - margin)
        stencil = [float(f.g(x + dx, y + dy)) for dx in (step, -step) for dy in (step, -step)]
        if min(stencil) <= 0:
            continue
        lpp, lpm, lmp, lmm = (math.log(s) for s in stencil)
        lhs = (lpp - lpm - lmp + lmm) / (4 * step * step)
        rhs = 2 * f.r * float(f.g(x, y))
        relative = abs(lhs - rhs) / max(1.0, abs(rhs))
        done += 1
        if relative > worst:
            worst = relative
            witness = {"x": x, "y": y, "lhs": lhs, "rhs": rhs}
    return _report("liouville", worst, witness, tol, points=done, step=step)


def check_bounds(f: AnyField, points: int = 32) -> CheckReport:
    """Density bounded away from 0 and infinity on every support rectangle"""
    if isinstance(f, DensityField):
        bounds = density_bounds(f, points)
    else:
        xs, ys = _breaks(f)
        bounds = {}
        for u, v in _support_cells(f):
            gx = np.linspace(xs[u], xs[u + 1], points + 2)[1:-1]
            gy = np.linspace(ys[v], ys[v + 1], points + 2)[1:-1]
            values = np.asarray(f.g(gx[:, None], gy[None, :]))
            values = values[values > 0]
            if values.size:
                bounds[(u, v)] = (float(values.min()), float(values.max()))
    lows = [lo for lo, _ in bounds.values()]
    highs = [hi for _, hi in bounds.values()]
    ok = bool(bounds) and min(lows) > 0 and all(math.isfinite(h) for h in highs)
    worst = 0.0 if ok else math.inf
    return CheckReport(
        "bounds",
        worst,
        None if ok else {"min": min(lows, default=0.0), "max": max(highs, default=math.inf)},
        ok,
        0.0,
        {"per_rect": {f"{u},{v}": [lo, hi] for (u, v), (lo, hi) in bounds.items()}},
    )


def run_battery(
    f: AnyField,
    tolerances: Optional[Dict[str, float]] = None,
    seed: int = 0,
    n_rects: int = 100,
    n_abscissae: int = 50,
    verbose: bool = False,
) -> List[CheckReport]:
    """Every check on one field"""
    tol = dict(DEFAULT_TOLERANCES, **(tolerances or {}))
    reports = [
        check_four_point(f, n_rects, tol["four_point"], seed),
        check_marginals(f, n_abscissae, tol["marginals"], seed),
        check_jumps(f, tol["jumps"]),
        check_liouville(f, tol=tol["liouville"], seed=seed),
        check_bounds(f),
    ]
    if verbose:
        for report in reports:
            mark = "✅" if report.passed else "❌"
            print(f"{mark} {report.name}: max residual {report.max_residual:.3e} (tol {report.tol:.0e})", file=sys.stderr)
    return reports


def battery_passed(reports: List[CheckReport]) -> bool:
    return all(report.passed for report in reports)
