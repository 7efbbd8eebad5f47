#!/usr/bin/env python3
"""
Permuton Region - rectilinear region data, convexity, simplicity and non-degeneracy
"""
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import json

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_flow

from .errors import Degenerate, InvalidRegion, NotConverged

# entries of a witness below this fraction of the smallest row sum count as zero
STRICTNESS = 1e-12
# reduced interval lengths below this are treated as zero
LENGTH_TOL = 1e-12
# marginal violation below which the support counts as feasible
FEASIBILITY_TOL = 1e-9
# integer scale for the flow network (scipy wants int32 capacities)
FLOW_SCALE = 10**9

ArrayLike = Union[np.ndarray, Sequence[Sequence[int]]]


def rows_to_cartesian(rows: ArrayLike) -> np.ndarray:
    """Convert rows listed top-to-bottom into an [u][v] array with lower-left origin"""
    grid = np.asarray(rows, dtype=int)
    if grid.ndim != 2:
        raise InvalidRegion(f"I must be a 2-d array, got shape {grid.shape}")
    return grid[::-1, :].T.copy()


def cartesian_to_rows(I: ArrayLike) -> List[List[int]]:
    """Inverse of rows_to_cartesian"""
    grid = np.asarray(I, dtype=int)
    return grid.T[::-1, :].tolist()


def _as_mask(I: ArrayLike) -> np.ndarray:
    mask = np.asarray(I)
    if mask.ndim != 2 or mask.size == 0:
        raise InvalidRegion(f"I must be a non-empty 2-d array, got shape {mask.shape}")
    if not np.isin(mask, (0, 1)).all():
        raise InvalidRegion("I must contain only 0 and 1")
    return mask.astype(bool)


def _check_lines(mask: np.ndarray) -> None:
    empty_u = np.flatnonzero(~mask.any(axis=1))
    empty_v = np.flatnonzero(~mask.any(axis=0))
    if empty_u.size or empty_v.size:
        raise InvalidRegion(
            f"every row and column of I needs a 1 (empty u: {empty_u.tolist()}, "
            f"empty v: {empty_v.tolist()})"
        )


@dataclass(frozen=True)
class RegionSpec:
    """Breakpoints x, y, the 0/1 array I indexed [u][v], and the Mallows rate r"""

    x: Tuple[float, ...]
    y: Tuple[float, ...]
    I: Tuple[Tuple[int, ...], ...]
    r: float = 0.0
    name: str = field(default="region", compare=False)

    def __post_init__(self):
        x = tuple(float(t) for t in self.x)
        y = tuple(float(t) for t in self.y)
        mask = _as_mask(self.I)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "I", tuple(tuple(int(b) for b in row) for row in mask))
        object.__setattr__(self, "r", float(self.r))

        for label, points in (("x", x), ("y", y)):
            if len(points) < 2:
                raise InvalidRegion(f"{label} needs at least two breakpoints")
            if points[0] != 0.0 or points[-1] != 1.0:
                raise InvalidRegion(f"{label} must start at 0 and end at 1, got {points}")
            if any(b <= a for a, b in zip(points, points[1:])):
                raise InvalidRegion(f"{label} must be strictly increasing, got {points}")
        if mask.shape != (len(x) - 1, len(y) - 1):
            raise InvalidRegion(
                f"I has shape {mask.shape}, expected ({len(x) - 1}, {len(y) - 1})"
            )
        if not np.isfinite(self.r):
            raise InvalidRegion(f"r must be finite, got {self.r}")
        _check_lines(mask)

    @property
    def k(self) -> int:
        return len(self.x) - 1

    @property
    def ell(self) -> int:
        return len(self.y) - 1

    @property
    def mask(self) -> np.ndarray:
        return np.array(self.I, dtype=bool)

    @property
    def dx(self) -> np.ndarray:
        return np.diff(np.array(self.x))

    @property
    def dy(self) -> np.ndarray:
        return np.diff(np.array(self.y))

    def with_r(self, r: float) -> "RegionSpec":
        return replace(self, r=float(r))

    def to_document(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "x": list(self.x),
            "y": list(self.y),
            "I": cartesian_to_rows(self.I),
            "r": self.r,
        }

    @classmethod
    def from_rows(cls, x, y, rows: ArrayLike, r: float = 0.0, name: str = "region") -> "RegionSpec":
        """Build a spec from an I listed top-to-bottom, as in the JSON documents"""
        return cls(tuple(x), tuple(y), rows_to_cartesian(rows), r, name)


def region_from_document(document: Dict[str, Any]) -> RegionSpec:
    """Build a RegionSpec from a parsed region document"""
    from ..utils.validation import validate_region_document

    errors = validate_region_document(document)
    if errors:
        raise InvalidRegion("; ".join(errors))
    return RegionSpec.from_rows(
        document["x"],
        document["y"],
        document["I"],
        document.get("r", 0.0),
        document.get("name", "region"),
    )


def load_region(path: Union[str, Path]) -> RegionSpec:
    """Load a region document from disk"""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Region config not found: {path}")
    with open(path, "r") as f:
        try:
            document = json.load(f)
        except json.JSONDecodeError as e:
            raise InvalidRegion(f"{path} is not valid JSON: {e}")
    if "name" not in document:
        document["name"] = path.stem
    return region_from_document(document)


def _segment(line: np.ndarray) -> bool:
    ones = np.flatnonzero(line)
    return ones.size > 0 and ones[-1] - ones[0] + 1 == ones.size


def is_convex(I: ArrayLike) -> bool:
    """True iff every row and every column of I is one contiguous run of 1s"""
    mask = _as_mask(I)
    _check_lines(mask)
    return all(_segment(mask[u, :]) for u in range(mask.shape[0])) and all(
        _segment(mask[:, v]) for v in range(mask.shape[1])
    )


@dataclass(frozen=True)
class ReductionStep:
    """One reduction of the current array.

    rule 1 removes the extreme line ``index`` on ``axis`` ("x" removes a column of
    fixed u, "y" a row of fixed v) whose single 1 sits at ``partner`` on the
    other axis; ``isolated`` marks that the partner line emptied and was dropped
    with it. rule 2 merges the full lines ``index`` and ``index + 1``.
    """

    rule: int
    axis: str
    index: int
    partner: int = -1
    isolated: bool = False


def _rule_one(mask: np.ndarray) -> Optional[ReductionStep]:
    k, ell = mask.shape
    candidates = [("x", 0), ("x", k - 1), ("y", 0), ("y", ell - 1)]
    for axis, index in candidates:
        line = mask[index, :] if axis == "x" else mask[:, index]
        ones = np.flatnonzero(line)
        if ones.size != 1:
            continue
        partner = int(ones[0])
        cross = mask[:, partner] if axis == "x" else mask[partner, :]
        isolated = int(cross.sum()) == 1
        if isolated:
            cross_len = ell if axis == "x" else k
            other_len = k if axis == "x" else ell
            # an emptied interior line would leave an invalid array
            if partner not in (0, cross_len - 1) or other_len == 1 or cross_len == 1:
                continue
        return ReductionStep(1, axis, index, partner, isolated)
    return None


def _rule_two(mask: np.ndarray) -> Optional[ReductionStep]:
    k, ell = mask.shape
    full_u = mask.all(axis=1)
    for u in range(k - 1):
        if full_u[u] and full_u[u + 1]:
            return ReductionStep(2, "x", u)
    full_v = mask.all(axis=0)
    for v in range(ell - 1):
        if full_v[v] and full_v[v + 1]:
            return ReductionStep(2, "y", v)
    return None


def apply_reduction(mask: np.ndarray, step: ReductionStep) -> np.ndarray:
    """Apply one reduction step to a boolean [u][v] array"""
    if step.rule == 1:
        if step.axis == "x":
            reduced = np.delete(mask, step.index, axis=0)
            if step.isolated:
                reduced = np.delete(reduced, step.partner, axis=1)
        else:
            reduced = np.delete(mask, step.index, axis=1)
            if step.isolated:
                reduced = np.delete(reduced, step.partner, axis=0)
        return reduced
    if step.axis == "x":
        return np.delete(mask, step.index + 1, axis=0)
    return np.delete(mask, step.index + 1, axis=1)


def is_simple(I: ArrayLike) -> Optional[Tuple[ReductionStep, ...]]:
    """Reduction sequence taking I to the 1x1 array, or None if I is not simple"""
    mask = _as_mask(I)
    if not is_convex(mask):
        raise InvalidRegion("is_simple needs a convex array")
    steps: List[ReductionStep] = []
    while mask.shape != (1, 1):
        step = _rule_one(mask) or _rule_two(mask)
        if step is None:
            return None
        steps.append(step)
        mask = apply_reduction(mask, step)
    return tuple(steps)


@dataclass(frozen=True)
class FeasibleMasses:
    """Strictly positive mass array on the support of I with the prescribed marginals"""

    B: np.ndarray

    def row_sums(self) -> np.ndarray:
        return self.B.sum(axis=1)

    def column_sums(self) -> np.ndarray:
        return self.B.sum(axis=0)


def support_flow(spec: RegionSpec, scale: int = FLOW_SCALE) -> float:
    """Maximum transportable mass through the bipartite support graph"""
    k, ell = spec.k, spec.ell
    source, sink = 0, k + ell + 1
    rows, cols, caps = [], [], []
    for u, width in enumerate(spec.dx):
        rows.append(source)
        cols.append(1 + u)
        caps.append(int(np.floor(width * scale)))
    for v, height in enumerate(spec.dy):
        rows.append(1 + k + v)
        cols.append(sink)
        caps.append(int(np.floor(height * scale)))
    for u, v in zip(*np.nonzero(spec.mask)):
        rows.append(1 + u)
        cols.append(1 + k + v)
        caps.append(scale)
    graph = csr_matrix(
        (np.array(caps, dtype=np.int32), (rows, cols)), shape=(k + ell + 2, k + ell + 2)
    )
    return maximum_flow(graph, source, sink).flow_value / scale


def check_nondegenerate(spec: RegionSpec, budget: int = 100_000, tol: float = 1e-12) -> FeasibleMasses:
    """Strict-positivity witness for the marginal problem, or Degenerate

    Feasibility is decided at FEASIBILITY_TOL; the witness is then scaled on to ``tol``.
    """
    from .ipf import scale_support

    mask = spec.mask
    try:
        rough = scale_support(mask, spec.dx, spec.dy, tol=FEASIBILITY_TOL, max_iter=budget)
        solution = scale_support(
            mask, spec.dx, spec.dy, tol=min(tol, FEASIBILITY_TOL), max_iter=budget, mu0=rough.mu
        )
    except NotConverged as e:
        slack = spec.k + spec.ell + 1
        if support_flow(spec) < 1.0 - slack / FLOW_SCALE:
            raise Degenerate(
                f"no mass array on the support of I has the prescribed marginals "
                f"(max flow below 1 after {e.max_iter} scaling rounds)"
            )
        raise Degenerate(
            "marginals are feasible only with zero mass on some cells where I=1; "
            "replace those entries of I by 0"
        )
    B = solution.masses
    floor = STRICTNESS * min(spec.dx.min(), spec.dy.min())
    weak = [(int(u), int(v)) for u, v in zip(*np.nonzero(mask & (B <= floor)))]
    if weak:
        raise Degenerate(f"cells {weak} carry no mass in any feasible array")
    return FeasibleMasses(B)
