#!/usr/bin/env python3
"""
Permuton Sampler - Metropolis chains on restricted Mallows permutations

A permutation sigma of 1..n is identified with the points (sigma(m), m). It is
restricted by a region when every point falls in a cell with I=1 after the
breakpoints are scaled to X_u = round(n x_u), Y_v = round(n y_v). The chain
targets q^inv(sigma) / Z with q = exp(-r / n) unless q is given.
"""
import itertools
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from numba import njit
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .errors import Infeasible
from .region import RegionSpec

# vertex types of the degenerate six-vertex model; type 6 never occurs
TYPE_RIGHT_BELOW = 1
TYPE_LEFT_ABOVE = 2
TYPE_LEFT_BELOW = 3
TYPE_RIGHT_ABOVE = 4
TYPE_TURN = 5


@dataclass(frozen=True)
class PermutationSample:
    """State of a chain after ``sweeps`` sweeps of n proposals; sigma is 1-based"""

    n: int
    sigma: np.ndarray
    inversions: int
    seed: int
    sweeps: int
    q: float = 1.0

    def to_document(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "sigma": [int(s) for s in self.sigma],
            "inversions": self.inversions,
            "seed": self.seed,
            "sweeps": self.sweeps,
            "q": self.q,
        }


@dataclass(frozen=True)
class SixVertexGrid:
    """types[k, j] is the vertex in row k (position k+1) and column j (value j+1)"""

    n: int
    types: np.ndarray

    def row_counts(self) -> np.ndarray:
        """(n, 6) table: count of each type 1..6 in every row"""
        return np.stack([(self.types == t).sum(axis=1) for t in range(1, 7)], axis=1)

    def to_csv(self, path: Union[str, Path]) -> Path:
        """Integer CSV, top row first"""
        path = Path(path)
        np.savetxt(path, self.types[::-1], fmt="%d", delimiter=",")
        return path


def worker_count(default: Optional[int] = None) -> int:
    """Thread cap from PERMUTON_THREADS, else ``default``, else the CPU count"""
    value = os.environ.get("PERMUTON_THREADS")
    if value:
        try:
            return max(1, int(value))
        except ValueError:
            print(f"⚠️ ignoring PERMUTON_THREADS={value!r}", file=sys.stderr)
    return default or os.cpu_count() or 1


def discrete_breakpoints(points: Sequence[float], n: int) -> np.ndarray:
    return np.rint(np.asarray(points, dtype=float) * n).astype(int)


def allowed_matrix(spec: RegionSpec, n: int) -> np.ndarray:
    """allowed[m, s]: position m+1 may carry value s+1"""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    X = discrete_breakpoints(spec.x, n)
    Y = discrete_breakpoints(spec.y, n)
    labels = np.arange(1, n + 1)
    # X_{u-1} < s <= X_u
    u_of_value = np.clip(np.searchsorted(X, labels, side="left") - 1, 0, spec.k - 1)
    v_of_position = np.clip(np.searchsorted(Y, labels, side="left") - 1, 0, spec.ell - 1)
    return spec.mask[u_of_value[None, :], v_of_position[:, None]]


def initial_state(allowed: np.ndarray) -> np.ndarray:
    """A restricted permutation (0-based values) from a maximum bipartite matching"""
    matching = maximum_bipartite_matching(csr_matrix(allowed.astype(np.int8)), perm_type="column")
    if (matching < 0).any():
        missing = int((matching < 0).sum())
        raise Infeasible(f"no restricted permutation exists ({missing} positions unmatched)")
    return matching.astype(np.int64)


def _merge_count(values: List[int]) -> Tuple[List[int], int]:
    if len(values) <= 1:
        return values, 0
    mid = len(values) // 2
    left, a = _merge_count(values[:mid])
    right, b = _merge_count(values[mid:])
    merged, count, i, j = [], a + b, 0, 0
    while i < len(left) and j < len(right):
        if left[i] <= right[j]:
            merged.append(left[i])
            i += 1
        else:
            merged.append(right[j])
            count += len(left) - i
            j += 1
    merged.extend(left[i:])
    merged.extend(right[j:])
    return merged, count


def inv_count(sigma: Sequence[int]) -> int:
    """Number of pairs i<j with sigma(i) > sigma(j)"""
    values = [int(s) for s in sigma]
    if sorted(values) != list(range(min(values, default=1), min(values, default=1) + len(values))):
        raise ValueError(f"not a permutation: {values}")
    return _merge_count(values)[1]


@njit(nogil=True)
def _seed(seed):
    np.random.seed(seed)


@njit(nogil=True)
def _delta_inversions(sigma, i, j):
    a = sigma[i]
    b = sigma[j]
    lo = min(a, b)
    hi = max(a, b)
    between = 0
    for k in range(i + 1, j):
        if lo < sigma[k] < hi:
            between += 1
    if a < b:
        return 1 + 2 * between
    return -(1 + 2 * between)


@njit(nogil=True)
def _step(sigma, allowed, log_q):
    n = sigma.shape[0]
    i = np.random.randint(0, n)
    j = np.random.randint(0, n - 1)
    if j >= i:
        j += 1
    if i > j:
        i, j = j, i
    if not (allowed[i, sigma[j]] and allowed[j, sigma[i]]):
        return 0
    delta = _delta_inversions(sigma, i, j)
    exponent = delta * log_q
    if exponent >= 0.0 or np.random.random() < np.exp(exponent):
        sigma[i], sigma[j] = sigma[j], sigma[i]
        return delta
    return 0


@njit(nogil=True)
def _run(sigma, allowed, log_q, n_steps):
    """Advance the chain in place; returns the change in inversions"""
    total = 0
    if sigma.shape[0] < 2:
        return total
    for _ in range(n_steps):
        total += _step(sigma, allowed, log_q)
    return total


@njit(nogil=True)
def _trajectory(sigma, allowed, log_q, n_records, thin):
    out = np.empty((n_records, sigma.shape[0]), dtype=np.int64)
    for t in range(n_records):
        if sigma.shape[0] >= 2:
            for _ in range(thin):
                _step(sigma, allowed, log_q)
        out[t] = sigma
    return out


def _log_q(spec: RegionSpec, n: int, q: Optional[float]) -> float:
    if q is None:
        return -spec.r / n
    if q <= 0:
        raise ValueError(f"q must be positive, got {q}")
    return math.log(q)


def _check_restricted(sigma: np.ndarray, allowed: np.ndarray) -> None:
    if not allowed[np.arange(sigma.shape[0]), sigma].all():
        raise AssertionError("chain left the restricted set")


def sample(
    spec: RegionSpec,
    n: int,
    steps: int = 0,
    seed: int = 0,
    burn_in: Optional[int] = None,
    q: Optional[float] = None,
) -> PermutationSample:
    """One chain: burn-in sweeps (default n^2) of n proposals, then ``steps`` more proposals"""
    allowed = allowed_matrix(spec, n)
    sigma = initial_state(allowed)
    log_q = _log_q(spec, n, q)
    sweeps = n * n if burn_in is None else int(burn_in)
    _seed(seed)
    _run(sigma, allowed, log_q, sweeps * n + int(steps))
    _check_restricted(sigma, allowed)
    return PermutationSample(n, sigma + 1, inv_count(sigma + 1), seed, sweeps, math.exp(log_q))


def state_frequencies(
    spec: RegionSpec,
    n: int,
    steps: int,
    seed: int = 0,
    thin: int = 1,
    burn_in: Optional[int] = None,
    q: Optional[float] = None,
) -> Dict[Tuple[int, ...], int]:
    """Visit counts of the thinned chain over ``steps`` proposals, keyed by 1-based sigma"""
    allowed = allowed_matrix(spec, n)
    sigma = initial_state(allowed)
    log_q = _log_q(spec, n, q)
    _seed(seed)
    _run(sigma, allowed, log_q, (n * n if burn_in is None else burn_in) * n)
    states = _trajectory(sigma, allowed, log_q, max(1, steps // thin), thin)
    unique, counts = np.unique(states, axis=0, return_counts=True)
    for state in unique:
        _check_restricted(state, allowed)
    return {tuple(int(s) + 1 for s in state): int(c) for state, c in zip(unique, counts)}


def exact_distribution(spec: RegionSpec, n: int, q: Optional[float] = None) -> Dict[Tuple[int, ...], float]:
    """q^inv / Z over every restricted permutation, by enumeration"""
    if n > 9:
        raise ValueError(f"enumeration is limited to n <= 9, got {n}")
    allowed = allowed_matrix(spec, n)
    q_value = math.exp(_log_q(spec, n, q))
    weights = {}
    for perm in itertools.permutations(range(n)):
        if all(allowed[m, s] for m, s in enumerate(perm)):
            sigma = tuple(s + 1 for s in perm)
            weights[sigma] = q_value ** inv_count(sigma)
    if not weights:
        raise Infeasible(f"no restricted permutation of size {n}")
    Z = sum(weights.values())
    return {sigma: w / Z for sigma, w in weights.items()}


def to_six_vertex(result: PermutationSample) -> SixVertexGrid:
    """Vertex types from the permutation matrix: type 5 at (sigma(k), k), the rest by quadrant"""
    n = result.n
    sigma = np.asarray(result.sigma) - 1
    position = np.empty(n, dtype=int)
    position[sigma] = np.arange(n)
    rows = np.arange(n)[:, None]
    columns = np.arange(n)[None, :]
    right = columns > sigma[:, None]
    below = position[None, :] < rows  # column's turn sits in an earlier row
    types = np.select(
        [columns == sigma[:, None], right & ~below, ~right & below, ~right & ~below],
        [TYPE_TURN, TYPE_RIGHT_BELOW, TYPE_LEFT_ABOVE, TYPE_LEFT_BELOW],
        default=TYPE_RIGHT_ABOVE,
    )
    grid = SixVertexGrid(n, types)

    counts = grid.row_counts()
    earlier_larger = np.array([(sigma[:k] > sigma[k]).sum() for k in range(n)])
    earlier_smaller = np.arange(n) - earlier_larger
    expected = np.stack(
        [
            n - (sigma + 1) - earlier_larger,
            earlier_smaller,
            sigma - earlier_smaller,
            earlier_larger,
            np.ones(n, dtype=int),
            np.zeros(n, dtype=int),
        ],
        axis=1,
    )
    assert np.array_equal(counts, expected), "six-vertex row counts disagree with the permutation"
    return grid


def empirical_height(result: PermutationSample, n_grid: int) -> np.ndarray:
    """h at the corners (i/n_grid, j/n_grid): (1/n) #{m <= floor(n y) : sigma(m) > floor(n x)}"""
    n = result.n
    sigma = np.asarray(result.sigma, dtype=int)
    cuts = (n * np.arange(n_grid + 1)) // n_grid
    m = np.arange(1, n + 1)
    right = sigma[:, None] > cuts[None, :]
    below = m[:, None] <= cuts[None, :]
    return right.T.astype(float) @ below.astype(float) / n


def run_chains(
    spec: RegionSpec,
    n: int,
    n_chains: int,
    seed: int = 0,
    steps: int = 0,
    burn_in: Optional[int] = None,
    q: Optional[float] = None,
    threads: Optional[int] = None,
    verbose: bool = False,
) -> List[PermutationSample]:
    """Independent chains with seeds seed, seed+1, ...; one chain per task"""
    workers = min(worker_count(threads), n_chains)
    if verbose:
        print(f"🚀 {n_chains} chains, n={n}, {workers} threads", file=sys.stderr)

    def one(i: int) -> PermutationSample:
        return sample(spec, n, steps, seed + i, burn_in, q)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(one, range(n_chains)))
    if verbose:
        mean_inv = np.mean([s.inversions for s in results])
        print(f"✅ chains done, mean inversions {mean_inv:.1f}", file=sys.stderr)
    return results


def mean_height(samples: Sequence[PermutationSample], n_grid: int) -> np.ndarray:
    return np.mean([empirical_height(s, n_grid) for s in samples], axis=0)
