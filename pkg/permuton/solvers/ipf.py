#!/usr/bin/env python3
"""
Permuton IPF - iterative proportional fitting for the r=0 limit shape
"""
import sys
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np
from scipy.special import logsumexp

from .errors import NonPositiveDenominator, NotConverged
from .region import RegionSpec

# below this the direct ratios lose precision and the log-domain update takes over
UNDERFLOW = 1e-300


@dataclass(frozen=True)
class ScalingSolution:
    """Row and column scalings with masses[u][v] = I[u][v] * lambda[u] * mu[v]"""

    lam: np.ndarray
    mu: np.ndarray
    masses: np.ndarray
    iterations: int
    residual: float
    history: List[float] = field(default_factory=list, compare=False, repr=False)

    def rescaled(self, c: float) -> "ScalingSolution":
        """Same masses under lambda -> c*lambda, mu -> mu/c"""
        lam = self.lam * c
        mu = self.mu / c
        support = self.masses > 0
        return replace(self, lam=lam, mu=mu, masses=np.where(support, np.outer(lam, mu), 0.0))

    def densities(self, spec: RegionSpec) -> np.ndarray:
        """Constant density of each rectangle"""
        return self.masses / np.outer(spec.dx, spec.dy)


def _marginal_violation(masses: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> float:
    return float(
        max(
            np.max(np.abs(masses.sum(axis=1) - rows)),
            np.max(np.abs(masses.sum(axis=0) - cols)),
        )
    )


def _ratio(target: np.ndarray, denominator: np.ndarray, what: str) -> np.ndarray:
    if np.any(denominator <= 0):
        bad = np.flatnonzero(denominator <= 0).tolist()
        raise NonPositiveDenominator(f"{what} {bad} meet only zero-mass lines of I")
    return target / denominator


def _log_update(log_target: np.ndarray, log_support: np.ndarray, log_other: np.ndarray) -> np.ndarray:
    totals = logsumexp(log_support + log_other[None, :], axis=1)
    if np.any(~np.isfinite(totals)):
        bad = np.flatnonzero(~np.isfinite(totals)).tolist()
        raise NonPositiveDenominator(f"lines {bad} meet only zero-mass lines of I")
    return log_target - totals


def scale_support(
    I: np.ndarray,
    rows: np.ndarray,
    cols: np.ndarray,
    tol: float = 1e-12,
    max_iter: int = 100_000,
    verbose: bool = False,
    mu0: Optional[np.ndarray] = None,
) -> ScalingSolution:
    """Scale the 0/1 support I to the row marginals ``rows`` and column marginals ``cols``

    The column scaling starts from ``mu0`` (all ones by default). ``history`` holds the
    max marginal violation after every full round.
    """
    support = np.asarray(I, dtype=bool)
    weight = support.astype(float)
    rows = np.asarray(rows, dtype=float)
    cols = np.asarray(cols, dtype=float)
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")

    lam = np.ones(support.shape[0])
    mu = np.ones(support.shape[1]) if mu0 is None else np.asarray(mu0, dtype=float).copy()
    log_mode = False
    history: List[float] = []
    residual = np.inf

    for iteration in range(1, max_iter + 1):
        if not log_mode:
            lam = _ratio(rows, weight @ mu, "rows")
            mu = _ratio(cols, weight.T @ lam, "columns")
            if min(lam.min(), mu.min()) < UNDERFLOW:
                if verbose:
                    print("⚠️ IPF scalings underflowed, switching to log domain", file=sys.stderr)
                log_mode = True
                log_support = np.where(support, 0.0, -np.inf)
                log_lam, log_mu = np.log(lam), np.log(mu)
        if log_mode:
            log_lam = _log_update(np.log(rows), log_support, log_mu)
            log_mu = _log_update(np.log(cols), log_support.T, log_lam)
            lam, mu = np.exp(log_lam), np.exp(log_mu)

        masses = np.where(support, np.outer(lam, mu), 0.0)
        residual = _marginal_violation(masses, rows, cols)
        history.append(residual)
        if verbose and iteration % 1000 == 0:
            print(f"📦 IPF round {iteration}: residual {residual:.3e}", file=sys.stderr)
        if residual < tol:
            break
    else:
        raise NotConverged(max_iter, residual)

    # fixed gauge for reproducible output
    c = rows[0] / support[0].sum() / lam[0]
    lam = lam * c
    mu = mu / c
    masses = np.where(support, np.outer(lam, mu), 0.0)
    if verbose:
        print(f"✅ IPF converged in {iteration} rounds (residual {residual:.3e})", file=sys.stderr)
    return ScalingSolution(lam, mu, masses, iteration, residual, history)


def solve_r0(
    spec: RegionSpec,
    tol: float = 1e-12,
    max_iter: int = 100_000,
    verbose: bool = False,
) -> ScalingSolution:
    """Maximizing r=0 solution: masses I*lambda*mu with the region's marginals"""
    return scale_support(spec.mask, spec.dx, spec.dy, tol=tol, max_iter=max_iter, verbose=verbose)


def exact_masses(spec: RegionSpec) -> Optional[np.ndarray]:
    """Masses from the marginal equations when the support pattern determines them, else None"""
    cells = list(zip(*np.nonzero(spec.mask)))
    A = np.zeros((spec.k + spec.ell, len(cells)))
    for j, (u, v) in enumerate(cells):
        A[u, j] = 1.0
        A[spec.k + v, j] = 1.0
    if np.linalg.matrix_rank(A) < len(cells):
        return None
    b = np.concatenate([spec.dx, spec.dy])
    solution, *_ = np.linalg.lstsq(A, b, rcond=None)
    masses = np.zeros((spec.k, spec.ell))
    for j, (u, v) in enumerate(cells):
        masses[u, v] = solution[j]
    return masses
