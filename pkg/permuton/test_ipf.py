#!/usr/bin/env python3
"""
Iterative proportional fitting at r = 0
"""
import itertools

import numpy as np
import pytest

from permuton.conftest import staircase
from permuton.solvers.errors import NonPositiveDenominator, NotConverged
from permuton.solvers.ipf import exact_masses, scale_support, solve_r0
from permuton.solvers.oracles import oracle_triangle, triangle_staircase
from permuton.solvers.region import RegionSpec

TRIANGLE_A = 1.5
TRIANGLE_B = 2.0


def test_all_ones_gives_the_uniform_density():
    spec = RegionSpec.from_rows((0.0, 0.1, 0.7, 1.0), (0.0, 0.4, 1.0), [[1, 1, 1], [1, 1, 1]])
    solution = solve_r0(spec)
    np.testing.assert_allclose(solution.masses, np.outer(spec.dx, spec.dy), atol=1e-12)
    np.testing.assert_allclose(solution.densities(spec), 1.0, atol=1e-10)


def test_staircase_densities():
    spec = staircase(0.0)
    densities = solve_r0(spec).densities(spec)
    assert densities[0, 0] == pytest.approx(2 / 3, abs=1e-10)
    assert densities[1, 0] == pytest.approx(4 / 3, abs=1e-10)
    assert densities[0, 1] == pytest.approx(2.0, abs=1e-10)
    assert densities[1, 1] == 0.0


@pytest.mark.parametrize("name", ["figure_4x4", "simple_3x3", "staircase_2x2"])
def test_max_violation_never_increases(region, name):
    solution = solve_r0(region(name, r=0.0), tol=1e-13)
    history = solution.history
    assert history[-1] == solution.residual
    # after a short burn-in the max marginal violation only goes down
    settled = history[5:]
    assert all(b <= a + 1e-15 for a, b in zip(settled, settled[1:]))


def test_warm_start_reaches_the_same_masses(region):
    spec = region("figure_4x4", r=0.0)
    cold = scale_support(spec.mask, spec.dx, spec.dy, tol=1e-12)
    rough = scale_support(spec.mask, spec.dx, spec.dy, tol=1e-6)
    warm = scale_support(spec.mask, spec.dx, spec.dy, tol=1e-12, mu0=rough.mu)
    assert warm.iterations < cold.iterations
    np.testing.assert_allclose(warm.masses, cold.masses, atol=1e-11)


def test_rescaling_keeps_the_masses(region):
    solution = solve_r0(region("simple_3x3", r=0.0))
    for c in (1e-3, 0.5, 7.0):
        moved = solution.rescaled(c)
        np.testing.assert_allclose(moved.masses, solution.masses, rtol=1e-12)
        np.testing.assert_allclose(moved.lam * moved.mu[0], solution.lam * solution.mu[0], rtol=1e-12)


def test_masses_factorize_on_full_quadruples(region):
    spec = region("figure_4x4", r=0.0)
    B = solve_r0(spec).masses
    mask = spec.mask
    checked = 0
    for u1, u2 in itertools.combinations(range(spec.k), 2):
        for v1, v2 in itertools.combinations(range(spec.ell), 2):
            if mask[u1, v1] and mask[u1, v2] and mask[u2, v1] and mask[u2, v2]:
                assert B[u1, v1] * B[u2, v2] == pytest.approx(B[u1, v2] * B[u2, v1], rel=1e-10)
                checked += 1
    assert checked > 0


def test_marginals_are_met(region):
    spec = region("figure_4x4", r=0.0)
    solution = solve_r0(spec)
    np.testing.assert_allclose(solution.masses.sum(axis=1), spec.dx, atol=1e-12)
    np.testing.assert_allclose(solution.masses.sum(axis=0), spec.dy, atol=1e-12)
    assert solution.residual < 1e-12


def test_exact_masses_match_when_determined():
    spec = staircase(0.0)
    np.testing.assert_allclose(exact_masses(spec), solve_r0(spec).masses, atol=1e-11)


def test_exact_masses_leave_undetermined_supports_to_ipf():
    spec = RegionSpec.from_rows((0.0, 0.5, 1.0), (0.0, 0.5, 1.0), [[1, 1], [1, 1]])
    assert exact_masses(spec) is None


def test_degenerate_support_does_not_converge(region):
    spec = region("degenerate_footnote", r=0.0)
    with pytest.raises(NotConverged) as info:
        solve_r0(spec, tol=1e-12, max_iter=500)
    assert info.value.max_iter == 500


def test_zero_line_is_reported():
    with pytest.raises(NonPositiveDenominator):
        scale_support(np.array([[1, 1], [0, 0]]), np.array([0.5, 0.5]), np.array([0.5, 0.5]))


def test_tolerance_must_be_positive():
    with pytest.raises(ValueError):
        solve_r0(staircase(0.0), tol=0.0)


def test_triangle_staircase_approaches_closed_form():
    m = 40
    spec = triangle_staircase(TRIANGLE_A, TRIANGLE_B, m)
    densities = solve_r0(spec, tol=1e-11).densities(spec)
    centers = (np.arange(m) + 0.5) / m
    cx, cy = np.meshgrid(centers, centers, indexing="ij")
    expected = oracle_triangle(TRIANGLE_A, TRIANGLE_B, cx, cy)
    # keep three cells between the comparison and the cut line
    away = TRIANGLE_A * cx + TRIANGLE_B * cy - 1 > 3 * (TRIANGLE_A + TRIANGLE_B) / m
    assert away.sum() > m * m // 2
    assert np.max(np.abs(densities[away] - expected[away])) < 0.05


def _random_feasible_spec(rng: np.random.Generator) -> RegionSpec:
    k, ell = rng.integers(1, 7, size=2)
    mask = rng.uniform(size=(k, ell)) < 0.6
    for u in np.flatnonzero(~mask.any(axis=1)):
        mask[u, rng.integers(ell)] = True
    for v in np.flatnonzero(~mask.any(axis=0)):
        mask[rng.integers(k), v] = True
    B = np.where(mask, rng.uniform(0.2, 1.0, size=(k, ell)), 0.0)
    B /= B.sum()
    x = np.concatenate(([0.0], np.cumsum(B.sum(axis=1))))
    y = np.concatenate(([0.0], np.cumsum(B.sum(axis=0))))
    x[-1] = y[-1] = 1.0
    return RegionSpec(tuple(x), tuple(y), mask.astype(int))


def test_random_feasible_regions_converge():
    rng = np.random.default_rng(2024)
    determined = 0
    for _ in range(50):
        spec = _random_feasible_spec(rng)
        solution = solve_r0(spec, tol=1e-11, max_iter=100_000)
        assert solution.residual < 1e-10
        exact = exact_masses(spec)
        if exact is not None:
            determined += 1
            np.testing.assert_allclose(solution.masses, exact, atol=1e-10)
    assert determined > 0
