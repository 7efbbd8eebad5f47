#!/usr/bin/env python3
"""
Boundary values: simple arrays, continuation, the 3x3 quadratic and gauges
"""
import math
import threading
from dataclasses import replace

import numpy as np
import pytest

from permuton.conftest import nonsimple_3x3, staircase, staircase_values
from permuton.solvers.boundary_solver import (
    BoundaryValues,
    affine_coordinates,
    align,
    choose_method,
    mass_matrix,
    nonsimple_3x3_pattern,
    quadratic_3x3_candidates,
    residual,
    solve_3x3_nonsimple,
    solve_boundary,
    solve_continuation,
    solve_simple,
    transform,
)
from permuton.solvers.density import build_field, grid
from permuton.solvers.errors import ContinuationCancelled, NotSimple, RZero
from permuton.solvers.ipf import solve_r0
from permuton.solvers.oracles import nonconvex_region
from permuton.solvers.projective import INFINITY, ONE, ZERO, MoebiusMap, ProjectiveValue, distance
from permuton.solvers.region import RegionSpec

CLOSED_FORM_ANCHORS = [("phi", 0), ("psi", 0), ("psi", 1)]


def _closed_form_staircase(r: float) -> BoundaryValues:
    phi_a, phi_1, psi_1 = staircase_values(r)
    return BoundaryValues(
        (ZERO, ProjectiveValue.from_float(phi_a), ProjectiveValue.from_float(phi_1)),
        (INFINITY, ONE, ProjectiveValue.from_float(psi_1)),
        r,
    )


def _worst_distance(a: BoundaryValues, b: BoundaryValues) -> float:
    pairs = list(zip(a.phi, b.phi)) + list(zip(a.psi, b.psi))
    return max(distance(p, q) for p, q in pairs)


@pytest.mark.parametrize("r", [-5.0, -1.0, 0.1, 1.0, 5.0])
def test_staircase_matches_closed_form(r):
    spec = staircase(r)
    target = _closed_form_staircase(r)
    solved = align(solve_simple(spec), target, CLOSED_FORM_ANCHORS)
    assert _worst_distance(solved, target) < 1e-11
    assert np.max(np.abs(residual(spec, solved))) < 1e-11


def test_single_cell():
    spec = RegionSpec.from_rows((0.0, 1.0), (0.0, 1.0), [[1]], 2.0)
    bv = solve_simple(spec)
    assert bv.phi[0] == ZERO and bv.psi[0] == INFINITY and bv.psi[1] == ONE
    assert bv.phi[1].to_float() == pytest.approx(1.0 - math.exp(-2.0), abs=1e-14)
    assert mass_matrix(spec, bv)[0, 0] == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("name", ["staircase_2x2", "simple_3x3", "all_ones_2x2"])
@pytest.mark.parametrize("r", [-2.0, 0.5, 3.0])
def test_simple_solutions_satisfy_every_equation(region, name, r):
    spec = region(name, r=r)
    bv = solve_simple(spec)
    assert np.max(np.abs(residual(spec, bv))) < 1e-10
    masses = mass_matrix(spec, bv)
    assert np.all(masses[spec.mask] > 0)
    np.testing.assert_allclose(masses.sum(axis=1), spec.dx, atol=1e-10)
    np.testing.assert_allclose(masses.sum(axis=0), spec.dy, atol=1e-10)


def test_tiny_r_approaches_ipf(region):
    spec = region("simple_3x3", r=1e-6)
    masses = mass_matrix(spec, solve_simple(spec))
    np.testing.assert_allclose(masses, solve_r0(spec.with_r(0.0)).masses, atol=1e-5)


def test_perturbed_value_breaks_the_equations():
    spec = staircase(1.0)
    bv = solve_simple(spec)
    moved = ProjectiveValue(bv.phi[1].num * (1 + 1e-4), bv.phi[1].den)
    broken = replace(bv, phi=(bv.phi[0], moved, bv.phi[2]))
    assert np.max(np.abs(residual(spec, broken))) > 1e-6


def test_moebius_maps_keep_the_masses(region):
    spec = region("simple_3x3", r=1.5)
    bv = solve_simple(spec)
    moved = transform(bv, MoebiusMap(2.0, 1.0, 1.0, 3.0))
    assert moved.gauge["kind"] == "moebius"
    np.testing.assert_allclose(mass_matrix(spec, moved), mass_matrix(spec, bv), atol=1e-10)
    back = align(moved, bv)
    assert _worst_distance(back, bv) < 1e-10


def test_boundary_document_round_trip():
    bv = solve_simple(staircase(1.0))
    assert BoundaryValues.from_document(bv.to_document()) == bv


def test_continuation_agrees_with_simple(region):
    spec = region("simple_3x3", r=1.0)
    exact = solve_simple(spec)
    followed = solve_continuation(spec, dr=0.01)
    assert followed.method == "continuation"
    np.testing.assert_allclose(mass_matrix(spec, followed), mass_matrix(spec, exact), atol=1e-8)
    assert _worst_distance(align(followed, exact), exact) < 1e-8


@pytest.mark.parametrize("r", [-2.0, 2.0])
def test_halving_the_step_keeps_the_endpoint(region, r):
    spec = region("figure_4x4", r=r)
    coarse = solve_continuation(spec, dr=0.02)
    fine = solve_continuation(spec, dr=0.01)
    assert _worst_distance(coarse, fine) < 1e-9
    np.testing.assert_allclose(mass_matrix(spec, coarse), mass_matrix(spec, fine), atol=1e-10)


def test_row_and_column_equations_share_one_redundancy(region):
    spec = region("figure_4x4", r=2.0)
    bv = solve_continuation(spec, dr=0.02)
    value = bv.phi[2].to_float()
    moved = replace(bv, phi=bv.phi[:2] + (ProjectiveValue.from_float(value * 1.001),) + bv.phi[3:])
    for candidate in (bv, moved):
        res = residual(spec, candidate)
        assert np.all(np.isfinite(res))
        assert res[: spec.k].sum() == pytest.approx(res[spec.k :].sum(), abs=1e-12)
    # the identity is not the trivial one: the moved values solve nothing
    assert np.max(np.abs(residual(spec, moved))) > 1e-6


def test_continuation_to_zero_is_ipf(region):
    spec = region("figure_4x4", r=0.0)
    bv = solve_continuation(spec, 0.0)
    assert bv.method == "ipf" and bv.chi is not None
    np.testing.assert_allclose(mass_matrix(spec, bv), solve_r0(spec).masses, atol=1e-12)
    chi, psi = affine_coordinates(bv)
    assert chi[0] == 0.0 and chi[-1] == 1.0 and psi[0] == 0.0


def test_affine_coordinates_fix_the_gauge():
    spec = staircase(2.0)
    chi, psi = affine_coordinates(solve_simple(spec))
    assert chi[0] == pytest.approx(0.0, abs=1e-12)
    assert chi[-1] == pytest.approx(1.0, abs=1e-12)
    assert psi[0] == pytest.approx(0.0, abs=1e-12)


def test_cancelled_continuation_stops():
    cancel = threading.Event()
    cancel.set()
    with pytest.raises(ContinuationCancelled):
        solve_continuation(staircase(1.0), cancel=cancel)


@pytest.mark.slow
@pytest.mark.parametrize("r", [3.0, -3.0])
def test_figure_region_reaches_target(region, r):
    spec = region("figure_4x4", r=r)
    bv = solve_boundary(spec)
    assert bv.method == "continuation"
    assert np.max(np.abs(residual(spec, bv))) < 1e-10
    assert np.all(mass_matrix(spec, bv)[spec.mask] > 0)


def test_quadratic_near_zero_rate():
    r = 1e-4
    spec = nonsimple_3x3(r)
    accepted = [c for c in quadratic_3x3_candidates(spec) if c["accepted"]]
    assert len(accepted) == 1
    X, Y = accepted[0]["X"], accepted[0]["Y"]
    assert (X - 1) / r == pytest.approx((math.sqrt(5) - 1) / 6, abs=1e-4)
    assert Y == pytest.approx(X, abs=1e-12)


def test_quadratic_root_for_equal_spacing():
    r = 1.0
    q = math.exp(-r / 3)
    t = (-1 + math.sqrt(1 + 4 * q)) / 2
    accepted = [c for c in quadratic_3x3_candidates(nonsimple_3x3(r)) if c["accepted"]]
    assert accepted[0]["X"] == pytest.approx(1 + (1 - q) * t, abs=1e-10)


@pytest.mark.parametrize("r", [-1.0, 1.0])
def test_quadratic_branch_is_unique(r):
    spec = nonsimple_3x3(r)
    candidates = quadratic_3x3_candidates(spec)
    assert sum(c["accepted"] for c in candidates) == 1
    bv = solve_3x3_nonsimple(spec)
    assert np.max(np.abs(residual(spec, bv))) < 1e-8
    assert np.all(mass_matrix(spec, bv)[spec.mask] > 0)


def test_mirrored_pattern_reverses_the_rate():
    r = 1.0
    mirror = nonsimple_3x3(r, mirrored=True)
    assert nonsimple_3x3_pattern(mirror.mask) == 1
    mirrored_masses = mass_matrix(mirror, solve_3x3_nonsimple(mirror))
    original = nonsimple_3x3(-r)
    masses = mass_matrix(original, solve_3x3_nonsimple(original))
    np.testing.assert_allclose(mirrored_masses, masses[::-1, :], atol=1e-10)


def test_quadratic_matches_continuation(region):
    spec = region("nonsimple_3x3")
    np.testing.assert_allclose(
        mass_matrix(spec, solve_3x3_nonsimple(spec)),
        mass_matrix(spec, solve_continuation(spec, dr=0.01)),
        atol=1e-8,
    )


def test_choose_method(region):
    assert choose_method(staircase(0.0)) == "ipf"
    assert choose_method(staircase(1.0)) == "simple"
    assert choose_method(region("nonsimple_3x3")) == "quad3x3"
    assert choose_method(region("figure_4x4")) == "continuation"


def test_exact_solvers_refuse_zero_rate():
    with pytest.raises(RZero):
        solve_simple(staircase(0.0))
    with pytest.raises(RZero):
        quadratic_3x3_candidates(nonsimple_3x3(0.0))


def test_wrong_shapes_are_not_simple(region):
    with pytest.raises(NotSimple):
        solve_simple(region("figure_4x4"))
    with pytest.raises(NotSimple):
        solve_3x3_nonsimple(staircase(1.0))
    with pytest.raises(NotSimple):
        solve_boundary(nonconvex_region(7.0))


def test_ipf_method_needs_zero_rate():
    with pytest.raises(ValueError):
        solve_boundary(staircase(1.0), "ipf")
    with pytest.raises(ValueError):
        solve_boundary(staircase(1.0), "newton")


@pytest.mark.parametrize("name", ["staircase_2x2", "simple_3x3", "all_ones_2x2"])
def test_tiny_r_affine_increments_match_scalings(region, name):
    spec = region(name, r=1e-6)
    chi, psi = affine_coordinates(solve_simple(spec))
    scaling = solve_r0(spec.with_r(0.0))
    c = scaling.lam.sum()
    np.testing.assert_allclose(np.diff(chi), scaling.lam / c, rtol=1e-4)
    np.testing.assert_allclose(np.diff(psi), scaling.mu * c, rtol=1e-4)


@pytest.mark.slow
def test_figure_density_is_nonnegative(region):
    spec = region("figure_4x4", r=-3.0)
    data = grid(build_field(spec, solve_boundary(spec)), 100)
    assert np.all(data.g_values >= 0)
    assert np.any(data.g_values == 0)
