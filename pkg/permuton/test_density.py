#!/usr/bin/env python3
"""
Density fields built from boundary values
"""
import math

import numpy as np
import pytest

from permuton.conftest import STAIRCASE_A, STAIRCASE_B, staircase
from permuton.solvers.boundary_solver import solve_boundary, solve_simple
from permuton.solvers.density import (
    ConstantRect,
    DensityField,
    DensityGrid,
    RectCoeffs,
    box_mass,
    build_field,
    column_partial,
    density_bounds,
    eval_g,
    eval_height,
    grid,
    permuton_energy,
    rect_mass,
    row_partial,
    screen_rect,
)
from permuton.solvers.errors import InvalidRegion, NegativeDensity, OutOfRectangle, PoleOnRectangle
from permuton.solvers.oracles import oracle_staircase_2x2


def _solved(spec) -> DensityField:
    return build_field(spec, solve_boundary(spec))


def _centers(n: int) -> np.ndarray:
    return (np.arange(n) + 0.5) / n


@pytest.mark.parametrize("r", [-2.0, 1.0, 4.0])
def test_staircase_field_matches_closed_form(r):
    field = _solved(staircase(r))
    assert field.source == "simple"
    c = _centers(50)
    X, Y = np.meshgrid(c, c, indexing="ij")
    expected = oracle_staircase_2x2(STAIRCASE_A, STAIRCASE_B, r, X, Y)
    np.testing.assert_allclose(field.g(X, Y), expected, rtol=1e-10, atol=1e-10)


@pytest.mark.parametrize("name", ["staircase_2x2", "simple_3x3", "nonsimple_3x3"])
def test_total_mass_is_one(region, name):
    field = _solved(region(name))
    assert float(box_mass(field, 0.0, 1.0, 0.0, 1.0)) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("r", [-1.0, 2.5])
def test_staircase_cell_masses_follow_from_the_marginals(r):
    field = _solved(staircase(r))
    a, b = STAIRCASE_A, STAIRCASE_B
    assert rect_mass(field, 0, 0, 0.0, a, 0.0, b) == pytest.approx(a + b - 1, abs=1e-12)
    assert rect_mass(field, 0, 1, 0.0, a, b, 1.0) == pytest.approx(1 - b, abs=1e-12)
    assert rect_mass(field, 1, 0, a, 1.0, 0.0, b) == pytest.approx(1 - a, abs=1e-12)
    assert rect_mass(field, 1, 1, a, 1.0, b, 1.0) == 0.0


def test_rect_mass_stays_inside_its_cell():
    field = _solved(staircase(1.0))
    with pytest.raises(OutOfRectangle):
        rect_mass(field, 0, 0, 0.0, 0.6, 0.0, 0.5)
    with pytest.raises(OutOfRectangle):
        rect_mass(field, 2, 0, 0.0, 0.1, 0.0, 0.1)
    assert rect_mass(field, 0, 0, 0.1, 0.1, 0.0, 0.5) == 0.0


def test_height_boundary_values(region):
    field = _solved(region("simple_3x3"))
    t = np.linspace(0.0, 1.0, 11)
    np.testing.assert_allclose(eval_height(field, t, 0.0), 0.0, atol=1e-12)
    np.testing.assert_allclose(eval_height(field, 1.0, t), 0.0, atol=1e-12)
    np.testing.assert_allclose(eval_height(field, 0.0, t), t, atol=1e-10)
    np.testing.assert_allclose(eval_height(field, t, 1.0), 1.0 - t, atol=1e-10)


def test_partials_are_the_marginals(region):
    field = _solved(region("simple_3x3"))
    t = _centers(7)
    np.testing.assert_allclose(column_partial(field, t, 1.0), 1.0, atol=1e-10)
    np.testing.assert_allclose(row_partial(field, 0.0, t), 1.0, atol=1e-10)


def test_density_is_zero_off_the_support():
    field = _solved(staircase(1.0))
    assert eval_g(field, 0.8, 0.9) == 0.0
    assert field.rect(1, 1) is None


def test_grid_shapes_and_edges():
    field = _solved(staircase(1.0))
    data = grid(field, 20)
    assert data.g_values.shape == (20, 20)
    assert data.h_values.shape == (21, 21)
    corners = np.arange(21) / 20
    np.testing.assert_allclose(data.h_values[0, :], corners, atol=1e-10)
    np.testing.assert_allclose(data.h_values[:, 20], 1.0 - corners, atol=1e-10)
    assert np.all(data.g_values >= 0)
    with pytest.raises(ValueError):
        grid(field, 1)


def test_grid_csv_round_trip(tmp_path):
    data = grid(_solved(staircase(-1.0)), 12)
    path = data.to_csv(tmp_path / "grid.csv")
    assert path.read_text().splitlines()[0] == "x,y,g,h"
    loaded = DensityGrid.from_csv(path, r=-1.0)
    assert loaded.n == 12
    np.testing.assert_array_equal(loaded.g_values, data.g_values)
    np.testing.assert_array_equal(loaded.h_centers, data.h_centers)


def test_field_document_round_trip(region):
    field = _solved(region("simple_3x3"))
    loaded = DensityField.from_document(field.to_document())
    assert loaded.source == field.source and loaded.r == field.r
    c = _centers(9)
    np.testing.assert_array_equal(loaded.g(c[:, None], c[None, :]), field.g(c[:, None], c[None, :]))


def test_field_document_errors_are_collected():
    document = _solved(staircase(1.0)).to_document()
    document["rects"].append({"u": 1, "v": 1, "kind": "constant", "value": 1.0})
    with pytest.raises(InvalidRegion, match="I=0"):
        DensityField.from_document(document)


def test_ipf_field_is_piecewise_constant():
    spec = staircase(0.0)
    field = build_field(spec, solve_boundary(spec))
    assert field.source == "ipf"
    assert all(isinstance(rect, ConstantRect) for rect in field.rects)
    assert field.rect(0, 0).value == pytest.approx(2 / 3, abs=1e-10)
    assert field.rect(1, 0).value == pytest.approx(4 / 3, abs=1e-10)
    assert field.rect(0, 1).value == pytest.approx(2.0, abs=1e-10)


def test_zero_rate_energy_is_the_entropy():
    spec = staircase(0.0)
    field = build_field(spec, solve_boundary(spec))
    expected = -(0.25 * math.log(2 / 3) + 0.5 * math.log(4 / 3) + 0.25 * math.log(2.0))
    assert permuton_energy(field) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("r", [-3.0, 2.0])
def test_solution_maximizes_the_energy(region, r):
    spec = region("simple_3x3", r=r)
    solved = _solved(spec)
    flat_spec = spec.with_r(0.0)
    flat = build_field(flat_spec, solve_boundary(flat_spec))
    assert permuton_energy(solved) >= permuton_energy(flat, r=r) - 1e-9


def test_density_bounds_cover_the_samples():
    field = _solved(staircase(3.0))
    bounds = density_bounds(field)
    assert set(bounds) == {(0, 0), (0, 1), (1, 0)}
    for (u, v), (low, high) in bounds.items():
        rect = field.rect(u, v)
        assert 0 < low <= high
        mid = rect.g((rect.x0 + rect.x1) / 2, (rect.y0 + rect.y1) / 2)
        assert low <= mid <= high


def test_perturbed_field_changes_one_rect():
    field = _solved(staircase(1.0))
    moved = field.perturbed(0, 0, 1.05)
    assert moved.rect(0, 0) != field.rect(0, 0)
    assert moved.rect(1, 0) == field.rect(1, 0)


def test_screening_rejects_poles_and_negative_densities():
    pole = RectCoeffs(0, 0, 0.0, 1.0, 0.0, 1.0, -1.5, 0.0, 1.0, 0.0, 1.0)
    with pytest.raises(PoleOnRectangle):
        screen_rect(pole)
    negative = RectCoeffs(0, 0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0)
    with pytest.raises(NegativeDensity):
        screen_rect(negative)


def test_screened_rect_reports_its_range():
    spec = staircase(2.0)
    field = build_field(spec, solve_simple(spec))
    low, high = screen_rect(field.rect(0, 0))
    assert 0 < low <= high
