"""
Shared fixtures for the permuton tests
"""
import math
from pathlib import Path

import pytest

from permuton.solvers.region import RegionSpec, load_region

REGIONS_DIR = Path(__file__).parent / "regions"

# staircase breakpoints used throughout the worked examples
STAIRCASE_A = 0.5
STAIRCASE_B = 0.75
THIRDS = (0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0)


@pytest.fixture
def regions_dir() -> Path:
    return REGIONS_DIR


@pytest.fixture
def region():
    """Load one of the bundled region documents by name"""

    def load(name: str, r=None) -> RegionSpec:
        spec = load_region(REGIONS_DIR / f"{name}.json")
        return spec if r is None else spec.with_r(r)

    return load


def staircase(r: float, a: float = STAIRCASE_A, b: float = STAIRCASE_B) -> RegionSpec:
    return RegionSpec.from_rows((0.0, a, 1.0), (0.0, b, 1.0), [[1, 0], [1, 1]], r, "staircase_2x2")


def staircase_values(r: float, a: float = STAIRCASE_A, b: float = STAIRCASE_B):
    """phi(a), phi(1), psi(1) in the gauge phi(0)=0, psi(0)=inf, psi(b)=1"""
    s = 1.0 - math.exp(-r * (a + b - 1))
    return s, 1.0 - math.exp(-r * b), s / (1.0 - math.exp(-r * a))


def nonsimple_3x3(r: float, mirrored: bool = False) -> RegionSpec:
    rows = [[1, 1, 0], [1, 1, 1], [0, 1, 1]] if mirrored else [[0, 1, 1], [1, 1, 1], [1, 1, 0]]
    return RegionSpec.from_rows(THIRDS, THIRDS, rows, r, "nonsimple_3x3")
