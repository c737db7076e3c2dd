"""Cross-check oracles: exact product determinants and the 2D five-point solver."""
from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from relspec.geometry import BumpSpec, build_weight, flat_cylinder
from relspec.oracle import (
    angular_symbol,
    finite_matrix_relative_det,
    low_eigenvalues_2d,
    make_grid_2d,
    mode_sum_reference,
)

from conftest import funnel_cusp_spec, small_truncation


# ----------------------------------------------------------------------------
# finite product determinants
# ----------------------------------------------------------------------------

def test_product_determinant_exact_rational_cases():
    assert finite_matrix_relative_det([1.0, 2.0, 3.0], [1.0, 2.0, 4.0]) == 0.75
    assert finite_matrix_relative_det([2.0], [3.0]) == float(Fraction(2, 3))
    assert finite_matrix_relative_det([5.0, 7.0], [7.0, 5.0]) == 1.0


def test_product_determinant_reciprocal_identity():
    rng = np.random.default_rng(7)
    a = 1.0 + 3.0 * rng.random(10)
    b = 1.0 + 3.0 * rng.random(10)
    d_ab = finite_matrix_relative_det(a, b)
    d_ba = finite_matrix_relative_det(b, a)
    assert abs(d_ab * d_ba - 1.0) < 1e-15


def test_product_determinant_log_path_matches_rational():
    rng = np.random.default_rng(11)
    a = 1.0 + 3.0 * rng.random(25)  # long enough for the log-sum branch
    b = 1.0 + 3.0 * rng.random(25)
    got = finite_matrix_relative_det(a, b)
    num = Fraction(1)
    for x in a:
        num *= Fraction(float(x))
    den = Fraction(1)
    for x in b:
        den *= Fraction(float(x))
    assert got == pytest.approx(float(num / den), rel=1e-12)


def test_product_determinant_validation():
    with pytest.raises(ValueError):
        finite_matrix_relative_det([1.0, 2.0], [1.0])
    with pytest.raises(ValueError):
        finite_matrix_relative_det([], [])
    with pytest.raises(ValueError):
        finite_matrix_relative_det([1.0, -2.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        finite_matrix_relative_det([1.0], [0.0])


# ----------------------------------------------------------------------------
# the 2D pencil vs the mode decomposition
# ----------------------------------------------------------------------------

def test_flat_2d_pencil_matches_mode_sum_at_machine_precision():
    flat = flat_cylinder()
    grid = make_grid_2d(flat, n_s=120, n_theta=16)
    direct = low_eigenvalues_2d(flat, grid, count=10)
    via_modes = mode_sum_reference(flat, grid, count=10)
    assert np.max(np.abs(direct / via_modes - 1.0)) < 1e-10


def test_curved_2d_pencil_matches_mode_sum_at_machine_precision():
    prof = build_weight(
        funnel_cusp_spec(BumpSpec(center=0.35, radius=0.09, amplitude=0.3)),
        truncation=small_truncation(),
    )
    grid = make_grid_2d(prof, n_s=300, n_theta=24)
    direct = low_eigenvalues_2d(prof, grid, count=12)
    via_modes = mode_sum_reference(prof, grid, count=12)
    assert np.max(np.abs(direct / via_modes - 1.0)) < 1e-9


def test_2d_solver_is_deterministic():
    flat = flat_cylinder()
    grid = make_grid_2d(flat, n_s=100, n_theta=16)
    first = low_eigenvalues_2d(flat, grid, count=6)
    second = low_eigenvalues_2d(flat, grid, count=6)
    assert np.array_equal(first, second)


def test_2d_eigenvalues_are_sorted_and_positive():
    flat = flat_cylinder()
    grid = make_grid_2d(flat, n_s=100, n_theta=16)
    vals = low_eigenvalues_2d(flat, grid, count=8)
    assert np.all(np.diff(vals) >= -1e-12)
    assert np.all(vals > 0)


def test_2d_solver_preconditions():
    flat = flat_cylinder()
    grid = make_grid_2d(flat, n_s=100, n_theta=16)
    with pytest.raises(ValueError, match="50"):
        low_eigenvalues_2d(flat, grid, count=60)
    with pytest.raises(ValueError):
        low_eigenvalues_2d(flat, grid, count=0)
    narrow = flat_cylinder(bump=BumpSpec(center=1.5, radius=0.01, amplitude=0.2))
    with pytest.raises(ValueError, match="radial nodes"):
        low_eigenvalues_2d(narrow, make_grid_2d(narrow, n_s=100, n_theta=16), count=4)
    with pytest.raises(ValueError):
        make_grid_2d(flat, n_s=100, n_theta=4)


def test_angular_symbol_limits():
    assert angular_symbol(0, 64) == 0.0
    # second-order approach to the continuum symbol m^2
    errs = [abs(angular_symbol(2, n) - 4.0) for n in (32, 64, 128)]
    order1 = np.log2(errs[0] / errs[1])
    order2 = np.log2(errs[1] / errs[2])
    assert order1 == pytest.approx(2.0, abs=0.1)
    assert order2 == pytest.approx(2.0, abs=0.1)
    # discrete symbol never exceeds the continuum one
    assert angular_symbol(3, 24) < 9.0
