import math
import numpy as np
import pytest

from fraclab.core.errors import DomainError
from fraclab.models import Domain, StableParams
from fraclab.services import DirichletKernelService, KernelSampleSpec


def test_exterior_killing_at_center(unit_interval, cauchy):
    # (1/π) ∫_{|y−1/2|>1/2} |y−1/2|^{−2} dy
    assert DirichletKernelService.exterior_killing(unit_interval, cauchy, 0.5) == pytest.approx(4 / math.pi)


def test_allocate_nodes_sums_to_M():
    dom = Domain(intervals=((0.0, 1.0), (2.0, 4.0)))
    counts = DirichletKernelService.allocate_nodes(dom, 90)
    assert sum(counts) == 90
    assert counts[1] > counts[0]


def test_assemble_rejects_bad_input(cauchy):
    with pytest.raises(DomainError):
        DirichletKernelService.assemble_operator(Domain.interval(0.0, math.inf), 64, cauchy)
    with pytest.raises(DomainError):
        DirichletKernelService.assemble_operator(Domain.interval(0.0, 1.0), 8, cauchy)
    with pytest.raises(DomainError):
        DirichletKernelService.assemble_operator(Domain.half_space(2), 64, StableParams(dim=2, order=1.0))


def test_grid_spectrum(small_grid):
    assert small_grid.size == 64
    assert small_grid.lambda1 > 0
    assert np.all(np.diff(small_grid.eigenvalues) >= 0)
    assert np.all(small_grid.ground_state > 0)
    assert small_grid.T_star <= small_grid.T_prime
    assert small_grid.T_star <= 1 / 16


def test_kernel_is_symmetric(small_grid):
    G = DirichletKernelService.kernel_matrix(small_grid, 0.01)
    assert np.max(np.abs(G - G.T)) == 0.0


def test_sub_markov(small_grid):
    G = DirichletKernelService.kernel_matrix(small_grid, 0.01)
    assert np.max(G @ small_grid.spacing) <= 1 + 5e-3


def test_chapman_kolmogorov(small_grid):
    left = DirichletKernelService.kernel_matrix(small_grid, 0.01) * small_grid.spacing[None, :] @ (
        DirichletKernelService.kernel_matrix(small_grid, 0.02)
    )
    right = DirichletKernelService.kernel_matrix(small_grid, 0.03)
    assert np.max(np.abs(left - right)) / np.max(right) <= 1e-3


def test_heat_kernel_matches_matrix(small_grid):
    G = DirichletKernelService.kernel_matrix(small_grid, 0.02)
    assert DirichletKernelService.heat_kernel(small_grid, 10, 40, 0.02) == pytest.approx(G[10, 40], rel=1e-10)
    with pytest.raises(DomainError):
        DirichletKernelService.heat_kernel(small_grid, 10, 40, 0.0)


def test_apply_G_is_the_kernel_integral(small_grid):
    f = np.sin(math.pi * small_grid.nodes)
    G = DirichletKernelService.kernel_matrix(small_grid, 0.05)
    expected = G @ (f * small_grid.spacing)
    assert DirichletKernelService.apply_G(small_grid, 0.05, f) == pytest.approx(expected, rel=1e-8, abs=1e-12)


def test_k_kernel_vanishes_on_boundary(small_grid):
    assert DirichletKernelService.k_kernel(small_grid, 0.0, 20, 0.02) == 0.0
    assert DirichletKernelService.k_kernel(small_grid, 1.0, 0.0, 0.02, spread=1.0) == 0.0


def test_k_kernel_positive_inside(small_grid):
    assert DirichletKernelService.k_kernel(small_grid, 32, 20, 0.02) > 0
    assert DirichletKernelService.k_kernel(small_grid, 32, 0.0, 0.02, spread=1.0) > 0


def test_boundary_column_is_nonnegative(small_grid):
    column, spread = DirichletKernelService.boundary_column(small_grid, 1.0, 0.02)
    assert column.shape == (64,)
    assert np.all(column >= 0)
    assert column[32] > 0


def test_boundary_nodes_reject_interior_points(small_grid):
    with pytest.raises(DomainError):
        DirichletKernelService.boundary_nodes(small_grid, 0.5)


def test_boundary_factor(small_grid, cauchy):
    factor = DirichletKernelService.boundary_factor(small_grid, cauchy, 0.25, 0.25)
    assert factor.value == pytest.approx(0.5)
    assert DirichletKernelService.boundary_factor(small_grid, cauchy, 0.0, 0.25).value == 0.0


def test_long_time_slope(small_grid):
    slope = DirichletKernelService.long_time_slope(small_grid)
    assert slope == pytest.approx(-small_grid.lambda1, rel=0.02)


def test_kernel_diagnostics_report(small_grid):
    report = DirichletKernelService.kernel_diagnostics(small_grid, KernelSampleSpec(seed=7))
    assert report.symmetry_error == 0.0
    assert report.max_sub_markov <= 1 + 5e-3
    assert report.max_ck_residual <= 1e-3
    assert report.C4 > 0 and report.C5 > 0
    assert set(report.lower_bounds) == {"interior_K", "time_comparison", "boundary_K"}


@pytest.mark.slow
def test_grid_convergence(cauchy, unit_interval):
    coarse = DirichletKernelService.assemble_operator(unit_interval, 512, cauchy)
    fine = DirichletKernelService.assemble_operator(unit_interval, 1024, cauchy)
    t = 0.05
    g_coarse = DirichletKernelService.heat_kernel(coarse, coarse.nearest_node(0.5), coarse.nearest_node(0.3), t)
    g_fine = DirichletKernelService.heat_kernel(fine, fine.nearest_node(0.5), fine.nearest_node(0.3), t)
    assert g_coarse == pytest.approx(g_fine, rel=0.02)


def test_apply_K_sums_boundary_columns(small_grid):
    column, _ = DirichletKernelService.boundary_column(small_grid, 0.0, 0.02)
    out = DirichletKernelService.apply_K(small_grid, 0.02, {0.0: 2.0, 1.0: 0.0})
    assert out == pytest.approx(2.0 * column)
