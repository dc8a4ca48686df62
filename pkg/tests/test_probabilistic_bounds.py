import math

import numpy as np
import pytest

from liqpde.probabilistic_bounds import (
    bsde_bounds,
    estimate_bounds,
    halving_checkpoints,
    residual_cost_diagnostic,
    verify_surface_bounds,
)
from liqpde.simulator import simulate_ensemble, simulation_mesh


def test_separable_bounds_coincide(separable_problem):
    bounds = estimate_bounds(separable_problem, 0.0, [0.0], n_paths=16, seed=0, n_steps=200)
    assert bounds.lower == pytest.approx(1.0)
    assert bounds.upper == pytest.approx(1.0)
    assert bounds.se_lower == pytest.approx(0.0, abs=1e-14)
    assert bounds.consistent


def test_coth_bounds(coth_problem):
    bounds = estimate_bounds(coth_problem, 0.0, [0.0], n_paths=16, seed=0)
    assert bounds.lower == pytest.approx(1.0)
    assert bounds.upper == pytest.approx(4.0 / 3.0, rel=1e-6)
    assert bounds.y == (0.0,)


def test_bounds_scale_with_remaining_time(coth_problem):
    bounds = estimate_bounds(coth_problem, 0.5, [0.0], n_paths=4, seed=0)
    assert bounds.lower == pytest.approx(2.0)
    assert bounds.upper == pytest.approx(2.0 + 0.5 / 3.0, rel=1e-6)


def test_dark_pool_discounts_lower_bound(make_problem):
    problem = make_problem(gamma=1.0, theta=1.0)
    bounds = estimate_bounds(problem, 0.0, [0.0], n_paths=8, seed=3, n_steps=100)
    assert bounds.lower == pytest.approx(math.exp(-1.0))
    assert bounds.upper == pytest.approx(1.0)


def test_bounds_need_two_paths(coth_problem):
    with pytest.raises(ValueError, match="At least two paths"):
        estimate_bounds(coth_problem, 0.0, [0.0], n_paths=1, seed=0)


def test_bounds_need_time_before_horizon(coth_problem):
    with pytest.raises(ValueError, match="Bounds need t < T"):
        estimate_bounds(coth_problem, 1.0, [0.0], n_paths=4, seed=0)


def test_bounds_are_reproducible(ou_problem):
    first = estimate_bounds(ou_problem, 0.0, [0.3], n_paths=40, seed=9, n_steps=100, batch_size=7)
    second = estimate_bounds(ou_problem, 0.0, [0.3], n_paths=40, seed=9, n_steps=100, workers=2)
    assert first.upper == pytest.approx(second.upper, rel=1e-12)
    assert first.se_upper > 0


def test_bsde_bounds_match_without_dark_pool(ou_problem):
    backward = bsde_bounds(ou_problem, 0.0, [0.0], n_paths=20, seed=1, n_steps=100)
    forward = estimate_bounds(ou_problem, 0.0, [0.0], n_paths=20, seed=1, n_steps=100)
    assert backward == forward


def test_bsde_bounds_reject_dark_pool(dark_pool_problem):
    with pytest.raises(ValueError, match="theta must be 0"):
        bsde_bounds(dark_pool_problem, 0.0, [0.0], n_paths=4, seed=0)


def test_coth_surface_inside_bounds(coth_surface):
    probes = [(0.0, [0.0]), (0.0, [0.3])]
    report = verify_surface_bounds(coth_surface, probes, n_paths=4, seed=0, n_steps=200)
    assert report.passed
    assert len(report.probes) == 2
    assert report.probes[0].value == pytest.approx(1.313, rel=5e-3)


def test_ou_surface_inside_bounds(ou_surface):
    probes = [(0.0, [0.0]), (0.5, [1.0])]
    report = verify_surface_bounds(ou_surface, probes, n_paths=400, seed=4, n_steps=200)
    assert report.passed, [(v.value, v.bounds.lower, v.bounds.upper) for v in report.violations]


def test_probe_near_boundary(coth_surface):
    with pytest.raises(ValueError, match="boundary"):
        verify_surface_bounds(coth_surface, [(0.0, [0.95])], n_paths=4, seed=0)


def test_probe_at_horizon(coth_surface):
    with pytest.raises(ValueError, match="is not before T"):
        verify_surface_bounds(coth_surface, [(1.0, [0.0])], n_paths=4, seed=0)


def test_halving_checkpoints():
    assert halving_checkpoints(0.0, 1.0, 3) == pytest.approx([0.5, 0.75, 0.875])


@pytest.fixture(scope="module")
def checkpoints():
    return halving_checkpoints(0.0, 1.0, 5)


@pytest.fixture(scope="module")
def mesh(checkpoints):
    return simulation_mesh(0.0, 1.0, n_steps=200, checkpoints=checkpoints)


def test_separable_residual_is_remaining_time(separable_problem, separable_surface, mesh, checkpoints):
    ensemble = simulate_ensemble(separable_problem, "optimal", mesh, 8, 0, separable_surface)
    report = residual_cost_diagnostic(separable_surface, ensemble, checkpoints)
    assert report.means == pytest.approx(1.0 - checkpoints, rel=1e-6)
    assert report.decreasing
    assert report.final_ratio == pytest.approx(0.0625, rel=1e-6)
    assert report.terminal == pytest.approx(1.0 / 32.0, rel=1e-6)


def test_residual_accepts_path_list(dark_pool_problem, dark_pool_surface, mesh, checkpoints):
    ensemble = simulate_ensemble(dark_pool_problem, "optimal", mesh, 6, 2, dark_pool_surface)
    from_ensemble = residual_cost_diagnostic(dark_pool_surface, ensemble, checkpoints)
    from_list = residual_cost_diagnostic(dark_pool_surface, [ensemble[i] for i in range(6)], checkpoints)
    assert from_list.means == pytest.approx(from_ensemble.means)
    assert from_list.ses == pytest.approx(from_ensemble.ses)


def test_empty_position_has_no_residual(make_problem, separable_surface, mesh, checkpoints):
    problem = make_problem(x0=0.0)
    ensemble = simulate_ensemble(problem, "optimal", mesh, 4, 0, separable_surface)
    report = residual_cost_diagnostic(separable_surface, ensemble, checkpoints)
    assert np.all(report.means == 0.0)
    assert report.final_ratio == 0.0
    assert report.decreasing


def test_checkpoint_at_horizon(separable_problem, separable_surface, mesh):
    ensemble = simulate_ensemble(separable_problem, "twap", mesh, 2, 0)
    with pytest.raises(ValueError, match="must lie before T"):
        residual_cost_diagnostic(separable_surface, ensemble, [0.5, 1.0])


def test_checkpoint_off_mesh(separable_problem, separable_surface, mesh):
    ensemble = simulate_ensemble(separable_problem, "twap", mesh, 2, 0)
    with pytest.raises(ValueError, match="not a node"):
        residual_cost_diagnostic(separable_surface, ensemble, [0.1234])


def interior_points(surface, t=0.0):
    domain = surface.problem.domain
    return [(t, [float(v) for v in domain.lower + f * domain.width]) for f in np.linspace(0.25, 0.75, 5)]


@pytest.mark.parametrize(
    "surface, n_paths",
    [("coth_surface", 4), ("ou_surface", 400), ("logistic_surface", 400)],
)
def test_interior_points_inside_bounds(surface, n_paths, request):
    surface = request.getfixturevalue(surface)
    report = verify_surface_bounds(surface, interior_points(surface), n_paths=n_paths, seed=5, n_steps=200)
    assert len(report.probes) == 5
    assert report.passed, [(v.value, v.bounds.lower, v.bounds.upper) for v in report.violations]


def test_coth_bounds_later_in_time(coth_surface):
    report = verify_surface_bounds(coth_surface, interior_points(coth_surface, 0.1), n_paths=4, seed=0)
    assert report.passed


@pytest.mark.slow
@pytest.mark.parametrize("surface", ["coth_surface", "ou_surface", "logistic_surface"])
def test_interior_points_full_scale(surface, request):
    surface = request.getfixturevalue(surface)
    report = verify_surface_bounds(surface, interior_points(surface), n_paths=100_000, seed=5, n_steps=500)
    assert report.passed, [(v.value, v.bounds.lower, v.bounds.upper) for v in report.violations]


@pytest.fixture(scope="module")
def halving_mesh():
    return simulation_mesh(0.0, 1.0, n_steps=200, checkpoints=halving_checkpoints(0.0, 1.0, 8))


@pytest.mark.parametrize("name", ["ou", "logistic"])
def test_residual_cost_decays(name, request, halving_mesh):
    problem = request.getfixturevalue(f"{name}_problem")
    surface = request.getfixturevalue(f"{name}_surface")
    ensemble = simulate_ensemble(problem, "optimal", halving_mesh, 200, 3, surface)
    report = residual_cost_diagnostic(surface, ensemble, halving_checkpoints(0.0, 1.0, 8))
    assert len(report.means) == 8
    assert report.decreasing
    assert report.final_ratio <= 0.05
