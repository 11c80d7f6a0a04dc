import numpy as np
import pytest
from mixreg.errors import ArgumentError, IntegrationError
from mixreg.kernels import gaussian_profile
from mixreg.model import GridDensity, ParticleKde
from mixreg.quadrature import (GRID, MONTE_CARLO, IntegrationPolicy, QuadratureGrid, default_grid, integrate_on_grid,
                               integrate_rule, sample_from_grid_density)


def test_grid_geometry():
    grid = QuadratureGrid.box(2, -4, 4, 8)
    assert grid.size == 64
    assert grid.cell_volume == 1.0
    assert grid.volume == 64.0
    assert grid.points[0].tolist() == [-3.5, -3.5]
    assert grid.points[1].tolist() == [-3.5, -2.5]
    assert grid.boundary_mask.sum() == 28
    assert default_grid(1).size == 801
    assert default_grid(2).shape == (161, 161)
    assert default_grid(3).shape == (41, 41, 41)
    shifted = grid.shifted(0.5)
    assert shifted.points[0].tolist() == [-3.0, -3.0]
    with pytest.raises(ArgumentError):
        QuadratureGrid.box(2, -4, 4, 7)
    with pytest.raises(ArgumentError):
        QuadratureGrid.box(2, 1, 1, 10)
    with pytest.raises(ArgumentError):
        QuadratureGrid((0.0, 0.0), (1.0, 1.0, 1.0), (10, 10))


def test_integrate_constants_and_odd_functions():
    grid = QuadratureGrid.box(2, -4, 4, 8)
    assert integrate_on_grid(np.ones(grid.size), grid) == 64.0

    grid = QuadratureGrid.box(2, -4, 4, 161)
    linear = grid.points[:, 0] + 2 * grid.points[:, 1]
    assert abs(integrate_on_grid(linear, grid)) < 1e-10

    grid = QuadratureGrid.box(2, -6, 6, 201)
    normal = np.exp(-0.5 * np.sum(grid.points ** 2, axis=1)) / (2 * np.pi)
    assert integrate_on_grid(normal, grid) == pytest.approx(1.0, abs=1e-4)


def test_integrate_refinement():
    previous = None
    errors = []
    for nodes in (8, 16, 32, 64):
        grid = QuadratureGrid((-1.0, ), (2.0, ), (nodes, ))
        x = grid.points[:, 0]
        value = integrate_on_grid(np.exp(-x ** 2) * np.cos(x), grid)
        if previous is not None:
            errors.append(abs(value - previous))
        previous = value
    assert errors[0] > errors[1] > errors[2]


def test_integrate_nan():
    grid = QuadratureGrid.box(1, 0, 1, 10)
    values = np.ones(10)
    values[3] = np.nan
    with pytest.raises(IntegrationError) as err:
        integrate_on_grid(values, grid)
    assert err.value.index == 3
    with pytest.raises(ArgumentError):
        integrate_on_grid(np.ones(9), grid)


def test_sample_uniform_grid():
    grid = QuadratureGrid.box(2, -4, 4, 41)
    draws = sample_from_grid_density(GridDensity.uniform(grid), 100000, seed=7)
    assert draws.shape == (100000, 2)
    assert np.all(np.abs(draws) <= 4)
    se = (8 / np.sqrt(12)) / np.sqrt(100000)
    assert np.all(np.abs(draws.mean(axis=0)) < 4 * se)
    again = sample_from_grid_density(GridDensity.uniform(grid), 100000, seed=7)
    assert np.array_equal(draws, again)


def test_sample_single_cell():
    grid = QuadratureGrid.box(2, -4, 4, 10)
    values = np.zeros(grid.size)
    values[37] = 1.0 / grid.cell_volume
    draws = sample_from_grid_density(GridDensity(grid, values), 500, seed=1)
    center = grid.points[37]
    assert np.all(np.abs(draws - center) <= grid.spacing / 2 + 1e-12)


def test_policy():
    assert IntegrationPolicy.default(2).mode == GRID
    assert IntegrationPolicy.default(3).mode == MONTE_CARLO
    with pytest.raises(ArgumentError):
        IntegrationPolicy(MONTE_CARLO, None, 50)
    with pytest.raises(ArgumentError):
        IntegrationPolicy(GRID)
    with pytest.raises(ArgumentError):
        IntegrationPolicy('simpson', QuadratureGrid.box(1))
    with pytest.raises(ArgumentError):
        IntegrationPolicy(MONTE_CARLO).rule()


def test_monte_carlo_rule_matches_grid():
    rng = np.random.default_rng(4)
    kde = ParticleKde(rng.normal(size=(30, 2)), 0.6, gaussian_profile(2))
    policy = IntegrationPolicy(MONTE_CARLO, None, 20000, seed=3)
    rule = policy.rule(kde, draw=1)

    def log_f(points):
        return -0.5 * np.sum((points - 0.3) ** 2, axis=1)

    estimate = np.exp(integrate_rule(log_f(rule.nodes) + kde.log_density(rule.nodes), rule))
    grid = QuadratureGrid.box(2, -8, 8, 321)
    exact = integrate_on_grid(np.exp(log_f(grid.points)) * kde.density(grid.points), grid)
    se = np.std(np.exp(log_f(rule.nodes))) / np.sqrt(20000)
    assert abs(estimate - exact) < 4 * se

    same = policy.rule(kde, draw=1)
    other = policy.rule(kde, draw=2)
    assert np.array_equal(rule.nodes, same.nodes)
    assert not np.array_equal(rule.nodes, other.nodes)
