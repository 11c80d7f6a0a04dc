import math
import numpy as np
import pytest
from mixreg.em import (NpkmleConfig, PosteriorField, aggregate_atoms, inner_step_xi, m_step, merge_close_points,
                       q_function, run_em_npkmle)
from mixreg.em.npkmle import GEM
from mixreg.errors import ArgumentError
from mixreg.kernels import gaussian_profile
from mixreg.model import Dataset, ParticleKde, gaussian_density
from mixreg.quadrature import GRID, MONTE_CARLO, IntegrationPolicy, QuadratureGrid, default_grid


_grid = QuadratureGrid.box(1, -4, 4, 201)
_policy = IntegrationPolicy(GRID, _grid)
_profile = gaussian_profile(1)


def _instance(rng, n=None, particles=None):
    n = n or int(rng.integers(3, 21))
    x = rng.uniform(0.5, 2.0, n)
    data = Dataset(x[:, None], x * rng.normal(size=n) + 0.3 * rng.standard_normal(n), 0.3)
    beta_t = rng.uniform(-2, 2, (particles or int(rng.integers(2, 11)), 1))
    return data, beta_t, rng.uniform(0.3, 0.8)


def _field(data, beta_t, h):
    return PosteriorField(beta_t, data, h, _profile, _grid.rule())


def test_inner_steps_increase_q():
    rng = np.random.default_rng(0)
    for _ in range(50):
        data, beta_t, h = _instance(rng)
        field = _field(data, beta_t, h)
        nu = beta_t
        for _ in range(5):
            A, C = field.a_c(nu)
            new = A / C[:, None]
            before = field.q_value(nu)
            after = field.q_value(new)
            slack = 1e-8 * (1 + abs(before))
            assert after >= before - slack
            assert after - before >= np.sum(C * np.sum((new - nu) ** 2, axis=1)) - slack
            nu = new


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    step = 1e-5
    for _ in range(10):
        data, beta_t, h = _instance(rng, n=3, particles=2)
        field = _field(data, beta_t, h)
        nu = beta_t + rng.normal(scale=0.2, size=beta_t.shape)
        grad = field.gradient(nu)
        fd = np.zeros_like(nu)
        for l in range(nu.shape[0]):
            up, down = nu.copy(), nu.copy()
            up[l, 0] += step
            down[l, 0] -= step
            fd[l, 0] = (field.q_value(up) - field.q_value(down)) / (2 * step)
        assert np.linalg.norm(fd - grad) <= 1e-4 * np.linalg.norm(grad) + 1e-6
        _, C = field.a_c(nu)
        assert np.allclose(field.xi(nu) - nu, grad / (2 * C[:, None]), rtol=1e-9, atol=1e-12)


def test_single_particle_step_is_posterior_mean():
    rng = np.random.default_rng(2)
    data, beta_t, h = _instance(rng, n=8, particles=1)
    field = _field(data, beta_t, h)
    mean = field.mass @ field.nodes / field.mass.sum()
    assert np.allclose(field.xi(beta_t), mean, rtol=1e-10)
    assert np.allclose(field.xi(beta_t + 1.0), mean, rtol=1e-10)
    assert np.allclose(field.xi(field.xi(beta_t)), field.xi(beta_t), rtol=1e-10)


def test_q_single_particle_single_observation():
    data = Dataset([[1.3]], [0.4], 0.5)
    grid = QuadratureGrid.box(1, -4, 4, 401)
    policy = IntegrationPolicy(GRID, grid)
    b = grid.points[:, 0]
    phi = gaussian_density(0.4 - 1.3 * b, 0.5)
    post = phi * gaussian_density(b - 0.2, 0.4)
    post /= post.sum()
    expected = float(np.sum(post * (np.log(phi) + np.log(gaussian_density(b - 0.5, 0.4)))))
    value = q_function([[0.5]], [[0.2]], data, 0.4, _profile, policy)
    assert value == pytest.approx(expected, rel=1e-10)
    with pytest.raises(ArgumentError):
        q_function([[0.5], [0.1]], [[0.2]], data, 0.4, _profile, policy)


def test_q_upper_bound():
    rng = np.random.default_rng(3)
    for _ in range(20):
        data, beta_t, h = _instance(rng)
        nu = rng.uniform(-2, 2, beta_t.shape)
        bound = data.n * math.log(_profile.sup / (math.sqrt(2 * math.pi) * data.sigma * h))
        assert q_function(nu, beta_t, data, h, _profile, _policy) <= bound


def test_q_translation_equivariance():
    rng = np.random.default_rng(4)
    shift = 0.375
    for _ in range(5):
        data, beta_t, h = _instance(rng)
        nu = rng.uniform(-2, 2, beta_t.shape)
        moved = Dataset(data.xs, data.ys + data.xs[:, 0] * shift, data.sigma)
        value = q_function(nu, beta_t, data, h, _profile, _policy)
        other = q_function(nu + shift, beta_t + shift, moved, h, _profile,
                           IntegrationPolicy(GRID, _grid.shifted(shift)))
        assert other == pytest.approx(value, rel=1e-9)


def test_m_step_modes():
    rng = np.random.default_rng(5)
    data, beta_t, h = _instance(rng, n=12, particles=5)
    gem = m_step(beta_t, data, h, _profile, NpkmleConfig(mode=GEM, policy=_policy))
    assert np.allclose(gem, inner_step_xi(beta_t, beta_t, data, h, _profile, _policy), rtol=0, atol=1e-12)
    full = m_step(beta_t, data, h, _profile, NpkmleConfig(policy=_policy))
    q_full = q_function(full, beta_t, data, h, _profile, _policy)
    q_gem = q_function(gem, beta_t, data, h, _profile, _policy)
    q_start = q_function(beta_t, beta_t, data, h, _profile, _policy)
    assert q_full >= q_gem - 1e-8 * abs(q_gem)
    assert q_gem >= q_start - 1e-8 * abs(q_start)


def test_runs_are_monotone():
    rng = np.random.default_rng(6)
    for mode in ('full', GEM):
        for _ in range(5):
            data, beta_t, h = _instance(rng, n=15, particles=6)
            cfg = NpkmleConfig(mode=mode, max_outer=20, policy=_policy)
            report = run_em_npkmle(data, beta_t, h, _profile, cfg)
            assert report.is_monotone()
            assert len(report.loglik_trace) == report.iterations + 1
            assert report.atoms.weights.sum() == pytest.approx(1.0)
            assert isinstance(report.estimator, ParticleKde)


def test_single_line_collapses_to_one_atom():
    rng = np.random.default_rng(7)
    x = rng.uniform(1, 2, 200)
    data = Dataset(x[:, None], 1.2 * x + 0.1 * rng.standard_normal(200), 0.1)
    beta_0 = rng.uniform(-2, 2, (200, 1))
    for mode in ('full', GEM):
        cfg = NpkmleConfig(mode=mode, max_outer=15, max_inner=50, policy=IntegrationPolicy(GRID, default_grid(1)))
        report = run_em_npkmle(data, beta_0, 0.3, _profile, cfg)
        assert report.is_monotone()
        assert report.atoms.K == 1
        assert abs(report.atoms.betas[0, 0] - 1.2) < 0.2
        assert report.method == ('npkmle' if mode == 'full' else 'gem')


def test_monte_carlo_run():
    rng = np.random.default_rng(8)
    data, beta_t, h = _instance(rng, n=20, particles=8)
    calls = []
    cfg = NpkmleConfig(mode=GEM, max_outer=5, policy=IntegrationPolicy(MONTE_CARLO, None, 500, seed=1))
    report = run_em_npkmle(data, beta_t, h, _profile, cfg, on_iteration=lambda t, beta: calls.append(t))
    assert report.diagnostics['integration'] == MONTE_CARLO
    assert report.diagnostics['min_step_gain'] >= -1e-8 * (1 + abs(report.loglik_trace[0]))
    assert calls == list(range(1, report.iterations + 1))
    again = run_em_npkmle(data, beta_t, h, _profile, cfg)
    assert np.array_equal(report.estimator.points, again.estimator.points)


def test_zero_outer_iterations():
    rng = np.random.default_rng(9)
    data, beta_t, h = _instance(rng)
    report = run_em_npkmle(data, beta_t, h, _profile, NpkmleConfig(max_outer=0, policy=_policy))
    assert report.iterations == 0
    assert not report.converged
    assert len(report.loglik_trace) == 1
    assert np.array_equal(report.estimator.points, beta_t)


def test_config_validation():
    with pytest.raises(ArgumentError):
        NpkmleConfig(mode='newton')
    with pytest.raises(ArgumentError):
        NpkmleConfig(inner_tol=0)
    with pytest.raises(ArgumentError):
        NpkmleConfig(max_inner=0)
    with pytest.raises(ArgumentError):
        NpkmleConfig(max_outer=-1)
    data, beta_t, h = _instance(np.random.default_rng(10))
    with pytest.raises(ArgumentError):
        run_em_npkmle(data, np.zeros((3, 2)), h, gaussian_profile(2), NpkmleConfig(policy=_policy))


def _components(points, radius):
    n = points.shape[0]
    adjacent = np.linalg.norm(points[:, None] - points[None, :], axis=2) < radius
    labels = np.full(n, -1)
    current = 0
    for start in range(n):
        if labels[start] >= 0:
            continue
        stack = [start]
        labels[start] = current
        while stack:
            i = stack.pop()
            for j in np.flatnonzero(adjacent[i] & (labels < 0)):
                labels[j] = current
                stack.append(j)
        current += 1
    return labels


def test_merge_matches_component_oracle():
    rng = np.random.default_rng(11)
    for _ in range(50):
        points = rng.uniform(0, 1, (30, 2))
        centers, counts, labels = merge_close_points(points, 0.15)
        expected = _components(points, 0.15)
        assert np.array_equal(labels[:, None] == labels[None, :], expected[:, None] == expected[None, :])
        assert counts.sum() == 30
        first = [int(np.flatnonzero(labels == k)[0]) for k in range(len(counts))]
        assert first == sorted(first)
        for k in range(len(counts)):
            assert np.allclose(centers[k], points[labels == k].mean(axis=0))


def test_aggregate_atoms():
    profile = gaussian_profile(2)
    same = ParticleKde(np.ones((10, 2)), 0.5, profile)
    atoms = aggregate_atoms(same)
    assert atoms.K == 1
    assert atoms.weights.tolist() == [1.0]

    points = np.vstack([np.zeros((3, 2)) + 1e-4 * np.arange(3)[:, None], np.full((7, 2), 5.0)])
    atoms = aggregate_atoms(ParticleKde(points, 0.5, profile))
    assert atoms.K == 2
    assert np.allclose(atoms.weights, [0.3, 0.7])
    assert np.allclose(atoms.betas[1], [5.0, 5.0])

    apart = ParticleKde(np.array([[0.0, 0.0], [0.1, 0.0]]), 1.0, profile)
    assert aggregate_atoms(apart).K == 2
    assert aggregate_atoms(apart, merge_radius=0.2).K == 1


def test_off_grid_mass_is_reported(caplog):
    rng = np.random.default_rng(13)
    data, _, _ = _instance(rng, n=10)
    inside = run_em_npkmle(data, [[-0.5], [0.5]], 0.3, _profile, NpkmleConfig(max_outer=0, policy=_policy))
    assert abs(inside.diagnostics['off_grid_mass']) <= 1e-4
    with caplog.at_level('WARNING'):
        edge = run_em_npkmle(data, [[0.0], [3.8]], 0.5, _profile, NpkmleConfig(max_outer=0, policy=_policy))
    assert 0.1 < edge.diagnostics['off_grid_mass'] < 0.25
    assert any('outside the grid box' in r.getMessage() for r in caplog.records)


def test_negligible_nodes_are_dropped():
    data = Dataset([[1.0]] * 5, [0.0] * 5, 0.1)
    field = _field(data, [[0.0]], 0.2)
    assert field.nodes.shape[0] < _grid.size
    assert np.all(np.abs(field.nodes[:, 0]) < 2.0)
    assert field.mass.sum() == pytest.approx(data.n, rel=1e-12)
