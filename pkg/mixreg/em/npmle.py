''' EM-NPMLE: fixed-point iteration over grid densities.

    g'(b) = (1/n) sum_i phi_sigma(y_i - x_i^T b) g(b) / int phi_sigma(y_i - x_i^T u) g(u) du

Each iterate is the average of the per-observation posterior densities.
'''
import time
import logging
import numpy as np
from scipy.special import logsumexp
from ..errors import ArgumentError, IntegrationError
from ..model import GridDensity, FitReport, NodeLikelihood, log_gaussian_density
from ..quadrature import default_grid


__all__ = ('posterior_density', 'em_npmle_step', 'run_em_npmle', 'expected_complete_loglik')


DEFAULT_L2_TOL = 1e-5
DEFAULT_MAX_ITER = 500
_BOUNDARY_WARNING = 0.01


def posterior_density(g, x, y, sigma, index=None):
    ''' phi_sigma(y - x^T b) g(b), renormalized on the grid '''
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape[0] != g.d:
        raise ArgumentError(f'{x.shape[0]}-dimensional covariate for a {g.d}-dimensional grid')
    lp = log_gaussian_density(y - g.grid.points @ x, sigma) + g.log_node_weights()
    log_norm = logsumexp(lp)
    if not np.isfinite(log_norm):
        raise IntegrationError(f'posterior of observation {index} has zero normalizer on the grid', index)
    return GridDensity(g.grid, np.exp(lp - log_norm) / g.grid.cell_volume)


def _step(g, likelihood):
    log_norm, mass = likelihood.mix(g.log_node_weights())
    values = mass / (likelihood.n * g.grid.cell_volume)
    # renormalize against accumulated rounding only
    values /= values.sum() * g.grid.cell_volume
    return GridDensity(g.grid, values), float(np.sum(log_norm))


def em_npmle_step(g, data):
    ''' one EM-NPMLE update: the average of the n posterior densities '''
    step, _ = _step(g, NodeLikelihood(data, g.grid.points))
    return step


def expected_complete_loglik(g, g_t, data):
    ''' E-step objective: sum_i int f_i(b) log[phi_sigma(y_i - x_i^T b) g(b)] db, f_i the posterior under g_t '''
    likelihood = NodeLikelihood(data, g_t.grid.points)
    _, mass = likelihood.mix(g_t.log_node_weights())
    phi_term = likelihood.expected_log_phi(g_t.log_node_weights())
    support = mass > 0
    if np.any(g.values[support] == 0):
        return -np.inf
    return phi_term + float(np.sum(mass[support] * np.log(g.values[support])))


def run_em_npmle(data, init=None, l2_tol=DEFAULT_L2_TOL, max_iter=DEFAULT_MAX_ITER, grid=None):
    ''' iterate em_npmle_step until the grid-L2 change drops below l2_tol '''
    if l2_tol <= 0:
        raise ArgumentError(f'l2_tol must be positive, got {l2_tol}')
    if max_iter < 0:
        raise ArgumentError(f'max_iter must be nonnegative, got {max_iter}')
    if init is None:
        init = GridDensity.uniform(grid or default_grid(data.d))
    if init.d != data.d:
        raise ArgumentError(f'{init.d}-dimensional grid for {data.d}-dimensional covariates')
    started = time.perf_counter()
    likelihood = NodeLikelihood(data, init.grid.points)
    g = init
    trace = []
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        step, loglik = _step(g, likelihood)
        trace.append(loglik)
        change = step.l2_distance(g)
        g = step
        logging.debug(f'em-npmle iteration {iterations}: loglik={loglik:.8f} l2 change={change:.3e}')
        if change < l2_tol:
            converged = True
            break
    # trace holds L(g_t) for t = 0..T-1; close it with the returned iterate
    log_norm, _ = likelihood.mix(g.log_node_weights(), want_mass=False)
    trace.append(float(np.sum(log_norm)))
    boundary = g.boundary_mass()
    if boundary > _BOUNDARY_WARNING:
        logging.warning(f'{boundary:.1%} of the estimated mass lies in boundary cells; widen the grid box')
    if not converged:
        logging.warning(f'em-npmle stopped after {iterations} iterations without reaching l2_tol={l2_tol}')
    wall = time.perf_counter() - started
    logging.info(f'em-npmle finished: {iterations} iterations, converged={converged}, loglik={trace[-1]:.6f}')
    return FitReport(
        method='npmle',
        estimator=g,
        loglik_trace=tuple(trace),
        iterations=iterations,
        converged=converged,
        wall_time=wall,
        sigma=data.sigma,
        diagnostics={'boundary_mass': boundary})
