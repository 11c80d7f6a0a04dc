''' EM-NPKMLE: EM over kernel density estimates built from n_p movable particles.

The E-step fixes the current particles beta_t; every observation's
posterior over the integration nodes is proportional to
S_i(b) = phi_sigma(y_i - x_i^T b) sum_l v_h(|b - beta_l|^2), and the
M-step moves the particles nu by the adaptive-step gradient ascent

    nu_l <- A(nu_l) / C(nu_l)

where, with w_h(t) = -d/dt v(t / h^2) and p_k the posterior mass of node b_k
summed over observations,

    A(nu_l) = sum_k p_k w_h(|b_k - nu_l|^2) b_k / sum_m v_h(|b_k - nu_m|^2)
    C(nu_l) = sum_k p_k w_h(|b_k - nu_l|^2)     / sum_m v_h(|b_k - nu_m|^2)

The exact gradient is dQ/dnu_l = 2 (A - C nu_l), so each step moves by
grad Q / (2 C), and Q gains at least sum_l C(nu_l) |step_l|^2.
'''
import math
import time
import logging
from dataclasses import dataclass
import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree
from scipy.special import logsumexp
from ..errors import ArgumentError, IntegrationError
from ..kernels import gaussian_profile
from ..model import DiscreteMeasure, FitReport, NodeLikelihood, ParticleKde, _sq_dist
from ..quadrature import GRID, IntegrationPolicy
from ..utils import as_matrix, iter_chunks


__all__ = ('NpkmleConfig', 'PosteriorField', 'q_function', 'inner_step_xi', 'm_step', 'run_em_npkmle',
           'aggregate_atoms', 'merge_close_points', 'FULL_EM', 'GEM')


FULL_EM = 'full'
GEM = 'gem'

_NODE_CHUNK = 2048
_NEGLIGIBLE_MASS = 1e-14  # relative to the total posterior mass
_OFF_GRID_WARNING = 0.01


@dataclass(frozen=True)
class NpkmleConfig:
    mode: str = FULL_EM
    inner_tol: float = 1e-5
    outer_tol: float = 1e-7
    displacement_tol: float = 1e-4
    max_inner: int = 500
    max_outer: int = 200
    policy: IntegrationPolicy = None
    merge_factor: float = 0.05

    def __post_init__(self):
        if self.mode not in (FULL_EM, GEM):
            raise ArgumentError(f'unknown EM-NPKMLE mode "{self.mode}", expected "{FULL_EM}" or "{GEM}"')
        for name in ('inner_tol', 'outer_tol', 'displacement_tol', 'merge_factor'):
            if not getattr(self, name) > 0:
                raise ArgumentError(f'{name} must be positive, got {getattr(self, name)}')
        if self.max_inner < 1:
            raise ArgumentError(f'max_inner must be at least 1, got {self.max_inner}')
        if self.max_outer < 0:
            raise ArgumentError(f'max_outer must be nonnegative, got {self.max_outer}')


class PosteriorField(object):
    ''' E-step state of one outer iteration, shared by Q, A, C and xi '''
    def __init__(self, beta_t, data, h, profile, rule, likelihood=None):
        self.h = float(h)
        self.profile = profile
        self._rule = rule
        self._kde_t = ParticleKde(beta_t, h, profile)
        self._likelihood = likelihood or NodeLikelihood(data, rule.nodes)
        self._log_k = rule.log_weights + self._kde_t.log_density(rule.nodes)
        log_norm, mass = self._likelihood.mix(self._log_k)
        self.loglik = float(np.sum(log_norm))
        support = mass > _NEGLIGIBLE_MASS * mass.sum()
        self.nodes = np.asarray(rule.nodes)[support]
        self.mass = mass[support]
        self._phi_term = None

    @property
    def phi_term(self):
        ''' sum_i E[log phi_sigma(y_i - x_i^T b)] under the fixed posteriors '''
        if self._phi_term is None:
            self._phi_term = self._likelihood.expected_log_phi(self._log_k)
        return self._phi_term

    def loglik_of(self, points):
        ''' incomplete log-likelihood of the particle KDE at `points` under this field's rule '''
        kde = ParticleKde(points, self.h, self.profile)
        log_norm, _ = self._likelihood.mix(self._rule.log_weights + kde.log_density(self._rule.nodes),
                                           want_mass=False)
        return float(np.sum(log_norm))

    def q_value(self, nu):
        log_g = ParticleKde(nu, self.h, self.profile).log_density(self.nodes)
        return self.phi_term + float(np.sum(self.mass * log_g))

    def a_c(self, nu):
        nu = np.asarray(nu, dtype=float)
        A = np.zeros_like(nu)
        C = np.zeros(nu.shape[0])
        log_h2 = 2.0 * math.log(self.h)
        for rows in iter_chunks(self.nodes.shape[0], _NODE_CHUNK):
            nodes = self.nodes[rows]
            t = _sq_dist(nodes, nu) / self.h ** 2
            log_d = logsumexp(self.profile.log_v(t), axis=1)
            ratio = np.exp(self.profile.log_w(t) - log_h2 - log_d[:, None]) * self.mass[rows, None]
            C += ratio.sum(axis=0)
            A += ratio.T @ nodes
        return A, C

    def xi(self, nu):
        A, C = self.a_c(nu)
        bad = np.flatnonzero(~(C > 0))
        if bad.size:
            raise IntegrationError(f'adaptive step denominator C vanished for particle {bad[0]}', bad[0])
        return A / C[:, None]

    def gradient(self, nu):
        A, C = self.a_c(nu)
        return 2.0 * (A - C[:, None] * np.asarray(nu, dtype=float))


def _resolve(beta_t, data, h, profile, policy, draw=0):
    beta_t = as_matrix(beta_t, 'particles')
    profile = profile or gaussian_profile(beta_t.shape[1])
    policy = policy or IntegrationPolicy.default(beta_t.shape[1])
    rule = policy.rule(ParticleKde(beta_t, h, profile), draw)
    return PosteriorField(beta_t, data, h, profile, rule)


def q_function(nu, beta_t, data, h, profile=None, policy=None):
    ''' Q(G_nu; G_t): expected complete log-likelihood, 1/(n_p h^d) kept inside the log '''
    nu = as_matrix(nu, 'particles')
    if nu.shape != np.shape(as_matrix(beta_t)):
        raise ArgumentError(f'nu has shape {nu.shape} but beta_t has shape {np.shape(beta_t)}')
    return _resolve(beta_t, data, h, profile, policy).q_value(nu)


def inner_step_xi(nu, beta_t, data, h, profile=None, policy=None):
    ''' one synchronous adaptive-step update of every particle '''
    return _resolve(beta_t, data, h, profile, policy).xi(as_matrix(nu, 'particles'))


def _maximize(field, beta_t, cfg):
    nu = np.asarray(beta_t, dtype=float)
    steps = 1 if cfg.mode == GEM else cfg.max_inner
    inner = 0
    for inner in range(1, steps + 1):
        new = field.xi(nu)
        move = float(np.max(np.linalg.norm(new - nu, axis=1)))
        nu = new
        if move < cfg.inner_tol:
            break
    return nu, inner


def m_step(beta_t, data, h, profile=None, cfg=None):
    ''' full EM: iterate xi to convergence from beta_t; GEM: a single xi step '''
    cfg = cfg or NpkmleConfig()
    field = _resolve(beta_t, data, h, profile, cfg.policy)
    nu, _ = _maximize(field, as_matrix(beta_t), cfg)
    return nu


def run_em_npkmle(data, beta_0, h, profile=None, cfg=None, on_iteration=None):
    ''' alternate E-steps and particle M-steps until the likelihood and the particles settle '''
    cfg = cfg or NpkmleConfig()
    beta = as_matrix(beta_0, 'initial particles')
    profile = profile or gaussian_profile(beta.shape[1])
    policy = cfg.policy or IntegrationPolicy.default(beta.shape[1])
    if beta.shape[1] != data.d:
        raise ArgumentError(f'{beta.shape[1]}-dimensional particles for {data.d}-dimensional covariates')
    started = time.perf_counter()
    shared = NodeLikelihood(data, policy.grid.points) if policy.mode == GRID else None
    trace = []
    gains = []
    converged = False
    outer = 0
    for outer in range(1, cfg.max_outer + 1):
        rule = policy.rule(ParticleKde(beta, h, profile), outer)
        field = PosteriorField(beta, data, h, profile, rule, shared)
        if not trace:
            trace.append(field.loglik)
        new, inner = _maximize(field, beta, cfg)
        loglik = field.loglik_of(new)
        shift = float(np.max(np.linalg.norm(new - beta, axis=1)))
        # old and new particles compared under one rule; Monte Carlo rules change between iterations
        gain = loglik - field.loglik
        gains.append(gain)
        change = abs(gain) / max(abs(field.loglik), 1e-300)
        trace.append(loglik)
        beta = new
        logging.debug(f'em-npkmle outer {outer}: loglik={loglik:.8f} inner={inner} max shift={shift:.3e}')
        if on_iteration is not None:
            on_iteration(outer, beta)
        if change < cfg.outer_tol and shift < cfg.displacement_tol:
            converged = True
            break
    if not trace:
        trace.append(PosteriorField(beta, data, h, profile, policy.rule(ParticleKde(beta, h, profile)),
                                    shared).loglik)
    kde = ParticleKde(beta, h, profile)
    atoms = aggregate_atoms(kde, cfg.merge_factor * h)
    off_grid = None
    if policy.mode == GRID:
        off_grid = 1.0 - kde.total_mass(policy.grid)
        if off_grid > _OFF_GRID_WARNING:
            logging.warning(f'{off_grid:.1%} of the particle KDE mass lies outside the grid box; widen the box')
    if not converged:
        logging.warning(f'em-npkmle stopped after {outer} outer iterations without converging')
    wall = time.perf_counter() - started
    logging.info(f'em-npkmle ({cfg.mode}) finished: {outer} outer iterations, converged={converged}, '
                 f'{atoms.K} aggregated atoms')
    return FitReport(
        method='npkmle' if cfg.mode == FULL_EM else 'gem',
        estimator=kde,
        loglik_trace=tuple(trace),
        iterations=outer,
        converged=converged,
        wall_time=wall,
        atoms=atoms,
        bandwidth=h,
        sigma=data.sigma,
        diagnostics={'particles': kde.n_points, 'merge_radius': cfg.merge_factor * h,
                     'integration': policy.mode, 'min_step_gain': min(gains) if gains else 0.0,
                     'off_grid_mass': off_grid})


def merge_close_points(points, radius):
    ''' single-linkage groups of points closer than `radius`

    Returns (centers, counts, labels); groups are numbered by their lowest
    member index.
    '''
    points = as_matrix(points, 'points')
    if not radius > 0:
        raise ArgumentError(f'merge radius must be positive, got {radius}')
    n = points.shape[0]
    pairs = cKDTree(points).query_pairs(radius, output_type='ndarray')
    if pairs.size:
        dist = np.linalg.norm(points[pairs[:, 0]] - points[pairs[:, 1]], axis=1)
        pairs = pairs[dist < radius]
    graph = coo_matrix((np.ones(pairs.shape[0]), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    k, labels = connected_components(graph, directed=False)
    counts = np.bincount(labels, minlength=k)
    centers = np.stack([np.bincount(labels, weights=points[:, j], minlength=k) for j in range(points.shape[1])],
                       axis=1) / counts[:, None]
    return centers, counts, labels


def aggregate_atoms(kde, merge_radius=None):
    ''' empirical distribution of the particles with near-identical ones merged '''
    radius = 0.05 * kde.bandwidth if merge_radius is None else merge_radius
    centers, counts, _ = merge_close_points(kde.points, radius)
    return DiscreteMeasure.from_atoms(centers, counts / kde.n_points)
