''' Domain types of the regression mixture model and the shared likelihood machinery.

Observations follow  y_i = x_i^T beta_i + sigma * eps_i  with beta_i ~ G.
Every mixture likelihood here is evaluated in log space.
'''
import math
import logging
from dataclasses import dataclass, field, replace
from typing import Optional
import numpy as np
from scipy.special import logsumexp
from scipy.spatial.distance import cdist
from .errors import ArgumentError, IntegrationError
from .quadrature import QuadratureGrid, IntegrationPolicy, integrate_on_grid
from .utils import as_matrix, frozen, iter_chunks


__all__ = ('Dataset', 'DiscreteMeasure', 'GridDensity', 'ParticleKde', 'FitReport', 'NodeLikelihood',
           'gaussian_density', 'log_gaussian_density', 'incomplete_loglik', 'posterior_cluster_assign')


_LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)
_CHUNK_ROWS = 256
_CACHE_LIMIT = 25_000_000  # cached likelihood entries (float64)
_UNDERFLOW = 1e-280


def _check_sigma(sigma):
    if sigma is None or not np.isfinite(sigma) or sigma <= 0:
        raise ArgumentError(f'noise scale sigma must be a positive number, got {sigma}')


def log_gaussian_density(r, sigma):
    _check_sigma(sigma)
    r = np.asarray(r, dtype=float)
    return -0.5 * (r / sigma) ** 2 - math.log(sigma) - _LOG_SQRT_2PI


def gaussian_density(r, sigma):
    ''' phi_sigma(r) = exp(-r^2 / (2 sigma^2)) / (sigma sqrt(2 pi)) '''
    out = np.exp(log_gaussian_density(r, sigma))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class Dataset:
    xs: np.ndarray
    ys: np.ndarray
    sigma: Optional[float] = None

    def __post_init__(self):
        xs = as_matrix(self.xs, 'covariates')
        ys = np.asarray(self.ys, dtype=float).ravel()
        if ys.shape[0] != xs.shape[0]:
            raise ArgumentError(f'{xs.shape[0]} covariate rows but {ys.shape[0]} responses')
        if not np.all(np.isfinite(ys)):
            raise ArgumentError('responses contain non-finite values')
        if self.sigma is not None:
            _check_sigma(self.sigma)
            object.__setattr__(self, 'sigma', float(self.sigma))
        object.__setattr__(self, 'xs', frozen(xs))
        object.__setattr__(self, 'ys', frozen(ys))

    @property
    def n(self):
        return self.xs.shape[0]

    @property
    def d(self):
        return self.xs.shape[1]

    def require_sigma(self):
        if self.sigma is None:
            raise ArgumentError('noise scale sigma is unknown; supply it or estimate it by cross-validation')
        return self.sigma

    def with_sigma(self, sigma):
        return Dataset(self.xs, self.ys, sigma)

    def subset(self, indices):
        indices = np.asarray(indices)
        return Dataset(self.xs[indices], self.ys[indices], self.sigma)

    def residual_sd(self):
        ''' sample SD of residuals from one pooled least-squares line '''
        coef, *_ = np.linalg.lstsq(self.xs, self.ys, rcond=None)
        resid = self.ys - self.xs @ coef
        return float(np.std(resid, ddof=min(self.d, self.n - 1)))


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    betas: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        betas = as_matrix(self.betas, 'atoms')
        weights = np.asarray(self.weights, dtype=float).ravel()
        if weights.shape[0] != betas.shape[0]:
            raise ArgumentError(f'{betas.shape[0]} atoms but {weights.shape[0]} weights')
        if np.any(weights <= 0):
            raise ArgumentError('atom weights must be positive')
        if abs(weights.sum() - 1.0) > 1e-12:
            raise ArgumentError(f'atom weights sum to {weights.sum()!r}, not 1')
        if np.unique(betas, axis=0).shape[0] != betas.shape[0]:
            raise ArgumentError('atoms must be pairwise distinct')
        object.__setattr__(self, 'betas', frozen(betas))
        object.__setattr__(self, 'weights', frozen(weights))

    @classmethod
    def from_atoms(cls, betas, weights=None):
        ''' normalize weights, drop empty atoms and merge exact duplicates '''
        betas = as_matrix(betas, 'atoms')
        weights = np.ones(betas.shape[0]) if weights is None else np.asarray(weights, dtype=float).ravel()
        keep = weights > 0
        betas, weights = betas[keep], weights[keep]
        if betas.shape[0] == 0:
            raise ArgumentError('a discrete measure needs at least one atom with positive weight')
        uniq, first, inverse = np.unique(betas, axis=0, return_index=True, return_inverse=True)
        inverse = np.asarray(inverse).ravel()
        merged = np.bincount(inverse, weights=weights, minlength=uniq.shape[0])
        order = np.argsort(first, kind='stable')
        merged = merged[order]
        return cls(uniq[order], merged / merged.sum())

    @classmethod
    def dirac(cls, beta):
        return cls(np.atleast_2d(np.asarray(beta, dtype=float)), [1.0])

    @property
    def K(self):
        return self.betas.shape[0]

    @property
    def d(self):
        return self.betas.shape[1]


@dataclass(frozen=True, eq=False)
class GridDensity:
    grid: QuadratureGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        if values.size != self.grid.size:
            raise ArgumentError(f'grid has {self.grid.size} nodes but {values.size} values were given')
        if np.any(~np.isfinite(values)) or np.any(values < 0):
            raise ArgumentError('grid density values must be finite and nonnegative')
        total = integrate_on_grid(values, self.grid)
        if abs(total - 1.0) > 1e-6:
            raise ArgumentError(f'grid density integrates to {total!r}, not 1')
        object.__setattr__(self, 'values', frozen(values))

    @classmethod
    def uniform(cls, grid):
        return cls(grid, np.full(grid.size, 1.0 / grid.volume))

    @classmethod
    def from_unnormalized(cls, grid, values):
        values = np.asarray(values, dtype=float).ravel()
        total = values.sum() * grid.cell_volume
        if not total > 0:
            raise IntegrationError('cannot normalize a grid density with no mass')
        return cls(grid, values / total)

    @property
    def d(self):
        return self.grid.d

    @property
    def mass(self):
        ''' probability of each cell '''
        return self.values * self.grid.cell_volume

    def log_node_weights(self):
        with np.errstate(divide='ignore'):
            return np.log(self.mass)

    def l2_distance(self, other):
        return float(np.sqrt(np.sum((self.values - other.values) ** 2) * self.grid.cell_volume))

    def boundary_mass(self):
        return float(self.mass[self.grid.boundary_mask].sum())

    def mean(self):
        return self.mass @ self.grid.points


@dataclass(frozen=True, eq=False)
class ParticleKde:
    points: np.ndarray
    bandwidth: float
    profile: object

    def __post_init__(self):
        points = as_matrix(self.points, 'particles')
        if not self.bandwidth > 0:
            raise ArgumentError(f'bandwidth must be positive, got {self.bandwidth}')
        if points.shape[1] != self.profile.dimension:
            raise ArgumentError(f'{points.shape[1]}-dimensional particles with a '
                                f'{self.profile.dimension}-dimensional kernel')
        object.__setattr__(self, 'points', frozen(points))
        object.__setattr__(self, 'bandwidth', float(self.bandwidth))

    @property
    def n_points(self):
        return self.points.shape[0]

    @property
    def d(self):
        return self.points.shape[1]

    def log_density(self, query):
        ''' log of (1/(n_p h^d)) sum_l v(|q - p_l|^2 / h^2) '''
        query = np.atleast_2d(np.asarray(query, dtype=float))
        h = self.bandwidth
        offset = math.log(self.n_points) + self.d * math.log(h)
        out = np.empty(query.shape[0])
        for rows in iter_chunks(query.shape[0], _CHUNK_ROWS):
            sq = _sq_dist(query[rows], self.points) / h ** 2
            out[rows] = logsumexp(self.profile.log_v(sq), axis=1) - offset
        return out

    def density(self, query):
        return np.exp(self.log_density(query))

    def sample(self, m, rng):
        if self.profile.sampler is None:
            raise ArgumentError(f'kernel "{self.profile.name}" cannot be sampled')
        picks = rng.integers(0, self.n_points, size=m)
        return self.points[picks] + self.bandwidth * self.profile.sampler(rng, m)

    def total_mass(self, grid):
        return integrate_on_grid(self.density(grid.points), grid)


@dataclass(frozen=True, eq=False)
class FitReport:
    method: str
    estimator: object
    loglik_trace: tuple
    iterations: int
    converged: bool
    wall_time: float
    atoms: Optional[DiscreteMeasure] = None
    labels: Optional[np.ndarray] = None
    bandwidth: Optional[float] = None
    sigma: Optional[float] = None
    diagnostics: dict = field(default_factory=dict)

    def is_monotone(self, rtol=1e-8):
        trace = np.asarray(self.loglik_trace)
        if trace.size < 2:
            return True
        slack = rtol * (1 + np.abs(trace[:-1]))
        return bool(np.all(trace[1:] >= trace[:-1] - slack))

    def with_atoms(self, atoms, labels=None, **diagnostics):
        return replace(self, atoms=atoms, labels=labels, diagnostics={**self.diagnostics, **diagnostics})

    def to_dict(self):
        out = {
            'method': self.method,
            'estimator': type(self.estimator).__name__,
            'iterations': int(self.iterations),
            'converged': bool(self.converged),
            'wall_time': float(self.wall_time),
            'loglik_trace': [float(v) for v in self.loglik_trace],
            'bandwidth': self.bandwidth,
            'sigma': self.sigma,
            'diagnostics': self.diagnostics,
        }
        if self.atoms is not None:
            out['atoms'] = [{'beta': b.tolist(), 'weight': float(w)}
                            for b, w in zip(self.atoms.betas, self.atoms.weights)]
        return out


def _sq_dist(a, b):
    return cdist(a, b, 'sqeuclidean')


class NodeLikelihood(object):
    ''' phi_sigma(y_i - x_i^T b_k) for every observation i and node b_k

    Rows are stored shifted by their maximum log value so that products with
    node weights never underflow for the dominant terms; rows whose shifted
    sum still underflows are redone in log space.
    '''
    def __init__(self, data, nodes, chunk_rows=_CHUNK_ROWS, cache_limit=_CACHE_LIMIT):
        self._xs = data.xs
        self._ys = data.ys
        self._sigma = data.require_sigma()
        self._nodes = np.asarray(nodes, dtype=float)
        if self._nodes.ndim != 2 or self._nodes.shape[1] != data.d:
            raise ArgumentError(f'nodes of shape {self._nodes.shape} do not match {data.d}-dimensional covariates')
        self._chunks = list(iter_chunks(data.n, chunk_rows))
        self._cache = None
        if data.n * self._nodes.shape[0] <= cache_limit:
            self._cache = [self._shifted(rows) for rows in self._chunks]

    @property
    def n(self):
        return self._xs.shape[0]

    @property
    def size(self):
        return self._nodes.shape[0]

    def log_phi(self, rows):
        resid = self._ys[rows, None] - self._xs[rows] @ self._nodes.T
        return log_gaussian_density(resid, self._sigma)

    def _shifted(self, rows):
        lp = self.log_phi(rows)
        shift = lp.max(axis=1)
        return np.exp(lp - shift[:, None]), shift

    def mix(self, log_weights, want_mass=True):
        ''' log sum_k phi_ik w_k per observation, and posterior node masses sum_i p_ik '''
        log_weights = np.asarray(log_weights, dtype=float)
        top = np.max(log_weights)
        if not np.isfinite(top):
            raise IntegrationError('every node weight is zero')
        wt = np.exp(log_weights - top)
        log_norm = np.empty(self.n)
        mass = np.zeros(self.size) if want_mass else None
        for idx, rows in enumerate(self._chunks):
            scaled, shift = self._cache[idx] if self._cache is not None else self._shifted(rows)
            z = scaled @ wt
            bad = z < _UNDERFLOW
            with np.errstate(divide='ignore'):
                log_norm[rows] = np.log(z) + shift + top
            if want_mass:
                inv = np.zeros_like(z)
                np.divide(1.0, z, out=inv, where=~bad)
                mass += wt * (scaled.T @ inv)
            for offset in np.flatnonzero(bad):
                i = rows.start + offset
                lp = self.log_phi(slice(i, i + 1))[0] + log_weights
                ln = logsumexp(lp)
                if not np.isfinite(ln):
                    raise IntegrationError(f'observation {i} has zero likelihood at every node', i)
                log_norm[i] = ln
                if want_mass:
                    mass += np.exp(lp - ln)
        return log_norm, mass

    def expected_log_phi(self, log_weights):
        ''' sum_i sum_k p_ik log phi_ik with p_i the posterior over nodes '''
        log_weights = np.asarray(log_weights, dtype=float)
        total = 0.0
        for rows in self._chunks:
            lp = self.log_phi(rows)
            a = lp + log_weights
            ln = logsumexp(a, axis=1)
            if not np.all(np.isfinite(ln)):
                i = rows.start + int(np.flatnonzero(~np.isfinite(ln))[0])
                raise IntegrationError(f'observation {i} has zero likelihood at every node', i)
            total += float(np.sum(np.exp(a - ln[:, None]) * lp))
        return total


def incomplete_loglik(G, data, policy=None, draw=0):
    ''' L(G) = sum_i log int phi_sigma(y_i - x_i^T b) dG(b) '''
    sigma = data.require_sigma()
    if isinstance(G, DiscreteMeasure):
        lp = log_gaussian_density(data.ys[:, None] - data.xs @ G.betas.T, sigma) + np.log(G.weights)
        per_obs = logsumexp(lp, axis=1)
        bad = np.flatnonzero(~np.isfinite(per_obs))
        if bad.size:
            raise IntegrationError(f'observation {bad[0]} has zero likelihood under every atom', bad[0])
        return float(np.sum(per_obs))
    if isinstance(G, GridDensity):
        log_norm, _ = NodeLikelihood(data, G.grid.points).mix(G.log_node_weights(), want_mass=False)
        return float(np.sum(log_norm))
    if isinstance(G, ParticleKde):
        policy = policy or IntegrationPolicy.default(G.d)
        rule = policy.rule(G, draw)
        log_weights = rule.log_weights + G.log_density(rule.nodes)
        log_norm, _ = NodeLikelihood(data, rule.nodes).mix(log_weights, want_mass=False)
        return float(np.sum(log_norm))
    raise ArgumentError(f'unsupported estimator type "{type(G).__name__}"')


def posterior_cluster_assign(G, data):
    ''' argmax_j pi_j phi_sigma(y_i - x_i^T beta_j); ties go to the lowest index '''
    sigma = data.require_sigma()
    score = log_gaussian_density(data.ys[:, None] - data.xs @ G.betas.T, sigma) + np.log(G.weights)
    labels = np.argmax(score, axis=1)
    logging.debug(f'assigned {data.n} observations to {G.K} components')
    return labels
