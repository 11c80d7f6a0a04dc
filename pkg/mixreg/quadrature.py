''' Numerical integration over coefficient space.

Every integral over beta is evaluated through a QuadratureRule, a set of
nodes with weights such that  int f(b) db ~= sum_k f(b_k) * weight_k.
The grid rule is the midpoint rule on a tensor box; the Monte Carlo rule
draws nodes from the current particle KDE and weights them by the inverse
proposal density, which makes the downstream posterior weights
self-normalized importance weights.
'''
import logging
from collections import namedtuple
from dataclasses import dataclass
from functools import cached_property
import numpy as np
from scipy.special import logsumexp
from .errors import ArgumentError, IntegrationError
from .utils import make_rng


__all__ = ('QuadratureGrid', 'QuadratureRule', 'IntegrationPolicy', 'integrate_on_grid',
           'sample_from_grid_density', 'default_grid')


GRID = 'grid'
MONTE_CARLO = 'monte-carlo'

_MIN_NODES = 8
_MIN_MC_SAMPLES = 100


QuadratureRule = namedtuple('QuadratureRule', ['nodes', 'log_weights'])


@dataclass(frozen=True)
class QuadratureGrid:
    lower: tuple
    upper: tuple
    nodes_per_dim: tuple

    def __post_init__(self):
        lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        nodes = tuple(int(v) for v in np.atleast_1d(self.nodes_per_dim))
        if len(nodes) == 1 and len(lower) > 1:
            nodes = nodes * len(lower)
        if not (len(lower) == len(upper) == len(nodes)):
            raise ArgumentError(f'grid bounds and resolution disagree on dimension: {lower}, {upper}, {nodes}')
        if any(u <= l for l, u in zip(lower, upper)):
            raise ArgumentError(f'grid box must have positive volume, got [{lower}, {upper}]')
        if any(k < _MIN_NODES for k in nodes):
            raise ArgumentError(f'grid needs at least {_MIN_NODES} nodes per dimension, got {nodes}')
        object.__setattr__(self, 'lower', lower)
        object.__setattr__(self, 'upper', upper)
        object.__setattr__(self, 'nodes_per_dim', nodes)

    @classmethod
    def box(cls, d, low=-4.0, high=4.0, nodes=161):
        return cls((low, ) * d, (high, ) * d, (nodes, ) * d)

    @property
    def d(self):
        return len(self.lower)

    @property
    def shape(self):
        return self.nodes_per_dim

    @property
    def size(self):
        return int(np.prod(self.nodes_per_dim))

    @cached_property
    def spacing(self):
        return (np.array(self.upper) - np.array(self.lower)) / np.array(self.nodes_per_dim)

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    @property
    def volume(self):
        return float(np.prod(np.array(self.upper) - np.array(self.lower)))

    @cached_property
    def axes(self):
        ''' cell-center coordinates per dimension '''
        return [lo + (np.arange(k) + 0.5) * step
                for lo, k, step in zip(self.lower, self.nodes_per_dim, self.spacing)]

    @cached_property
    def points(self):
        mesh = np.meshgrid(*self.axes, indexing='ij')
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        pts.setflags(write=False)
        return pts

    @cached_property
    def boundary_mask(self):
        idx = np.indices(self.nodes_per_dim).reshape(self.d, -1)
        last = np.array(self.nodes_per_dim)[:, None] - 1
        return np.any((idx == 0) | (idx == last), axis=0)

    def rule(self):
        log_w = np.full(self.size, np.log(self.cell_volume))
        return QuadratureRule(self.points, log_w)

    def shifted(self, offset):
        offset = np.broadcast_to(np.asarray(offset, dtype=float), (self.d, ))
        return QuadratureGrid(tuple(np.array(self.lower) + offset), tuple(np.array(self.upper) + offset),
                              self.nodes_per_dim)


def default_grid(d, low=-4.0, high=4.0, nodes=None):
    if nodes is None:
        nodes = {1: 801, 2: 161}.get(d, 41)
    return QuadratureGrid.box(d, low, high, nodes)


@dataclass(frozen=True)
class IntegrationPolicy:
    mode: str = GRID
    grid: QuadratureGrid = None
    mc_samples: int = 2000
    seed: int = 0

    def __post_init__(self):
        if self.mode not in (GRID, MONTE_CARLO):
            raise ArgumentError(f'unknown integration mode "{self.mode}"')
        if self.mode == GRID and self.grid is None:
            raise ArgumentError('grid integration needs a QuadratureGrid')
        if self.mode == MONTE_CARLO and self.mc_samples < _MIN_MC_SAMPLES:
            raise ArgumentError(f'Monte Carlo needs at least {_MIN_MC_SAMPLES} samples, got {self.mc_samples}')

    @classmethod
    def default(cls, d, grid=None, mc_samples=2000, seed=0):
        ''' grid quadrature up to two dimensions, Monte Carlo above '''
        if d <= 2:
            return cls(GRID, grid or default_grid(d))
        return cls(MONTE_CARLO, grid, mc_samples, seed)

    def rule(self, kde=None, draw=0):
        ''' nodes and log-weights; Monte Carlo rules are drawn from `kde`

        `draw` selects the random sub-stream, so successive rules within one
        run are independent but reproducible.
        '''
        if self.mode == GRID:
            return self.grid.rule()
        if kde is None:
            raise ArgumentError('Monte Carlo integration needs a particle KDE to sample from')
        rng = make_rng(self.seed, f'quadrature-{draw}')
        nodes = kde.sample(self.mc_samples, rng)
        log_w = -np.log(self.mc_samples) - kde.log_density(nodes)
        return QuadratureRule(nodes, log_w)


def integrate_on_grid(values, grid):
    ''' midpoint rule: sum of node values times cell volume '''
    values = np.asarray(values, dtype=float).ravel()
    if values.size != grid.size:
        raise ArgumentError(f'expected {grid.size} node values, got {values.size}')
    bad = np.flatnonzero(np.isnan(values))
    if bad.size:
        raise IntegrationError(f'NaN integrand at grid node {bad[0]}', bad[0])
    return float(values.sum() * grid.cell_volume)


def integrate_rule(log_values, rule):
    ''' log of the integral of exp(log_values) under `rule` '''
    return float(logsumexp(np.asarray(log_values) + rule.log_weights))


def sample_from_grid_density(g, m, seed):
    ''' inverse-CDF over cells, then uniform inside the chosen cell '''
    rng = make_rng(seed)
    grid = g.grid
    probs = g.values * grid.cell_volume
    cdf = np.cumsum(probs)
    cdf /= cdf[-1]
    cells = np.searchsorted(cdf, rng.random(m), side='right')
    cells = np.minimum(cells, grid.size - 1)
    jitter = (rng.random((m, grid.d)) - 0.5) * grid.spacing
    logging.debug(f'sampled {m} points from grid density over {grid.size} cells')
    return grid.points[cells] + jitter
