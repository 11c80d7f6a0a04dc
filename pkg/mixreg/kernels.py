''' Spherically symmetric kernel profiles and the maximal smoothing bandwidth.

A kernel V on R^d is described by its profile v with V(x) = v(|x|^2); the
normalization constant lives inside v.  w = -v' is the mean shift weight.
'''
import math
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable
import numpy as np
from scipy.special import gammaln
from scipy.stats import iqr
from .errors import ArgumentError
from .quadrature import QuadratureGrid, integrate_on_grid
from .utils import as_matrix


__all__ = ('KernelProfile', 'gaussian_profile', 'oversmooth_bandwidth', 'scale_estimate_U')


_IQR_TO_SD = 1.34


@dataclass(frozen=True)
class KernelProfile:
    name: str
    dimension: int
    v: Callable
    w: Callable
    dw: Callable  # w'(t), used by the KDE Hessian
    log_v: Callable
    log_w: Callable
    dlog_w: Callable  # d/dt log w(t), for Hessians of rescaled weights
    roughness: float  # R(V) = int V^2
    sampler: Callable = None  # (rng, size) -> draws from V

    @property
    def sup(self):
        ''' |v|_inf, attained at t = 0 for a non-increasing profile '''
        return float(self.v(0.0))

    def check_normalization(self, half_width=9.0, nodes=61):
        ''' int_{R^d} v(|x|^2) dx by midpoint quadrature on a centered box '''
        grid = QuadratureGrid.box(self.dimension, -half_width, half_width, nodes)
        sq = np.sum(grid.points ** 2, axis=1)
        return integrate_on_grid(self.v(sq), grid)


def _gaussian_sampler(d):
    def sample(rng, size):
        return rng.standard_normal((size, d))
    return sample


@lru_cache(maxsize=None)
def gaussian_profile(d):
    ''' v(t) = (2 pi)^(-d/2) exp(-t/2), the standard normal density on R^d '''
    if d < 1:
        raise ArgumentError(f'kernel dimension must be >= 1, got {d}')
    log_norm = -0.5 * d * math.log(2 * math.pi)

    def log_v(t):
        return log_norm - 0.5 * np.asarray(t, dtype=float)

    def v(t):
        return np.exp(log_v(t))

    def w(t):
        return 0.5 * v(t)

    def log_w(t):
        return log_v(t) - math.log(2.0)

    def dw(t):
        return -0.25 * v(t)

    def dlog_w(t):
        return np.full(np.shape(t), -0.5)

    profile = KernelProfile(
        name='gaussian',
        dimension=d,
        v=v,
        w=w,
        dw=dw,
        log_v=log_v,
        log_w=log_w,
        dlog_w=dlog_w,
        roughness=(4 * math.pi) ** (-0.5 * d),
        sampler=_gaussian_sampler(d))
    if d <= 3:
        mass = profile.check_normalization()
        if abs(mass - 1.0) > 1e-6:
            raise ArgumentError(f'gaussian profile in dimension {d} integrates to {mass}')
    return profile


def oversmooth_bandwidth(n, d, U, profile, multiplier=1.0):
    ''' maximal smoothing bandwidth

    h = c * U * [ (d+8)^((d+6)/2) pi^(d/2) R(V) / (16 n Gamma((d+8)/2) d (d+2)) ]^(1/(d+4))
    '''
    if n < 2:
        raise ArgumentError(f'oversmoothing bandwidth needs n >= 2, got {n}')
    if not U > 0:
        raise ArgumentError(f'scale estimate U must be positive, got {U}')
    if multiplier <= 0:
        raise ArgumentError(f'bandwidth multiplier must be positive, got {multiplier}')
    log_bracket = (0.5 * (d + 6) * math.log(d + 8) + 0.5 * d * math.log(math.pi) + math.log(profile.roughness)
                   - math.log(16 * n) - gammaln(0.5 * (d + 8)) - math.log(d * (d + 2)))
    h = multiplier * U * math.exp(log_bracket / (d + 4))
    logging.debug(f'oversmoothing bandwidth h={h:.6g} (n={n}, d={d}, U={U:.6g}, c={multiplier})')
    return h


def scale_estimate_U(sample):
    ''' mean over dimensions of the Gaussian-scaled interquartile range '''
    sample = as_matrix(sample, 'sample')
    if sample.shape[0] < 4:
        raise ArgumentError(f'scale estimate needs at least 4 points, got {sample.shape[0]}')
    spreads = iqr(sample, axis=0, interpolation='linear') / _IQR_TO_SD
    if np.all(spreads == 0):
        raise ArgumentError('sample has zero interquartile range in every dimension; supply U manually')
    return float(np.mean(spreads))
