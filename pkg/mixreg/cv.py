''' K-fold cross-validation of the noise scale sigma.

For every candidate sigma and fold c the prior is fitted on the other folds
and scored by the negative held-out log-likelihood; the candidate with the
smallest total wins.
'''
import logging
import numpy as np
import pandas as pd
from sklearn.model_selection import KFold
from .errors import ArgumentError, CrossValidationError
from .config import Settings
from .model import incomplete_loglik
from .pipeline import GEM_METHOD, estimator_fitter
from .utils import derive_seed
from .workers import run_jobs


__all__ = ('cv_sigma', 'default_sigma_grid', 'fold_indices')


DEFAULT_FOLDS = 5
GRID_SIZE = 12
GRID_SPAN = (0.05, 2.0)


def default_sigma_grid(data, count=GRID_SIZE, span=GRID_SPAN):
    ''' log-spaced candidates scaled by the residual SD of one pooled least-squares line '''
    scale = data.residual_sd()
    if not scale > 0:
        raise ArgumentError('residuals of the pooled fit are all zero; supply a sigma grid')
    return np.geomspace(span[0] * scale, span[1] * scale, count)


def fold_indices(n, folds, seed):
    ''' held-out index sets of a seeded shuffled partition; sizes differ by at most one '''
    if folds < 2:
        raise ArgumentError(f'cross-validation needs at least 2 folds, got {folds}')
    if n < folds:
        raise ArgumentError(f'cannot split {n} observations into {folds} folds')
    splitter = KFold(n_splits=folds, shuffle=True, random_state=derive_seed(seed, 'folds'))
    return [test for _, test in splitter.split(np.arange(n))]


def _score_cell(data, test, sigma, fitter, policy):
    train = np.setdiff1d(np.arange(data.n), test)
    estimator = fitter(data.subset(train).with_sigma(sigma))
    held_out = data.subset(test).with_sigma(sigma)
    value = -incomplete_loglik(estimator, held_out, policy)
    if not np.isfinite(value):
        raise CrossValidationError(f'non-finite held-out log-likelihood at sigma={sigma:.6g}')
    return value


def cv_sigma(data, folds=DEFAULT_FOLDS, sigma_grid=None, fitter=None, seed=0, threads=1, policy=None):
    ''' returns (sigma_hat, curve); curve has one row per candidate with its CV value and failed fold count '''
    if fitter is None:
        fitter = estimator_fitter(GEM_METHOD, Settings(seed=derive_seed(seed, 'fit')))
    grid = default_sigma_grid(data) if sigma_grid is None else np.asarray(sigma_grid, dtype=float).ravel()
    if grid.size == 0 or np.any(~(grid > 0)):
        raise ArgumentError(f'sigma candidates must be positive, got {grid.tolist()}')
    tests = fold_indices(data.n, folds, seed)
    cells = [(data, test, sigma, fitter, policy) for sigma in grid for test in tests]
    results = run_jobs(_score_cell, cells, threads)
    totals = np.zeros(grid.size)
    failed = np.zeros(grid.size, dtype=int)
    for result in results:
        i = result.index // folds
        if result.ok:
            totals[i] += result.value
        else:
            failed[i] += 1
            logging.warning(f'cv cell sigma={grid[i]:.6g}, fold {result.index % folds} failed: {result.error}')
    totals[failed > 0] = np.nan
    curve = pd.DataFrame({'sigma': grid, 'cv': totals, 'failed_folds': failed})
    usable = np.flatnonzero(failed == 0)
    if usable.size == 0:
        raise CrossValidationError(f'every sigma candidate had a failed fold ({grid.size} candidates, {folds} folds)')
    best = usable[np.argmin(totals[usable])]
    logging.info(f'cross-validated sigma={grid[best]:.6g} over {grid.size} candidates and {folds} folds')
    return float(grid[best]), curve
