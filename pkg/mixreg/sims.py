''' Synthetic regression mixtures and CSV ingestion of real data sets '''
import math
import logging
from collections import namedtuple
import numpy as np
import pandas as pd
from .errors import ArgumentError, DataError
from .model import Dataset, DiscreteMeasure
from .utils import make_rng


__all__ = ('gen_simulation1', 'gen_simulation2', 'discretize_simulation2_truth', 'load_csv',
           'SIM1_ATOMS', 'SIM1_WEIGHTS', 'SIM2_RADII')


# (intercept, slope) of the three lines y = 3 - x, y = 1 + 1.5x, y = -1 + 0.5x
SIM1_ATOMS = ((3.0, -1.0), (1.0, 1.5), (-1.0, 0.5))
SIM1_WEIGHTS = (0.3, 0.3, 0.4)
SIM2_RADII = (1.0, 2.0)
X_RANGE = (-1.0, 3.0)


Simulation1Sample = namedtuple('Simulation1Sample', ['data', 'labels', 'truth'])
Simulation2Sample = namedtuple('Simulation2Sample', ['data', 'betas'])


def _design(rng, n):
    x = rng.uniform(*X_RANGE, size=n)
    return np.column_stack([np.ones(n), x])


def _dataset(xs, ys, sigma):
    # sigma = 0 gives noiseless data with an unknown noise scale
    return Dataset(xs, ys, sigma if sigma > 0 else None)


def gen_simulation1(n, sigma=0.5, weights=SIM1_WEIGHTS, seed=0):
    ''' three regression lines with x ~ U[-1, 3] and covariate rows (1, x) '''
    weights = np.asarray(weights, dtype=float)
    if n < 1:
        raise ArgumentError(f'sample size must be positive, got {n}')
    if weights.shape != (3, ) or np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
        raise ArgumentError(f'simulation 1 needs three probabilities summing to 1, got {weights.tolist()}')
    if sigma < 0:
        raise ArgumentError(f'sigma must be nonnegative, got {sigma}')
    rng = make_rng(seed, 'dataset')
    labels = rng.choice(3, size=n, p=weights)
    xs = _design(rng, n)
    betas = np.asarray(SIM1_ATOMS)[labels]
    ys = np.sum(xs * betas, axis=1) + sigma * rng.standard_normal(n)
    logging.debug(f'simulation 1: n={n}, sigma={sigma}, component counts {np.bincount(labels, minlength=3)}')
    return Simulation1Sample(_dataset(xs, ys, sigma), labels, DiscreteMeasure.from_atoms(SIM1_ATOMS, weights))


def gen_simulation2(n, sigma=0.2, seed=0):
    ''' coefficients uniform on one of two concentric circles of radius 1 and 2, picked fairly '''
    if n < 1:
        raise ArgumentError(f'sample size must be positive, got {n}')
    if sigma < 0:
        raise ArgumentError(f'sigma must be nonnegative, got {sigma}')
    rng = make_rng(seed, 'dataset')
    radius = rng.choice(SIM2_RADII, size=n)
    angle = rng.uniform(0.0, 2 * math.pi, size=n)
    betas = radius[:, None] * np.column_stack([np.cos(angle), np.sin(angle)])
    xs = _design(rng, n)
    ys = np.sum(xs * betas, axis=1) + sigma * rng.standard_normal(n)
    return Simulation2Sample(_dataset(xs, ys, sigma), betas)


def discretize_simulation2_truth(per_circle=200):
    ''' equal-weight points evenly spaced on both circles '''
    if per_circle < 1:
        raise ArgumentError(f'need at least one point per circle, got {per_circle}')
    angle = 2 * math.pi * np.arange(per_circle) / per_circle
    ring = np.column_stack([np.cos(angle), np.sin(angle)])
    atoms = np.concatenate([r * ring for r in SIM2_RADII])
    return DiscreteMeasure(atoms, np.full(atoms.shape[0], 1.0 / atoms.shape[0]))


def load_csv(path, x_columns, y_column, add_intercept=True, sigma=None):
    ''' Dataset from a comma-separated file with a header row; columns are chosen by name '''
    x_columns = [x_columns] if isinstance(x_columns, str) else list(x_columns)
    try:
        frame = pd.read_csv(path, sep=',', encoding='utf-8', dtype=str, skipinitialspace=True)
    except FileNotFoundError:
        raise DataError(f'data file "{path}" does not exist')
    except pd.errors.EmptyDataError:
        raise DataError(f'data file "{path}" is empty')
    if frame.shape[0] == 0:
        raise DataError(f'data file "{path}" has a header but no rows')
    columns = x_columns + [y_column]
    for name in columns:
        if name not in frame.columns:
            raise DataError(f'column "{name}" not found in "{path}"; available: {", ".join(frame.columns)}',
                            column=name)
    values = frame[columns].apply(pd.to_numeric, errors='coerce')
    bad = values.isna().to_numpy() | ~np.isfinite(values.to_numpy(dtype=float))
    if bad.any():
        row, col = (int(v[0]) for v in np.nonzero(bad))
        raw = frame[columns[col]].iloc[row]
        raise DataError(f'{path}: row {row + 1} (line {row + 2}), column "{columns[col]}": '
                        f'not a number: {raw!r}', row=row, column=columns[col])
    xs = values[x_columns].to_numpy(dtype=float)
    if add_intercept:
        xs = np.column_stack([np.ones(xs.shape[0]), xs])
    logging.info(f'loaded {xs.shape[0]} rows from {path} (d={xs.shape[1]})')
    return Dataset(xs, values[y_column].to_numpy(dtype=float), sigma)
