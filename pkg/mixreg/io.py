''' Encode and decode every artifact the command line writes: CSV tables and the JSON fit report '''
import json
import logging
import os
import numpy as np
import pandas as pd
from .errors import DataError
from .model import DiscreteMeasure, GridDensity
from .quadrature import QuadratureGrid


__all__ = ('write_dataset', 'write_atoms', 'read_atoms', 'write_grid_density', 'read_grid_density',
           'write_points', 'read_points', 'write_labels', 'write_trace', 'write_table', 'write_report',
           'read_report', 'beta_columns', 'dataset_x_columns')


_FLOAT_FORMAT = '%.17g'


def beta_columns(d):
    return [f'beta{k}' for k in range(d)]


def _write(frame, path):
    frame.to_csv(path, index=False, float_format=_FLOAT_FORMAT, lineterminator='\n')
    logging.debug(f'wrote {len(frame)} rows to {path}')
    return path


def _read(path):
    if not os.path.exists(path):
        raise DataError(f'file "{path}" does not exist')
    try:
        return pd.read_csv(path)
    except pd.errors.EmptyDataError:
        raise DataError(f'file "{path}" is empty')


def _require(frame, columns, path):
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise DataError(f'"{path}" lacks column(s) {", ".join(missing)}', column=missing[0])


def write_dataset(path, data, intercept=True, labels=None, betas=None):
    ''' covariates (without the constant column when `intercept`) and responses, plus optional truth '''
    xs = data.xs[:, 1:] if intercept else data.xs
    names = ['x'] if xs.shape[1] == 1 else [f'x{k + 1}' for k in range(xs.shape[1])]
    frame = pd.DataFrame(xs, columns=names)
    frame['y'] = data.ys
    if labels is not None:
        frame['label'] = np.asarray(labels, dtype=int)
    if betas is not None:
        for name, column in zip(beta_columns(betas.shape[1]), np.asarray(betas).T):
            frame[f'true_{name}'] = column
    return _write(frame, path)


def dataset_x_columns(path):
    ''' covariate column names written by write_dataset '''
    return [c for c in _read(path).columns if c == 'x' or (c.startswith('x') and c[1:].isdigit())]


def write_atoms(path, measure):
    frame = pd.DataFrame(measure.betas, columns=beta_columns(measure.d))
    frame['weight'] = measure.weights
    return _write(frame, path)


def read_atoms(path):
    frame = _read(path)
    betas = [c for c in frame.columns if c.startswith('beta')]
    _require(frame, ['weight'], path)
    if not betas:
        raise DataError(f'"{path}" has no beta columns', column='beta0')
    return DiscreteMeasure.from_atoms(frame[betas].to_numpy(dtype=float), frame['weight'].to_numpy(dtype=float))


def write_grid_density(path, g):
    frame = pd.DataFrame(g.grid.points, columns=beta_columns(g.d))
    frame['value'] = g.values
    return _write(frame, path)


def read_grid_density(path):
    ''' rebuild the tensor grid from its cell centers '''
    frame = _read(path)
    _require(frame, ['value'], path)
    names = [c for c in frame.columns if c.startswith('beta')]
    lower, upper, nodes = [], [], []
    for name in names:
        axis = np.unique(frame[name].to_numpy(dtype=float))
        if axis.size < 2:
            raise DataError(f'"{path}": column {name} does not span a grid', column=name)
        step = (axis[-1] - axis[0]) / (axis.size - 1)
        lower.append(axis[0] - step / 2)
        upper.append(axis[-1] + step / 2)
        nodes.append(axis.size)
    grid = QuadratureGrid(tuple(lower), tuple(upper), tuple(nodes))
    if grid.size != len(frame):
        raise DataError(f'"{path}" has {len(frame)} rows but its axes span {grid.size} nodes')
    order = np.lexsort([frame[name].to_numpy() for name in reversed(names)])
    return GridDensity.from_unnormalized(grid, frame['value'].to_numpy(dtype=float)[order])


def write_points(path, points):
    points = np.atleast_2d(points)
    return _write(pd.DataFrame(points, columns=beta_columns(points.shape[1])), path)


def read_points(path):
    frame = _read(path)
    names = [c for c in frame.columns if c.startswith('beta')]
    if not names:
        raise DataError(f'"{path}" has no beta columns', column='beta0')
    return frame[names].to_numpy(dtype=float)


def write_labels(path, labels):
    return _write(pd.DataFrame({'label': np.asarray(labels, dtype=int)}), path)


def write_trace(path, trace):
    return _write(pd.DataFrame({'iteration': np.arange(len(trace)), 'loglik': np.asarray(trace, dtype=float)}),
                  path)


def write_table(path, frame):
    return _write(frame, path)


def write_report(path, report):
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(report.to_dict(), f, indent=2, sort_keys=True, default=_jsonable)
        f.write('\n')
    return path


def read_report(path):
    if not os.path.exists(path):
        raise DataError(f'file "{path}" does not exist')
    with open(path, encoding='utf-8') as f:
        return json.load(f)


def _jsonable(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f'{type(value).__name__} is not JSON serializable')
