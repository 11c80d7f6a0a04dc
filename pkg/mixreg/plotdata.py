''' Plot-ready tables: data scatter with fitted lines, beta-space scatter, grid heatmap.

SVG rendering is optional and needs matplotlib (`pip install mixreg[plot]`).
'''
import os
import logging
import numpy as np
import pandas as pd
from .errors import ArgumentError, MixregError
from .io import beta_columns, write_table


__all__ = ('regression_lines', 'atom_scatter', 'point_scatter', 'grid_heatmap', 'data_scatter',
           'write_plot_data', 'render_svg')


def regression_lines(measure):
    ''' one (intercept, slope, weight) record per atom of a prior over (intercept, slope) '''
    if measure.d != 2:
        raise ArgumentError(f'regression lines need 2-dimensional atoms (intercept, slope), got d={measure.d}')
    return pd.DataFrame({'intercept': measure.betas[:, 0], 'slope': measure.betas[:, 1], 'weight': measure.weights})


def atom_scatter(measure):
    frame = pd.DataFrame(measure.betas, columns=beta_columns(measure.d))
    frame['weight'] = measure.weights
    return frame


def point_scatter(points):
    points = np.atleast_2d(points)
    return pd.DataFrame(points, columns=beta_columns(points.shape[1]))


def grid_heatmap(g):
    frame = pd.DataFrame(g.grid.points, columns=beta_columns(g.d))
    frame['value'] = g.values
    return frame


def data_scatter(data, intercept=True):
    ''' (x, y) pairs; the constant column is dropped when the design has an intercept '''
    xs = data.xs[:, 1:] if intercept else data.xs
    if xs.shape[1] != 1:
        raise ArgumentError(f'scatter plots need a single covariate, got {xs.shape[1]}')
    return pd.DataFrame({'x': xs[:, 0], 'y': data.ys})


def write_plot_data(out_dir, data=None, atoms=None, grid=None, particles=None, svg=False, intercept=True):
    ''' write every table the inputs allow; returns the written paths

    `intercept` says whether the first column of the dataset design is the constant 1
    '''
    if data is None and atoms is None and grid is None and particles is None:
        raise ArgumentError('nothing to plot: give a dataset, atoms, a grid density or particles')
    os.makedirs(out_dir, exist_ok=True)
    tables = {}
    if data is not None:
        tables['scatter.csv'] = data_scatter(data, intercept)
    if atoms is not None:
        tables['atoms_beta.csv'] = atom_scatter(atoms)
        if atoms.d == 2:
            tables['lines.csv'] = regression_lines(atoms)
    if grid is not None:
        tables['heatmap.csv'] = grid_heatmap(grid)
    if particles is not None:
        tables['particles_beta.csv'] = point_scatter(particles)
    paths = [write_table(os.path.join(out_dir, name), frame) for name, frame in tables.items()]
    if svg:
        paths.append(render_svg(os.path.join(out_dir, 'plot.svg'), tables))
    logging.info(f'wrote {len(paths)} plot files to {out_dir}')
    return paths


def render_svg(path, tables):
    ''' data and fitted lines on the left, beta space on the right '''
    try:
        import matplotlib
        matplotlib.use('Agg')
        import matplotlib.pyplot as plt
    except ImportError:
        raise MixregError('SVG output needs matplotlib; install the "plot" extra')
    fig, (left, right) = plt.subplots(1, 2, figsize=(10, 4.5))
    scatter = tables.get('scatter.csv')
    if scatter is not None:
        left.scatter(scatter['x'], scatter['y'], s=4, c='0.6')
        lines = tables.get('lines.csv')
        if lines is not None:
            xs = np.linspace(scatter['x'].min(), scatter['x'].max(), 2)
            for _, line in lines.iterrows():
                left.plot(xs, line['intercept'] + line['slope'] * xs, lw=1 + 4 * line['weight'])
        left.set_xlabel('x')
        left.set_ylabel('y')
    heatmap = tables.get('heatmap.csv')
    if heatmap is not None and 'beta1' in heatmap:
        right.tricontourf(heatmap['beta0'], heatmap['beta1'], heatmap['value'], levels=30, cmap='Greys')
    particles = tables.get('particles_beta.csv')
    if particles is not None and 'beta1' in particles:
        right.scatter(particles['beta0'], particles['beta1'], s=2, c='tab:blue', alpha=0.4)
    atoms = tables.get('atoms_beta.csv')
    if atoms is not None and 'beta1' in atoms:
        right.scatter(atoms['beta0'], atoms['beta1'], s=400 * atoms['weight'], c='tab:red', marker='x')
    right.set_xlabel('beta0')
    right.set_ylabel('beta1')
    fig.tight_layout()
    fig.savefig(path, format='svg')
    plt.close(fig)
    return path
