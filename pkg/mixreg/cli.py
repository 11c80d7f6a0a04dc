''' mixreg command line: simulate, fit, postprocess, cv-sigma, experiment, plotdata '''
import os
import sys
import logging
import argparse
from dataclasses import fields
from . import io
from .config import Settings, resolve_settings
from .cv import cv_sigma
from .errors import ArgumentError, MixregError
from .experiment import MODELS, SIM1, DEFAULT_SIGMA, records_table, run_experiment
from .metrics import format_summary
from .model import GridDensity, ParticleKde
from .pipeline import DISCRETE_METHODS, MEANSHIFT, METHODS, NPKMLE, SCMS, estimator_fitter, fit, postprocess_grid
from .plotdata import write_plot_data
from .quadrature import GRID, MONTE_CARLO
from .sims import discretize_simulation2_truth, gen_simulation1, gen_simulation2, load_csv
from .utils import ensure_directory


__all__ = ('main', 'build_parser')


def _float_list(text):
    try:
        return tuple(float(v) for v in text.replace(',', ' ').split())
    except ValueError:
        raise argparse.ArgumentTypeError(f'expected comma-separated numbers, got "{text}"')


def _common(parser):
    group = parser.add_argument_group('run')
    group.add_argument('--config', help='key = value settings file')
    group.add_argument('--seed', type=int, help='master random seed (default 0)')
    group.add_argument('--threads', type=int, help='worker threads (env MIXREG_THREADS, default 1)')
    group.add_argument('--out', help='output directory (env MIXREG_OUT, default ./out)')
    group.add_argument('--log-level', dest='log_level', choices=('DEBUG', 'INFO', 'WARNING', 'ERROR'))


def _data_args(parser, required=True):
    group = parser.add_argument_group('data')
    group.add_argument('--data', required=required, help='CSV file with a header row')
    group.add_argument('--x-columns', type=lambda s: [c.strip() for c in s.split(',') if c.strip()],
                       help='covariate columns, comma-separated (default: x, x1, x2, ...)')
    group.add_argument('--y-column', default='y')
    group.add_argument('--no-intercept', dest='intercept', action='store_const', const=False,
                       help='do not prepend a constant-1 column')
    group.add_argument('--sigma', type=float, help='known noise scale')


def _estimation_args(parser):
    group = parser.add_argument_group('estimation')
    group.add_argument('--integration', choices=('auto', GRID, MONTE_CARLO))
    group.add_argument('--grid-low', dest='grid_low', type=float)
    group.add_argument('--grid-high', dest='grid_high', type=float)
    group.add_argument('--grid-nodes', dest='grid_nodes', type=int)
    group.add_argument('--mc-samples', dest='mc_samples', type=int)
    group.add_argument('--max-iter', dest='max_iter', type=int, help='EM-NPMLE iterations')
    group.add_argument('--max-outer', dest='max_outer', type=int, help='EM-NPKMLE outer iterations')
    group.add_argument('--bandwidth', type=float, help='EM-NPKMLE bandwidth (default: oversmoothing rule)')
    group.add_argument('--particles', type=int, help='EM-NPKMLE particle count (default: n)')
    group.add_argument('--sample', dest='postprocess_sample', type=int, help='draws for mean shift / SCMS')
    group.add_argument('--ms-bandwidth', dest='postprocess_bandwidth', type=float,
                       help='mean shift / SCMS bandwidth (default: oversmoothing rule of the sample)')
    group.add_argument('--ridge-dim', dest='ridge_dim', type=int)


def _cv_args(parser):
    group = parser.add_argument_group('cross-validation')
    group.add_argument('--folds', type=int)
    group.add_argument('--sigma-grid', dest='sigma_grid', type=_float_list, help='candidate sigmas')
    group.add_argument('--cv-method', dest='cv_method', choices=tuple(METHODS))


def build_parser():
    parser = argparse.ArgumentParser(prog='mixreg', description='Nonparametric priors for mixtures of linear '
                                     'regressions: EM-NPMLE, EM-NPKMLE and friends.')
    commands = parser.add_subparsers(dest='command', metavar='COMMAND')
    commands.required = True

    cmd = commands.add_parser('simulate', help='generate a simulation data set')
    cmd.add_argument('--model', choices=MODELS, required=True)
    cmd.add_argument('--n', type=int, required=True)
    cmd.add_argument('--sigma', type=float)
    _common(cmd)
    cmd.set_defaults(handler=cmd_simulate)

    cmd = commands.add_parser('fit', help='estimate the coefficient prior of a data set')
    cmd.add_argument('--method', choices=tuple(METHODS), default=NPKMLE)
    cmd.add_argument('--cv-sigma', action='store_true', help='estimate sigma by cross-validation first')
    _data_args(cmd)
    _estimation_args(cmd)
    _cv_args(cmd)
    _common(cmd)
    cmd.set_defaults(handler=cmd_fit)

    cmd = commands.add_parser('postprocess', help='mean shift or SCMS on a fitted grid density')
    cmd.add_argument('--grid', required=True, help='grid density CSV written by fit --method npmle')
    how = cmd.add_mutually_exclusive_group(required=True)
    how.add_argument('--meanshift', dest='how', action='store_const', const=MEANSHIFT)
    how.add_argument('--scms', dest='how', action='store_const', const=SCMS)
    _data_args(cmd, required=False)
    _estimation_args(cmd)
    _common(cmd)
    cmd.set_defaults(handler=cmd_postprocess)

    cmd = commands.add_parser('cv-sigma', help='cross-validate the noise scale')
    _data_args(cmd)
    _estimation_args(cmd)
    _cv_args(cmd)
    _common(cmd)
    cmd.set_defaults(handler=cmd_cv_sigma)

    cmd = commands.add_parser('experiment', help='replicated simulation study')
    cmd.add_argument('--model', choices=MODELS, default=SIM1)
    cmd.add_argument('--n', type=int, required=True)
    cmd.add_argument('--replications', type=int, default=1)
    cmd.add_argument('--method', choices=DISCRETE_METHODS, default=NPKMLE)
    cmd.add_argument('--sigma', type=float, help='noise scale of the simulation (default per model)')
    cmd.add_argument('--cv-sigma', action='store_true')
    _estimation_args(cmd)
    _cv_args(cmd)
    _common(cmd)
    cmd.set_defaults(handler=cmd_experiment)

    cmd = commands.add_parser('plotdata', help='plot-ready tables from fit outputs')
    _data_args(cmd, required=False)
    cmd.add_argument('--atoms', help='atoms CSV')
    cmd.add_argument('--grid', help='grid density CSV')
    cmd.add_argument('--particles', dest='particles_csv', help='particles CSV')
    cmd.add_argument('--svg', action='store_true', help='also render plot.svg (needs matplotlib)')
    _common(cmd)
    cmd.set_defaults(handler=cmd_plotdata)
    return parser


def _settings(args):
    names = {f.name for f in fields(Settings)}
    overrides = {k: v for k, v in vars(args).items() if k in names}
    return resolve_settings(args.config, overrides)


def _load_data(args, settings):
    x_columns = args.x_columns or io.dataset_x_columns(args.data)
    if not x_columns:
        raise ArgumentError(f'no covariate columns found in "{args.data}"; pass --x-columns')
    return load_csv(args.data, x_columns, args.y_column, settings.intercept, args.sigma)


def _path(settings, name):
    return os.path.join(settings.out, name)


def cmd_simulate(args, settings):
    sigma = DEFAULT_SIGMA[args.model] if args.sigma is None else args.sigma
    if args.model == SIM1:
        data, labels, truth = gen_simulation1(args.n, sigma, seed=settings.seed)
        io.write_dataset(_path(settings, 'dataset.csv'), data, labels=labels)
    else:
        data, betas = gen_simulation2(args.n, sigma, seed=settings.seed)
        truth = discretize_simulation2_truth()
        io.write_dataset(_path(settings, 'dataset.csv'), data, betas=betas)
    io.write_atoms(_path(settings, 'truth.csv'), truth)


def _cross_validate(data, settings):
    fitter = estimator_fitter(settings.cv_method, settings)
    sigma, curve = cv_sigma(data, settings.folds, settings.sigma_grid, fitter, settings.seed, settings.threads,
                            settings.policy(data.d))
    io.write_table(_path(settings, 'cv_curve.csv'), curve)
    return sigma


def cmd_fit(args, settings):
    data = _load_data(args, settings)
    if args.cv_sigma:
        data = data.with_sigma(_cross_validate(data, settings))
    elif data.sigma is None:
        raise ArgumentError('sigma is unknown: pass --sigma or --cv-sigma')
    report = fit(data, args.method, settings)
    io.write_report(_path(settings, 'report.json'), report)
    io.write_trace(_path(settings, 'trace.csv'), report.loglik_trace)
    if isinstance(report.estimator, GridDensity):
        io.write_grid_density(_path(settings, 'grid.csv'), report.estimator)
    elif isinstance(report.estimator, ParticleKde):
        io.write_points(_path(settings, 'particles.csv'), report.estimator.points)
    if report.atoms is not None:
        io.write_atoms(_path(settings, 'atoms.csv'), report.atoms)
    if report.labels is not None:
        io.write_labels(_path(settings, 'labels.csv'), report.labels)
    print(f'{report.method}: {report.iterations} iterations, converged={report.converged}, '
          f'loglik={report.loglik_trace[-1]:.6f}')


def cmd_postprocess(args, settings):
    g = io.read_grid_density(args.grid)
    data = None
    if args.data:
        data = _load_data(args, settings)
        if data.sigma is None:
            raise ArgumentError('labelling observations needs --sigma')
    atoms, labels, points, h = postprocess_grid(g, settings, args.how, data)
    io.write_atoms(_path(settings, 'atoms.csv'), atoms)
    io.write_points(_path(settings, 'modes.csv' if args.how == MEANSHIFT else 'ridge.csv'), points)
    if labels is not None:
        io.write_labels(_path(settings, 'labels.csv'), labels)
    print(f'{args.how}: bandwidth {h:.6g}, {atoms.K} atoms')


def cmd_cv_sigma(args, settings):
    sigma = _cross_validate(_load_data(args, settings), settings)
    print(f'sigma={sigma:.6g}')


def cmd_experiment(args, settings):
    records, summary = run_experiment(args.model, args.n, args.replications, args.method, settings,
                                      args.sigma, args.cv_sigma)
    io.write_table(_path(settings, 'records.csv'), records_table(records))
    io.write_table(_path(settings, 'summary.csv'), summary.overview)
    io.write_table(_path(settings, 'bias.csv'), summary.bias)
    text = format_summary(summary)
    with open(_path(settings, 'summary.txt'), 'w', encoding='utf-8') as f:
        f.write(text + '\n')
    print(text)


def cmd_plotdata(args, settings):
    data = _load_data(args, settings) if args.data else None
    atoms = io.read_atoms(args.atoms) if args.atoms else None
    grid = io.read_grid_density(args.grid) if args.grid else None
    particles = io.read_points(args.particles_csv) if args.particles_csv else None
    write_plot_data(settings.out, data, atoms, grid, particles, args.svg, settings.intercept)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with status 2
        return exc.code
    try:
        settings = _settings(args)
        logging.basicConfig(level=getattr(logging, settings.log_level.upper(), logging.INFO),
                            format='%(asctime)s %(levelname)s %(message)s')
        ensure_directory(settings.out)
        args.handler(args, settings)
    except MixregError as err:
        logging.error(err.message)
        print(f'mixreg {args.command}: {err.message}', file=sys.stderr)
        return err.status
    return 0


if __name__ == '__main__':
    sys.exit(main())
