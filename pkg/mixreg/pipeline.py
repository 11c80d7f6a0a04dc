''' Named fitting procedures shared by the command line, cross-validation and experiments.

    npmle            EM-NPMLE on the grid
    npkmle           EM-NPKMLE started from a sample of the EM-NPMLE fit
    gem              single-step (generalized) EM-NPKMLE, same start, wider bandwidth
    npkmle-uniform   EM-NPKMLE started from uniform draws over the grid box
    npmle-meanshift  EM-NPMLE, then mean shift modes of a sample from it
    npmle-scms       EM-NPMLE, then SCMS ridge points of a sample from it
'''
import logging
from dataclasses import replace
from .config import Settings
from .em.npkmle import FULL_EM, GEM, run_em_npkmle
from .em.npmle import run_em_npmle
from .errors import ArgumentError
from .kernels import gaussian_profile, oversmooth_bandwidth, scale_estimate_U
from .model import posterior_cluster_assign
from .postprocess import bandwidth_for_sample, mean_shift, modes_to_measure, ridge_to_measure, scms
from .quadrature import sample_from_grid_density
from .utils import make_rng


__all__ = ('fit', 'fit_npmle', 'postprocess_grid', 'estimator_fitter', 'METHODS', 'DISCRETE_METHODS')


NPMLE = 'npmle'
NPKMLE = 'npkmle'
GEM_METHOD = 'gem'
NPKMLE_UNIFORM = 'npkmle-uniform'
NPMLE_MEANSHIFT = 'npmle-meanshift'
NPMLE_SCMS = 'npmle-scms'

MEANSHIFT = 'meanshift'
SCMS = 'scms'

# bandwidth multiplier applied to the oversmoothing rule, per start
INIT_MULTIPLIERS = {NPKMLE: 1.0, GEM_METHOD: 1.2, NPKMLE_UNIFORM: 1.15}


def fit_npmle(data, settings):
    return run_em_npmle(data, grid=settings.grid(data.d), l2_tol=settings.l2_tol, max_iter=settings.max_iter)


def _npmle_sample(data, settings, m, stream):
    report = fit_npmle(data, settings)
    return report, sample_from_grid_density(report.estimator, m, make_rng(settings.seed, stream))


def _fit_kde(data, settings, method):
    d = data.d
    profile = gaussian_profile(d)
    n_p = settings.particles or data.n
    npmle, sample = _npmle_sample(data, settings, n_p, 'init')
    if method == NPKMLE_UNIFORM:
        grid = settings.grid(d)
        beta_0 = make_rng(settings.seed, 'init-uniform').uniform(grid.lower, grid.upper, size=(n_p, d))
    else:
        beta_0 = sample
    h = settings.bandwidth
    if h is None:
        multiplier = settings.bandwidth_multiplier or INIT_MULTIPLIERS[method]
        h = oversmooth_bandwidth(n_p, d, scale_estimate_U(sample), profile, multiplier)
    cfg = settings.npkmle_config(d, GEM if method == GEM_METHOD else FULL_EM)
    logging.info(f'{method}: {n_p} particles, bandwidth {h:.6g}')
    report = run_em_npkmle(data, beta_0, h, profile, cfg)
    return replace(report, method=method, labels=posterior_cluster_assign(report.atoms, data),
                   diagnostics={**report.diagnostics, 'npmle_iterations': npmle.iterations})


def postprocess_grid(g, settings, how, data=None):
    ''' discretize a grid density by mean shift or SCMS on a sample drawn from it

    Returns (atoms, labels, points, bandwidth); labels assign the observations
    of `data` to the atoms and are only produced for mean shift.
    '''
    sample = sample_from_grid_density(g, settings.postprocess_sample, make_rng(settings.seed, 'sample'))
    h = settings.postprocess_bandwidth or bandwidth_for_sample(sample)
    if how == MEANSHIFT:
        modes, start_labels = mean_shift(sample, h, merge_factor=settings.mode_merge_factor)
        if modes.shape[0] == 0:
            raise ArgumentError('mean shift found no modes; raise the iteration limit or the bandwidth')
        atoms = modes_to_measure(modes, start_labels)
        labels = posterior_cluster_assign(atoms, data) if data is not None else None
        return atoms, labels, modes, h
    if how == SCMS:
        ridge = scms(sample, h, ridge_dim=settings.ridge_dim)
        if ridge.shape[0] == 0:
            raise ArgumentError('no SCMS trajectory converged')
        return ridge_to_measure(ridge), None, ridge, h
    raise ArgumentError(f'unknown post-processing "{how}", expected "{MEANSHIFT}" or "{SCMS}"')


def _fit_postprocessed(data, settings, method):
    npmle = fit_npmle(data, settings)
    how = MEANSHIFT if method == NPMLE_MEANSHIFT else SCMS
    atoms, labels, _, h = postprocess_grid(npmle.estimator, settings, how, data)
    return replace(npmle.with_atoms(atoms, labels, postprocess=how, postprocess_bandwidth=h), method=method)


METHODS = {
    NPMLE: lambda data, settings: fit_npmle(data, settings),
    NPKMLE: lambda data, settings: _fit_kde(data, settings, NPKMLE),
    GEM_METHOD: lambda data, settings: _fit_kde(data, settings, GEM_METHOD),
    NPKMLE_UNIFORM: lambda data, settings: _fit_kde(data, settings, NPKMLE_UNIFORM),
    NPMLE_MEANSHIFT: lambda data, settings: _fit_postprocessed(data, settings, NPMLE_MEANSHIFT),
    NPMLE_SCMS: lambda data, settings: _fit_postprocessed(data, settings, NPMLE_SCMS),
}

# methods whose report carries a discrete estimate of the prior
DISCRETE_METHODS = (NPKMLE, GEM_METHOD, NPKMLE_UNIFORM, NPMLE_MEANSHIFT, NPMLE_SCMS)


def fit(data, method=NPKMLE, settings=None):
    settings = settings or Settings()
    if method not in METHODS:
        raise ArgumentError(f'unknown method "{method}"; choose from {", ".join(METHODS)}')
    data.require_sigma()
    return METHODS[method](data, settings)


def estimator_fitter(method, settings):
    ''' Dataset -> fitted prior, the handle cross-validation scores on held-out folds '''
    def fitter(data):
        report = fit(data, method, settings)
        if method in (NPMLE_MEANSHIFT, NPMLE_SCMS):
            return report.atoms
        return report.estimator
    return fitter
