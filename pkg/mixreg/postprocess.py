''' Mode and ridge seeking on samples drawn from an estimated density.

mean_shift moves every start point uphill on the sample KDE until it stops;
scms does the same with each step projected onto the eigenvectors of the
KDE Hessian that carry the smallest eigenvalues, which leaves points on a
ridge of dimension `ridge_dim` instead of at isolated modes.
'''
import logging
import numpy as np
from scipy.special import logsumexp
from .errors import ArgumentError, IntegrationError
from .kernels import gaussian_profile, oversmooth_bandwidth, scale_estimate_U
from .model import DiscreteMeasure, _sq_dist
from .em.npkmle import merge_close_points
from .utils import as_matrix, iter_chunks


__all__ = ('kde_eval_grad_hess', 'mean_shift', 'scms', 'modes_to_measure', 'ridge_to_measure', 'bandwidth_for_sample')


STOP_TOL = 1e-6
MAX_ITER = 10_000
MODE_MERGE_FACTOR = 0.1

_QUERY_CHUNK = 64


def kde_eval_grad_hess(points, h, profile=None, query=None):
    ''' density, gradient and Hessian of (1/(n h^d)) sum_j v(|x - p_j|^2 / h^2) at one query point '''
    points = as_matrix(points, 'sample')
    n, d = points.shape
    profile = profile or gaussian_profile(d)
    if not h > 0:
        raise ArgumentError(f'bandwidth must be positive, got {h}')
    x = np.asarray(query, dtype=float).ravel()
    if x.shape[0] != d:
        raise ArgumentError(f'{x.shape[0]}-dimensional query for a {d}-dimensional sample')
    diff = points - x
    t = np.sum(diff ** 2, axis=1) / h ** 2
    scale = 1.0 / (n * h ** d)
    density = scale * float(np.sum(profile.v(t)))
    w = profile.w(t)
    gradient = (2.0 * scale / h ** 2) * (w @ diff)
    outer = np.einsum('j,jk,jl->kl', -2.0 * profile.dw(t) / h ** 2, diff, diff)
    hessian = (2.0 * scale / h ** 2) * (outer - np.sum(w) * np.eye(d))
    return density, gradient, hessian


def _shift_targets(points, queries, h, profile):
    ''' weighted means sum_j w_h p_j / sum_j w_h, computed with log weights '''
    log_w = profile.log_w(_sq_dist(queries, points) / h ** 2)
    weights = np.exp(log_w - logsumexp(log_w, axis=1)[:, None])
    return weights @ points


def _scaled_hessians(points, queries, h, profile):
    ''' Hessians of the KDE up to a positive factor per query '''
    diff = points[None, :, :] - queries[:, None, :]
    t = np.sum(diff ** 2, axis=2) / h ** 2
    log_w = profile.log_w(t)
    weights = np.exp(log_w - np.max(log_w, axis=1)[:, None])
    coef = -2.0 * profile.dlog_w(t) * weights / h ** 2
    outer = np.einsum('mj,mjk,mjl->mkl', coef, diff, diff)
    return outer - np.sum(weights, axis=1)[:, None, None] * np.eye(points.shape[1])


def _check_inputs(points, h, profile, start_points):
    points = as_matrix(points, 'sample')
    if not h > 0:
        raise ArgumentError(f'bandwidth must be positive, got {h}')
    profile = profile or gaussian_profile(points.shape[1])
    starts = points.copy() if start_points is None else as_matrix(start_points, 'start points').copy()
    if starts.shape[1] != points.shape[1]:
        raise ArgumentError(f'{starts.shape[1]}-dimensional start points for a {points.shape[1]}-dimensional sample')
    return points, profile, starts


def mean_shift(points, h, profile=None, start_points=None, tol=STOP_TOL, max_iter=MAX_ITER,
               merge_factor=MODE_MERGE_FACTOR):
    ''' follow the mean shift map from every start point (default: the sample itself)

    Returns (modes, labels).  Limits within merge_factor * h are merged, the
    merged modes are sorted lexicographically, and labels index into them;
    start points that do not settle within max_iter get label -1.
    '''
    points, profile, current = _check_inputs(points, h, profile, start_points)
    active = np.arange(current.shape[0])
    done = np.zeros(current.shape[0], dtype=bool)
    for _ in range(max_iter):
        if active.size == 0:
            break
        for rows in iter_chunks(active.size, _QUERY_CHUNK):
            idx = active[rows]
            target = _shift_targets(points, current[idx], h, profile)
            move = np.linalg.norm(target - current[idx], axis=1)
            current[idx] = target
            done[idx[move < tol]] = True
        active = np.flatnonzero(~done)
    logging.debug(f'mean shift: {done.sum()} of {done.size} start points converged')
    labels = np.full(current.shape[0], -1, dtype=int)
    if not done.all():
        logging.warning(f'{np.sum(~done)} mean shift trajectories did not converge within {max_iter} iterations')
    if not done.any():
        return np.empty((0, points.shape[1])), labels
    centers, _, groups = merge_close_points(current[done], merge_factor * h)
    order = np.lexsort(centers.T[::-1])
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    labels[done] = rank[groups]
    return centers[order], labels


def scms(points, h, profile=None, ridge_dim=1, start_points=None, tol=STOP_TOL, max_iter=MAX_ITER):
    ''' subspace constrained mean shift; returns the start points that settled on the ridge '''
    points, profile, current = _check_inputs(points, h, profile, start_points)
    d = points.shape[1]
    if not 0 <= ridge_dim < d:
        raise ArgumentError(f'ridge dimension must lie in [0, {d}), got {ridge_dim}')
    keep = d - ridge_dim
    active = np.arange(current.shape[0])
    done = np.zeros(current.shape[0], dtype=bool)
    for _ in range(max_iter):
        if active.size == 0:
            break
        for rows in iter_chunks(active.size, _QUERY_CHUNK):
            idx = active[rows]
            x = current[idx]
            hess = _scaled_hessians(points, x, h, profile)
            bad = np.flatnonzero(~np.all(np.isfinite(hess), axis=(1, 2)))
            if bad.size:
                where = x[bad[0]].tolist()
                raise IntegrationError(f'non-finite KDE Hessian at {where}', int(idx[bad[0]]))
            _, vecs = np.linalg.eigh(hess)
            basis = vecs[:, :, :keep]
            shift = _shift_targets(points, x, h, profile) - x
            step = np.einsum('mik,mk->mi', basis, np.einsum('mik,mi->mk', basis, shift))
            current[idx] = x + step
            done[idx[np.linalg.norm(step, axis=1) < tol]] = True
        active = np.flatnonzero(~done)
    if not done.all():
        logging.warning(f'dropping {np.sum(~done)} SCMS trajectories that did not converge within {max_iter} steps')
    logging.debug(f'scms (ridge dimension {ridge_dim}): {done.sum()} points on the ridge')
    return current[done]


def modes_to_measure(modes, labels):
    ''' atoms at the modes, weighted by the share of converged start points each one attracted '''
    labels = np.asarray(labels)
    counts = np.bincount(labels[labels >= 0], minlength=len(modes))
    return DiscreteMeasure.from_atoms(modes, counts)


def ridge_to_measure(ridge_points):
    return DiscreteMeasure.from_atoms(ridge_points)


def bandwidth_for_sample(sample, multiplier=1.0):
    ''' oversmoothing bandwidth of a sample, the default for mean shift and SCMS '''
    sample = as_matrix(sample, 'sample')
    n, d = sample.shape
    return oversmooth_bandwidth(n, d, scale_estimate_U(sample), gaussian_profile(d), multiplier)
