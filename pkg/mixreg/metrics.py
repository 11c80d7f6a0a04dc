''' Evaluation of fitted priors: clustering agreement, Wasserstein-2 and replication summaries '''
import math
import logging
from dataclasses import dataclass
from typing import Optional
import numpy as np
import pandas as pd
import ot
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist
from sklearn.metrics import adjusted_rand_score
from .errors import ArgumentError
from .model import posterior_cluster_assign


__all__ = ('adjusted_rand_index', 'wasserstein2', 'match_components', 'ReplicationRecord', 'evaluate_replication',
           'experiment_summary', 'format_summary', 'Summary', 'mass_near_circles')


_MARGINAL_TOL = 1e-9
_OT_MAX_ITER = 1_000_000


def adjusted_rand_index(labels_a, labels_b):
    labels_a = np.asarray(labels_a).ravel()
    labels_b = np.asarray(labels_b).ravel()
    if labels_a.shape != labels_b.shape:
        raise ArgumentError(f'label vectors differ in length: {labels_a.size} vs {labels_b.size}')
    if labels_a.size < 2:
        raise ArgumentError('adjusted Rand index needs at least two labelled points')
    return float(adjusted_rand_score(labels_a, labels_b))


def wasserstein2(P, Q):
    ''' exact W2 between two discrete measures: sqrt of the optimal transport cost with squared distances '''
    if P.d != Q.d:
        raise ArgumentError(f'cannot compare a {P.d}-dimensional measure with a {Q.d}-dimensional one')
    a = np.ascontiguousarray(P.weights, dtype=np.float64)
    b = np.ascontiguousarray(Q.weights, dtype=np.float64)
    if abs(a.sum() - b.sum()) > _MARGINAL_TOL:
        raise ArgumentError(f'marginal masses differ: {a.sum()!r} vs {b.sum()!r}')
    cost = cdist(P.betas, Q.betas, 'sqeuclidean')
    value = float(ot.emd2(a, b, cost, numItermax=_OT_MAX_ITER))
    return math.sqrt(max(value, 0.0))


def match_components(truth, estimate):
    ''' index of the estimated atom matched to each true atom

    Each true atom takes its nearest estimate; when two true atoms claim the
    same estimate the whole matching is redone as an optimal assignment.
    '''
    dist = cdist(truth.betas, estimate.betas)
    nearest = np.argmin(dist, axis=1)
    if np.unique(nearest).size == nearest.size:
        return nearest
    rows, cols = linear_sum_assignment(dist)
    matched = np.full(truth.K, -1, dtype=int)
    matched[rows] = cols
    return matched


@dataclass
class ReplicationRecord:
    replication: int
    seed: int
    n_components: Optional[int] = None
    true_components: Optional[int] = None
    ari: Optional[float] = None
    ari_truth: Optional[float] = None
    w2: Optional[float] = None
    beta_bias: Optional[np.ndarray] = None  # (K, d), only when the component count is right
    weight_bias: Optional[np.ndarray] = None
    sigma: Optional[float] = None
    wall_time: float = 0.0
    error: Optional[str] = None

    @property
    def failed(self):
        return self.error is not None

    @property
    def found_true_count(self):
        return self.n_components is not None and self.n_components == self.true_components


def evaluate_replication(replication, seed, data, estimate, truth, true_labels=None, wall_time=0.0):
    ''' score one fitted prior against the truth it was simulated from '''
    record = ReplicationRecord(replication, seed, n_components=estimate.K, true_components=truth.K,
                               w2=wasserstein2(truth, estimate), sigma=data.sigma, wall_time=wall_time)
    if true_labels is not None:
        record.ari = adjusted_rand_index(true_labels, posterior_cluster_assign(estimate, data))
        record.ari_truth = adjusted_rand_index(true_labels, posterior_cluster_assign(truth, data))
    if record.found_true_count:
        match = match_components(truth, estimate)
        record.beta_bias = estimate.betas[match] - truth.betas
        record.weight_bias = estimate.weights[match] - truth.weights
    return record


@dataclass
class Summary:
    overview: pd.DataFrame
    bias: pd.DataFrame


def _mean_sd(values):
    values = np.asarray([v for v in values if v is not None], dtype=float)
    if values.size == 0:
        return math.nan, math.nan
    sd = float(np.std(values, ddof=1)) if values.size > 1 else math.nan
    return float(np.mean(values)), sd


def experiment_summary(records, truth=None):
    ''' mean and SD over successful replications, plus per-component bias for runs with the right count '''
    if not records:
        raise ArgumentError('experiment summary needs at least one replication record')
    ok = [r for r in records if not r.failed]
    failed = len(records) - len(ok)
    if failed:
        logging.warning(f'{failed} of {len(records)} replications failed and are excluded from the summary')
    row = {'runs': len(records), 'failed': failed}
    for name in ('ari', 'ari_truth', 'w2', 'wall_time'):
        row[f'avg_{name}'], row[f'sd_{name}'] = _mean_sd(getattr(r, name) for r in ok)
    row['prop_true_k'] = float(np.mean([r.found_true_count for r in ok])) if ok else math.nan
    overview = pd.DataFrame([row])

    rows = []
    hits = [r for r in ok if r.found_true_count and r.beta_bias is not None]
    if hits:
        beta_bias = np.stack([r.beta_bias for r in hits])
        weight_bias = np.stack([r.weight_bias for r in hits])
        K, d = beta_bias.shape[1:]
        for j in range(K):
            for k in range(d):
                mean, sd = _mean_sd(beta_bias[:, j, k])
                rows.append({'component': j, 'parameter': f'beta_{k}', 'bias': mean, 'sd': sd,
                             'true_value': truth.betas[j, k] if truth is not None else math.nan})
            mean, sd = _mean_sd(weight_bias[:, j])
            rows.append({'component': j, 'parameter': 'pi', 'bias': mean, 'sd': sd,
                         'true_value': truth.weights[j] if truth is not None else math.nan})
    bias = pd.DataFrame(rows, columns=['component', 'parameter', 'true_value', 'bias', 'sd'])
    return Summary(overview, bias)


def _cell(mean, sd):
    if math.isnan(mean):
        return '-'
    if math.isnan(sd):
        return f'{mean:.3f}'
    return f'{mean:.3f} ({sd:.3f})'


def format_summary(summary):
    ''' aligned plain-text rendering with SDs in parentheses '''
    row = summary.overview.iloc[0]
    table = pd.DataFrame([{
        'runs': int(row['runs']),
        'failed': int(row['failed']),
        'Avg Adj RI': _cell(row['avg_ari'], row['sd_ari']),
        'Avg Adj RI G*': _cell(row['avg_ari_truth'], row['sd_ari_truth']),
        'Prop true K': _cell(row['prop_true_k'], math.nan),
        'Avg W2': _cell(row['avg_w2'], row['sd_w2']),
        'Avg time (s)': _cell(row['avg_wall_time'], row['sd_wall_time']),
    }])
    text = table.to_string(index=False)
    if not summary.bias.empty:
        bias = summary.bias.assign(bias=[_cell(m, s) for m, s in zip(summary.bias['bias'], summary.bias['sd'])])
        text += '\n\n' + bias.drop(columns=['sd']).to_string(index=False)
    return text


def mass_near_circles(measure, radii=(1.0, 2.0), tol=0.25):
    ''' share of atom mass within `tol` of a centered circle of one of the radii '''
    norms = np.linalg.norm(measure.betas, axis=1)
    near = np.min(np.abs(norms[:, None] - np.asarray(radii)[None, :]), axis=1) <= tol
    return float(measure.weights[near].sum())
