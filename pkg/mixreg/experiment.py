''' Seeded replications of simulate -> fit -> evaluate, run on a thread pool '''
import time
import logging
import pandas as pd
from .cv import cv_sigma
from .errors import ArgumentError
from .metrics import ReplicationRecord, evaluate_replication, experiment_summary
from .pipeline import DISCRETE_METHODS, estimator_fitter, fit
from .sims import discretize_simulation2_truth, gen_simulation1, gen_simulation2
from .utils import derive_seed
from .workers import run_jobs


__all__ = ('run_experiment', 'run_replication', 'records_table', 'SIM1', 'SIM2')


SIM1 = 'sim1'
SIM2 = 'sim2'
MODELS = (SIM1, SIM2)

DEFAULT_SIGMA = {SIM1: 0.5, SIM2: 0.2}


def simulate(model, n, sigma, seed):
    ''' (data, true labels or None, truth as a discrete measure) for one replication '''
    if model == SIM1:
        data, labels, truth = gen_simulation1(n, sigma, seed=seed)
        return data, labels, truth
    if model == SIM2:
        data, _ = gen_simulation2(n, sigma, seed=seed)
        return data, None, discretize_simulation2_truth()
    raise ArgumentError(f'unknown model "{model}", expected one of {", ".join(MODELS)}')


def run_replication(index, model, n, method, settings, sigma=None, use_cv=False):
    seed = derive_seed(settings.seed, f'replication-{index}')
    started = time.perf_counter()
    data, labels, truth = simulate(model, n, DEFAULT_SIGMA[model] if sigma is None else sigma, seed)
    local = settings.updated(seed=seed)
    if use_cv:
        fitter = estimator_fitter(local.cv_method, local)
        sigma_hat, _ = cv_sigma(data, local.folds, local.sigma_grid, fitter, seed, policy=local.policy(data.d))
        data = data.with_sigma(sigma_hat)
    report = fit(data, method, local)
    record = evaluate_replication(index, seed, data, report.atoms, truth, labels, time.perf_counter() - started)
    logging.info(f'replication {index}: {record.n_components} components, W2={record.w2:.4f}')
    return record


def run_experiment(model, n, replications, method, settings, sigma=None, use_cv=False):
    ''' returns (records, summary); failed replications are kept as records carrying their error '''
    if replications < 1:
        raise ArgumentError(f'need at least one replication, got {replications}')
    if model not in MODELS:
        raise ArgumentError(f'unknown model "{model}", expected one of {", ".join(MODELS)}')
    if method not in DISCRETE_METHODS:
        raise ArgumentError(f'method "{method}" does not produce a discrete prior; use one of '
                            f'{", ".join(DISCRETE_METHODS)}')
    jobs = [(r, model, n, method, settings, sigma, use_cv) for r in range(replications)]
    results = run_jobs(run_replication, jobs, settings.threads)
    records = []
    for result in results:
        if result.ok:
            records.append(result.value)
        else:
            seed = derive_seed(settings.seed, f'replication-{result.index}')
            error = f'{type(result.error).__name__}: {result.error}'
            records.append(ReplicationRecord(result.index, seed, error=error))
    truth = gen_simulation1(1, seed=0).truth if model == SIM1 else None
    return records, experiment_summary(records, truth)


def records_table(records):
    rows = []
    for r in records:
        rows.append({
            'replication': r.replication,
            'seed': r.seed,
            'components': r.n_components,
            'true_components': r.true_components,
            'ari': r.ari,
            'ari_truth': r.ari_truth,
            'w2': r.w2,
            'sigma': r.sigma,
            'wall_time': r.wall_time,
            'error': r.error or '',
        })
    return pd.DataFrame(rows)
