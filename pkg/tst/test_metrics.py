import math
from itertools import combinations
from types import SimpleNamespace
import numpy as np
import pytest
from mixreg.errors import ArgumentError
from mixreg.metrics import (ReplicationRecord, adjusted_rand_index, evaluate_replication, experiment_summary,
                            format_summary, mass_near_circles, match_components, wasserstein2)
from mixreg.model import DiscreteMeasure
from mixreg.sims import gen_simulation1


def _pair_count_ari(a, b):
    n = len(a)
    both = same_a = same_b = 0
    for i, j in combinations(range(n), 2):
        in_a = a[i] == a[j]
        in_b = b[i] == b[j]
        both += in_a and in_b
        same_a += in_a
        same_b += in_b
    pairs = n * (n - 1) / 2
    expected = same_a * same_b / pairs
    best = (same_a + same_b) / 2
    if best == expected:
        return 1.0
    return (both - expected) / (best - expected)


def test_ari_values():
    assert adjusted_rand_index([0, 0, 1, 1], [0, 0, 1, 1]) == 1.0
    assert adjusted_rand_index([0, 0, 1, 1], [5, 5, 2, 2]) == 1.0
    assert adjusted_rand_index([0, 0, 1, 1], [0, 1, 0, 1]) == pytest.approx(-0.5)
    with pytest.raises(ArgumentError):
        adjusted_rand_index([0, 1], [0, 1, 1])


def test_ari_pair_counting():
    rng = np.random.default_rng(0)
    for _ in range(100):
        a = rng.integers(0, 3, 12)
        b = rng.integers(0, 4, 12)
        value = adjusted_rand_index(a, b)
        assert value == pytest.approx(_pair_count_ari(a, b), abs=1e-12)
        assert value == pytest.approx(adjusted_rand_index(b, a), abs=1e-12)
        assert value <= 1.0


def _measure(rng, k, d=2):
    weights = rng.uniform(0.1, 1.0, k)
    return DiscreteMeasure(rng.normal(size=(k, d)), weights / weights.sum())


def test_w2_simple_cases():
    rng = np.random.default_rng(1)
    P = _measure(rng, 4)
    assert wasserstein2(P, P) == pytest.approx(0.0, abs=1e-12)
    a = DiscreteMeasure.dirac([0.0, 0.0])
    b = DiscreteMeasure.dirac([3.0, 4.0])
    assert wasserstein2(a, b) == pytest.approx(5.0, rel=1e-12)
    with pytest.raises(ArgumentError):
        wasserstein2(a, DiscreteMeasure.dirac([0.0]))
    uneven = SimpleNamespace(betas=np.zeros((2, 2)), weights=np.array([0.5, 0.4]), d=2)
    with pytest.raises(ArgumentError):
        wasserstein2(a, uneven)


def test_w2_two_by_two_brute_force():
    rng = np.random.default_rng(2)
    for _ in range(10):
        P = DiscreteMeasure(rng.normal(size=(2, 2)), [0.5, 0.5])
        Q = DiscreteMeasure(rng.normal(size=(2, 2)), [0.5, 0.5])
        cost = np.sum((P.betas[:, None] - Q.betas[None, :]) ** 2, axis=2)
        t = np.linspace(0, 0.5, 500001)
        total = t * (cost[0, 0] + cost[1, 1]) + (0.5 - t) * (cost[0, 1] + cost[1, 0])
        assert wasserstein2(P, Q) == pytest.approx(math.sqrt(total.min()), abs=1e-6)


def _vertex_enumeration(a, b, cost):
    m, n = cost.shape
    rows = []
    for i in range(m):
        row = np.zeros((m, n))
        row[i, :] = 1
        rows.append(row.ravel())
    for j in range(n):
        row = np.zeros((m, n))
        row[:, j] = 1
        rows.append(row.ravel())
    A = np.array(rows)
    rhs = np.concatenate([a, b])
    best = math.inf
    for basis in combinations(range(m * n), m + n - 1):
        sub = A[:, basis]
        if np.linalg.matrix_rank(sub) < m + n - 1:
            continue
        x, *_ = np.linalg.lstsq(sub, rhs, rcond=None)
        if np.max(np.abs(sub @ x - rhs)) > 1e-12 or np.min(x) < -1e-12:
            continue
        best = min(best, float(cost.ravel()[list(basis)] @ x))
    return best


def test_w2_three_by_three_vertices():
    rng = np.random.default_rng(3)
    for a, b in (([0.2, 0.3, 0.5], [0.4, 0.4, 0.2]), ([1 / 3, 1 / 3, 1 / 3], [0.5, 0.25, 0.25])):
        P = DiscreteMeasure(rng.normal(size=(3, 2)), np.array(a) / np.sum(a))
        Q = DiscreteMeasure(rng.normal(size=(3, 2)), np.array(b) / np.sum(b))
        cost = np.sum((P.betas[:, None] - Q.betas[None, :]) ** 2, axis=2)
        expected = math.sqrt(_vertex_enumeration(P.weights, Q.weights, cost))
        assert wasserstein2(P, Q) == pytest.approx(expected, abs=1e-9)


def test_w2_metric_properties():
    rng = np.random.default_rng(4)
    angle = 0.7
    rotation = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
    for _ in range(20):
        P, Q, R = _measure(rng, 3), _measure(rng, 4), _measure(rng, 5)
        pq = wasserstein2(P, Q)
        assert pq == pytest.approx(wasserstein2(Q, P), abs=1e-9)
        assert pq <= wasserstein2(P, R) + wasserstein2(R, Q) + 1e-9
        turned_p = DiscreteMeasure(P.betas @ rotation.T, P.weights)
        turned_q = DiscreteMeasure(Q.betas @ rotation.T, Q.weights)
        assert wasserstein2(turned_p, turned_q) == pytest.approx(pq, abs=1e-9)


def test_match_components():
    truth = DiscreteMeasure([[0.0, 0.0], [1.0, 0.0], [5.0, 5.0]], [0.3, 0.3, 0.4])
    estimate = DiscreteMeasure([[5.1, 5.0], [0.1, 0.0], [1.1, 0.0]], [0.4, 0.3, 0.3])
    assert match_components(truth, estimate).tolist() == [1, 2, 0]
    crowded = DiscreteMeasure([[0.5, 0.0], [-2.0, 0.0], [5.0, 5.0]], [0.3, 0.3, 0.4])
    assert match_components(truth, crowded).tolist() == [1, 0, 2]


def test_evaluate_replication_at_truth():
    data, labels, truth = gen_simulation1(300, seed=3)
    record = evaluate_replication(0, 3, data, truth, truth, labels, wall_time=1.5)
    assert record.w2 == pytest.approx(0.0, abs=1e-9)
    assert record.found_true_count
    assert np.allclose(record.beta_bias, 0.0)
    assert np.allclose(record.weight_bias, 0.0)
    assert record.ari == record.ari_truth

    wrong = DiscreteMeasure.dirac([1.0, 0.5])
    record = evaluate_replication(1, 3, data, wrong, truth, labels)
    assert not record.found_true_count
    assert record.beta_bias is None
    assert record.ari == pytest.approx(0.0, abs=1e-12)


def _record(r, ari, w2, k=3):
    return ReplicationRecord(r, r, n_components=k, true_components=3, ari=ari, ari_truth=0.8, w2=w2,
                             beta_bias=np.full((3, 2), 0.1 * r) if k == 3 else None,
                             weight_bias=np.zeros(3) if k == 3 else None, wall_time=2.0)


def test_experiment_summary():
    records = [_record(0, 0.5, 0.2), _record(1, 0.6, 0.3), _record(2, 0.7, 0.4, k=2),
               ReplicationRecord(3, 3, error='IntegrationError: boom')]
    truth = gen_simulation1(1).truth
    summary = experiment_summary(records, truth)
    row = summary.overview.iloc[0]
    assert row['runs'] == 4 and row['failed'] == 1
    assert row['avg_ari'] == pytest.approx(0.6)
    assert row['sd_ari'] == pytest.approx(0.1)
    assert row['prop_true_k'] == pytest.approx(2 / 3)
    assert row['avg_w2'] == pytest.approx(0.3)
    bias = summary.bias
    assert len(bias) == 9
    first = bias[(bias['component'] == 0) & (bias['parameter'] == 'beta_0')].iloc[0]
    assert first['bias'] == pytest.approx(0.05)
    assert first['true_value'] == 3.0
    text = format_summary(summary)
    assert '0.600 (0.100)' in text
    assert 'Avg W2' in text


def test_single_run_summary():
    summary = experiment_summary([_record(0, 0.5, 0.2)])
    row = summary.overview.iloc[0]
    assert math.isnan(row['sd_ari'])
    text = format_summary(summary)
    assert '0.500' in text and '0.500 (' not in text
    with pytest.raises(ArgumentError):
        experiment_summary([])


def test_mass_near_circles():
    measure = DiscreteMeasure([[1.0, 0.0], [0.0, 2.1], [3.0, 3.0]], [0.25, 0.25, 0.5])
    assert mass_near_circles(measure) == pytest.approx(0.5)
    assert mass_near_circles(measure, tol=0.05) == pytest.approx(0.25)

