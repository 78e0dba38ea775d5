import math

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from tabattr import attribution, metrics, nn, synth
from _fixtures import constant_logit_model


def test_spearman_monotone():
    assert metrics.spearman(np.array([1.0, 2, 3]), np.array([2.0, 4, 6])) == 1.0


def test_spearman_reversed():
    assert metrics.spearman(np.array([1.0, 2, 3]), np.array([3.0, 2, 1])) == -1.0


def test_spearman_tie_hand_case():
    # ranks a: (1, 2.5, 2.5, 4); ranks b: (1, 2, 3.5, 3.5) -> Pearson 5/6
    a = np.array([1.0, 2, 2, 3])
    b = np.array([1.0, 2, 3, 3])
    assert metrics.spearman(a, b) == pytest.approx(5 / 6, abs=1e-12)


def test_spearman_against_scipy_oracle(rng):
    for _ in range(25):
        a = np.round(rng.standard_normal(15), 1)  # rounding forces ties
        b = np.round(rng.standard_normal(15), 1)
        if np.all(a == a[0]) or np.all(b == b[0]):
            continue
        expected = scipy.stats.spearmanr(a, b).statistic
        assert metrics.spearman(a, b) == pytest.approx(expected, abs=1e-12)


def test_spearman_constant_is_nan():
    assert math.isnan(metrics.spearman(np.ones(4), np.array([1.0, 2, 3, 4])))


def test_spearman_self_and_negation(rng):
    a = rng.standard_normal(12)
    assert metrics.spearman(a, a) == pytest.approx(1.0, abs=1e-12)
    assert metrics.spearman(a, -a) == pytest.approx(-1.0, abs=1e-12)


@given(st.lists(st.integers(min_value=-100, max_value=100), min_size=3,
                max_size=15, unique=True))
@settings(max_examples=50, deadline=None)
def test_spearman_invariant_under_increasing_transform(vals):
    a = np.asarray(vals, dtype=np.float64) / 2.0
    b = np.sort(a)[::-1].copy()
    base = metrics.spearman(a, b)
    transformed = metrics.spearman(np.exp(a / 50) + a, b)  # strictly increasing
    assert transformed == pytest.approx(base, abs=1e-9)


def test_top_k_identical():
    v = np.array([0.4, 0.3, 0.2, 0.1])
    assert metrics.top_k_precision(v, v, 2) == 1.0


def test_top_k_disjoint():
    a = np.array([1.0, 1, 0, 0])
    b = np.array([0.0, 0, 1, 1])
    assert metrics.top_k_precision(a, b, 2) == 0.0


def test_top_k_hand_case():
    true = np.array([0.4, 0.3, 0.1, 0.1, 0.05, 0.05])
    pred = np.array([0.3, 0.05, 0.4, 0.1, 0.1, 0.05])
    assert metrics.top_k_precision(true, pred, 2) == 0.5


def test_top_k_symmetry(rng):
    for _ in range(20):
        a, b = rng.standard_normal(10), rng.standard_normal(10)
        for k in (1, 3, 5):
            assert (metrics.top_k_precision(a, b, k)
                    == metrics.top_k_precision(b, a, k))


def test_top_k_tie_break_by_index():
    a = np.array([0.5, 0.25, 0.25, 0.0])
    b = np.array([0.5, 0.0, 0.25, 0.25])
    # ties at 0.25 resolve to the lower index: T = {0, 1}, P = {0, 2}
    assert metrics.top_k_precision(a, b, 2) == 0.5


def test_top_k_validation():
    with pytest.raises(ValueError):
        metrics.top_k_precision(np.ones(3), np.ones(3), 4)


def test_noise_mass_cases():
    mask = np.array([True] * 5 + [False] * 15)
    concentrated = np.zeros(20)
    concentrated[:5] = 0.2
    assert metrics.noise_mass(concentrated, mask) == 0.0
    uniform = np.full(20, 1 / 20)
    assert metrics.noise_mass(uniform, mask) == pytest.approx(0.75, abs=1e-12)


def test_average_ranks_paths_agree(rng):
    from tabattr import _kernels
    if not _kernels.USING_NUMBA:
        pytest.skip("numba path disabled")
    X = np.round(rng.standard_normal((40, 12)), 1)
    assert np.array_equal(_kernels.average_ranks_numpy(X),
                          _kernels.average_ranks_numba(np.ascontiguousarray(X)))


def _perfect_attr(ds):
    return attribution.AttributionMatrix(
        values=ds.ground_truth.copy(), method="oracle", wall_time_seconds=0.1,
        sample_indices=np.arange(len(ds.X)), flags=np.zeros(len(ds.X), bool))


def test_evaluate_perfect_attribution(tiny_trained_model, tiny_linear_data):
    _, test_ds, _ = tiny_linear_data
    rep = metrics.evaluate_method(_perfect_attr(test_ds), test_ds,
                                  tiny_trained_model, k=5)
    assert rep.spearman_mean == pytest.approx(1.0, abs=1e-12)
    assert rep.topk_precision == 1.0
    assert rep.noise_mass == 0.0
    assert rep.n_evaluated + rep.n_excluded_misclassified \
        + rep.n_excluded_degenerate == len(test_ds.X)


def test_evaluate_requires_aligned_rows(tiny_trained_model, tiny_linear_data):
    _, test_ds, _ = tiny_linear_data
    attr = _perfect_attr(test_ds)
    attr.values = attr.values[:-1]
    with pytest.raises(ValueError):
        metrics.evaluate_method(attr, test_ds, tiny_trained_model, k=5)


def test_evaluate_requires_ground_truth(tiny_trained_model, tiny_linear_data):
    _, test_ds, _ = tiny_linear_data
    attr = _perfect_attr(test_ds)
    ds = synth.Dataset(**{**test_ds.__dict__, "ground_truth": None})
    with pytest.raises(ValueError):
        metrics.evaluate_method(attr, ds, tiny_trained_model, k=5)


def test_evaluate_all_misclassified(tiny_linear_data):
    _, test_ds, _ = tiny_linear_data
    # a constant model predicting a class absent from the test labels
    wrong = constant_logit_model(np.array([0.0, 0.0, 5.0]), d=20)
    ds = synth.Dataset(**{**test_ds.__dict__})
    ds.y = np.zeros(len(ds.X), dtype=np.intp)
    with pytest.raises(metrics.EmptyEvaluationError):
        metrics.evaluate_method(_perfect_attr(ds), ds, wrong, k=5)


def test_evaluate_counts_degenerate_rows(tiny_trained_model, tiny_linear_data):
    _, test_ds, _ = tiny_linear_data
    ds = synth.Dataset(**{**test_ds.__dict__})
    ds.ground_truth = ds.ground_truth.copy()
    labels, _ = nn.predict(tiny_trained_model, ds.X)
    correct = np.flatnonzero(labels == ds.y)
    ds.ground_truth[correct[0]] = 0.0  # degenerate ground truth
    attr = _perfect_attr(ds)
    attr.flags = attr.flags.copy()
    attr.flags[correct[1]] = True  # flagged attribution row
    rep = metrics.evaluate_method(attr, ds, tiny_trained_model, k=5)
    assert rep.n_excluded_degenerate == 2
    assert rep.n_evaluated == len(correct) - 2


def test_evaluate_constant_prediction_excluded_from_spearman_only(
        tiny_trained_model, tiny_linear_data):
    _, test_ds, _ = tiny_linear_data
    attr = _perfect_attr(test_ds)
    values = attr.values.copy()
    labels, _ = nn.predict(tiny_trained_model, test_ds.X)
    correct = np.flatnonzero(labels == test_ds.y)
    values[correct[0]] = 1.0 / values.shape[1]  # constant but unflagged
    attr.values = values
    rep = metrics.evaluate_method(attr, test_ds, tiny_trained_model, k=5)
    assert rep.n_excluded_constant_spearman == 1
    assert rep.n_evaluated == len(correct)  # still counted in topk / noise
    assert rep.noise_mass > 0  # the uniform row contributes noise mass
