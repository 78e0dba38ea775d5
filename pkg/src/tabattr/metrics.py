"""Fidelity metrics against ground-truth attribution.

Three per-sample scores, averaged over the evaluable subset of a test
split: Spearman rank correlation, top-k precision over the k most
important features, and the attribution mass landing on known-noise
features. Evaluation is restricted to correctly classified samples;
degenerate rows (zero ground truth or flagged attributions) are
excluded and counted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np

from . import _kernels
from .attribution import AttributionMatrix
from .nn import MlpModel, predict
from .synth import Dataset


class EmptyEvaluationError(ValueError):
    """No sample survived the evaluation filters."""


@dataclass
class MetricsReport:
    method: str
    dataset: str
    seed: int
    spearman_mean: float
    spearman_std_across_samples: float
    topk_precision: float
    noise_mass: float
    n_evaluated: int
    n_excluded_misclassified: int
    n_excluded_degenerate: int
    n_excluded_constant_spearman: int
    wall_time_seconds: float

    def to_dict(self) -> dict:
        return asdict(self)


def average_ranks(v: np.ndarray) -> np.ndarray:
    """1-based ranks with ties averaged."""
    return _kernels.average_ranks(
        np.ascontiguousarray(np.atleast_2d(v), dtype=np.float64))[0]


def spearman(a: np.ndarray, b: np.ndarray) -> float:
    """Spearman rank correlation with average-tie ranks.

    Returns NaN when either vector is constant (undefined correlation);
    callers exclude and count such samples.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise ValueError("spearman expects two equal-length vectors of size >= 2")
    ra, rb = average_ranks(a), average_ranks(b)
    sa, sb = ra.std(), rb.std()
    if sa == 0.0 or sb == 0.0:
        return math.nan
    ra -= ra.mean()
    rb -= rb.mean()
    rho = float((ra @ rb) / (len(a) * sa * sb))
    return min(1.0, max(-1.0, rho))


def _top_k_set(v: np.ndarray, k: int) -> np.ndarray:
    # Stable sort on -v keeps ascending feature index among ties.
    return np.argsort(-v, kind="stable")[:k]


def top_k_precision(true_attr: np.ndarray, pred_attr: np.ndarray, k: int) -> float:
    """|top-k(true) intersect top-k(pred)| / k, ties broken by feature index."""
    true_attr = np.asarray(true_attr, dtype=np.float64)
    pred_attr = np.asarray(pred_attr, dtype=np.float64)
    if not 1 <= k <= true_attr.size:
        raise ValueError(f"k must lie in [1, {true_attr.size}]")
    t = set(_top_k_set(true_attr, k).tolist())
    p = set(_top_k_set(pred_attr, k).tolist())
    return len(t & p) / k


def noise_mass(pred_attr: np.ndarray, informative_mask: np.ndarray) -> float:
    """Fraction of attribution assigned to non-informative features."""
    pred_attr = np.asarray(pred_attr, dtype=np.float64)
    mask = np.asarray(informative_mask, dtype=bool)
    return float(pred_attr[~mask].sum())


def evaluate_method(attr: AttributionMatrix, dataset: Dataset, model: MlpModel,
                    k: int) -> MetricsReport:
    """Score an attribution matrix against the dataset's ground truth.

    Samples are filtered to those the model classifies correctly; among
    them, rows with a degenerate ground truth (all-zero) or a flagged
    attribution are excluded and counted. Constant predicted rows are
    excluded from the Spearman average only.
    """
    if dataset.ground_truth is None:
        raise ValueError("dataset has no ground-truth attributions")
    n = len(dataset.X)
    if attr.values.shape[0] != n:
        raise ValueError("attribution rows do not align with the dataset")

    labels, _ = predict(model, dataset.X)
    correct = labels == dataset.y
    n_mis = int(np.sum(~correct))

    gt_zero = dataset.ground_truth.sum(axis=1) < 0.5
    degenerate = correct & (gt_zero | attr.flags)
    n_degen = int(np.sum(degenerate))

    keep = np.flatnonzero(correct & ~degenerate)
    if keep.size == 0:
        raise EmptyEvaluationError("no correctly classified, non-degenerate samples")

    rhos, topks, noises = [], [], []
    n_const = 0
    for i in keep:
        gt_row = dataset.ground_truth[i]
        pred_row = attr.values[i]
        rho = spearman(gt_row, pred_row)
        if math.isnan(rho):
            n_const += 1
        else:
            rhos.append(rho)
        topks.append(top_k_precision(gt_row, pred_row, k))
        noises.append(noise_mass(pred_row, dataset.informative_mask))

    return MetricsReport(
        method=attr.method,
        dataset=dataset.name,
        seed=dataset.seed if dataset.seed is not None else -1,
        spearman_mean=float(np.mean(rhos)) if rhos else math.nan,
        spearman_std_across_samples=float(np.std(rhos)) if rhos else math.nan,
        topk_precision=float(np.mean(topks)),
        noise_mass=float(np.mean(noises)),
        n_evaluated=int(keep.size),
        n_excluded_misclassified=n_mis,
        n_excluded_degenerate=n_degen,
        n_excluded_constant_spearman=n_const,
        wall_time_seconds=attr.wall_time_seconds,
    )
