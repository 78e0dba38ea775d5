"""Per-sample feature attribution methods.

Five methods, all producing a non-negative vector over features that
sums to one:

* ``agop_ixg``             - gradient filtered through the truncated
                             average-gradient-outer-product subspace,
                             then baseline-shifted input-times-gradient
* ``input_x_gradient``     - e_j = x_j * d(score)/dx_j
* ``integrated_gradients`` - right-endpoint Riemann path integral from
                             the baseline, class pinned at the input
* ``sampled_shapley``      - permutation Monte-Carlo Shapley values with
                             background replacement
* ``lime``                 - weighted ridge surrogate fit on Gaussian
                             perturbations around the input

Every method explains the maximum logit (predicted-class score) of the
model at the explained input.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import linalg
from .nn import MlpModel, forward, input_gradient
from .rng import stream

NORMALIZATION_EPS = 1e-8
ZERO_ATTRIBUTION_EPS = 1e-12

METHOD_LABELS = {
    "agop_ixg": "AGOP-IxG",
    "input_x_gradient": "InputXGrad",
    "integrated_gradients": "IntGrad",
    "sampled_shapley": "Shapley (sampled)",
    "lime": "LIME",
}
METHODS = tuple(METHOD_LABELS)


class SurrogateFitError(RuntimeError):
    """The local surrogate regression could not be fit."""


@dataclass
class AgopFilter:
    """Rank-truncated factor of the average gradient outer-product.

    ``factor`` is d x K with factor @ factor.T equal to the rank-K
    reconstruction of the gradient second-moment matrix; ``baseline``
    is the per-feature training mean used for input shifting.
    """

    factor: np.ndarray
    eigenvalues_retained: np.ndarray
    rank: int
    rel_threshold: float
    baseline: np.ndarray
    fit_sample_count: int


@dataclass
class AttributionMatrix:
    """Normalised per-sample attributions, one row per explained sample.

    ``flags[i]`` marks rows where the raw attribution was numerically
    zero (a uniform placeholder row is stored); flagged rows are
    excluded from metric averages.
    """

    values: np.ndarray
    method: str
    wall_time_seconds: float
    sample_indices: np.ndarray
    flags: np.ndarray


def normalize_attribution(raw: np.ndarray) -> np.ndarray:
    """r_j = |raw_j| / (sum_k |raw_k| + 1e-8)."""
    raw = np.asarray(raw, dtype=np.float64)
    if not np.all(np.isfinite(raw)):
        raise ValueError("attribution input contains non-finite values")
    a = np.abs(raw)
    return a / (a.sum() + NORMALIZATION_EPS)


def _finalize_rows(raw: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Normalise each row; rows with ~zero mass become uniform and flagged."""
    raw = np.atleast_2d(raw)
    a = np.abs(raw)
    sums = a.sum(axis=1)
    flags = sums < ZERO_ATTRIBUTION_EPS
    out = np.empty_like(a)
    out[flags] = 1.0 / raw.shape[1]
    ok = ~flags
    out[ok] = a[ok] / (sums[ok, None] + NORMALIZATION_EPS)
    return out, flags


def fit_agop(model: MlpModel, train_X: np.ndarray,
             rel_threshold: float = 0.01) -> AgopFilter:
    """Stage 1: average the outer products of per-sample max-logit
    gradients over the training set, eigendecompose, and keep the
    eigenpairs above ``rel_threshold`` of the leading eigenvalue.
    """
    train_X = np.asarray(train_X, dtype=np.float64)
    grads = input_gradient(model, train_X)
    second_moment = grads.T @ grads / len(grads)
    second_moment = (second_moment + second_moment.T) / 2.0
    eig = linalg.symmetric_eig(second_moment)
    try:
        factor, rank = linalg.truncate_rank(eig, rel_threshold)
    except linalg.DegenerateSpectrumError as exc:
        raise linalg.DegenerateSpectrumError(
            "gradient field is identically zero on the fit data") from exc
    return AgopFilter(
        factor=factor,
        eigenvalues_retained=eig.eigenvalues[:rank].copy(),
        rank=rank,
        rel_threshold=rel_threshold,
        baseline=train_X.mean(axis=0),
        fit_sample_count=len(train_X),
    )


def _agop_raw(filt: AgopFilter, model: MlpModel, X: np.ndarray) -> np.ndarray:
    grads = input_gradient(model, X)
    filtered = (grads @ filt.factor) @ filt.factor.T
    return (X - filt.baseline) * filtered


def agop_ixg(filt: AgopFilter, model: MlpModel, x: np.ndarray) -> np.ndarray:
    """Stage 2 for one sample: filter the gradient through the retained
    subspace, weight by (x - baseline), and normalise."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != filt.baseline.shape:
        raise ValueError("sample dimension does not match the fitted filter")
    return _finalize_rows(_agop_raw(filt, model, x[None, :]))[0][0]


def _ixg_raw(model: MlpModel, X: np.ndarray) -> np.ndarray:
    return X * input_gradient(model, X)


def input_x_gradient(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """e_j = x_j * d(max logit)/dx_j, normalised. No baseline shift."""
    x = np.asarray(x, dtype=np.float64)
    return _finalize_rows(_ixg_raw(model, x[None, :]))[0][0]


def _ig_signed(model: MlpModel, X: np.ndarray, baseline: np.ndarray,
               steps: int) -> np.ndarray:
    if steps < 1:
        raise ValueError("steps must be >= 1")
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    baseline = np.asarray(baseline, dtype=np.float64)
    classes = np.argmax(forward(model, X), axis=1)
    diff = X - baseline
    total = np.zeros_like(X)
    for t in range(1, steps + 1):
        total += input_gradient(model, baseline + (t / steps) * diff, classes=classes)
    return diff * total / steps


def integrated_gradients(model: MlpModel, x: np.ndarray, baseline: np.ndarray,
                         steps: int = 50) -> tuple[np.ndarray, np.ndarray]:
    """Path-integrated gradients from ``baseline`` to ``x``.

    The integral is approximated with ``steps`` right-endpoint Riemann
    points t/steps, t = 1..steps, and the target class is pinned to the
    prediction at ``x`` along the whole path. Returns (normalised
    attribution, signed values); the signed values satisfy completeness
    as steps grows.
    """
    signed = _ig_signed(model, x, baseline, steps)[0]
    return _finalize_rows(signed)[0][0], signed


def _shapley_raw(model: MlpModel, x: np.ndarray, background: np.ndarray,
                 n_permutations: int, rng: np.random.Generator,
                 bg_per_perm: int = 10) -> tuple[np.ndarray, np.ndarray]:
    """Permutation-sampling Shapley estimate of per-feature contributions
    to the predicted-class logit against a background distribution.

    For each sampled feature ordering, the coalition value is the mean
    predicted-class logit over ``bg_per_perm`` background rows with the
    absent features replaced by the background row's values. Walking the
    ordering yields one marginal contribution per feature per
    permutation. Returns (estimate, standard error over permutations).
    """
    x = np.asarray(x, dtype=np.float64)
    background = np.atleast_2d(np.asarray(background, dtype=np.float64))
    d = x.shape[0]
    n_bg = len(background)
    m = min(bg_per_perm, n_bg)
    c = int(np.argmax(forward(model, x[None, :])[0]))

    perms = np.empty((n_permutations, d), dtype=np.intp)
    composites = np.empty((n_permutations, d + 1, m, d))
    for p in range(n_permutations):
        perms[p] = rng.permutation(d)
        chosen = background[rng.choice(n_bg, size=m, replace=False)]
        row = chosen.copy()
        composites[p, 0] = row
        for t in range(d):
            row = row.copy()
            row[:, perms[p, t]] = x[perms[p, t]]
            composites[p, t + 1] = row

    logits = forward(model, composites.reshape(-1, d))[:, c]
    values = logits.reshape(n_permutations, d + 1, m).mean(axis=2)
    marginals = np.diff(values, axis=1)  # (n_permutations, d) in walk order
    per_perm = np.empty_like(marginals)
    rows = np.arange(n_permutations)[:, None]
    per_perm[rows, perms] = marginals
    phi = per_perm.mean(axis=0)
    se = per_perm.std(axis=0, ddof=1) / np.sqrt(n_permutations) \
        if n_permutations > 1 else np.full(d, np.inf)
    return phi, se


def sampled_shapley(model: MlpModel, x: np.ndarray, background: np.ndarray,
                    n_permutations: int = 20, seed: int = 0,
                    bg_per_perm: int = 10) -> np.ndarray:
    """Normalised absolute Shapley estimates for one sample."""
    if n_permutations < 1:
        raise ValueError("n_permutations must be >= 1")
    if len(np.atleast_2d(background)) == 0:
        raise ValueError("background must be non-empty")
    rng = stream(seed, "shapley")
    phi, _ = _shapley_raw(model, x, background, n_permutations, rng, bg_per_perm)
    return _finalize_rows(phi)[0][0]


def _lime_raw(model: MlpModel, x: np.ndarray, n_samples: int,
              rng: np.random.Generator, kernel_width: float | None,
              ridge_reg: float) -> np.ndarray:
    """Weighted ridge surrogate around ``x``.

    Perturbations are N(x, I) in the standardised feature space; sample
    weights are exp(-||z - x||^2 / w^2) with w = 0.75 sqrt(d) unless
    overridden. The ridge intercept is unpenalised (fitting is done on
    weighted-centred data). Returns the surrogate coefficients.
    """
    x = np.asarray(x, dtype=np.float64)
    d = x.shape[0]
    if n_samples < d + 2:
        raise ValueError(f"n_samples must be >= d + 2 = {d + 2}")
    if kernel_width is None:
        kernel_width = 0.75 * np.sqrt(d)
    Z = x + rng.standard_normal((n_samples, d))
    sq_dist = np.sum((Z - x) ** 2, axis=1)
    w = np.exp(-sq_dist / kernel_width ** 2)
    if np.all(w < 1e-12):
        raise SurrogateFitError("all perturbation weights are numerically zero")
    c = int(np.argmax(forward(model, x[None, :])[0]))
    y = forward(model, Z)[:, c]
    wsum = w.sum()
    Zc = Z - (w @ Z) / wsum
    yc = y - (w @ y) / wsum
    Zw = Zc * w[:, None]
    gram = Zw.T @ Zc + ridge_reg * np.eye(d)
    return np.linalg.solve(gram, Zw.T @ yc)


def lime_tabular(model: MlpModel, x: np.ndarray, n_samples: int = 1000,
                 seed: int = 0, kernel_width: float | None = None,
                 ridge_reg: float = 1.0) -> np.ndarray:
    """Normalised absolute surrogate coefficients for one sample."""
    rng = stream(seed, "lime")
    coef = _lime_raw(model, x, n_samples, rng, kernel_width, ridge_reg)
    return _finalize_rows(coef)[0][0]


def attribute_dataset(method: str, model: MlpModel, data,
                      filt: AgopFilter | None = None,
                      baseline: np.ndarray | None = None,
                      background: np.ndarray | None = None,
                      seed: int = 0,
                      ig_steps: int = 50,
                      shapley_permutations: int = 20,
                      shapley_bg_per_perm: int = 10,
                      lime_samples: int = 1000) -> AttributionMatrix:
    """Attribute every row of ``data`` (a Dataset or feature matrix) with
    one method, recording wall time over the whole batch.

    Stochastic methods derive an independent stream per (seed, sample
    index), so results do not depend on evaluation order. Per-sample
    numerical failures become flagged uniform rows rather than aborting
    the batch.
    """
    if method not in METHOD_LABELS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    X = getattr(data, "X", data)
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    n, d = X.shape
    start = time.perf_counter()

    if method == "agop_ixg":
        if filt is None:
            raise ValueError("agop_ixg requires a fitted filter")
        raw = _agop_raw(filt, model, X)
    elif method == "input_x_gradient":
        raw = _ixg_raw(model, X)
    elif method == "integrated_gradients":
        if baseline is None:
            raise ValueError("integrated_gradients requires a baseline")
        raw = _ig_signed(model, X, baseline, ig_steps)
    elif method == "sampled_shapley":
        if background is None:
            raise ValueError("sampled_shapley requires background rows")
        raw = np.empty_like(X)
        for i in range(n):
            rng = stream(seed, "shapley", i)
            raw[i], _ = _shapley_raw(model, X[i], background,
                                     shapley_permutations, rng,
                                     shapley_bg_per_perm)
    else:  # lime
        raw = np.empty_like(X)
        for i in range(n):
            rng = stream(seed, "lime", i)
            try:
                raw[i] = _lime_raw(model, X[i], lime_samples, rng, None, 1.0)
            except (SurrogateFitError, np.linalg.LinAlgError):
                raw[i] = 0.0  # becomes a flagged uniform row

    values, flags = _finalize_rows(raw)
    elapsed = time.perf_counter() - start
    return AttributionMatrix(
        values=values, method=method, wall_time_seconds=elapsed,
        sample_indices=np.arange(n), flags=flags)
