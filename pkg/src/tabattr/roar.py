"""Remove-and-retrain evaluation of global feature rankings.

Per method: average normalised per-sample attributions over the
training split into a global feature ranking, replace the top fraction
of ranked features by their training means in both splits, retrain the
model from scratch, and measure test accuracy. The area under the
accuracy-vs-removal curve over the 0-50% range (trapezoid rule)
summarises the curve: faster degradation (lower area) means a more
faithful ranking.

Besides the five attribution methods, two reference rankings are
supported: ``ground_truth`` (from the dataset's ground-truth matrix)
and ``random``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import attribution
from .nn import MlpModel, TrainConfig, init_mlp, predict, train
from .rng import child_seed, stream
from .synth import Dataset

DEFAULT_FRACTIONS = (0.05, 0.10, 0.20, 0.30, 0.50)
REFERENCE_RANKINGS = ("ground_truth", "random")


class IncompleteCurveError(ValueError):
    """The removal-fraction grid is missing a required endpoint."""


@dataclass
class RoarCurve:
    method: str
    dataset: str
    fractions: list[float]
    seeds: list[int]
    accuracies: np.ndarray  # (n_seeds, n_fractions)
    n_masked: list[int]
    auc_per_seed: np.ndarray = field(init=False)
    auc_mean: float = field(init=False)
    auc_std: float = field(init=False)

    def __post_init__(self):
        self.auc_per_seed = np.array(
            [roar_auc(self.fractions, row) for row in np.atleast_2d(self.accuracies)])
        self.auc_mean = float(self.auc_per_seed.mean())
        self.auc_std = float(self.auc_per_seed.std())


def global_ranking(attr) -> np.ndarray:
    """Features ordered by mean attribution, descending; ties keep the
    lower feature index first. Accepts an AttributionMatrix or a matrix."""
    values = getattr(attr, "values", attr)
    values = np.atleast_2d(np.asarray(values, dtype=np.float64))
    if values.size == 0:
        raise ValueError("cannot rank an empty attribution matrix")
    means = values.mean(axis=0)
    return np.argsort(-means, kind="stable")


def n_masked_features(fraction: float, d: int) -> int:
    """Half-up rounding of fraction * d."""
    return int(np.floor(fraction * d + 0.5))


def mask_features(train: Dataset, test: Dataset, ranking: np.ndarray,
                  fraction: float) -> tuple[Dataset, Dataset]:
    """Replace the top-ranked fraction of features by their training-split
    means in both splits. Returns copies; the inputs are untouched."""
    if not 0.0 <= fraction <= 1.0:
        raise ValueError("fraction must lie in [0, 1]")
    d = train.X.shape[1]
    m = n_masked_features(fraction, d)
    cols = np.asarray(ranking[:m], dtype=np.intp)
    X_tr = train.X.copy()
    X_te = test.X.copy()
    if m:
        col_means = train.X[:, cols].mean(axis=0)
        X_tr[:, cols] = col_means
        X_te[:, cols] = col_means
    masked_train = Dataset(**{**train.__dict__, "X": X_tr})
    masked_test = Dataset(**{**test.__dict__, "X": X_te})
    return masked_train, masked_test


def roar_auc(fractions, accuracies) -> float:
    """Trapezoidal area under the accuracy curve over removal 0 to 0.5."""
    fractions = np.asarray(fractions, dtype=np.float64)
    accuracies = np.asarray(accuracies, dtype=np.float64)
    if fractions[0] != 0.0 or fractions[-1] != 0.5:
        raise IncompleteCurveError(
            "fractions must start at 0.0 (baseline) and end at 0.5")
    if np.any(np.diff(fractions) <= 0):
        raise ValueError("fractions must be strictly increasing")
    return float(np.trapezoid(accuracies, fractions))


def _accuracy(model: MlpModel, ds: Dataset) -> float:
    labels, _ = predict(model, ds.X)
    return float(np.mean(labels == ds.y))


def compute_ranking(method: str, model: MlpModel, train_ds: Dataset, seed: int,
                    lime_subsample: int = 500,
                    shapley_background: int = 200,
                    **attr_params) -> np.ndarray:
    """Global feature ranking for one method on the training split.

    The surrogate-fitting method ranks from a row subsample (default
    500) because of its per-sample cost; all other methods use the full
    split.
    """
    if method == "ground_truth":
        if train_ds.ground_truth is None:
            raise ValueError("ground_truth ranking requires ground-truth data")
        return global_ranking(train_ds.ground_truth)
    if method == "random":
        return stream(seed, "roar", "random-ranking").permutation(train_ds.X.shape[1])

    X = train_ds.X
    kwargs = dict(attr_params)
    if method == "agop_ixg":
        kwargs["filt"] = attribution.fit_agop(model, X)
    elif method == "integrated_gradients":
        kwargs["baseline"] = train_ds.feature_means
    elif method == "sampled_shapley":
        rng = stream(seed, "roar", "shapley-background")
        take = min(shapley_background, len(X))
        kwargs["background"] = X[rng.choice(len(X), size=take, replace=False)]
    elif method == "lime":
        if len(X) > lime_subsample:
            rng = stream(seed, "roar", "lime-subsample")
            X = X[np.sort(rng.choice(len(X), size=lime_subsample, replace=False))]
    attr = attribution.attribute_dataset(
        method, model, X, seed=child_seed(seed, "roar", method), **kwargs)
    return global_ranking(attr)


def run_roar(methods: list[str], dataset_fn, seeds: list[int],
             fractions=DEFAULT_FRACTIONS, train_config: TrainConfig | None = None,
             lime_subsample: int = 500, shapley_background: int = 200,
             dataset_name: str | None = None, progress=None,
             **attr_params) -> list[RoarCurve]:
    """Full protocol over (method, fraction, seed).

    ``dataset_fn(seed)`` must yield a (train, test) Dataset pair. For
    every seed a base model is trained on the unmasked data; its test
    accuracy is the fraction-0 point shared by all methods, and all
    rankings are computed from it. Each masked retraining starts from a
    fresh initialisation derived from (seed, method, fraction).
    """
    if train_config is None:
        train_config = TrainConfig()
    fractions = sorted(float(f) for f in fractions)
    if fractions and fractions[0] == 0.0:
        fractions = fractions[1:]
    full_grid = [0.0, *fractions]

    curves: dict[str, np.ndarray] = {
        m: np.zeros((len(seeds), len(full_grid))) for m in methods}
    name = dataset_name
    d = None

    for si, seed in enumerate(seeds):
        train_ds, test_ds = dataset_fn(seed)
        name = name or train_ds.name
        d = train_ds.X.shape[1]
        base_seed = child_seed(seed, "roar", "base")
        base_cfg = TrainConfig(**{**train_config.__dict__, "seed": base_seed})
        base_model = train(
            init_mlp(d, train_ds.n_classes, base_seed), train_ds.X, train_ds.y, base_cfg)
        base_acc = _accuracy(base_model, test_ds)

        for method in methods:
            if progress:
                progress(f"seed {seed}: ranking via {method}")
            ranking = compute_ranking(
                method, base_model, train_ds, seed,
                lime_subsample=lime_subsample,
                shapley_background=shapley_background, **attr_params)
            curves[method][si, 0] = base_acc
            for fi, frac in enumerate(fractions, start=1):
                masked_tr, masked_te = mask_features(train_ds, test_ds, ranking, frac)
                run_seed = child_seed(seed, "roar", method, f"{frac:.4f}")
                cfg = TrainConfig(**{**train_config.__dict__, "seed": run_seed})
                model = train(init_mlp(d, train_ds.n_classes, run_seed),
                              masked_tr.X, masked_tr.y, cfg)
                curves[method][si, fi] = _accuracy(model, masked_te)
                if progress:
                    progress(f"seed {seed}: {method} @ {frac:.2f} -> "
                             f"{curves[method][si, fi]:.4f}")

    return [
        RoarCurve(
            method=m, dataset=name or "dataset", fractions=full_grid,
            seeds=list(seeds), accuracies=curves[m],
            n_masked=[n_masked_features(f, d) for f in full_grid])
        for m in methods
    ]
