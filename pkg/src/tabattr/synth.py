"""Synthetic multi-class tabular tasks with per-sample attribution ground truth.

Three generating regimes over d=20 standard-normal features, three
classes each, with labels drawn from a noisy argmax of the true score
functions:

* linear      - class scores are random linear forms of features 0-4
* sparse      - sparse nonlinear forms of features 0-4
* interaction - pairwise products over features 0-5

Features 5+ (linear/sparse) resp. 6+ (interaction) carry no signal.
Ground-truth attribution for a sample is the normalised absolute
baseline-shifted input-times-gradient of the true (noise-free) score of
its noise-free argmax class: closed form for the linear regime, central
finite differences for the others. Ground truth lives in the same
standardised coordinates the model consumes.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .rng import child_seed, stream

DEFAULT_N = 5000
DEFAULT_D = 20
N_CLASSES = 3
LABEL_NOISE_STD = 0.3
FD_STEP = 1e-4
DEGENERATE_EPS = 1e-12


class StratificationError(ValueError):
    """A class has too few samples to be split."""


class ConstantFeatureError(ValueError):
    """A feature column has (numerically) zero variance on the training split."""


@dataclass
class ScoreFunction:
    """True class-score functions; ``weights`` is the 3x5 matrix of the
    linear regime and None otherwise."""

    name: str
    weights: np.ndarray | None = None

    @property
    def n_informative(self) -> int:
        return 6 if self.name == "interaction" else 5

    def scores(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if self.name == "linear":
            return X[:, :5] @ self.weights.T
        if self.name == "sparse":
            s0 = np.sin(X[:, 0]) + X[:, 1] ** 2
            s1 = X[:, 2] * X[:, 3] + X[:, 4]
            s2 = np.cos(X[:, 0] + X[:, 1]) + X[:, 3] ** 2
            return np.stack([s0, s1, s2], axis=1)
        if self.name == "interaction":
            s0 = X[:, 0] * X[:, 1] + X[:, 2]
            s1 = X[:, 3] * X[:, 4] + X[:, 5]
            s2 = X[:, 0] * X[:, 3] + X[:, 1] * X[:, 4]
            return np.stack([s0, s1, s2], axis=1)
        raise ValueError(f"unknown score function {self.name!r}")


@dataclass
class Dataset:
    name: str
    split_tag: str
    X: np.ndarray
    y: np.ndarray
    informative_mask: np.ndarray | None
    feature_means: np.ndarray
    feature_stds: np.ndarray
    ground_truth: np.ndarray | None = None
    seed: int | None = None

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def n_classes(self) -> int:
        return int(self.y.max()) + 1


def stratified_split(X: np.ndarray, y: np.ndarray, test_fraction: float,
                     seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-class deterministic split; returns sorted (train_idx, test_idx)."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    y = np.asarray(y)
    rng = stream(seed, "stratified-split")
    train_parts, test_parts = [], []
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        if len(idx) < 2:
            raise StratificationError(f"class {cls} has only {len(idx)} sample(s)")
        n_test = int(np.floor(test_fraction * len(idx) + 0.5))
        n_test = min(max(n_test, 1), len(idx) - 1)
        perm = rng.permutation(len(idx))
        test_parts.append(idx[perm[:n_test]])
        train_parts.append(idx[perm[n_test:]])
    return (np.sort(np.concatenate(train_parts)),
            np.sort(np.concatenate(test_parts)))


def standardize(train_X: np.ndarray, test_X: np.ndarray):
    """Zero-mean unit-variance transform fit on the training split only.

    Uses the population standard deviation. Returns
    (train', test', means, stds).
    """
    train_X = np.asarray(train_X, dtype=np.float64)
    test_X = np.asarray(test_X, dtype=np.float64)
    means = train_X.mean(axis=0)
    stds = train_X.std(axis=0)
    bad = np.flatnonzero(stds <= 1e-12)
    if bad.size:
        raise ConstantFeatureError(f"feature {int(bad[0])} has zero variance on train")
    return (train_X - means) / stds, (test_X - means) / stds, means, stds


def closed_form_linear_gt(W: np.ndarray, x: np.ndarray, x_bar: np.ndarray,
                          c: int) -> np.ndarray:
    """Exact ground truth for the linear regime.

    attr_j = |W[c, j] (x_j - xbar_j)| / sum_{l<5} |W[c, l] (x_l - xbar_l)|
    for j < 5, zero elsewhere. A zero denominator marks the sample as
    degenerate: the all-zero vector is returned.
    """
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    e = np.abs(W[c] * (x[:5] - x_bar[:5]))
    denom = e.sum()
    if denom < DEGENERATE_EPS:
        return out
    out[:5] = e / denom
    return out


def ground_truth_fd(score: ScoreFunction, x: np.ndarray, x_bar: np.ndarray,
                    c: int, h: float = FD_STEP) -> np.ndarray:
    """Numerical ground truth: central finite differences of the true score
    of class ``c``, input-times-gradient against the baseline, normalised.

    Returns the all-zero vector when the normaliser is below 1e-12
    (degenerate sample).
    """
    if h <= 0:
        raise ValueError("h must be positive")
    x = np.asarray(x, dtype=np.float64)
    return _fd_gt_matrix(score, x[None, :], x_bar, np.array([c]), h)[0]


def _fd_gt_matrix(score: ScoreFunction, X: np.ndarray, x_bar: np.ndarray,
                  classes: np.ndarray, h: float) -> np.ndarray:
    n, d = X.shape
    rows = np.arange(n)
    grad = np.empty((n, d))
    for j in range(d):
        shift = np.zeros(d)
        shift[j] = h
        s_plus = score.scores(X + shift)[rows, classes]
        s_minus = score.scores(X - shift)[rows, classes]
        grad[:, j] = (s_plus - s_minus) / (2.0 * h)
    e = np.abs((X - x_bar) * grad)
    denom = e.sum(axis=1, keepdims=True)
    out = np.zeros_like(e)
    ok = denom[:, 0] >= DEGENERATE_EPS
    out[ok] = e[ok] / denom[ok]
    return out


def _linear_gt_matrix(W: np.ndarray, X: np.ndarray, x_bar: np.ndarray,
                      classes: np.ndarray) -> np.ndarray:
    n, d = X.shape
    e = np.zeros((n, d))
    e[:, :5] = np.abs(W[classes] * (X[:, :5] - x_bar[:5]))
    denom = e.sum(axis=1, keepdims=True)
    out = np.zeros_like(e)
    ok = denom[:, 0] >= DEGENERATE_EPS
    out[ok] = e[ok] / denom[ok]
    return out


def _draw(name: str, seed: int, n: int):
    """The raw draws behind a generated dataset: score function, features,
    noise-free scores, and noisy labels."""
    rng = stream(seed, "synth", name)
    if name == "linear":
        magnitudes = rng.uniform(0.5, 2.0, size=(3, 5))
        signs = np.where(rng.random((3, 5)) < 0.5, -1.0, 1.0)
        score = ScoreFunction(name, weights=magnitudes * signs)
    else:
        score = ScoreFunction(name)
    X = rng.standard_normal((n, DEFAULT_D))
    clean = score.scores(X)
    noisy = clean + rng.normal(0.0, LABEL_NOISE_STD, size=clean.shape)
    return score, X, clean, np.argmax(noisy, axis=1)


def _generate(name: str, seed: int, n: int) -> tuple[Dataset, Dataset, ScoreFunction]:
    score, X, _, y = _draw(name, seed, n)
    train_idx, test_idx = stratified_split(X, y, 0.2, child_seed(seed, "split", name))
    X_train, X_test, means, stds = standardize(X[train_idx], X[test_idx])
    baseline = X_train.mean(axis=0)

    mask = np.zeros(DEFAULT_D, dtype=bool)
    mask[:score.n_informative] = True

    def gt_for(X_std: np.ndarray) -> np.ndarray:
        classes = np.argmax(score.scores(X_std), axis=1)
        if name == "linear":
            return _linear_gt_matrix(score.weights, X_std, baseline, classes)
        return _fd_gt_matrix(score, X_std, baseline, classes, FD_STEP)

    def build(tag: str, X_std: np.ndarray, idx: np.ndarray) -> Dataset:
        return Dataset(
            name=name, split_tag=tag, X=X_std, y=y[idx],
            informative_mask=mask.copy(), feature_means=baseline.copy(),
            feature_stds=stds.copy(), ground_truth=gt_for(X_std), seed=seed)

    return build("train", X_train, train_idx), build("test", X_test, test_idx), score


def gen_linear(seed: int, n: int = DEFAULT_N):
    """Linear regime: W is 3x5 with entry magnitudes Uniform(0.5, 2) and
    random signs; labels argmax(X[:, :5] W^T + eps), eps ~ N(0, 0.3^2)."""
    return _generate("linear", seed, n)


def gen_sparse(seed: int, n: int = DEFAULT_N):
    """Sparse nonlinear regime over features 0-4."""
    return _generate("sparse", seed, n)


def gen_interaction(seed: int, n: int = DEFAULT_N):
    """Pairwise-interaction regime over features 0-5."""
    return _generate("interaction", seed, n)


GENERATORS = {
    "linear": gen_linear,
    "sparse": gen_sparse,
    "interaction": gen_interaction,
}


def label_flip_rate(name: str, seed: int, n: int = DEFAULT_N) -> float:
    """Fraction of labels the noise term flips relative to the noise-free
    argmax, for the exact draws behind a generated dataset. Diagnostic
    for the label-noise level."""
    _, _, clean, y = _draw(name, seed, n)
    return float(np.mean(y != np.argmax(clean, axis=1)))


def export_dataset(ds: Dataset, csv_path) -> Path:
    """Write the dataset as CSV plus a JSON sidecar next to it.

    CSV columns: f0..f{d-1}, label, and gt0..gt{d-1} when ground truth is
    present. The sidecar records name, split, seed, masks and the
    standardisation statistics.
    """
    csv_path = Path(csv_path)
    d = ds.n_features
    header = [f"f{j}" for j in range(d)] + ["label"]
    if ds.ground_truth is not None:
        header += [f"gt{j}" for j in range(d)]
    with open(csv_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for i in range(len(ds.X)):
            row = [f"{v:.17g}" for v in ds.X[i]] + [str(int(ds.y[i]))]
            if ds.ground_truth is not None:
                row += [f"{v:.17g}" for v in ds.ground_truth[i]]
            writer.writerow(row)
    sidecar = {
        "name": ds.name,
        "split_tag": ds.split_tag,
        "seed": ds.seed,
        "informative_mask": None if ds.informative_mask is None
        else [bool(v) for v in ds.informative_mask],
        "feature_means": [float(v) for v in ds.feature_means],
        "feature_stds": [float(v) for v in ds.feature_stds],
        "has_ground_truth": ds.ground_truth is not None,
    }
    sidecar_path = csv_path.with_suffix(".json")
    sidecar_path.write_text(json.dumps(sidecar, indent=2) + "\n")
    return sidecar_path


def import_dataset(csv_path) -> Dataset:
    """Read a dataset written by ``export_dataset``."""
    csv_path = Path(csv_path)
    meta = json.loads(csv_path.with_suffix(".json").read_text())
    with open(csv_path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        rows = list(reader)
    d = sum(1 for h in header if h.startswith("f") and not h.startswith("gt"))
    X = np.array([[float(v) for v in r[:d]] for r in rows])
    y = np.array([int(r[d]) for r in rows], dtype=np.intp)
    gt = None
    if meta["has_ground_truth"]:
        gt = np.array([[float(v) for v in r[d + 1:2 * d + 1]] for r in rows])
    mask = meta["informative_mask"]
    return Dataset(
        name=meta["name"], split_tag=meta["split_tag"], X=X, y=y,
        informative_mask=None if mask is None else np.asarray(mask, dtype=bool),
        feature_means=np.asarray(meta["feature_means"], dtype=np.float64),
        feature_stds=np.asarray(meta["feature_stds"], dtype=np.float64),
        ground_truth=gt, seed=meta["seed"])
