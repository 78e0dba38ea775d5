"""Declarative experiment runner and report emission.

Two experiment kinds, both driven by an ExperimentConfig that can be
loaded from a JSON file (every field has the benchmark default, so an
empty config reproduces the standard runs):

* synthetic - per (dataset, method, seed): generate data, train or load
  the cached model, attribute the test split, score against ground
  truth; aggregate mean +- std across seeds.
* roar      - remove-and-retrain curves and their areas per method.

Reports are deterministic: identical configs produce byte-identical
CSV/JSON/markdown on the same platform. Wall-clock measurements are
inherently non-reproducible, so they are written to a separate
``timings.csv`` rather than into the deterministic report set.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import attribution, roar
from .metrics import MetricsReport, evaluate_method
from .nn import TrainConfig, init_mlp, load_model, predict, save_model, train
from .rng import child_seed, stream
from .synth import GENERATORS
from .tabular import ADULT_SCHEMA, CREDIT_SCHEMA, load_csv, preprocess_adult, \
    preprocess_credit

SYNTHETIC_DATASETS = ("linear", "sparse", "interaction")
REAL_DATASETS = ("adult", "credit")


class ConfigError(ValueError):
    """The experiment configuration is invalid or incomplete."""


@dataclass
class ExperimentConfig:
    kind: str = "synthetic"  # synthetic | roar
    datasets: list[str] = field(default_factory=lambda: list(SYNTHETIC_DATASETS))
    methods: list[str] = field(default_factory=lambda: list(attribution.METHODS))
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2, 42])
    learning_rate: float = 1e-3
    epochs: int = 200
    batch_size: int = 256
    ig_steps: int = 50
    shapley_permutations: int = 20
    shapley_background: int = 200
    shapley_bg_per_perm: int = 10
    lime_samples: int = 1000
    lime_roar_subsample: int = 500
    roar_fractions: list[float] = field(default_factory=lambda: [0.05, 0.10, 0.20,
                                                                 0.30, 0.50])
    include_reference_rankings: bool = False
    adult_csv: str | None = None
    credit_csv: str | None = None
    row_subsample: int | None = None  # desk-scale cap on real-data rows
    output_dir: str = "results"
    cache_dir: str = ".tabattr-cache"

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if not self.methods:
            raise ConfigError("methods must be non-empty")
        if self.kind not in ("synthetic", "roar"):
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        known = set(attribution.METHODS) | set(roar.REFERENCE_RANKINGS)
        for m in self.methods:
            if m not in known:
                raise ConfigError(f"unknown method {m!r}")
        for ds in self.datasets:
            if ds not in SYNTHETIC_DATASETS + REAL_DATASETS:
                raise ConfigError(f"unknown dataset {ds!r}")

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        raw = json.loads(Path(path).read_text())
        unknown = set(raw) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**raw)

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2) + "\n")

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(learning_rate=self.learning_rate, epochs=self.epochs,
                           batch_size=self.batch_size, seed=seed)

    def train_hash(self) -> str:
        key = json.dumps([self.learning_rate, self.epochs, self.batch_size],
                         sort_keys=True)
        return hashlib.sha256(key.encode()).hexdigest()[:12]


@dataclass
class RunResult:
    config: ExperimentConfig
    reports: list[MetricsReport]
    errors: dict[str, str]
    agop_ranks: dict[str, dict[int, int]]
    models_trained: int
    models_cached: int
    output_files: list[Path]
    model_stats: dict[str, dict[int, dict]] = field(default_factory=dict)
    curves: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def model_cache_path(config: ExperimentConfig, dataset: str, seed: int) -> Path:
    return Path(config.cache_dir) / (
        f"{dataset}-seed{seed}-{config.train_hash()}.model.npz")


def _cached_model(config: ExperimentConfig, dataset: str, seed: int,
                  train_X, train_y, n_classes: int):
    """Train once per (dataset, seed, train-hyperparameter hash); every
    method then explains the identical saved model."""
    Path(config.cache_dir).mkdir(parents=True, exist_ok=True)
    path = model_cache_path(config, dataset, seed)
    if path.exists():
        return load_model(path), True
    model_seed = child_seed(seed, "model", dataset)
    model = init_mlp(train_X.shape[1], n_classes, model_seed)
    model = train(model, train_X, train_y, config.train_config(model_seed))
    save_model(model, path)
    return model, False


def _method_kwargs(config: ExperimentConfig, method: str, model, train_ds):
    kwargs = {}
    if method == "agop_ixg":
        kwargs["filt"] = attribution.fit_agop(model, train_ds.X)
    elif method == "integrated_gradients":
        kwargs["baseline"] = train_ds.feature_means
        kwargs["ig_steps"] = config.ig_steps
    elif method == "sampled_shapley":
        rng = stream(train_ds.seed or 0, "shapley-background", train_ds.name)
        take = min(config.shapley_background, len(train_ds.X))
        kwargs["background"] = train_ds.X[
            rng.choice(len(train_ds.X), size=take, replace=False)]
        kwargs["shapley_permutations"] = config.shapley_permutations
        kwargs["shapley_bg_per_perm"] = config.shapley_bg_per_perm
    elif method == "lime":
        kwargs["lime_samples"] = config.lime_samples
    return kwargs


def run_synthetic_benchmark(config: ExperimentConfig, progress=None) -> RunResult:
    """Part-1 benchmark over (dataset, method, seed) cells.

    A failing cell is recorded and skipped; the run continues. Emits the
    deterministic report set plus timings into ``config.output_dir``.
    """
    for ds in config.datasets:
        if ds not in SYNTHETIC_DATASETS:
            raise ConfigError(f"synthetic benchmark cannot run on {ds!r}")
    reports: list[MetricsReport] = []
    errors: dict[str, str] = {}
    ranks: dict[str, dict[int, int]] = {ds: {} for ds in config.datasets}
    stats: dict[str, dict[int, dict]] = {ds: {} for ds in config.datasets}
    trained = cached = 0

    for ds_name in config.datasets:
        for seed in config.seeds:
            train_ds, test_ds, _ = GENERATORS[ds_name](seed)
            model, hit = _cached_model(config, ds_name, seed, train_ds.X,
                                       train_ds.y, train_ds.n_classes)
            cached += hit
            trained += not hit
            labels, conf = predict(model, test_ds.X)
            stats[ds_name][seed] = {
                "test_accuracy": float(np.mean(labels == test_ds.y)),
                "train_accuracy": model.final_train_accuracy,
                "mean_confidence": float(conf.mean()),
            }
            try:
                filt = attribution.fit_agop(model, train_ds.X)
                ranks[ds_name][seed] = filt.rank
            except Exception as exc:  # noqa: BLE001 - cell errors are recorded
                errors[f"{ds_name}/seed{seed}/fit_agop"] = repr(exc)
                filt = None
            k = int(test_ds.informative_mask.sum())
            for method in config.methods:
                cell = f"{ds_name}/seed{seed}/{method}"
                if progress:
                    progress(cell)
                try:
                    if method == "agop_ixg":
                        if filt is None:
                            raise RuntimeError("no fitted filter for this cell")
                        kwargs = {"filt": filt}
                    else:
                        kwargs = _method_kwargs(config, method, model, train_ds)
                    attr = attribution.attribute_dataset(
                        method, model, test_ds.X,
                        seed=child_seed(seed, "attribute", ds_name, method),
                        **kwargs)
                    reports.append(evaluate_method(attr, test_ds, model, k))
                except Exception as exc:  # noqa: BLE001
                    errors[cell] = repr(exc)

    out = Path(config.output_dir)
    files = _emit_synthetic_reports(config, reports, ranks, stats, errors, out)
    return RunResult(config=config, reports=reports, errors=errors,
                     agop_ranks=ranks, models_trained=trained,
                     models_cached=cached, output_files=files,
                     model_stats=stats)


def _full(x: float) -> str:
    return f"{x:.17g}"


def _sig4(x: float) -> str:
    return f"{x:.4g}"


def _aggregate(config: ExperimentConfig, reports: list[MetricsReport]):
    """Mean +- std over seeds per (dataset, method), in config order."""
    rows = []
    for ds in config.datasets:
        for method in config.methods:
            cell = [r for r in reports if r.dataset == ds and r.method == method]
            if not cell:
                continue
            agg = {"dataset": ds, "method": method, "n_seeds": len(cell)}
            for metric in ("spearman_mean", "topk_precision", "noise_mass"):
                vals = np.array([getattr(r, metric) for r in cell])
                agg[metric] = float(vals.mean())
                agg[metric + "_std"] = float(vals.std())
            agg["n_evaluated_mean"] = float(np.mean([r.n_evaluated for r in cell]))
            rows.append(agg)
    return rows


BEST_RULES = (("spearman_mean", max), ("topk_precision", max), ("noise_mass", min))


def best_markers(aggregates) -> dict[tuple[str, str], list[str]]:
    """Per (dataset, metric): the single best method (first wins on ties)."""
    out: dict[tuple[str, str], list[str]] = {}
    datasets = dict.fromkeys(a["dataset"] for a in aggregates)
    for ds in datasets:
        group = [a for a in aggregates if a["dataset"] == ds]
        for metric, pick in BEST_RULES:
            target = pick(a[metric] for a in group)
            winner = next(a["method"] for a in group if a[metric] == target)
            out.setdefault((ds, winner), []).append(metric)
    return out


def emit_report(aggregates, fmt: str, path) -> Path:
    """Write an aggregate table as csv, json, or markdown.

    Column order is fixed; markdown uses 4 significant digits and a
    ``best`` column marking the per-(dataset, metric) winner, csv/json
    keep full precision.
    """
    if not aggregates:
        raise ValueError("no results to report")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = ["dataset", "method", "n_seeds",
            "spearman_mean", "spearman_mean_std",
            "topk_precision", "topk_precision_std",
            "noise_mass", "noise_mass_std", "n_evaluated_mean"]
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(cols)
        for a in aggregates:
            writer.writerow([a["dataset"], a["method"], a["n_seeds"]]
                            + [_full(a[c]) for c in cols[3:]])
        path.write_text(buf.getvalue())
    elif fmt == "json":
        path.write_text(json.dumps(aggregates, indent=2) + "\n")
    elif fmt == "markdown":
        marks = best_markers(aggregates)
        lines = ["| dataset | method | spearman | topk_precision | noise_mass "
                 "| best |",
                 "|---|---|---|---|---|---|"]
        for a in aggregates:
            best = ",".join(marks.get((a["dataset"], a["method"]), []))
            lines.append(
                f"| {a['dataset']} | {a['method']} "
                f"| {_sig4(a['spearman_mean'])} ± {_sig4(a['spearman_mean_std'])} "
                f"| {_sig4(a['topk_precision'])} ± {_sig4(a['topk_precision_std'])} "
                f"| {_sig4(a['noise_mass'])} ± {_sig4(a['noise_mass_std'])} "
                f"| {best} |")
        path.write_text("\n".join(lines) + "\n")
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    return path


def _emit_synthetic_reports(config, reports, ranks, stats, errors, out: Path):
    out.mkdir(parents=True, exist_ok=True)
    files = []

    # Per-seed ledger (no wall times: those go to timings.csv).
    ledger = out / "results_per_seed.csv"
    with open(ledger, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["dataset", "method", "seed", "spearman_mean",
                         "spearman_std_across_samples", "topk_precision",
                         "noise_mass", "n_evaluated", "n_excluded_misclassified",
                         "n_excluded_degenerate", "n_excluded_constant_spearman"])
        for r in reports:
            writer.writerow([r.dataset, r.method, r.seed, _full(r.spearman_mean),
                             _full(r.spearman_std_across_samples),
                             _full(r.topk_precision), _full(r.noise_mass),
                             r.n_evaluated, r.n_excluded_misclassified,
                             r.n_excluded_degenerate,
                             r.n_excluded_constant_spearman])
    files.append(ledger)

    aggregates = _aggregate(config, reports)
    if aggregates:
        files.append(emit_report(aggregates, "csv", out / "results.csv"))
        files.append(emit_report(aggregates, "markdown", out / "results.md"))

    payload = {
        "kind": "synthetic",
        "config": asdict(config),
        "per_seed": [{k: v for k, v in r.to_dict().items()
                      if k != "wall_time_seconds"} for r in reports],
        "aggregates": aggregates,
        "agop_ranks": {ds: {str(s): k for s, k in sorted(seeds.items())}
                       for ds, seeds in ranks.items()},
        "model_stats": {ds: {str(s): v for s, v in sorted(per.items())}
                        for ds, per in stats.items()},
        "errors": dict(sorted(errors.items())),
    }
    results_json = out / "results.json"
    results_json.write_text(json.dumps(payload, indent=2) + "\n")
    files.append(results_json)

    timings = out / "timings.csv"
    with open(timings, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["dataset", "method", "seed", "wall_time_seconds"])
        for r in reports:
            writer.writerow([r.dataset, r.method, r.seed,
                             _full(r.wall_time_seconds)])
    files.append(timings)
    return files


def _real_dataset_fn(config: ExperimentConfig, name: str):
    path = config.adult_csv if name == "adult" else config.credit_csv
    if path is None:
        raise ConfigError(f"dataset {name!r} requires a csv path in the config")
    if not Path(path).exists():
        raise ConfigError(f"csv file for {name!r} not found: {path}")
    schema = ADULT_SCHEMA if name == "adult" else CREDIT_SCHEMA
    preprocess = preprocess_adult if name == "adult" else preprocess_credit
    raw = load_csv(path, schema)

    def fn(seed: int):
        train_ds, test_ds = preprocess(raw, seed=seed)
        cap = config.row_subsample
        if cap is not None and len(train_ds.X) + len(test_ds.X) > cap:
            n_tr = int(cap * 0.8)
            n_te = cap - n_tr
            rng = stream(seed, "desk-subsample", name)
            tr = np.sort(rng.choice(len(train_ds.X), size=n_tr, replace=False))
            te = np.sort(rng.choice(len(test_ds.X), size=n_te, replace=False))
            for ds, idx in ((train_ds, tr), (test_ds, te)):
                ds.X = ds.X[idx]
                ds.y = ds.y[idx]
        return train_ds, test_ds

    return fn


def run_roar_experiment(config: ExperimentConfig, progress=None) -> RunResult:
    """Part-2 protocol for each configured dataset; emits curve CSV/JSON
    and a per-method area summary sorted ascending by mean area."""
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    errors: dict[str, str] = {}
    all_curves: list[roar.RoarCurve] = []
    t0 = time.perf_counter()

    for ds_name in config.datasets:
        if ds_name in SYNTHETIC_DATASETS:
            gen = GENERATORS[ds_name]

            def dataset_fn(seed, _gen=gen):
                train_ds, test_ds, _ = _gen(seed)
                return train_ds, test_ds
        else:
            dataset_fn = _real_dataset_fn(config, ds_name)

        methods = list(config.methods)
        if config.include_reference_rankings:
            for ref in roar.REFERENCE_RANKINGS:
                if ref not in methods:
                    if ref == "ground_truth" and ds_name not in SYNTHETIC_DATASETS:
                        continue
                    methods.append(ref)
        try:
            curves = roar.run_roar(
                methods, dataset_fn, config.seeds,
                fractions=config.roar_fractions,
                train_config=TrainConfig(learning_rate=config.learning_rate,
                                         epochs=config.epochs,
                                         batch_size=config.batch_size),
                lime_subsample=config.lime_roar_subsample,
                shapley_background=config.shapley_background,
                dataset_name=ds_name, progress=progress,
                ig_steps=config.ig_steps,
                shapley_permutations=config.shapley_permutations,
                shapley_bg_per_perm=config.shapley_bg_per_perm,
                lime_samples=config.lime_samples)
            all_curves.extend(curves)
        except Exception as exc:  # noqa: BLE001
            errors[f"{ds_name}/roar"] = repr(exc)

    files = _emit_roar_reports(config, all_curves, errors, out)
    elapsed = time.perf_counter() - t0
    (out / "timings.csv").write_text(
        "total_wall_seconds\n" + _full(elapsed) + "\n")
    files.append(out / "timings.csv")
    return RunResult(config=config, reports=[], errors=errors, agop_ranks={},
                     models_trained=0, models_cached=0, output_files=files,
                     curves=all_curves)


def _emit_roar_reports(config, curves: list[roar.RoarCurve], errors, out: Path):
    files = []
    curve_csv = out / "roar_curves.csv"
    with open(curve_csv, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["dataset", "method", "seed", "fraction", "n_masked",
                         "accuracy"])
        for c in curves:
            for si, seed in enumerate(c.seeds):
                for fi, frac in enumerate(c.fractions):
                    writer.writerow([c.dataset, c.method, seed, _full(frac),
                                     c.n_masked[fi], _full(c.accuracies[si, fi])])
    files.append(curve_csv)

    auc_csv = out / "roar_auc.csv"
    with open(auc_csv, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["dataset", "method", "auc_mean", "auc_std"]
                        + [f"auc_seed{s}" for s in (curves[0].seeds if curves else [])])
        ordered = sorted(curves, key=lambda c: (c.dataset, c.auc_mean))
        for c in ordered:
            writer.writerow([c.dataset, c.method, _full(c.auc_mean),
                             _full(c.auc_std)]
                            + [_full(v) for v in c.auc_per_seed])
    files.append(auc_csv)

    payload = {
        "kind": "roar",
        "config": asdict(config),
        "curves": [{
            "dataset": c.dataset, "method": c.method,
            "fractions": c.fractions, "seeds": c.seeds,
            "n_masked": c.n_masked,
            "accuracies": c.accuracies.tolist(),
            "auc_per_seed": c.auc_per_seed.tolist(),
            "auc_mean": c.auc_mean, "auc_std": c.auc_std,
        } for c in curves],
        "errors": dict(sorted(errors.items())),
    }
    roar_json = out / "roar.json"
    roar_json.write_text(json.dumps(payload, indent=2) + "\n")
    files.append(roar_json)
    return files
