"""tabattr: per-sample feature attribution for tabular MLP classifiers.

A dependency-light library and CLI implementing a spectrally filtered
gradient attribution method alongside four standard baselines
(input-times-gradient, integrated gradients, sampled Shapley values,
and a local ridge surrogate), a synthetic benchmark with per-sample
ground-truth attribution, and remove-and-retrain evaluation of global
feature rankings.
"""

from .attribution import (AgopFilter, AttributionMatrix, agop_ixg,
                          attribute_dataset, fit_agop, input_x_gradient,
                          integrated_gradients, lime_tabular,
                          normalize_attribution, sampled_shapley)
from .linalg import EigenDecomposition, symmetric_eig, truncate_rank
from .metrics import MetricsReport, evaluate_method, noise_mass, spearman, \
    top_k_precision
from .nn import (MlpModel, TrainConfig, forward, init_mlp, input_gradient,
                 load_model, predict, save_model, train)
from .roar import RoarCurve, global_ranking, mask_features, roar_auc, run_roar
from .synth import (Dataset, ScoreFunction, closed_form_linear_gt, gen_interaction,
                    gen_linear, gen_sparse, ground_truth_fd, standardize,
                    stratified_split)

__version__ = "0.1.0"

__all__ = [
    "AgopFilter", "AttributionMatrix", "Dataset", "EigenDecomposition",
    "MetricsReport", "MlpModel", "RoarCurve", "ScoreFunction", "TrainConfig",
    "agop_ixg", "attribute_dataset", "closed_form_linear_gt", "evaluate_method",
    "fit_agop", "forward", "gen_interaction", "gen_linear", "gen_sparse",
    "global_ranking", "ground_truth_fd", "init_mlp", "input_gradient",
    "input_x_gradient", "integrated_gradients", "lime_tabular", "load_model",
    "mask_features", "noise_mass", "normalize_attribution", "predict",
    "roar_auc", "run_roar", "sampled_shapley", "save_model", "spearman",
    "standardize", "stratified_split", "symmetric_eig", "top_k_precision",
    "train",
]
