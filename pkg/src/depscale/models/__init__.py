"""SMO-trained SVMs, a numpy MLP and the per-item PHQ-8 ensemble."""

from .ensemble import (EnsembleConfig, ItemEnsemble, phq8_total, predict_items,
                       predict_phq8_total, train_item_ensemble)
from .mlp import MlpConfig, MlpModel, loss_and_gradients, mlp_predict, mlp_train, round_items
from .svm import (GridSearchResult, KernelSpec, SvmModel, SvmWarning, grid_search_cv,
                  smo_solve, svm_predict, svm_train)

__all__ = [
    "EnsembleConfig", "ItemEnsemble", "phq8_total", "predict_items", "predict_phq8_total",
    "train_item_ensemble", "MlpConfig", "MlpModel", "loss_and_gradients", "mlp_predict",
    "mlp_train", "round_items", "GridSearchResult", "KernelSpec", "SvmModel", "SvmWarning",
    "grid_search_cv", "smo_solve", "svm_predict", "svm_train",
]
