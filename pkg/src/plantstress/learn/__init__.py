from .base import FitError, Standardizer
from .forest import ForestModel, fit_forest, predict_forest
from .hierarchical import (
    HierarchicalModel,
    fit_flat,
    fit_hierarchical,
    predict_flat,
    predict_hierarchical,
)
from .knn import KnnModel, fit_knn, predict_knn
from .linear import LinearModel, fit_logistic, fit_svm, predict_svm
from .resnet1d import ResNet1dModel, fit_resnet1d
from .serialize import load_model, save_model

__all__ = [
    "FitError", "Standardizer",
    "ForestModel", "fit_forest", "predict_forest",
    "HierarchicalModel", "fit_hierarchical", "predict_hierarchical", "fit_flat", "predict_flat",
    "KnnModel", "fit_knn", "predict_knn",
    "LinearModel", "fit_svm", "predict_svm", "fit_logistic",
    "ResNet1dModel", "fit_resnet1d",
    "load_model", "save_model",
]
