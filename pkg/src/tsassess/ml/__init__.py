"""Classifiers: binary stability MLP and multiclass time-of-instability SVM."""

from .cv import CvResult, GridResult, KTooLarge, cross_validate, grid_search, stratified_folds
from .mlp import DimensionMismatch, MlpConfig, MlpModel, predict_mlp, train_mlp
from .persist import FORMAT_VERSION, TrainedModels, load_model, save_model
from .svm import SvmBinaryModel, SvmMulticlassModel, SvmParams, predict_svm, train_svm_ovo

__all__ = [
    "CvResult", "GridResult", "KTooLarge", "cross_validate", "grid_search", "stratified_folds",
    "DimensionMismatch", "MlpConfig", "MlpModel", "predict_mlp", "train_mlp",
    "FORMAT_VERSION", "TrainedModels", "load_model", "save_model",
    "SvmBinaryModel", "SvmMulticlassModel", "SvmParams", "predict_svm", "train_svm_ovo",
]
