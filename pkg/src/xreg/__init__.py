"""Extreme regression: hierarchical relevance regressors over huge label sets."""
from .io import PredictionFile, RelevanceDataset, read_dataset, read_predictions, write_predictions
from .kernels import BACKEND
from .trainer import Hyperparams, XRegModel, load_model, save_model, train

__version__ = "0.1.0"

__all__ = ["BACKEND", "Hyperparams", "PredictionFile", "RelevanceDataset", "XRegModel",
           "load_model", "read_dataset", "read_predictions", "save_model", "train",
           "write_predictions"]
