"""Evaluation metrics for generative models, stress-tested against memorization."""

__version__ = "0.1.0"

from .data import Dataset, SyntheticSampler, load_dataset, save_dataset, split_disjoint
from .errors import ConfigError, DataFormatError, GenmeterError, InputError, TrainingDiverged

__all__ = ["Dataset", "SyntheticSampler", "load_dataset", "save_dataset", "split_disjoint",
           "ConfigError", "DataFormatError", "GenmeterError", "InputError", "TrainingDiverged",
           "__version__"]
