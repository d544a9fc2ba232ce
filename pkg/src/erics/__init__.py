"""Concept drift detection from the parameter distribution of an online model."""
from .detector import ERICS, DetectorConfig, DetectorState, DriftAlert, ma_feature, ma_generic, ma_probit, step, window_sum
from .distributions import GaussianParamDist, differential_entropy, kl_divergence, per_param_kl_terms
from .probit import LabeledBatch, ProbitModel
from .streams import DriftEvent, DriftGroundTruth, StreamSpec, generate, induce_drift, info_gain_rank, load_csv

__version__ = "0.1.0"
