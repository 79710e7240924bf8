"""Calibration-emulation-sampling (CES) for Bayesian inverse problems.

Stages: ensemble Kalman calibration, neural-network emulation of the
forward map, an autoencoder for dimension reduction, and dimension-robust
MCMC (pCN, infinity-MALA, infinity-HMC) in exact, emulative or latent space.
"""

from .autoencoder import Autoencoder
from .calibration import CalibrationHistory, Ensemble, run_calibration
from .emulation import Emulator, NetworkRegressor
from .exceptions import (
    ConfigError,
    DreamError,
    FormatError,
    NumericalError,
    RankDeficiencyError,
    RegularizationFailure,
    SolverFailure,
    TrainingDivergence,
    UnsupportedGradient,
    ValidationError,
)
from .forward_models import GaussianMeasure, ObservationSet, make_benchmark
from .pipeline import Pipeline, PipelineConfig, run_pipeline
from .samplers import ChainRecord, SamplerConfig, run_chain
from .whitening import PriorWhitener

__version__ = "0.1.0"

__all__ = [
    "Autoencoder", "CalibrationHistory", "ChainRecord", "ConfigError", "DreamError", "Emulator",
    "Ensemble", "FormatError", "GaussianMeasure", "NetworkRegressor", "NumericalError",
    "ObservationSet", "Pipeline", "PipelineConfig", "PriorWhitener", "RankDeficiencyError",
    "RegularizationFailure", "SamplerConfig", "SolverFailure", "TrainingDivergence",
    "UnsupportedGradient", "ValidationError", "make_benchmark", "run_calibration", "run_chain",
    "run_pipeline",
]
