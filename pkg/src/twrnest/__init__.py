"""Blind channel estimation for amplify-and-forward two-way relay networks with M-PSK."""

__version__ = "0.1.0"

from .estimators import DMLEstimator, GMLEstimator, LSEstimator, MCMLEstimator
from .harness import SweepConfig, run_mse_sweep, run_ser_sweep
from .model import PskAlphabet, SystemParams

__all__ = [
    "__version__",
    "DMLEstimator",
    "GMLEstimator",
    "LSEstimator",
    "MCMLEstimator",
    "PskAlphabet",
    "SystemParams",
    "SweepConfig",
    "run_mse_sweep",
    "run_ser_sweep",
]
