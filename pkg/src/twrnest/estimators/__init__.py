from .base import DMLEstimator, GMLEstimator, LSEstimator, MCMLEstimator
from .blind import (
    cleaned_samples,
    dml_estimate,
    dml_objective,
    envelope_noise_variance,
    estimate_b_mag,
    gml_estimate,
    mcml_b_mag,
    mcml_estimate,
    mcml_objective,
    mcml_pilot_phase,
)
from .detection import ambiguity_candidates, detect_symbols, resolve_ambiguity, vv_phase_estimate
from .grid import EstimationResult, GridSpec, grid_search
from .training import ambiguity_pilots, ls_estimate, mcml_pilots, orthogonal_pilots

__all__ = [
    "DMLEstimator",
    "GMLEstimator",
    "LSEstimator",
    "MCMLEstimator",
    "EstimationResult",
    "GridSpec",
    "grid_search",
    "cleaned_samples",
    "dml_objective",
    "dml_estimate",
    "estimate_b_mag",
    "envelope_noise_variance",
    "gml_estimate",
    "mcml_objective",
    "mcml_pilot_phase",
    "mcml_b_mag",
    "mcml_estimate",
    "ls_estimate",
    "orthogonal_pilots",
    "mcml_pilots",
    "ambiguity_pilots",
    "vv_phase_estimate",
    "ambiguity_candidates",
    "resolve_ambiguity",
    "detect_symbols",
]
