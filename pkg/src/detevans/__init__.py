"""Weak-detonation traveling waves of the scaled Majda model and their Evans-function stability."""

from .model import DetonationClass, EndStates, ModelParams, OutsidePhysicalRange
from .profile import ProfileSettings, ProfileSolution, continue_family, solve_profile, validate_profile
from .spectral import HighFreqBound, compute_L_M, hf_bound
from .evans import EvansSettings, StabilityVerdict, certify_stability, winding_number
from .sweep import ParameterGrid, RunRecord, run_grid

__all__ = [
    "DetonationClass", "EndStates", "ModelParams", "OutsidePhysicalRange",
    "ProfileSettings", "ProfileSolution", "continue_family", "solve_profile", "validate_profile",
    "HighFreqBound", "compute_L_M", "hf_bound",
    "EvansSettings", "StabilityVerdict", "certify_stability", "winding_number",
    "ParameterGrid", "RunRecord", "run_grid",
]
__version__ = "0.1.0"
