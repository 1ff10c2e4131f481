"""Spectral simulator and verification harness for Kirchhoff-type wave equations."""

__version__ = "0.1.0"

from .spectral import (Spectrum, FrequencySplit, apply_power, split, gevrey_norm_sq,
                       power_norm_sq, h_norm_sq, string_spectrum, sqrt_spectrum,
                       lacunary_spectrum)
from .model import Nonlinearity, Weight, inv_phi_majorant_c2
from .dynamics import (State, Trajectory, EnergyReport, SinusoidalCoefficient,
                       evolve_kirchhoff, evolve_linear, measure, escape_time,
                       trajectory_to_json, trajectory_from_json, trajectory_to_csv)

__all__ = [
    "Spectrum", "FrequencySplit", "apply_power", "split", "gevrey_norm_sq",
    "power_norm_sq", "h_norm_sq", "string_spectrum", "sqrt_spectrum",
    "lacunary_spectrum", "Nonlinearity", "Weight", "inv_phi_majorant_c2",
    "State", "Trajectory", "EnergyReport", "SinusoidalCoefficient",
    "evolve_kirchhoff", "evolve_linear", "measure", "escape_time",
    "trajectory_to_json", "trajectory_from_json", "trajectory_to_csv",
    "__version__",
]
