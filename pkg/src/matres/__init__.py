"""Scattering, transmission and resonance computations for one-dimensional
Schroedinger operators with compactly supported, piecewise-constant matrix
potentials."""

from __future__ import annotations

__version__ = "0.1.0"

from .geometry import (ConstantReport, PotentialError, PotentialSpec, SupportGeometry,
                       constants_for, l1_norm, load_potential, load_potential_file,
                       predicted_constants, support_geometry)
from .transfer import (ScatteringData, TransmissionMatrix, det_tau22, fundamental_matrix,
                       log_det_tau, scattering_matrix, transmission_matrix)
from .born import BornConfig, BornExpansion, apply_J, born_transmission, remainder_bound
from .resonances import (ResonanceSet, SearchRegion, locate_resonances, refine_zero,
                         winding_number)
from .asymptotics import (Sector, SectorCountSeries, TypeProfile, counting_function,
                          slope_estimate, type_estimate)
from .symmetry import SymmetryReport, run_symmetry_suite

__all__ = [
    "ConstantReport", "PotentialError", "PotentialSpec", "SupportGeometry", "constants_for",
    "l1_norm", "load_potential", "load_potential_file", "predicted_constants",
    "support_geometry", "ScatteringData", "TransmissionMatrix", "det_tau22",
    "fundamental_matrix", "log_det_tau", "scattering_matrix", "transmission_matrix",
    "BornConfig", "BornExpansion", "apply_J", "born_transmission", "remainder_bound",
    "ResonanceSet", "SearchRegion", "locate_resonances", "refine_zero", "winding_number",
    "Sector", "SectorCountSeries", "TypeProfile", "counting_function", "slope_estimate",
    "type_estimate", "SymmetryReport", "run_symmetry_suite",
]
