"""Asymptotic long-wave elevation over variable bathymetry.

Rays of the Hamiltonian C(x)|p| are traced from a localized source, the
front is segmented at its focal points, and the free-surface elevation is
assembled from branch terms and focal model functions.  Finite-difference
and Fourier reference solutions are included for validation.
"""

__version__ = "0.1.0"

from .bathymetry import Bathymetry
from .errors import (ArgumentError, CapabilityError, ConfigError, ConsistencyError, DomainError,
                     LongwaveError, NumericError, ValidityError)
from .field import (Scene, branch_points, eta_chart02, eta_constant_bottom, eta_focal, eta_regular,
                    eta_total, g_model, maslov_profile, prepare_scene)
from .front_geometry import (classify_focal, critical_time, find_focal_points, focal_chart_index,
                             front_index_jump, jacobians, morse_index, segment_front)
from .grid import Grid
from .oracles import dispersion_threshold, fd_eta, front_band_error, spectral_eta
from .raytrace import conservation_report, front_at, hamilton_rhs, trace_bundle, variational_rhs
from .source import SourceModel, profile_F

__all__ = [
    "Bathymetry", "SourceModel", "Grid", "Scene",
    "trace_bundle", "front_at", "hamilton_rhs", "variational_rhs", "conservation_report",
    "jacobians", "find_focal_points", "classify_focal", "focal_chart_index", "morse_index",
    "front_index_jump", "segment_front", "critical_time",
    "prepare_scene", "branch_points", "eta_regular", "g_model", "eta_focal", "eta_chart02",
    "eta_constant_bottom", "eta_total", "maslov_profile", "profile_F",
    "spectral_eta", "fd_eta", "front_band_error", "dispersion_threshold",
    "LongwaveError", "ConfigError", "ArgumentError", "NumericError", "CapabilityError",
    "ValidityError", "DomainError", "ConsistencyError",
]
