"""Spatiotemporal exponential GARCH models on networks and lattices."""

__version__ = "0.1.0"

from .core import (
    INVERSION_STUDY_PARAMS,
    MODEL_A,
    MODEL_B,
    InitialConditions,
    ModelParams,
    Panel,
    PanelKind,
    WeightMatrix,
)
from .diagnostics import ljung_box, morans_i, panel_diagnostics
from .inversion import InversionError, NewtonOptions, invert_panel, invertibility_det
from .likelihood import EstimationResult, FitOptions, fit_qmle, log_likelihood
from .meanmodel import fit_sdpd, simulate_sdpd
from .moments import closed_moments_theta_only, general_moments_quadrature, nu_moments
from .networks import (
    correlation_distance,
    euclidean_distance,
    grid_contiguity,
    knn_weights,
    piccolo_distance,
    row_standardize,
)
from .process import NonStationaryError, check_stationarity, simulate

__all__ = [
    "EstimationResult",
    "FitOptions",
    "INVERSION_STUDY_PARAMS",
    "InitialConditions",
    "InversionError",
    "MODEL_A",
    "MODEL_B",
    "ModelParams",
    "NewtonOptions",
    "NonStationaryError",
    "Panel",
    "PanelKind",
    "WeightMatrix",
    "check_stationarity",
    "closed_moments_theta_only",
    "correlation_distance",
    "euclidean_distance",
    "fit_qmle",
    "fit_sdpd",
    "general_moments_quadrature",
    "grid_contiguity",
    "invert_panel",
    "invertibility_det",
    "knn_weights",
    "ljung_box",
    "log_likelihood",
    "morans_i",
    "nu_moments",
    "panel_diagnostics",
    "piccolo_distance",
    "row_standardize",
    "simulate",
    "simulate_sdpd",
]
