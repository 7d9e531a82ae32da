"""Spectral solver and analyticity diagnostics for the periodic beam equation
``u_tt + (m + Delta^2) u + u^p = 0``."""
__version__ = "0.1.0"

from .analyticity import (
    FitPolicy,
    RadiusEstimate,
    continuation_radius,
    estimate_radius,
    gevrey_lift,
    modified_energy,
    np_residual,
    residual_ratio,
    sigma_drift_sweep,
    track_radius_over_time,
)
from .beam import State, energy, integrate, linear_propagate, picard_local_solve, strang_step
from .config import RunConfig, load
from .data import InitialDataSpec, build
from .kernels import BACKEND
from .norms import NormSpec, cosh_norm, exp_norm, weighted_norm
from .spectral import (
    Grid,
    MultiplierSpec,
    RealField,
    SpectralField,
    apply_multiplier,
    dealiased_power,
    forward_transform,
    inverse_transform,
    make_grid,
)
