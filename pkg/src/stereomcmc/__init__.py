"""Stereographic MCMC samplers with AIR adaptation and a split-chain lab."""

from .geometry import (
    Precondition,
    SingularityError,
    geodesic,
    log_pi_gamma,
    sample_tangent_uniform,
    sp_forward,
    sp_inverse,
    tangent_gradient,
)
from .targets import affine_wrap, gaussian_target, student_t_target
from .rng import make_rng

__version__ = "0.1.0"

__all__ = [
    "Precondition",
    "SingularityError",
    "affine_wrap",
    "gaussian_target",
    "geodesic",
    "log_pi_gamma",
    "make_rng",
    "sample_tangent_uniform",
    "sp_forward",
    "sp_inverse",
    "student_t_target",
    "tangent_gradient",
]
