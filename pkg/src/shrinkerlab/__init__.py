"""Numerical toolkit for self-shrinkers, their drift-Laplacian spectra and curve shortening flow."""

from .errors import (
    ConfigError,
    ConvergenceError,
    NotCertifiedError,
    PreconditionError,
    RemeshRequired,
    SchemaMismatch,
    ShrinkerLabError,
    SingularityError,
    UnsupportedProductError,
)
from .gaussian import entropy, f_functional, weighted_inner
from .geometry import CylinderSpec, SampledCurve, circle, make_cylinder_samples, shoot_abresch_langer
from .spectral import cylinder_spectrum_closed_form, dirichlet_spectrum, solve_manifold

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ConvergenceError",
    "CylinderSpec",
    "NotCertifiedError",
    "PreconditionError",
    "RemeshRequired",
    "SampledCurve",
    "SchemaMismatch",
    "ShrinkerLabError",
    "SingularityError",
    "UnsupportedProductError",
    "circle",
    "cylinder_spectrum_closed_form",
    "dirichlet_spectrum",
    "entropy",
    "f_functional",
    "make_cylinder_samples",
    "shoot_abresch_langer",
    "solve_manifold",
    "weighted_inner",
]
