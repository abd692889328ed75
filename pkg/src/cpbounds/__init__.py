"""Bounds on the Casimir-Polder force between a dipole and a planar half-space domain."""

__version__ = "0.1.0"

from .bounds import (
    AffineForce,
    ForceResult,
    QuadratureSettings,
    affine_decomposition,
    force_bounds,
    matsubara_force_bounds,
    per_xi_integrand,
)
from .errors import CPBoundsError, InputError, InvariantViolation, NumericalError
from .halfspace import GreensProfile, fresnel, greens_profile, validate_profile
from .materials import (
    GOLD,
    DipoleSpec,
    Dispersionless,
    Drude,
    EllipsoidSpec,
    Tabulated,
    chi_eval,
    depolarization_factors,
    ellipsoid_polarizability,
)
from .oracle import (
    build_domain,
    discrete_bounds,
    incident_field,
    monotonicity_suite,
    run_trials,
    structure_objective,
)

__all__ = [
    "AffineForce", "ForceResult", "QuadratureSettings", "affine_decomposition",
    "force_bounds", "matsubara_force_bounds", "per_xi_integrand",
    "CPBoundsError", "InputError", "InvariantViolation", "NumericalError",
    "GreensProfile", "fresnel", "greens_profile", "validate_profile",
    "GOLD", "DipoleSpec", "Dispersionless", "Drude", "EllipsoidSpec", "Tabulated",
    "chi_eval", "depolarization_factors", "ellipsoid_polarizability",
    "build_domain", "discrete_bounds", "incident_field", "monotonicity_suite",
    "run_trials", "structure_objective",
]
