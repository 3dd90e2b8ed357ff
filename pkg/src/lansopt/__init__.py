"""Spectral LANS-alpha flow solver with adjoint-based optimal control."""

from .errors import BlowUpError, ConfigurationError, ContractViolationError
from .spectral import (
    GridSpec,
    PhysicalField,
    SpectralField,
    apply_helmholtz,
    apply_stokes,
    da_dual_norm,
    da_norm,
    invert_helmholtz,
    l2_inner,
    l2_norm,
    leray_project,
    to_physical,
    to_spectral,
    v_inner,
    v_norm,
)

__version__ = "0.1.0"
