"""Numerical tools for the hard-edge tacnode of non-intersecting squared Bessel paths.

Modules
-------
special
    Modified Bessel functions and squared Bessel transition densities.
painleve
    Hastings-McLeod solution of inhomogeneous Painleve II.
laxpair
    Lax pair coefficients built from that solution.
rhkernel
    Numerical solution of the 4x4 model Riemann-Hilbert problem and the
    tacnode kernel.
finiten
    Finite-n correlation kernel and its scaling comparison.
phase
    Phase diagram, critical time and Marchenko-Pastur endpoints.
sampler
    Metropolis sampler of the path ensemble.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    AccuracyWarning,
    CaseError,
    DomainError,
    FitFailure,
    NonConvergence,
    SingularGram,
    StiffnessFailure,
    TacnodeError,
)

__all__ = [
    "__version__",
    "AccuracyWarning",
    "CaseError",
    "DomainError",
    "FitFailure",
    "NonConvergence",
    "SingularGram",
    "StiffnessFailure",
    "TacnodeError",
]
