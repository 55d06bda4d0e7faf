"""Critical geometry of non-intersecting squared Bessel paths.

Critical time, Marchenko-Pastur support endpoints, the phase classification
in the ``(t, T)`` plane and the parameter maps of the triple scaling limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import CaseError, DomainError

__all__ = [
    "Phase",
    "EndpointPair",
    "t_star",
    "mp_endpoints",
    "boundary_temperature",
    "classify_phase",
    "scaling_params",
    "CRITICAL_PRODUCT",
]

CRITICAL_PRODUCT = 0.25
_REL_TOL = 1e-12


class Phase(str, Enum):
    CASE_I = "CaseI"
    CASE_II = "CaseII"
    CASE_III = "CaseIII"
    BOUNDARY_I_II = "BoundaryI_II"
    BOUNDARY_II_III = "BoundaryII_III"
    TACNODE = "Tacnode"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class EndpointPair:
    """Starting point ``a`` and ending point ``b`` of all paths."""

    a: float
    b: float

    def __post_init__(self):
        _check_endpoints(self.a, self.b)

    @property
    def critical(self):
        return _is_critical(self.a, self.b)


def _check_endpoints(a, b):
    if not (a > 0 and b > 0) or not (math.isfinite(a) and math.isfinite(b)):
        raise DomainError(f"endpoints must be positive, got a={a}, b={b}")


def _is_critical(a, b, tol=_REL_TOL):
    return abs(a * b - CRITICAL_PRODUCT) <= tol * CRITICAL_PRODUCT


def _require_critical(a, b):
    _check_endpoints(a, b)
    if not _is_critical(a, b):
        raise DomainError(f"requires ab = 1/4, got ab = {a * b!r}")


def _check_time(t):
    if not (0.0 < t < 1.0):
        raise DomainError(f"time must lie in (0, 1), got {t}")


def t_star(a, b):
    """Time at which the limiting hull touches the hard edge.

    >>> t_star(0.5, 0.5)
    0.5
    """
    _check_endpoints(a, b)
    ra, rb = math.sqrt(a), math.sqrt(b)
    return ra / (ra + rb)


def mp_endpoints(a, b, t, T):
    """Endpoints ``(p, q)`` of the Marchenko-Pastur support at time ``t``.

    ``sqrt(p), sqrt(q) = (1 - t) sqrt(a) + t sqrt(b) -+ sqrt(2 t (1 - t) T)``.

    Raises
    ------
    CaseError
        If the expression for ``sqrt(p)`` is negative, i.e. the paths
        reach the hard edge at time ``t``.
    """
    _check_endpoints(a, b)
    _check_time(t)
    if not (T > 0):
        raise DomainError(f"temperature must be positive, got {T}")
    centre = (1.0 - t) * math.sqrt(a) + t * math.sqrt(b)
    spread = math.sqrt(2.0 * t * (1.0 - t) * T)
    lo = centre - spread
    if lo < -_REL_TOL * centre:
        raise CaseError(
            f"paths reach the hard edge at (t, T) = ({t}, {T}); no Marchenko-Pastur interval")
    lo = max(lo, 0.0)
    return lo * lo, (centre + spread) ** 2


def boundary_temperature(a, b, t):
    """Temperature on the Case II / Case III transition curve at time ``t``."""
    _check_endpoints(a, b)
    _check_time(t)
    return (a * (1.0 - t) ** 2 + b * t * t) / (t * (1.0 - t))


def _close(x, y, tol):
    return abs(x - y) <= tol * max(abs(x), abs(y))


def classify_phase(a, b, t, T, tol=_REL_TOL):
    """Phase label of ``(t, T)`` for endpoints with ``ab = 1/4``.

    Equalities are decided with relative tolerance ``tol``; the two lobes
    of Case II are not distinguished.
    """
    _require_critical(a, b)
    _check_time(t)
    if not (T > 0):
        raise DomainError(f"temperature must be positive, got {T}")
    Tb = boundary_temperature(a, b, t)
    on_one = _close(T, 1.0, tol)
    on_curve = _close(T, Tb, tol)
    if on_one and on_curve:
        return Phase.TACNODE
    if on_one:
        return Phase.BOUNDARY_I_II
    if on_curve:
        return Phase.BOUNDARY_II_III
    if T < 1.0:
        return Phase.CASE_I
    if T > Tb:
        return Phase.CASE_III
    return Phase.CASE_II


def scaling_params(a, b, K, L, L1=0.0, L2=0.0):
    """``(s*, tau*, kappa)`` of the triple scaling limit.

    ``L1`` and ``L2`` are the endpoint shifts of the varying-endpoint
    variant; they move ``s*`` by ``(L1 + L2) / 2`` and leave ``tau*`` alone.

    >>> scaling_params(0.5, 0.5, 1.0, 0.0)
    (2.0000000000000004, -2.0000000000000004, 2.8284271247461903)
    """
    _require_critical(a, b)
    w = math.sqrt(a) + math.sqrt(b)
    s = (K * K * w ** 4 - L + L1 + L2) / 2.0
    tau = -K * w * w
    return s, tau, 2.0 * w
