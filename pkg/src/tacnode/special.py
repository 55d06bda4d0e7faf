r"""Modified Bessel functions of the first kind and squared Bessel transition densities.

Everything here is vectorized over the argument ``z`` (or positions ``x, y``)
and works in log space internally, so that the product

.. math::
    e^{-(x+y)/2\tau} I_\alpha(\sqrt{xy}/\tau)

never overflows even when :math:`\tau \sim 1/n`.

Two branches are used for :math:`\log I_\alpha(z)`: the power series
(a sum of positive terms, summed with log-sum-exp) below the crossover
``z = 30 + 2|alpha|`` and the large-argument Hankel expansion above it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import DomainError

__all__ = [
    "DiffusionTime",
    "crossover",
    "log_bessel_i",
    "modified_bessel_i",
    "scaled_bessel_i",
    "log_sbp_density",
    "sbp_density",
    "rescale_time",
]

_SERIES_EXTRA_TERMS = 48
_ASYMPTOTIC_TERMS = 48


def _check_order(alpha):
    if not np.isfinite(alpha) or alpha <= -1.0:
        raise DomainError(f"Bessel order must satisfy alpha > -1, got {alpha!r}")


def crossover(alpha):
    """Argument at which :func:`log_bessel_i` switches from series to asymptotics."""
    return 30.0 + 2.0 * abs(alpha)


def _log_i_series(alpha, z):
    # terms (z/2)^(2k+alpha) / (k! Gamma(k+alpha+1)), all positive for alpha > -1
    z = np.atleast_1d(np.asarray(z, dtype=float))
    kmax = int(math.ceil(crossover(alpha))) + _SERIES_EXTRA_TERMS
    k = np.arange(kmax, dtype=float)
    log_norm = gammaln(k + 1.0) + gammaln(k + alpha + 1.0)
    with np.errstate(divide="ignore"):
        lz = np.log(0.5 * z)[:, None]
    log_terms = (2.0 * k + alpha) * lz - log_norm
    return logsumexp(log_terms, axis=1)


def _log_i_asymptotic(alpha, z):
    # I_a(z) ~ e^z / sqrt(2 pi z) * sum_k (-1)^k a_k(alpha) / z^k,
    # summed up to the smallest term
    z = np.atleast_1d(np.asarray(z, dtype=float))
    mu = 4.0 * alpha * alpha
    k = np.arange(1, _ASYMPTOTIC_TERMS + 1, dtype=float)
    factors = -(mu - (2.0 * k - 1.0) ** 2) / (8.0 * k)
    terms = np.cumprod(factors[None, :] / z[:, None], axis=1)
    mags = np.abs(terms)
    # cut each row at its smallest term
    cut = np.argmin(mags, axis=1)
    mask = np.arange(_ASYMPTOTIC_TERMS)[None, :] <= cut[:, None]
    total = 1.0 + np.sum(np.where(mask, terms, 0.0), axis=1)
    return z - 0.5 * np.log(2.0 * np.pi * z) + np.log(total)


def log_bessel_i(alpha, z):
    r"""Natural log of :math:`I_\alpha(z)` for ``z >= 0``.

    Returns ``-inf`` at ``z = 0`` for ``alpha > 0`` and ``+inf`` for
    ``alpha < 0`` (the function has an integrable blow-up there).
    """
    _check_order(alpha)
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr < 0) or np.any(np.isnan(z_arr)):
        raise DomainError("modified Bessel function requires z >= 0")
    flat = np.atleast_1d(z_arr).ravel()
    out = np.empty_like(flat)
    zero = flat == 0.0
    if alpha == 0.0:
        out[zero] = 0.0
    else:
        out[zero] = -np.inf if alpha > 0 else np.inf
    zc = crossover(alpha)
    small = (~zero) & (flat < zc)
    large = flat >= zc
    if np.any(small):
        out[small] = _log_i_series(alpha, flat[small])
    if np.any(large):
        out[large] = _log_i_asymptotic(alpha, flat[large])
    if z_arr.ndim == 0:
        return float(out[0])
    return out.reshape(z_arr.shape)


def scaled_bessel_i(alpha, z):
    r"""Exponentially scaled :math:`e^{-z} I_\alpha(z)`."""
    z_arr = np.asarray(z, dtype=float)
    with np.errstate(invalid="ignore"):
        return np.exp(log_bessel_i(alpha, z_arr) - z_arr)


def modified_bessel_i(alpha, z):
    r"""Modified Bessel function of the first kind :math:`I_\alpha(z)`.

    Parameters
    ----------
    alpha : float
        Order, ``alpha > -1``.
    z : float or array_like
        Real argument, ``z >= 0``.

    Returns
    -------
    float or ndarray
        Relative accuracy is about 1e-13 for ``z <= 500``.

    Raises
    ------
    DomainError
        If ``z < 0`` or ``alpha <= -1``.
    """
    return np.exp(log_bessel_i(alpha, z))


def _check_time(tau):
    if not np.all(np.asarray(tau) > 0):
        raise DomainError(f"diffusion time must be positive, got {tau!r}")


def log_sbp_density(alpha, tau, x, y):
    r"""Log of the squared Bessel transition density :math:`p_\tau^\alpha(x, y)`.

    Vectorized over ``x`` and ``y`` (broadcast together). ``x = 0`` uses the
    gamma-density form; ``x > 0`` combines the exponential with a scaled
    Bessel value as ``-(sqrt(x) - sqrt(y))**2 / (2 tau) + log(e^-z I(z))``.
    """
    _check_order(alpha)
    _check_time(tau)
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    if np.any(x < 0) or np.any(y <= 0):
        raise DomainError("density requires x >= 0 and y > 0")
    shape = x.shape
    x = np.atleast_1d(x).ravel()
    y = np.atleast_1d(y).ravel()
    out = np.empty_like(x)
    at_zero = x == 0.0
    if np.any(at_zero):
        yy = y[at_zero]
        out[at_zero] = (alpha * np.log(yy) - yy / (2.0 * tau)
                        - (alpha + 1.0) * math.log(2.0 * tau) - math.lgamma(alpha + 1.0))
    pos = ~at_zero
    if np.any(pos):
        xx, yy = x[pos], y[pos]
        z = np.sqrt(xx * yy) / tau
        out[pos] = (-math.log(2.0 * tau) + 0.5 * alpha * (np.log(yy) - np.log(xx))
                    - (np.sqrt(xx) - np.sqrt(yy)) ** 2 / (2.0 * tau)
                    + log_bessel_i(alpha, z) - z)
    if shape == ():
        return float(out[0])
    return out.reshape(shape)


def sbp_density(alpha, tau, x, y):
    """Squared Bessel transition density :math:`p_\\tau^\\alpha(x, y)` (per unit ``y``)."""
    val = np.exp(log_sbp_density(alpha, tau, x, y))
    return float(val) if np.ndim(val) == 0 else val


def rescale_time(T, n, t):
    """Physical diffusion time ``tau = T t / (2 n)``.

    >>> rescale_time(2.0, 10, 0.5)
    0.05
    """
    if not (T > 0):
        raise DomainError(f"temperature must be positive, got {T!r}")
    if int(n) != n or n < 1:
        raise DomainError(f"path count must be a positive integer, got {n!r}")
    if not (0.0 < t <= 1.0):
        raise DomainError(f"rescaled time must lie in (0, 1], got {t!r}")
    return T * t / (2.0 * n)


@dataclass(frozen=True)
class DiffusionTime:
    """Physical diffusion time together with the (T, t, n) it came from."""

    T: float
    t: float
    n: int

    @property
    def tau(self):
        return rescale_time(self.T, self.n, self.t)
