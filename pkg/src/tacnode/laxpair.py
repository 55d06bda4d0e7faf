"""Lax-pair coefficients and the matrices U, V, W of the 4x4 model problem.

The scalars entering the Lax pair are closed-form functions of the
Hastings-McLeod solution ``q`` and its Hamiltonian ``u`` evaluated at
``x* = 2^(2/3) (2 s - tau^2)``. Only the combinations that the Lax matrices
need (``g + a``, ``b``, ``h``, ``f``) are formed; the individual residue
entries ``a``, ``e``, ``g`` are not available in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = [
    "MParams",
    "LaxEntries",
    "x_star",
    "entries_from_pii",
    "lax_U",
    "lax_U_dzeta",
    "lax_V",
    "lax_W",
    "CompatibilityReport",
    "check_compatibility",
]

_C13 = 2.0 ** (-1.0 / 3.0)
_C23 = 2.0 ** (-2.0 / 3.0)


@dataclass(frozen=True)
class MParams:
    """Parameters of the 4x4 model problem; only ``r1 = r2 = 1`` is supported downstream."""

    nu: float
    s: float
    tau: float
    r1: float = 1.0
    r2: float = 1.0

    def validate(self):
        if not (self.nu > -0.5):
            raise DomainError(f"nu must exceed -1/2, got {self.nu}")
        if self.r1 != 1.0 or self.r2 != 1.0:
            raise DomainError("kernel evaluation requires r1 = r2 = 1")
        if not (np.isfinite(self.s) and np.isfinite(self.tau)):
            raise DomainError("s and tau must be finite reals")
        return self


@dataclass(frozen=True)
class LaxEntries:
    nu: float
    s: float
    tau: float
    d: float
    c: float
    b: float
    h: float
    f: float
    g_plus_a: float
    x_star: float


def x_star(s, tau):
    """Painleve variable ``2^(2/3) (2 s - tau^2)`` at which ``q`` is sampled."""
    return 2.0 ** (2.0 / 3.0) * (2.0 * s - tau * tau)


def entries_from_pii(sol, s, tau):
    """Lax-pair scalars at ``(s, tau)`` from a Hastings-McLeod solution.

    ``b`` uses the analytic form ``-2^(-2/3) q'(x*) + c d + tau d``, which is
    the chain-rule reduction of ``(1/4tau) dd/dtau + c d + tau d`` and stays
    regular at ``tau = 0``.

    Raises
    ------
    DomainError
        If ``x*`` falls outside the interval on which ``sol`` was computed.
    """
    xs = x_star(s, tau)
    if not (sol.x_min <= xs <= sol.x_max):
        raise DomainError(
            f"x* = {xs:.6g} for (s, tau) = ({s}, {tau}) lies outside "
            f"[{sol.x_min}, {sol.x_max}]")
    nu = sol.nu
    q = float(sol.q_at(xs))
    qp = float(sol.qprime_at(xs))
    u = float(sol.u_at(xs))
    d = _C13 * q
    c = -_C13 * u + s * s
    b = -_C23 * qp + c * d + tau * d
    h = b - 2.0 * tau * d
    f = (-2.0 * b * c + c * c * d + 2.0 * tau * c * d + 2.0 * tau * tau * d
         - d ** 3 - 2.0 * s * d + nu)
    g_plus_a = -c * c + d * d + s
    return LaxEntries(nu=nu, s=s, tau=tau, d=d, c=c, b=b, h=h, f=f,
                      g_plus_a=g_plus_a, x_star=xs)


def lax_U(e, zeta):
    """Coefficient of ``dM/dzeta = U M``; simple pole at ``zeta = 0``."""
    zeta = complex(zeta)
    if zeta == 0:
        raise DomainError("U has a simple pole at zeta = 0")
    nu, s, tau = e.nu, e.s, e.tau
    c, d = e.c, e.d
    ga = e.g_plus_a
    bh = e.b + e.h
    r = nu / zeta
    return np.array([
        [-c + tau, d + r, 1j, 0.0],
        [-d + r, c - tau, 0.0, 1j],
        [-1j * (-zeta + ga + s), -1j * bh, c + tau, d - r],
        [-1j * bh, -1j * (zeta + ga + s), -d - r, -c - tau],
    ], dtype=complex)


def lax_U_dzeta(e, zeta):
    zeta = complex(zeta)
    r = -e.nu / zeta ** 2
    return np.array([
        [0.0, r, 0.0, 0.0],
        [r, 0.0, 0.0, 0.0],
        [1j, 0.0, 0.0, -r],
        [0.0, -1j, -r, 0.0],
    ], dtype=complex)


def lax_V(e, zeta):
    """Coefficient of ``dM/ds = V M``; linear in ``zeta``."""
    zeta = complex(zeta)
    c, d = e.c, e.d
    ga = e.g_plus_a
    bmh = e.b - e.h
    return 2.0 * np.array([
        [c, d, -1j, 0.0],
        [d, c, 0.0, 1j],
        [1j * (-zeta + ga), 1j * bmh, -c, -d],
        [-1j * bmh, -1j * (zeta + ga), -d, -c],
    ], dtype=complex)


def _lax_V_dzeta():
    out = np.zeros((4, 4), dtype=complex)
    out[2, 0] = -2j
    out[3, 1] = -2j
    return out


def lax_W(e, zeta):
    """Coefficient of ``dM/dtau = W M``."""
    zeta = complex(zeta)
    b, d, f, h = e.b, e.d, e.f, e.h
    return np.array([
        [zeta, -2.0 * b, 0.0, -2j * d],
        [-2.0 * b, -zeta, 2j * d, 0.0],
        [0.0, -2j * f, zeta, -2.0 * h],
        [2j * f, 0.0, -2.0 * h, -zeta],
    ], dtype=complex)


def _lax_W_dzeta():
    return np.diag([1.0, -1.0, 1.0, -1.0]).astype(complex)


def _richardson_first(fun, x0, step):
    def central(hh):
        return (fun(x0 + hh) - fun(x0 - hh)) / (2.0 * hh)
    return (4.0 * central(step / 2.0) - central(step)) / 3.0


def _richardson_second(fun, x0, step):
    f0 = fun(x0)

    def central(hh):
        return (fun(x0 + hh) - 2.0 * f0 + fun(x0 - hh)) / (hh * hh)
    return (4.0 * central(step / 2.0) - central(step)) / 3.0


@dataclass(frozen=True)
class CompatibilityReport:
    """Residuals of the compatibility identities at one ``(nu, s, tau)``.

    ``rows`` holds ``(identity, residual)`` pairs in a fixed order.
    """

    nu: float
    s: float
    tau: float
    rows: tuple

    def as_dict(self):
        return dict(self.rows)

    def max_residual(self):
        return max(r for _, r in self.rows)


DEFAULT_ZETAS = (1.0 + 1.0j, -2.0, 0.5j)


def check_compatibility(sol, s, tau, step=1e-3, step2=1e-2, zetas=DEFAULT_ZETAS):
    """Finite-difference residuals of the compatibility identities.

    Returned identities, in order:

    ``c_s``
        ``c' - 4 d^2 - 2 s``
    ``d_s``
        ``d' - 4 (-b + c d + tau d)``
    ``b_s``
        ``b' + 4 b (c + tau) - 4 d (c^2 + 2 tau c + 2 tau^2) + 4 d^3 + 6 s d - 2 nu``
    ``d_ss``
        ``d'' - 32 d^3 - 32 s d + 16 tau^2 d + 8 nu``
    ``d_tau``
        ``(1/4tau) dd/dtau - (b - c d - tau d)``, only for ``tau != 0``
    ``zero_curvature_s``
        ``max |dU/ds - dV/dzeta - V U + U V|`` over ``zetas``
    ``zero_curvature_tau``
        ``max |dU/dtau - dW/dzeta - W U + U W|`` over ``zetas``

    Derivatives in ``s`` and ``tau`` are Richardson-extrapolated central
    differences (``step`` for first, ``step2`` for second derivatives).

    Raises
    ------
    DomainError
        If the difference stencil leaves the solved interval.
    """
    e = entries_from_pii(sol, s, tau)
    nu = sol.nu
    for ds in (step, step2):
        entries_from_pii(sol, s - ds, tau)
        entries_from_pii(sol, s + ds, tau)
    entries_from_pii(sol, s, tau - step)
    entries_from_pii(sol, s, tau + step)

    def along_s(attr):
        return lambda x: getattr(entries_from_pii(sol, x, tau), attr)

    c_s = _richardson_first(along_s("c"), s, step)
    d_s = _richardson_first(along_s("d"), s, step)
    b_s = _richardson_first(along_s("b"), s, step)
    d_ss = _richardson_second(along_s("d"), s, step2)
    b, c, d = e.b, e.c, e.d
    rows = [
        ("c_s", abs(c_s - 4.0 * d * d - 2.0 * s)),
        ("d_s", abs(d_s - 4.0 * (-b + c * d + tau * d))),
        ("b_s", abs(b_s + 4.0 * b * (c + tau)
                    - 4.0 * d * (c * c + 2.0 * tau * c + 2.0 * tau * tau)
                    + 4.0 * d ** 3 + 6.0 * s * d - 2.0 * nu)),
        ("d_ss", abs(d_ss - 32.0 * d ** 3 - 32.0 * s * d + 16.0 * tau * tau * d + 8.0 * nu)),
    ]
    if tau != 0.0:
        d_tau = _richardson_first(lambda t: entries_from_pii(sol, s, t).d, tau, step)
        rows.append(("d_tau", abs(d_tau / (4.0 * tau) - (b - c * d - tau * d))))

    zc_s = 0.0
    zc_tau = 0.0
    for z in zetas:
        U = lax_U(e, z)
        V = lax_V(e, z)
        W = lax_W(e, z)
        U_s = _richardson_first(lambda x: lax_U(entries_from_pii(sol, x, tau), z), s, step)
        U_t = _richardson_first(lambda t: lax_U(entries_from_pii(sol, s, t), z), tau, step)
        R_s = U_s - _lax_V_dzeta() - V @ U + U @ V
        R_t = U_t - _lax_W_dzeta() - W @ U + U @ W
        zc_s = max(zc_s, float(np.max(np.abs(R_s))))
        zc_tau = max(zc_tau, float(np.max(np.abs(R_t))))
    rows.append(("zero_curvature_s", zc_s))
    rows.append(("zero_curvature_tau", zc_tau))
    return CompatibilityReport(nu=nu, s=s, tau=tau, rows=tuple(rows))
