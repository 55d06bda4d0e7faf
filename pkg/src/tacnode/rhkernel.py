"""Numerical evaluation of the 4x4 Riemann-Hilbert matrix and the hard-edge tacnode kernel.

The matrix ``M(zeta)`` solves ``dM/dzeta = U(zeta) M`` with ``U`` from
:mod:`tacnode.laxpair`. Each column of ``M`` is pinned down by its large-zeta
behaviour ``(I + M_1/zeta + ...) D(zeta) A e^{phi_j(zeta)} e_j``, but that
behaviour only determines a solution uniquely along rays where the column is
exponentially smaller than all others. So every column is integrated inward
from ``|zeta| = R`` along its own recessive ray, then carried along a circular
arc to the evaluation point, and the jump matrices on the six rays in each
half plane are used to express all columns in one sector. Along the whole
path the column is stored as ``e^{-phi_j} m_j`` so that nothing over- or
underflows.

The half planes are handled separately: the upper one uses the sheet
``arg zeta in [0, pi]`` with ``arg(-zeta) = arg zeta - pi`` and yields the
boundary value ``M_+`` on the positive axis; the lower one mirrors it and is
used for diagnostics (``M_-`` and the symmetry relations).
"""

from __future__ import annotations

import cmath
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import AccuracyWarning, DomainError, FitFailure, StiffnessFailure
from .laxpair import MParams, entries_from_pii

log = logging.getLogger(__name__)

__all__ = [
    "RHConfig",
    "MEvaluation",
    "RHSolver",
    "MIXING",
    "jump_matrices",
    "formal_series",
    "solve_m_plus",
    "hat_transform",
    "tacnode_kernel",
    "kernel_matrix",
    "extract_residue",
    "ResidueEstimate",
    "residue_radii",
    "bessel_process_kernel",
    "symmetry_residuals",
    "default_radius",
]

_SQ2 = math.sqrt(2.0)
MIXING = np.array([
    [1, 0, -1j, 0],
    [0, 1, 0, 1j],
    [-1j, 0, 1, 0],
    [0, 1j, 0, 1],
], dtype=complex) / _SQ2

_HAT_BLOCK = np.array([
    [1, -1, 0, 0],
    [1, 1, 0, 0],
    [0, 0, 1, 1],
    [0, 0, -1, 1],
], dtype=complex)

_ROW = np.array([-1.0, 0.0, 1.0, 0.0], dtype=complex)
_COL = np.array([1.0, 0.0, 1.0, 0.0], dtype=complex)

_SIGMA3 = np.diag([1.0, 1.0, -1.0, -1.0]).astype(complex)
_SWAP = np.array([[0, 1], [1, 0]], dtype=complex)
_FLIP = np.block([[_SWAP, np.zeros((2, 2))], [np.zeros((2, 2)), -_SWAP]])
_OMEGA = np.block([[np.zeros((2, 2)), np.eye(2)], [-np.eye(2), np.zeros((2, 2))]]).astype(complex)


def _E(i, j):
    out = np.zeros((4, 4), dtype=complex)
    out[i - 1, j - 1] = 1.0
    return out


def jump_matrices(nu):
    """Jump matrices ``J_0 .. J_9`` keyed by ray index, with ``M_k = M_{k-1} J_k``.

    Ray ``k`` separates sector ``k - 1`` from sector ``k`` (ray 0 separates
    sector 9 from sector 0 along the positive axis).
    """
    ep = complex(np.exp(1j * np.pi * nu))
    em = 1.0 / ep
    eye = np.eye(4, dtype=complex)
    J = {}
    J[0] = np.array([[0, 0, 1, 0], [0, 1, 0, 0], [-1, 0, 0, 0], [0, 0, 0, 1]], dtype=complex)
    J[1] = eye + _E(3, 1)
    J[2] = eye - ep * _E(2, 1) + ep * _E(3, 4)
    J[3] = eye + em * _E(1, 2) - em * _E(4, 3)
    J[4] = eye - _E(4, 2)
    J[5] = np.array([[1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0], [0, 1, 0, 0]], dtype=complex)
    J[6] = eye - _E(4, 2)
    J[7] = eye - ep * _E(1, 2) + ep * _E(4, 3)
    J[8] = eye + em * _E(2, 1) - em * _E(3, 4)
    J[9] = eye + _E(3, 1)
    return J


def _snap(A, eps=1e-12):
    A = A.copy()
    A.real[np.abs(A.real) < eps] = 0.0
    A.imag[np.abs(A.imag) < eps] = 0.0
    return A


def _u_coefficients(e):
    """``U(zeta) = U1 zeta + U0 + Um1 / zeta``."""
    nu, s, tau, c, d = e.nu, e.s, e.tau, e.c, e.d
    ga = e.g_plus_a
    bh = e.b + e.h
    U1 = 1j * (_E(3, 1) - _E(4, 2))
    U0 = np.array([
        [-c + tau, d, 1j, 0],
        [-d, c - tau, 0, 1j],
        [-1j * (ga + s), -1j * bh, c + tau, d],
        [-1j * bh, -1j * (ga + s), -d, -c - tau],
    ], dtype=complex)
    Um1 = nu * (_E(1, 2) + _E(2, 1) - _E(3, 4) - _E(4, 3))
    return U1, U0, Um1


def _frame_coefficients(s, tau):
    """``H' H^{-1} = L1 zeta + L0 + Lm1 / zeta`` for ``H = D A E``."""
    L1 = 1j * (_E(3, 1) - _E(4, 2))
    L0 = (np.diag([tau, -tau, tau, -tau]).astype(complex)
          + 1j * (_E(1, 3) + _E(2, 4)) - 1j * s * (_E(3, 1) + _E(4, 2)))
    Lm1 = (np.diag([-0.25, -0.25, 0.25, 0.25]).astype(complex)
           + s * (-1j * _E(1, 3) + 1j * _E(2, 4)))
    return L1, L0, Lm1


def formal_series(e, order, window=5):
    """Coefficients ``M_1 .. M_order`` of the formal solution at infinity.

    Substituting ``M = (I + sum_k M_k zeta^-k) H`` into the ODE gives, for
    each power of ``zeta``, a Sylvester-type equation linking ``M_k`` to
    ``M_{k-1}`` and ``M_{k-2}``. The operator ``X -> U1 X - X U1`` is
    singular, so ``M_k`` is only fixed together with later equations: each
    step solves ``window`` consecutive equations for ``M_k .. M_{k+window-1}``
    in least squares and keeps ``M_k`` (four equations already suffice).
    """
    U1, U0, Um1 = _u_coefficients(e)
    _, L0, Lm1 = _frame_coefficients(e.s, e.tau)
    eye = np.eye(4, dtype=complex)
    eye16 = np.eye(16, dtype=complex)

    def left(B):
        return np.kron(B, eye)

    def right(B):
        return np.kron(eye, B.T)

    lead = left(U1) - right(U1)
    first = left(U0) - right(L0)

    def second(k):
        return left(Um1) - right(Lm1) + (k - 2) * eye16

    known = [eye]  # M_0
    for k in range(1, order + 1):
        A = np.zeros((16 * window, 16 * window), dtype=complex)
        rhs = np.zeros(16 * window, dtype=complex)
        for row in range(window):
            kk = k + row
            rows = slice(16 * row, 16 * (row + 1))
            A[rows, 16 * row:16 * (row + 1)] = lead
            # coefficient of M_{kk-1}
            if row >= 1:
                A[rows, 16 * (row - 1):16 * row] = first
            else:
                rhs[rows] -= first @ known[kk - 1].ravel()
            # coefficient of M_{kk-2}
            if kk - 2 < 0:
                continue
            if row >= 2:
                A[rows, 16 * (row - 2):16 * (row - 1)] = second(kk)
            else:
                rhs[rows] -= second(kk) @ known[kk - 2].ravel()
        x, *_ = np.linalg.lstsq(A, rhs, rcond=None)
        known.append(x[:16].reshape(4, 4))
    return known[1:]


def default_radius(s, points=()):
    """Starting radius for the inward integrations."""
    top = max((abs(complex(p)) for p in points), default=0.0)
    return max(14.0, 4.0 * (1.0 + abs(s)), 1.5 * top)


@dataclass(frozen=True)
class RHConfig:
    """Numerical settings of the RH solve.

    ``R`` of ``None`` picks :func:`default_radius`. ``series_tol`` bounds the
    smallest term of the formal series at ``R``; the radius grows until it is
    met. ``phi1, phi2`` fix the auxiliary jump rays in the upper half plane.
    """

    R: float | None = None
    rtol: float = 1e-12
    atol: float = 1e-14
    tol: float = 1e-8
    series_tol: float = 1e-13
    max_order: int = 30
    min_step: float = 1e-12
    phi1: float = math.pi / 6
    phi2: float = math.pi / 3


# (ray angle, sector) of the column integrations in each half plane
_UPPER_RAYS = ((math.pi, 4), (0.0, 0), (math.pi / 3, 1), (2 * math.pi / 3, 3))
_LOWER_RAYS = ((-math.pi, 5), (0.0, 9), (-math.pi / 3, 8), (-2 * math.pi / 3, 7))


class RHSolver:
    """Column integrations for fixed ``(nu, s, tau)``.

    Parameters
    ----------
    params : MParams
    entries : LaxEntries
        Lax scalars at the same ``(nu, s, tau)``.
    config : RHConfig, optional
    """

    def __init__(self, params, entries, config=None):
        params.validate()
        if (abs(entries.nu - params.nu) > 1e-14 or abs(entries.s - params.s) > 1e-14
                or abs(entries.tau - params.tau) > 1e-14):
            raise DomainError("LaxEntries were computed at different (nu, s, tau)")
        self.params = params
        self.entries = entries
        self.config = config or RHConfig()
        self.U1, self.U0, self.Um1 = _u_coefficients(entries)
        self.jumps = jump_matrices(params.nu)
        self.nfev = 0
        self.R = None
        self.series = None

    def _prepare(self, radius_needed):
        cfg = self.config
        R = cfg.R if cfg.R is not None else default_radius(self.params.s)
        if R < 1.5 * radius_needed:
            if cfg.R is not None:
                raise DomainError(f"R = {R} must exceed 1.5 times the largest |zeta| = {radius_needed}")
            R = 1.5 * radius_needed
        if self.R is not None and self.R >= R:
            return
        coeffs = formal_series(self.entries, cfg.max_order)
        norms = [float(np.max(np.abs(m))) for m in coeffs]
        for _ in range(12):
            terms = [nk / R ** (k + 1) for k, nk in enumerate(norms)]
            cut = int(np.argmin(terms))
            if terms[cut] < cfg.series_tol:
                break
            if cfg.R is not None:
                warnings.warn(f"formal series term {terms[cut]:.2e} at R = {R} exceeds "
                              f"{cfg.series_tol:.1e}", AccuracyWarning, stacklevel=3)
                break
            R *= 1.25
        self.R = R
        self.series = coeffs[:cut]
        self._rays = {}
        self._arcs = {}
        log.debug("RH solve: R=%.4g, series order %d", R, cut)

    # --- branches and frame -------------------------------------------------

    @staticmethod
    def _roots(r, psi, upper):
        """``(-zeta)^(1/2), zeta^(1/2), (-zeta)^(1/4), zeta^(1/4)`` on a sheet."""
        am = psi - math.pi if upper else psi + math.pi
        sr = math.sqrt(r)
        qr = math.sqrt(sr)
        return (sr * np.exp(0.5j * am), sr * np.exp(0.5j * psi),
                qr * np.exp(0.25j * am), qr * np.exp(0.25j * psi))

    def _phases(self, r, psi, upper):
        s, tau = self.params.s, self.params.tau
        sm, sp, _, _ = self._roots(r, psi, upper)
        z = r * np.exp(1j * psi)
        t1 = (2.0 / 3.0) * sm ** 3 + 2.0 * s * sm
        t2 = (2.0 / 3.0) * sp ** 3 + 2.0 * s * sp
        return np.array([-t1 + tau * z, -t2 - tau * z, t1 + tau * z, t2 - tau * z])

    def _phase_derivative(self, r, psi, upper):
        s, tau = self.params.s, self.params.tau
        sm, sp, _, _ = self._roots(r, psi, upper)
        d1 = -sm - s / sm
        d2 = sp + s / sp
        return np.array([-d1 + tau, -d2 - tau, d1 + tau, d2 - tau])

    def frame(self, r, psi, upper=True):
        """``H = D A E`` at ``zeta = r e^{i psi}``."""
        DA, phases = self.frame_parts(r, psi, upper)
        return DA @ np.diag(np.exp(phases))

    def frame_parts(self, r, psi, upper=True):
        """Algebraic part ``D A`` and exponents ``phi`` of the frame."""
        _, _, qm, qp = self._roots(r, psi, upper)
        D = np.diag([1.0 / qm, 1.0 / qp, qm, qp])
        return D @ MIXING, self._phases(r, psi, upper)

    def strip_frame(self, M, r, psi, upper=True):
        """``M H^-1`` with the exponentials removed column by column."""
        DA, phases = self.frame_parts(r, psi, upper)
        return (M * np.exp(-phases)[None, :]) @ np.linalg.inv(DA)

    def _prefactor(self, r, psi, upper):
        z = r * np.exp(1j * psi)
        F = np.eye(4, dtype=complex)
        zk = 1.0
        for Mk in self.series:
            zk /= z
            F = F + Mk * zk
        _, _, qm, qp = self._roots(r, psi, upper)
        D = np.diag([1.0 / qm, 1.0 / qp, qm, qp])
        return F @ D @ MIXING

    def U(self, zeta):
        return self.U1 * zeta + self.U0 + self.Um1 / zeta

    # --- integrations -------------------------------------------------------

    def _integrate(self, fun, t0, t1, y0, dense=False):
        cfg = self.config
        sol = solve_ivp(fun, (t0, t1), y0, method="DOP853", rtol=cfg.rtol, atol=cfg.atol,
                        dense_output=dense)
        self.nfev += sol.nfev
        if sol.status != 0:
            raise StiffnessFailure(f"integration from {t0:.4g} to {t1:.4g} failed: {sol.message}")
        steps = np.diff(sol.t)
        if steps.size and np.min(np.abs(steps)) < cfg.min_step and abs(t1 - t0) > cfg.min_step:
            raise StiffnessFailure(f"step size collapsed to {np.min(np.abs(steps)):.2e}")
        return sol

    def _field(self, j, upper):
        """``(zeta, v) -> (U(zeta) - phi_j'(zeta)) v`` on the given sheet."""
        U0 = self.U0
        nu = self.params.nu
        s, tau = self.params.s, self.params.tau
        shift = -math.pi if upper else math.pi
        sign_m = (1.0, 0.0, -1.0, 0.0)[j]
        sign_p = (0.0, -1.0, 0.0, 1.0)[j]
        tw = tau if j in (0, 2) else -tau

        def field(r, psi, v):
            z = r * cmath.exp(1j * psi)
            sr = math.sqrt(r)
            sm = sr * cmath.exp(0.5j * (psi + shift))
            sp = sr * cmath.exp(0.5j * psi)
            dphi = sign_m * (sm + s / sm) + sign_p * (sp + s / sp) + tw
            w = U0 @ v
            w[2] += 1j * z * v[0]
            w[3] -= 1j * z * v[1]
            c = nu / z
            w[0] += c * v[1]
            w[1] += c * v[0]
            w[2] -= c * v[3]
            w[3] -= c * v[2]
            return w - dphi * v, z

        return field

    def _ray(self, j, psi, upper, r_end):
        key = (j, psi, upper)
        cached = self._rays.get(key)
        if cached is not None and cached[0] <= r_end:
            return cached[1]
        r_stop = min(r_end, cached[0]) if cached is not None else r_end
        y0 = self._prefactor(self.R, psi, upper)[:, j]
        rot = cmath.exp(1j * psi)
        field = self._field(j, upper)

        def rhs(r, v):
            return rot * field(r, psi, v)[0]

        sol = self._integrate(rhs, self.R, r_stop, y0, dense=True)
        self._rays[key] = (r_stop, sol.sol)
        return sol.sol

    def _arc_rhs(self, j, r, upper):
        field = self._field(j, upper)

        def rhs(psi, v):
            w, z = field(r, psi, v)
            return 1j * z * w

        return rhs

    def _arc(self, j, r, psi0, psi1, upper, v0):
        if psi0 == psi1:
            return v0
        key = (j, r, psi0, upper, psi1 > psi0)
        dense = self._arcs.get(key)
        if dense is None:
            # one dense arc to the edge of the sheet serves every angle on that side
            edge = (math.pi if upper else 0.0) if psi1 > psi0 else (0.0 if upper else -math.pi)
            try:
                dense = self._integrate(self._arc_rhs(j, r, upper), psi0, edge, v0,
                                        dense=True).sol
            except StiffnessFailure:
                dense = False
            self._arcs[key] = dense
        if dense is not False:
            return dense(psi1)
        return self._integrate(self._arc_rhs(j, r, upper), psi0, psi1, v0).y[:, -1]

    def _radial(self, j, psi, r0, r1, upper, v0):
        if r0 == r1:
            return v0
        rot = cmath.exp(1j * psi)
        field = self._field(j, upper)

        def rhs(r, v):
            return rot * field(r, psi, v)[0]

        return self._integrate(rhs, r0, r1, v0).y[:, -1]

    def _growth(self, j, ray_psi, r_turn, r, psi, upper):
        """Log of the worst amplification of integration errors along a path.

        The path runs down the ray to ``r_turn``, around the arc to ``psi``
        and out to ``r``. An error created at a path point in the direction
        of column ``l`` grows relative to column ``j`` by the change of
        ``Re(phi_l - phi_j)`` between that point and the end.
        """
        def rel(rr, pp):
            ph = self._phases(rr, pp, upper).real
            return ph - ph[j]

        end = rel(r, psi)
        pts = [(rr, ray_psi) for rr in np.geomspace(self.R, r_turn, 24)]
        pts += [(r_turn, pp) for pp in np.linspace(ray_psi, psi, 48)]
        pts += [(rr, psi) for rr in np.geomspace(r_turn, r, 12)]
        return max(float(np.max(end - rel(rr, pp))) for rr, pp in pts)

    def _column(self, j, ray_psi, r, psi, upper):
        """``e^{-phi_j} m_j`` at ``r e^{i psi}`` for the column integrated on ``ray_psi``."""
        turns = [r]
        while turns[-1] > 1.0 and len(turns) < 6:
            turns.append(turns[-1] / 2.0)
        if psi == ray_psi:
            turns = [r]
        growth = [self._growth(j, ray_psi, rt, r, psi, upper) for rt in turns]
        # prefer the direct arc unless a detour is clearly better
        best = 0
        for i, g in enumerate(growth):
            if g < growth[best] - 2.0:
                best = i
        rt = turns[best]
        v = self._ray(j, ray_psi, upper, rt)(rt)
        v = self._arc(j, rt, ray_psi, psi, upper, v)
        return self._radial(j, psi, rt, r, upper, v)

    # --- sectors ------------------------------------------------------------

    def sector(self, psi, upper):
        """Sector index of angle ``psi`` on the given sheet (boundary rays go counter-clockwise)."""
        p1, p2 = self.config.phi1, self.config.phi2
        if upper:
            edges = (p1, p2, math.pi - p2, math.pi - p1)
            return int(sum(psi >= x for x in edges))
        edges = (-math.pi + p1, -math.pi + p2, -p2, -p1)
        return 5 + int(sum(psi >= x for x in edges))

    def transfer(self, k, upper):
        """``T_k`` with ``M_k = M_base T_k``; base sector 0 (upper) or 9 (lower)."""
        T = np.eye(4, dtype=complex)
        if upper:
            for m in range(1, k + 1):
                T = T @ self.jumps[m]
        else:
            for m in range(9, k, -1):
                T = T @ np.linalg.inv(self.jumps[m])
        return T

    def evaluate(self, zeta, upper=None):
        """``M`` at ``zeta`` in the sector containing it.

        Points on the positive axis need ``upper`` to select the boundary
        value (``True`` for ``M_+``, ``False`` for ``M_-``); points on the
        negative axis are taken from above (``upper`` is forced accordingly).
        """
        zeta = complex(zeta)
        r = abs(zeta)
        if r == 0.0:
            raise DomainError("M is singular at zeta = 0")
        psi = math.atan2(zeta.imag, zeta.real)
        if upper is None:
            if zeta.imag == 0.0 and zeta.real > 0:
                raise DomainError("specify upper=True/False for points on the positive axis")
            upper = psi >= 0.0
        if zeta.imag == 0.0 and zeta.real > 0:
            psi = 0.0
        elif zeta.imag == 0.0:
            psi = math.pi if upper else -math.pi
        elif (psi > 0) != upper:
            raise DomainError("upper flag contradicts the half plane of zeta")
        self._prepare(r)
        rays = _UPPER_RAYS if upper else _LOWER_RAYS
        W = np.empty((4, 4), dtype=complex)
        T = np.empty((4, 4), dtype=complex)
        phases = self._phases(r, psi, upper)
        for j, (ray_psi, k) in enumerate(rays):
            v = self._column(j, ray_psi, r, psi, upper)
            W[:, j] = v * np.exp(phases[j])
            T[:, j] = self.transfer(k, upper)[:, j]
        # express the integrated columns in the target sector; the transfer
        # entries are 0, +-1, +-e^{+-i nu pi}, and exact zeros must stay zero
        # because they multiply exponentially large columns
        k_target = self.sector(psi, upper)
        Tt = _snap(np.linalg.solve(self.transfer(k_target, upper), T))
        return W @ _snap(np.linalg.inv(Tt))

    def m_plus(self, u):
        if not (u > 0):
            raise DomainError(f"boundary values are taken on the positive axis, got {u}")
        return self.evaluate(complex(u), upper=True)

    def m_minus(self, u):
        if not (u > 0):
            raise DomainError(f"boundary values are taken on the positive axis, got {u}")
        return self.evaluate(complex(u), upper=False)


@dataclass(frozen=True, eq=False)
class MEvaluation:
    """``M_+`` and its hat transform at a list of points ``u > 0``.

    ``M_plus[i]`` is the upper boundary value at ``zeta = sqrt(points[i])``;
    ``Mhat_plus[i]`` is its hat transform at ``points[i]``.
    """

    points: tuple
    M_plus: tuple
    Mhat_plus: tuple
    det_drift: tuple
    R: float
    tol: float
    series_order: int
    nfev: int
    solver: RHSolver = field(repr=False)

    def max_det_drift(self):
        return max(self.det_drift) if self.det_drift else 0.0


def _as_solver(params, entries, config):
    if isinstance(entries, RHSolver):
        return entries
    return RHSolver(params, entries, config)


def solve_m_plus(params, entries, points, R=None, tol=1e-8, config=None):
    """Boundary values of ``M`` from above at ``zeta = sqrt(u)`` for each ``u``.

    Parameters
    ----------
    params : MParams
    entries : LaxEntries
    points : sequence of float
        Points ``u > 0`` of the hat variable.
    R : float, optional
        Starting radius; defaults to :func:`default_radius`.
    tol : float
        Bound on ``|det M_+ - 1|``; exceeding it issues an AccuracyWarning.

    Raises
    ------
    DomainError
        For a non-positive point.
    StiffnessFailure
        If an integration collapses.
    """
    pts = tuple(float(u) for u in points)
    if any(not (u > 0) for u in pts):
        raise DomainError("all points must be positive")
    cfg = config or RHConfig()
    cfg = RHConfig(R=R if R is not None else cfg.R, rtol=cfg.rtol, atol=cfg.atol, tol=tol,
                   series_tol=cfg.series_tol, max_order=cfg.max_order,
                   min_step=cfg.min_step, phi1=cfg.phi1, phi2=cfg.phi2)
    solver = RHSolver(params, entries, cfg)
    if pts:
        solver._prepare(math.sqrt(max(pts)))
    Ms, Mh, drift = [], [], []
    for u in pts:
        M = solver.m_plus(math.sqrt(u))
        Ms.append(M)
        Mh.append(_hat(M, u))
        drift.append(float(abs(np.linalg.det(M) - 1.0)))
    if drift and max(drift) > tol:
        warnings.warn(f"|det M_+ - 1| = {max(drift):.2e} exceeds {tol:.1e}", AccuracyWarning,
                      stacklevel=2)
    return MEvaluation(points=pts, M_plus=tuple(Ms), Mhat_plus=tuple(Mh), det_drift=tuple(drift),
                       R=solver.R, tol=tol, series_order=len(solver.series), nfev=solver.nfev,
                       solver=solver)


def _hat_diag(u):
    q = u ** 0.25
    return np.diag([q, 1.0 / q, q, 1.0 / q]).astype(complex)


def _hat(M, u):
    return _hat_diag(u) @ _HAT_BLOCK @ M


def hat_transform(M_plus, u):
    """``diag(u^1/4, u^-1/4, u^1/4, u^-1/4) B M_+(sqrt u)`` for the constant block ``B``.

    ``M_plus`` must be the boundary value at ``zeta = sqrt(u)``.
    """
    if not (u > 0):
        raise DomainError(f"hat transform needs u > 0, got {u}")
    return _hat(np.asarray(M_plus, dtype=complex), float(u))


def _hat_derivative(solver, M, u):
    # chain rule through the hat transform and dM/dzeta = U M
    z = math.sqrt(u)
    q = u ** 0.25
    dD = np.diag([0.25 / q ** 3, -0.25 / (q ** 5), 0.25 / q ** 3, -0.25 / q ** 5]).astype(complex)
    dM = solver.U(z) @ M / (2.0 * z)
    return dD @ _HAT_BLOCK @ M + _hat_diag(u) @ _HAT_BLOCK @ dM


def _diag_threshold(u):
    return 1e-4 * (1.0 + u)


def _kernel_value(solver, u, v, cache, imag_tol):
    def hat_at(x):
        if x not in cache:
            M = solver.m_plus(math.sqrt(x))
            cache[x] = (M, _hat(M, x))
        return cache[x]

    Mu, Hu = hat_at(u)
    if abs(u - v) < _diag_threshold(u):
        dH = _hat_derivative(solver, Mu, u)
        val = _ROW @ np.linalg.solve(Hu, dH @ _COL) / (2j * math.pi)
    else:
        _, Hv = hat_at(v)
        val = _ROW @ np.linalg.solve(Hv, Hu @ _COL) / (2j * math.pi * (u - v))
    if abs(val.imag) > imag_tol:
        warnings.warn(f"kernel has imaginary part {val.imag:.2e} at ({u}, {v})", AccuracyWarning,
                      stacklevel=3)
    return complex(val)


def tacnode_kernel(params, entries, u, v, config=None, imag_tol=1e-7, return_complex=False):
    """Hard-edge tacnode kernel ``K(u, v)``.

    ``entries`` may also be an :class:`RHSolver`, which reuses its ray
    integrations. Near the diagonal (``|u - v| < 1e-4 (1 + u)``) the
    derivative form is used.
    """
    if not (u > 0 and v > 0):
        raise DomainError("kernel arguments must be positive")
    solver = _as_solver(params, entries, config)
    solver._prepare(math.sqrt(max(u, v)))
    val = _kernel_value(solver, float(u), float(v), {}, imag_tol)
    return val if return_complex else val.real


def kernel_matrix(params, entries, us, vs=None, config=None, imag_tol=1e-7, return_complex=False):
    """``K(us[i], vs[j])`` as a matrix, sharing all integrations."""
    us = [float(x) for x in us]
    vs = us if vs is None else [float(x) for x in vs]
    if any(x <= 0 for x in us + vs):
        raise DomainError("kernel arguments must be positive")
    solver = _as_solver(params, entries, config)
    solver._prepare(math.sqrt(max(us + vs)))
    cache = {}
    out = np.empty((len(us), len(vs)), dtype=complex)
    for i, u in enumerate(us):
        for j, v in enumerate(vs):
            out[i, j] = _kernel_value(solver, u, v, cache, imag_tol)
    return out if return_complex else out.real


def bessel_process_kernel(params, entries, u, v, config=None, imag_tol=1e-7):
    """Kernel in the square-root variable: ``2 u^a v^-a sqrt(uv) K(u^2, v^2)``, ``a = nu - 1/2``."""
    if not (u > 0 and v > 0):
        raise DomainError("kernel arguments must be positive")
    a = params.nu - 0.5
    k = tacnode_kernel(params, entries, u * u, v * v, config=config, imag_tol=imag_tol)
    return 2.0 * (u / v) ** a * math.sqrt(u * v) * k


@dataclass(frozen=True)
class ResidueEstimate:
    """Estimated ``M_1`` with the derived ``d``, ``c`` and a stability measure.

    ``spread`` is the largest entrywise difference between the estimates at
    the individual radii; ``per_radius`` holds those estimates.
    """

    M1: np.ndarray
    d: float
    c: float
    spread: float
    radii: tuple
    per_radius: tuple


def _circle_residue(solver, rho, nodes):
    # trapezoid rule for (1/2 pi i) * contour integral of (M H^-1 - I) d zeta;
    # off-centre nodes keep clear of the rays at 0 and pi
    psis = (np.arange(nodes) + 0.5) * 2.0 * np.pi / nodes - np.pi
    acc = np.zeros((4, 4), dtype=complex)
    for psi in psis:
        upper = psi > 0
        z = rho * np.exp(1j * psi)
        X = solver.strip_frame(solver.evaluate(z, upper), rho, psi, upper)
        acc += (X - np.eye(4)) * z
    return acc / nodes


def residue_radii(s):
    """Default circle radii for :func:`extract_residue`."""
    base = 7.0 + 0.6 * abs(s)
    return (base, base + 1.0)


def extract_residue(params, entries, R_list=None, nodes=32, config=None, fit_tol=1e-3):
    """Estimate ``M_1`` from ``M H^-1`` on circles ``|zeta| = R``.

    ``M H^-1 - I`` is analytic outside a disk apart from jumps on the rays
    that decay like ``exp(-c R^(3/2))``, so its contour integral over a circle
    recovers the ``1/zeta`` coefficient up to those jumps and the trapezoid
    error. One estimate is formed per radius and the one at the largest
    radius is returned; the default radii grow slowly with ``|s|``.

    Raises
    ------
    FitFailure
        If the estimates at different radii differ by more than ``fit_tol``.
    """
    if R_list is None:
        R_list = residue_radii(params.s)
    radii = tuple(sorted(float(r) for r in R_list))
    if not radii or radii[0] <= 0:
        raise FitFailure("need at least one positive radius")
    solver = _as_solver(params, entries, config)
    solver._prepare(max(radii))
    estimates = [_circle_residue(solver, r, nodes) for r in radii]
    M1 = estimates[-1]
    spread = max((float(np.max(np.abs(m - M1))) for m in estimates), default=0.0)
    if not np.isfinite(spread) or spread > fit_tol:
        raise FitFailure(f"residue estimates did not stabilize (spread {spread:.2e})")
    d_hat = float((-1j * M1[0, 3]).real)
    c_hat = float((-1j * M1[0, 2]).real)
    return ResidueEstimate(M1=M1, d=d_hat, c=c_hat, spread=spread, radii=radii,
                           per_radius=tuple(estimates))


def symmetry_residuals(sol, s, tau, zetas=(1.2 * np.exp(0.3j), 0.7 * np.exp(0.1j), 1.5 * np.exp(2.5j)),
                       config=None):
    """Residuals of the three symmetry relations at off-axis points.

    Returns a dict with keys ``conjugate``, ``reflection`` and
    ``inverse_transpose``; the last one compares solves at ``tau`` and
    ``-tau``. Also reports ``jump``, the mismatch ``M_+ - M_- J_0`` at the
    moduli of ``zetas``.
    """
    nu = sol.nu
    p = MParams(nu=nu, s=s, tau=tau)
    pm = MParams(nu=nu, s=s, tau=-tau)
    A = RHSolver(p, entries_from_pii(sol, s, tau), config)
    B = RHSolver(pm, entries_from_pii(sol, s, -tau), config)
    conj = refl = inv_t = jump = 0.0
    J0 = A.jumps[0]
    for z in zetas:
        z = complex(z)
        M = A.evaluate(z)
        Mc = A.evaluate(z.conjugate())
        conj = max(conj, float(np.max(np.abs(Mc.conj() - _SIGMA3 @ M @ _SIGMA3))))
        Mr = A.evaluate(-z)
        refl = max(refl, float(np.max(np.abs(Mr - _FLIP @ M @ _FLIP))))
        Mneg = B.evaluate(z)
        lhs = np.linalg.inv(M).T
        rhs = _OMEGA @ Mneg @ _OMEGA.T
        inv_t = max(inv_t, float(np.max(np.abs(lhs - rhs))))
        r = abs(z)
        jump = max(jump, float(np.max(np.abs(A.m_plus(r) - A.m_minus(r) @ J0))))
    return {"conjugate": conj, "reflection": refl, "inverse_transpose": inv_t, "jump": jump}
