"""Hastings-McLeod solution of the inhomogeneous Painleve II equation.

Solves ``q'' = x q + 2 q**3 - nu`` on a finite interval by fourth-order
finite-difference collocation and damped Newton iteration, with boundary
conditions taken from the two tails ``q ~ nu / x`` (x -> +inf) and
``q ~ sqrt(-x / 2)`` (x -> -inf).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.interpolate import BPoly
from scipy.sparse.linalg import spsolve

from .errors import DomainError, NonConvergence

log = logging.getLogger(__name__)

__all__ = ["PIIConfig", "PIISolution", "solve_hastings_mcleod", "hamiltonian", "pii_rhs", "left_tail"]


@dataclass(frozen=True)
class PIIConfig:
    nu: float
    x_min: float = -20.0
    x_max: float = 20.0
    grid_size: int = 4001
    tol: float = 1e-9
    max_iter: int = 60
    nu_step: float = 0.25

    def validate(self):
        if not (self.nu > -0.5):
            raise DomainError(f"nu must exceed -1/2, got {self.nu}")
        if not (self.x_min < 0.0 < self.x_max):
            raise DomainError("need x_min < 0 < x_max")
        if self.grid_size < 11:
            raise DomainError("grid_size too small for the fourth-order stencil")
        if not (self.tol > 0):
            raise DomainError("tol must be positive")


def pii_rhs(x, q, nu):
    """Right-hand side ``x q + 2 q^3 - nu`` of the inhomogeneous Painleve II equation."""
    return x * q + 2.0 * q ** 3 - nu


@dataclass(frozen=True, eq=False)
class PIISolution:
    """Tabulated ``q``, ``q'`` and Hamiltonian ``u`` with a quintic Hermite interpolant.

    The interpolant uses ``q``, ``q'`` and ``q'' = x q + 2 q^3 - nu`` at
    every node, so off-grid values keep the accuracy of the collocation.
    """

    nu: float
    grid: np.ndarray
    q: np.ndarray
    qprime: np.ndarray
    u: np.ndarray
    residual: float
    iterations: int
    _poly: BPoly = field(repr=False)

    @property
    def x_min(self):
        return float(self.grid[0])

    @property
    def x_max(self):
        return float(self.grid[-1])

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        lo, hi = self.x_min, self.x_max
        if np.any(x < lo - 1e-12) or np.any(x > hi + 1e-12):
            raise DomainError(f"x outside solved interval [{lo}, {hi}]")
        return x

    def q_at(self, x):
        x = self._check(x)
        return self._poly(x)

    def qprime_at(self, x):
        x = self._check(x)
        return self._poly(x, 1)

    def u_at(self, x):
        return hamiltonian(self, x)


def _second_derivative_matrix(n, h):
    rows, cols, vals = [], [], []
    inner = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / (12.0 * h * h)
    edge = np.array([10.0, -15.0, -4.0, 14.0, -6.0, 1.0]) / (12.0 * h * h)
    for i in range(1, n - 1):
        if i == 1:
            idx, w = np.arange(0, 6), edge
        elif i == n - 2:
            idx, w = np.arange(n - 1, n - 7, -1), edge
        else:
            idx, w = np.arange(i - 2, i + 3), inner
        rows.extend([i] * len(idx))
        cols.extend(idx.tolist())
        vals.extend(w.tolist())
    return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _first_derivative(q, h):
    n = q.size
    d = np.empty_like(q)
    d[2:-2] = (q[:-4] - 8.0 * q[1:-3] + 8.0 * q[3:-1] - q[4:]) / (12.0 * h)
    fwd = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / (12.0 * h)
    nxt = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / (12.0 * h)
    d[0] = fwd @ q[:5]
    d[1] = nxt @ q[:5]
    d[-1] = -fwd @ q[-1:-6:-1]
    d[-2] = -nxt @ q[-1:-6:-1]
    if n < 5:
        raise DomainError("grid too small")
    return d


def left_tail(x, nu):
    """Asymptotic value of the Hastings-McLeod solution for ``x -> -inf``.

    ``q = sqrt(-x/2) (1 + sum_k a_k (-x)^(-3k/2))`` with the first four
    coefficients; the leading correction is ``-nu / (2 x)``.
    """
    y = -float(x)
    if not (y > 0):
        raise DomainError("left_tail needs x < 0")
    r2 = math.sqrt(2.0)
    n2 = nu * nu
    coeffs = (r2 * nu / 2.0,
              -3.0 * n2 / 4.0 - 1.0 / 8.0,
              r2 * nu * (16.0 * n2 + 11.0) / 16.0,
              -105.0 * n2 * n2 / 32.0 - 177.0 * n2 / 32.0 - 73.0 / 128.0)
    e = y ** -1.5
    total, p = 1.0, 1.0
    for a in coeffs:
        p *= e
        total += a * p
    return math.sqrt(y / 2.0) * total


def _initial_guess(x, nu):
    left = np.sqrt((np.sqrt(x * x + 1.0) - x) / 4.0)
    right = nu * x / (x * x + 1.0) if nu != 0 else 0.05 * np.exp(-np.abs(x))
    switch = 0.5 * (1.0 - np.tanh(x))
    return switch * left + (1.0 - switch) * right


def _newton(cfg, x, q0):
    n = x.size
    h = x[1] - x[0]
    nu = cfg.nu
    D2 = _second_derivative_matrix(n, h)
    fwd = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / (12.0 * h)
    left_value = left_tail(cfg.x_min, nu)
    xr = cfg.x_max
    # Robin factor at the right edge: q' = -k q
    k_right = 1.0 / xr if nu != 0.0 else math.sqrt(xr)

    def residual(q):
        F = D2 @ q - pii_rhs(x, q, nu)
        F[0] = q[0] - left_value
        F[-1] = -fwd @ q[-1:-6:-1] + k_right * q[-1]
        return F

    # boundary rows of the Jacobian are constant
    bnd = sparse.lil_matrix((n, n))
    bnd[0, 0] = 1.0
    for j, w in enumerate(-fwd):
        bnd[n - 1, n - 1 - j] = w
    bnd[n - 1, n - 1] += k_right
    bnd = bnd.tocsr()
    mask = np.ones(n)
    mask[0] = mask[-1] = 0.0
    interior_D2 = sparse.diags(mask) @ D2

    q = q0.copy()
    F = residual(q)
    norm = np.max(np.abs(F))
    for it in range(1, cfg.max_iter + 1):
        diag = mask * (-(x + 6.0 * q * q))
        J = (interior_D2 + sparse.diags(diag) + bnd).tocsc()
        step = spsolve(J, -F)
        lam = 1.0
        while True:
            trial = q + lam * step
            Ft = residual(trial)
            nt = np.max(np.abs(Ft))
            if nt < (1.0 - 1e-4 * lam) * norm or lam < 1e-6:
                break
            lam *= 0.5
        q, F, norm = trial, Ft, nt
        log.debug("PII Newton it=%d damping=%.3g residual=%.3e", it, lam, norm)
        if norm < cfg.tol:
            return q, norm, it
    raise NonConvergence(
        f"Painleve II Newton iteration did not converge (nu={nu}, residual={norm:.3e})",
        residual=norm)


def _build_solution(cfg, x, q, residual, iterations):
    h = x[1] - x[0]
    qp = _first_derivative(q, h)
    qpp = pii_rhs(x, q, cfg.nu)
    poly = BPoly.from_derivatives(x, np.column_stack([q, qp, qpp]))
    u = qp ** 2 - x * q ** 2 - q ** 4 + 2.0 * cfg.nu * q
    for arr in (x, q, qp, u):
        arr.setflags(write=False)
    return PIISolution(nu=cfg.nu, grid=x, q=q, qprime=qp, u=u, residual=residual,
                       iterations=iterations, _poly=poly)


def solve_hastings_mcleod(cfg, initial=None):
    """Compute the Hastings-McLeod solution on ``[cfg.x_min, cfg.x_max]``.

    Parameters
    ----------
    cfg : PIIConfig
    initial : PIISolution, optional
        Warm start (e.g. a solution at a nearby ``nu`` on the same grid).
        For ``|nu| > 1`` without a warm start, the solve walks a continuation
        ladder from ``nu = 1`` in steps of at most ``cfg.nu_step``.

    Raises
    ------
    NonConvergence
        If Newton's method exceeds ``cfg.max_iter`` iterations.
    """
    cfg.validate()
    x = np.linspace(cfg.x_min, cfg.x_max, cfg.grid_size)
    if initial is not None:
        if initial.grid.shape != x.shape or not np.allclose(initial.grid, x):
            q0 = initial.q_at(np.clip(x, initial.x_min, initial.x_max))
        else:
            q0 = np.array(initial.q)
        q, res, it = _newton(cfg, x, q0)
        return _build_solution(cfg, x, q, res, it)

    if abs(cfg.nu) > 1.0:
        start = math.copysign(1.0, cfg.nu)
        nsteps = int(math.ceil(abs(cfg.nu - start) / cfg.nu_step))
        ladder = np.linspace(start, cfg.nu, nsteps + 1)
        q = _newton(_replace_nu(cfg, ladder[0]), x, _initial_guess(x, ladder[0]))[0]
        total = 0
        for nu_k in ladder[1:]:
            q, res, it = _newton(_replace_nu(cfg, float(nu_k)), x, q)
            total += it
        return _build_solution(cfg, x, q, res, total)

    q, res, it = _newton(cfg, x, _initial_guess(x, cfg.nu))
    return _build_solution(cfg, x, q, res, it)


def _replace_nu(cfg, nu):
    return PIIConfig(nu=nu, x_min=cfg.x_min, x_max=cfg.x_max, grid_size=cfg.grid_size,
                     tol=cfg.tol, max_iter=cfg.max_iter, nu_step=cfg.nu_step)


def hamiltonian(sol, x):
    """Hamiltonian ``u = q'^2 - x q^2 - q^4 + 2 nu q`` at (possibly off-grid) ``x``."""
    x = sol._check(x)
    q = sol._poly(x)
    qp = sol._poly(x, 1)
    return qp ** 2 - x * q ** 2 - q ** 4 + 2.0 * sol.nu * q
