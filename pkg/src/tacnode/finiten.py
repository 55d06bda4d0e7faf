"""Finite-n correlation kernel of non-intersecting squared Bessel paths.

At a fixed time ``t`` the path positions form a biorthogonal ensemble built
from four modified Bessel weights. With left functions
``f = (x^k w11)_{k<n1} + (x^k w12)_{k<n2}``, right functions
``g = (y^k w21)_{k<n1} + (y^k w22)_{k<n2}`` and Gram matrix
``G_ij = int f_i g_j`` the kernel is

    K_n(x, y) = sum_ij f_i(x) (G^-1)_ji g_j(y).

Monomial bases make ``G`` violently ill-conditioned, so the Gram matrix is
assembled and factorized with mpmath at a configurable working precision
(``TACNODE_PRECISION_BITS``, default 256 bits). The integrals are replaced
by a composite rule: Gauss-Jacobi on the panel touching the hard edge, where
every integrand is ``x^alpha`` times an entire function, and Gauss-Legendre
elsewhere.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field

import mpmath
import numpy as np
from scipy.special import ive, roots_jacobi

from .errors import DomainError, SingularGram
from .laxpair import MParams, entries_from_pii
from .painleve import PIIConfig, solve_hastings_mcleod
from .phase import _require_critical, scaling_params, t_star
from .rhkernel import RHConfig, RHSolver, tacnode_kernel
from .special import log_bessel_i

log = logging.getLogger(__name__)

__all__ = [
    "WeightSystem",
    "BiorthogonalModel",
    "ScalingRow",
    "ScalingReport",
    "QuadratureRule",
    "eval_weights",
    "composite_rule",
    "build_model",
    "finite_kernel",
    "kernel_trace",
    "reproducing_defect",
    "scaling_compare",
    "tacnode_limit",
    "cutoff",
    "precision_bits",
]

DEFAULT_PRECISION_BITS = 256
PANEL_ORDER = 16


def precision_bits(bits=None):
    """Working precision: explicit value, else ``TACNODE_PRECISION_BITS``, else 256."""
    if bits is None:
        env = os.environ.get("TACNODE_PRECISION_BITS")
        bits = int(env) if env else DEFAULT_PRECISION_BITS
    bits = int(bits)
    if bits < 53:
        raise DomainError(f"precision must be at least 53 bits, got {bits}")
    return bits


@dataclass(frozen=True)
class WeightSystem:
    """Parameters of the four weights at one time slice."""

    a: float
    b: float
    T: float
    t: float
    n: int
    alpha: float = 0.0

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0 and self.T > 0):
            raise DomainError("a, b and T must be positive")
        if not (0.0 < self.t < 1.0):
            raise DomainError(f"time must lie in (0, 1), got {self.t}")
        if int(self.n) != self.n or self.n < 2 or self.n % 2:
            raise DomainError(f"n must be a positive even integer, got {self.n}")
        if not (self.alpha > -1.0):
            raise DomainError(f"alpha must exceed -1, got {self.alpha}")

    @property
    def n1(self):
        return (int(self.n) + 1) // 2

    @property
    def n2(self):
        return int(self.n) - self.n1

    @property
    def c1(self):
        """Rate ``n / (T t)`` of the left weights."""
        return self.n / (self.T * self.t)

    @property
    def c2(self):
        """Rate ``n / (T (1 - t))`` of the right weights."""
        return self.n / (self.T * (1.0 - self.t))

    # (power of x, order of I, rate, endpoint) for w11, w12, w21, w22
    def _specs(self):
        al = self.alpha
        return ((0.5 * al, al, self.c1, self.a),
                (0.5 * (al + 1.0), al + 1.0, self.c1, self.a),
                (-0.5 * al, al, self.c2, self.b),
                (-0.5 * (al - 1.0), al - 1.0, self.c2, self.b))


def _weight(power, order, rate, end, x):
    z = 2.0 * rate * np.sqrt(end * x)
    if order > -1.0:
        return np.exp(power * np.log(x) - rate * x + log_bessel_i(order, z))
    # orders below -1 only occur for w22 with alpha < 0; scipy handles them
    return np.exp(power * np.log(x) - rate * x + z) * ive(order, z)


def eval_weights(ws, x):
    """``(w11, w12, w21, w22)`` at ``x > 0`` in double precision.

    The exponential and the Bessel growth are combined in log space, so the
    values stay finite for large ``n``. Vectorized over ``x``.
    """
    xa = np.asarray(x, dtype=float)
    if np.any(~(xa > 0)):
        raise DomainError("weights are evaluated at x > 0 only")
    vals = tuple(_weight(*spec, xa) for spec in ws._specs())
    if xa.ndim == 0:
        return tuple(float(v) for v in vals)
    return vals


def _log_envelope(ws, x, degree):
    # log of x^degree * |w1| * |w2| using the larger weight of each side
    w = eval_weights(ws, x)
    with np.errstate(divide="ignore"):
        left = np.log(np.maximum(np.abs(w[0]), np.abs(w[1])))
        right = np.log(np.maximum(np.abs(w[2]), np.abs(w[3])))
    return degree * np.log(x) + left + right


def cutoff(ws, bits):
    """Right end of the integration range.

    The largest Gram integrand ``x^(2 max(n1, n2) - 2) w1 w2`` is followed past
    its peak until it has dropped by ``2^-bits`` relative to the peak.
    """
    degree = 2 * max(ws.n1, ws.n2) - 2
    hi = (math.sqrt(ws.a) + math.sqrt(ws.b) + 4.0) ** 2
    while True:
        xs = np.linspace(hi * 1e-6, hi, 4000)
        env = _log_envelope(ws, xs, degree)
        peak = np.max(env)
        drop = peak - bits * math.log(2.0) - 10.0
        if env[-1] < drop:
            k = int(np.argmax(env))
            beyond = np.nonzero(env[k:] < drop)[0]
            return float(xs[k + beyond[0]])
        hi *= 2.0


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Composite Gauss-Legendre rule on ``(0, X_cut)``, stored in double."""

    nodes: np.ndarray
    weights: np.ndarray
    X_cut: float

    @property
    def size(self):
        return self.nodes.size


def composite_rule(X_cut, quad_size, order=PANEL_ORDER, alpha=0.0):
    """Gauss-Jacobi panel at the origin followed by uniform Gauss-Legendre panels.

    Every Gram integrand is ``x^alpha`` times an entire function of ``x``, so
    the first panel ``(0, h)`` uses the Gauss-Jacobi rule for the weight
    ``x^alpha`` (its weights are divided by ``x^alpha`` at the nodes, so the
    rule is applied to the full integrand like the others). ``quad_size`` is
    the total number of nodes, rounded to whole panels of ``order`` nodes;
    the first panel gets twice as many.
    """
    panels = max(2, int(quad_size) // order - 1)
    h = X_cut / panels
    tj, wj = roots_jacobi(2 * order, 0.0, alpha)
    # (1 + t)^alpha on [-1, 1] maps to (2 x / h)^alpha on [0, h]
    x0 = 0.5 * h * (tj + 1.0)
    w0 = wj * (0.5 * h) / (tj + 1.0) ** alpha
    gx, gw = np.polynomial.legendre.leggauss(order)
    xs, wts = [x0], [w0]
    for k in range(1, panels):
        lo = k * h
        xs.append(lo + 0.5 * h * (gx + 1.0))
        wts.append(0.5 * h * gw)
    return QuadratureRule(np.concatenate(xs), np.concatenate(wts), float(X_cut))


class _Basis:
    """Exact-precision evaluation of the left and right basis functions."""

    def __init__(self, ws, ctx, scale):
        self.ws = ws
        self.ctx = ctx
        self.scale = ctx.mpf(scale)
        self.specs = [(ctx.mpf(p), ctx.mpf(o), ctx.mpf(r), ctx.mpf(e))
                      for p, o, r, e in ws._specs()]

    def weights(self, x):
        ctx = self.ctx
        x = ctx.mpf(x)
        out = []
        for p, o, r, e in self.specs:
            out.append(x ** p * ctx.exp(-r * x) * ctx.besseli(o, 2 * r * ctx.sqrt(e * x)))
        return out

    def _blocks(self, x, wa, wb):
        ws = self.ws
        y = self.ctx.mpf(x) / self.scale
        powers = [self.ctx.one]
        for _ in range(max(ws.n1, ws.n2)):
            powers.append(powers[-1] * y)
        return [powers[k] * wa for k in range(ws.n1)] + [powers[k] * wb for k in range(ws.n2)]

    def both(self, x):
        w11, w12, w21, w22 = self.weights(x)
        return self._blocks(x, w11, w12), self._blocks(x, w21, w22)

    def left(self, x):
        w = self.weights(x)
        return self._blocks(x, w[0], w[1])

    def right(self, x):
        w = self.weights(x)
        return self._blocks(x, w[2], w[3])


def _gram(basis, rule):
    ctx = basis.ctx
    n = basis.ws.n
    F = [[None] * rule.size for _ in range(n)]
    H = [[None] * rule.size for _ in range(n)]
    for k, (x, w) in enumerate(zip(rule.nodes, rule.weights)):
        f, g = basis.both(float(x))
        wk = ctx.mpf(float(w))
        for i in range(n):
            F[i][k] = f[i] * wk
            H[i][k] = g[i]
    G = ctx.matrix(n, n)
    for i in range(n):
        for j in range(n):
            G[i, j] = ctx.fdot(F[i], H[j])
    return G


@dataclass(eq=False)
class BiorthogonalModel:
    """Gram matrix of a weight system under one quadrature rule.

    Kernel values go through ``ctx.lu_solve`` on the stored Gram matrix;
    mpmath caches the LU factors on the matrix, so repeated solves reuse
    one factorization.
    """

    ws: WeightSystem
    rule: QuadratureRule
    gram: object
    condition: float
    bits: int
    ctx: object = field(repr=False)
    basis: _Basis = field(repr=False)
    _solved: dict = field(default_factory=dict, repr=False)

    @property
    def X_cut(self):
        return self.rule.X_cut

    @property
    def quad_size(self):
        return self.rule.size

    def _coeffs(self, x):
        key = float(x)
        hit = self._solved.get(key)
        if hit is None:
            f = self.ctx.matrix(self.basis.left(key))
            hit = self.ctx.lu_solve(self.gram, f)
            self._solved[key] = hit
        return hit

    def kernel(self, x, y):
        z = self._coeffs(x)
        g = self.basis.right(float(y))
        return float(self.ctx.fdot(g, z))


def build_model(ws, quad_size=None, X_cut=None, precision_bits_=None, min_digits=12):
    """Assemble and factorize the Gram matrix.

    Parameters
    ----------
    ws : WeightSystem
    quad_size : int, optional
        Total quadrature nodes, at least ``4 n``. Default ``max(1024, 40 n)``.
    X_cut : float, optional
        Right end of the integration range; see :func:`cutoff`.
    precision_bits_ : int, optional
        Working precision in bits; see :func:`precision_bits`.
    min_digits : int
        Decimal digits that must survive the Gram conditioning.

    Raises
    ------
    SingularGram
        If the factorization breaks down or the condition number leaves
        fewer than ``min_digits`` digits at the working precision.
    """
    bits = precision_bits(precision_bits_)
    if quad_size is None:
        quad_size = max(1024, 40 * ws.n)
    if quad_size < 4 * ws.n:
        raise DomainError(f"quad_size must be at least 4 n = {4 * ws.n}")
    if X_cut is None:
        X_cut = cutoff(ws, bits)
    if not (X_cut > 0):
        raise DomainError("X_cut must be positive")
    ctx = mpmath.MPContext()
    ctx.prec = bits
    rule = composite_rule(X_cut, quad_size, alpha=ws.alpha)
    basis = _Basis(ws, ctx, scale=0.5 * X_cut)
    G = _gram(basis, rule)
    try:
        cond = ctx.mnorm(G, 1) * ctx.mnorm(ctx.inverse(G), 1)
    except ZeroDivisionError as exc:
        raise SingularGram("Gram matrix is singular at working precision") from exc
    cond_f = float(cond)
    digits = bits * math.log10(2.0) - math.log10(max(cond_f, 1.0))
    log.info("Gram matrix n=%d nodes=%d X_cut=%.4g cond=%.3e", ws.n, rule.size, X_cut, cond_f)
    if not math.isfinite(cond_f) or digits < min_digits:
        raise SingularGram(f"Gram condition {cond_f:.3e} leaves {digits:.1f} digits", condition=cond_f)
    return BiorthogonalModel(ws=ws, rule=rule, gram=G, condition=cond_f, bits=bits,
                             ctx=ctx, basis=basis)


def finite_kernel(model, x, y):
    """``K_n(x, y)``; ``x`` carries the left weights and ``y`` the right ones."""
    if not (x > 0 and y > 0):
        raise DomainError("kernel arguments must be positive")
    return model.kernel(x, y)


def _check_rule(model, rule):
    if rule is None:
        rule = composite_rule(model.X_cut, model.quad_size + 2 * PANEL_ORDER + 8,
                              order=PANEL_ORDER + 5, alpha=model.ws.alpha)
    return rule, _gram(model.basis, rule)


def kernel_trace(model, rule=None):
    """``int K_n(x, x) dx`` under an independent quadrature rule.

    Under the model's own rule the trace is ``n`` identically, so a finer,
    different rule is used; the result then measures quadrature error.
    """
    ctx = model.ctx
    _, G2 = _check_rule(model, rule)
    n = model.ws.n
    total = ctx.zero
    for i in range(n):
        col = ctx.lu_solve(model.gram, G2.column(i))
        total += col[i]
    return float(total)


def reproducing_defect(model, x, y, rule=None):
    """``int K_n(x, z) K_n(z, y) dz - K_n(x, y)``, integral by an independent rule."""
    ctx = model.ctx
    _, G2 = _check_rule(model, rule)
    a = model._coeffs(x)
    g = ctx.matrix(model.basis.right(float(y)))
    b = ctx.lu_solve(model.gram.T, g)
    # int K(x,z) K(z,y) dz = a^T G2^T b
    total = sum(a[j] * G2[i, j] * b[i] for i in range(model.ws.n) for j in range(model.ws.n))
    return float(total - ctx.fdot(g, a))


@dataclass(frozen=True)
class ScalingRow:
    u: float
    v: float
    finite: float
    limit: float
    reldev: float


@dataclass(frozen=True)
class ScalingReport:
    """Rescaled finite-n kernel against the limiting kernel on a grid."""

    n: int
    K: float
    L: float
    a: float
    b: float
    t: float
    T: float
    alpha: float
    s: float
    tau: float
    kappa: float
    rows: tuple

    @property
    def max_reldev(self):
        return max(r.reldev for r in self.rows)

    @property
    def mean_reldev(self):
        return float(np.mean([r.reldev for r in self.rows]))


def scaling_compare(n, K_shift, L, grid=(0.5, 1.0, 2.0), a=0.5, b=0.5, alpha=0.25,
                    L1=0.0, L2=0.0, quad_size=None, precision_bits_=None,
                    limit=None, rh_config=None):
    """Compare ``K_n`` near the hard edge with its tacnode limit.

    Time and temperature are ``t = t* + K n^(-1/3)`` and ``T = 1 + L n^(-2/3)``
    with ``t*`` computed from the critical pair ``(a, b)``. Nonzero ``L1, L2``
    switch on varying endpoints ``a (1 + 2 L1 n^(-2/3))`` and
    ``b (1 + 2 L2 n^(-2/3))``, which shift ``s*`` by ``(L1 + L2) / 2``.

    Every ordered pair ``(u, v)`` from ``grid`` is tabulated. The finite side
    is ``K_n(u / c, v / c) / c`` with ``c = kappa^2 n^(4/3)``; the limit side is
    ``u^(alpha/2) v^(-alpha/2) K_tacnode(u, v)``. ``limit`` may be a
    precomputed mapping ``(u, v) -> K_tacnode(u, v)``.
    """
    if int(n) != n or n < 2 or n % 2:
        raise DomainError(f"n must be a positive even integer, got {n}")
    _require_critical(a, b)
    s, tau, kappa = scaling_params(a, b, K_shift, L, L1, L2)
    t = t_star(a, b) + K_shift * n ** (-1.0 / 3.0)
    T = 1.0 + L * n ** (-2.0 / 3.0)
    an = a * (1.0 + 2.0 * L1 * n ** (-2.0 / 3.0))
    bn = b * (1.0 + 2.0 * L2 * n ** (-2.0 / 3.0))
    ws = WeightSystem(an, bn, T, t, int(n), alpha)
    model = build_model(ws, quad_size=quad_size, precision_bits_=precision_bits_)
    c = kappa ** 2 * n ** (4.0 / 3.0)
    pairs = [(u, v) for u in grid for v in grid]
    if limit is None:
        limit = tacnode_limit(alpha, s, tau, grid, config=rh_config)
    rows = []
    for u, v in pairs:
        fin = finite_kernel(model, u / c, v / c) / c
        lim = u ** (0.5 * alpha) * v ** (-0.5 * alpha) * limit[(u, v)]
        rows.append(ScalingRow(u, v, fin, lim, abs(fin - lim) / max(abs(lim), 1e-300)))
    return ScalingReport(n=int(n), K=K_shift, L=L, a=an, b=bn, t=t, T=T, alpha=alpha,
                         s=s, tau=tau, kappa=kappa, rows=tuple(rows))


def tacnode_limit(alpha, s, tau, grid, config=None):
    """``{(u, v): K_tacnode(u, v)}`` over all ordered pairs of ``grid``."""
    nu = alpha + 0.5
    sol = solve_hastings_mcleod(PIIConfig(nu=nu))
    params = MParams(nu, s, tau)
    solver = RHSolver(params, entries_from_pii(sol, s, tau), config or RHConfig())
    return {(u, v): tacnode_kernel(params, solver, u, v) for u in grid for v in grid}
