"""Invariant suite behind ``tacnode selftest``.

Each check returns a :class:`Check` with the measured value and the limit it
must stay under. The quick suite takes well under a minute; ``quick=False``
adds the extended-precision finite-n model and a longer sampler run.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    limit: float

    @property
    def passed(self):
        return bool(np.isfinite(self.value) and self.value <= self.limit)


def _bessel():
    from scipy.special import iv

    from .special import modified_bessel_i

    z = np.array([0.1, 1.0, 10.0, 50.0, 200.0])
    worst = 0.0
    for al in (-0.5, 0.0, 0.25, 1.7):
        worst = max(worst, float(np.max(np.abs(modified_bessel_i(al, z) / iv(al, z) - 1.0))))
    return [Check("bessel_relative_error", worst, 1e-12)]


def _painleve(sol):
    from .painleve import hamiltonian, left_tail

    nu = sol.nu
    out = [Check("pii_right_tail", abs(sol.q_at(20.0) * 20.0 / nu - 1.0), 1e-2),
           Check("pii_left_tail", abs(sol.q_at(-20.0) / left_tail(-20.0, nu) - 1.0), 1e-4)]
    h = 1e-3
    x = np.arange(-10.0, 10.0, h)
    du = (hamiltonian(sol, x + h) - hamiltonian(sol, x)) / h
    mid = sol.q_at(x + 0.5 * h)
    out.append(Check("hamiltonian_derivative", float(np.max(np.abs(du + mid ** 2))), 1e-5))
    return out


def _lax(sol):
    from .laxpair import check_compatibility

    rep = check_compatibility(sol, 0.5, 0.5)
    return [Check("lax_compatibility", rep.max_residual(), 1e-4)]


def _rh(sol):
    from .laxpair import MParams, entries_from_pii
    from .rhkernel import RHSolver, kernel_matrix

    s, tau = 0.3, 0.2
    params = MParams(sol.nu, s, tau)
    solver = RHSolver(params, entries_from_pii(sol, s, tau))
    det = max(abs(np.linalg.det(solver.m_plus(math.sqrt(u))) - 1.0) for u in (0.5, 2.0))
    J0 = solver.jumps[0]
    jump = float(np.max(np.abs(solver.m_plus(1.0) - solver.m_minus(1.0) @ J0)))
    us = [0.5, 1.0, 2.0]
    Kc = kernel_matrix(params, solver, us, return_complex=True)
    K = Kc.real
    minors = [np.linalg.det(K[np.ix_(idx, idx)])
              for k in (1, 2, 3) for idx in itertools.combinations(range(3), k)]
    return [Check("rh_det_drift", float(det), 1e-8),
            Check("rh_jump", jump, 1e-6),
            Check("kernel_imag", float(np.max(np.abs(Kc.imag))), 1e-7),
            Check("kernel_negative_minor", float(max(0.0, -min(minors))), 1e-8)]


def _phase():
    from .phase import Phase, classify_phase, mp_endpoints, scaling_params

    s, tau, kappa = scaling_params(0.5, 0.5, 1.0, 0.0)
    err = max(abs(s - 2.0), abs(tau + 2.0), abs(kappa - 2.0 * math.sqrt(2.0)))
    p, q = mp_endpoints(0.5, 0.5, 0.5, 1.0)
    err = max(err, abs(p), abs(q - 2.0))
    ok = (classify_phase(0.5, 0.5, 0.5, 1.0) is Phase.TACNODE
          and classify_phase(0.5, 0.5, 0.5, 0.8) is Phase.CASE_I
          and classify_phase(0.5, 0.5, 0.5, 3.0) is Phase.CASE_III)
    return [Check("phase_formulas", err, 1e-12),
            Check("phase_labels", 0.0 if ok else 1.0, 0.0)]


def _sampler(quick):
    from .sampler import init_ensemble, run_chain

    ens = init_ensemble(6, 16, 0.5, 0.5, 1.0, seed=1)
    res = run_chain(ens, 200 if quick else 2000, burn_in=200 if quick else 2000, thin=10)
    bad = 0.0
    try:
        ens.check()
    except AssertionError:
        bad = 1.0
    again = run_chain(init_ensemble(6, 16, 0.5, 0.5, 1.0, seed=1), 200 if quick else 2000,
                      burn_in=200 if quick else 2000, thin=10)
    same = float(np.max(np.abs(res.samples - again.samples)))
    return [Check("sampler_ordering", bad, 0.0),
            Check("sampler_determinism", same, 0.0),
            Check("sampler_acceptance_gap", max(0.0, 0.2 - res.acceptance, res.acceptance - 0.6), 0.0)]


def _finite(quick):
    from .finiten import WeightSystem, build_model, kernel_trace, reproducing_defect

    n = 4 if quick else 8
    model = build_model(WeightSystem(0.5, 0.5, 1.0, 0.5, n, 0.25), quad_size=512 if quick else None)
    return [Check("finite_trace", abs(kernel_trace(model) - n), 1e-6),
            Check("finite_reproducing", abs(reproducing_defect(model, 0.01, 0.02)), 1e-6)]


def run_checks(quick=True, nu=0.75):
    """Run every check and return the list of :class:`Check` results."""
    from .painleve import PIIConfig, solve_hastings_mcleod

    sol = solve_hastings_mcleod(PIIConfig(nu=nu))
    out = []
    out += _bessel()
    out += _painleve(sol)
    out += _lax(sol)
    out += _rh(sol)
    out += _phase()
    out += _sampler(quick)
    out += _finite(quick)
    return out
