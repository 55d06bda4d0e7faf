"""Acceptance criteria 1-11.

Each ``criterion_*`` function measures one criterion and returns a list of
:class:`Outcome` records. Under pytest every outcome is also echoed into the
"acceptance criteria" section of the terminal summary. Run the file directly
for a plain report::

    PYTHONPATH=src python tests/test_acceptance.py          # everything
    PYTHONPATH=src python tests/test_acceptance.py 1 4 8    # a selection

Criteria that the implementation cannot meet as stated are kept as strict
xfails, so an unexpected pass shows up as a failure.
"""

import itertools
import math
import os
import subprocess
import sys
import tempfile
from dataclasses import dataclass

import numpy as np
import pytest

HERE = os.path.dirname(os.path.abspath(__file__))
SRC = os.path.join(HERE, "..", "src")
if SRC not in sys.path:
    sys.path.insert(0, SRC)

from tacnode.finiten import (  # noqa: E402
    WeightSystem,
    build_model,
    kernel_trace,
    reproducing_defect,
    scaling_compare,
    tacnode_limit,
)
from tacnode.laxpair import MParams, check_compatibility, entries_from_pii  # noqa: E402
from tacnode.painleve import PIIConfig, hamiltonian, solve_hastings_mcleod  # noqa: E402
from tacnode.phase import mp_endpoints  # noqa: E402
from tacnode.rhkernel import (  # noqa: E402
    RHConfig,
    RHSolver,
    default_radius,
    extract_residue,
    kernel_matrix,
    solve_m_plus,
    symmetry_residuals,
)
from tacnode.sampler import init_ensemble, minimum_profile, run_chain  # noqa: E402

try:
    from conftest import record
except ImportError:  # run as a script
    record = print

NUS = (0.25, 0.75, 1.5)


@dataclass(frozen=True)
class Outcome:
    criterion: int
    label: str
    value: float
    limit: float
    passed: bool

    def line(self):
        flag = "PASS" if self.passed else "FAIL"
        return f"[{flag}] C{self.criterion} {self.label}: {self.value:.3e} (limit {self.limit:.1e})"


def _below(criterion, label, value, limit):
    value = float(value)
    return Outcome(criterion, label, value, limit, bool(np.isfinite(value) and value <= limit))


_PII = {}


def _hm(nu):
    if nu not in _PII:
        _PII[nu] = solve_hastings_mcleod(PIIConfig(nu=nu))
    return _PII[nu]


def _solver(nu, s, tau, config=None):
    params = MParams(nu, s, tau)
    return params, RHSolver(params, entries_from_pii(_hm(nu), s, tau), config)


# criteria -----------------------------------------------------------------

def criterion_1(nus=NUS):
    out = []
    for nu in nus:
        sol = _hm(nu)
        out.append(_below(1, f"right tail nu={nu}", abs(sol.q_at(20.0) * 20.0 / nu - 1.0), 1e-2))
        out.append(_below(1, f"left tail nu={nu}", abs(sol.q_at(-20.0) / math.sqrt(10.0) - 1.0), 5e-3))
    return out


def criterion_2(nus=NUS):
    h = 1e-3
    x = np.arange(-10.0, 10.0 + h / 2, h)[:-1]
    out = []
    for nu in nus:
        sol = _hm(nu)
        du = (hamiltonian(sol, x + h) - hamiltonian(sol, x)) / h
        err = np.max(np.abs(du + sol.q_at(x + h / 2) ** 2))
        out.append(_below(2, f"u' + q^2 nu={nu}", err, 1e-5))
    return out


def criterion_3(nu=0.75):
    sol = _hm(nu)
    right = entries_from_pii(sol, 5.0, 0.0)
    left = entries_from_pii(sol, -5.0, 0.0)
    return [_below(3, "d(5) - nu/20", abs(right.d - nu / 20.0), 5e-3),
            _below(3, "c(5) - 25", abs(right.c - 25.0), 0.1),
            _below(3, "d(-5) - sqrt(5)", abs(left.d - math.sqrt(5.0)), 2e-2)]


def criterion_4():
    first = second = 0.0
    for nu, s, tau in itertools.product((0.25, 0.75), (-2.0, -0.5, 0.5, 2.0), (0.0, 0.5)):
        rep = check_compatibility(_hm(nu), s, tau).as_dict()
        second = max(second, rep.pop("d_ss"))
        first = max(first, max(rep.values()))
    return [_below(4, "first-derivative and matrix identities", first, 1e-6),
            _below(4, "second-derivative identity", second, 1e-4)]


def criterion_5(nu=0.75, cases=((0.0, 0.0), (1.0, 0.4), (-1.0, 0.4))):
    det = sym = robust = 0.0
    for s, tau in cases:
        params = MParams(nu, s, tau)
        e = entries_from_pii(_hm(nu), s, tau)
        ev = solve_m_plus(params, e, [0.5, 1.0, 2.0, 5.0])
        det = max(det, ev.max_det_drift())
        res = symmetry_residuals(_hm(nu), s, tau)
        sym = max(sym, res["conjugate"], res["reflection"], res["inverse_transpose"])
        R0 = default_radius(s)
        K0 = kernel_matrix(params, e, [0.5, 2.0], config=RHConfig(R=R0))
        K1 = kernel_matrix(params, e, [0.5, 2.0], config=RHConfig(R=1.5 * R0))
        robust = max(robust, float(np.max(np.abs(K0 - K1))))
    return [_below(5, "|det M+ - 1|", det, 1e-8),
            _below(5, "symmetry residuals", sym, 1e-6),
            _below(5, "K change for R -> 1.5R", robust, 1e-7)]


def criterion_6(nu=0.75, cases=((1.0, 0.0), (1.0, 0.4), (-1.0, 0.4))):
    worst = 0.0
    for s, tau in cases:
        params = MParams(nu, s, tau)
        e = entries_from_pii(_hm(nu), s, tau)
        est = extract_residue(params, e)
        worst = max(worst, abs(est.d - e.d), abs(est.c - e.c))
    return [_below(6, "residue d, c vs Painleve entries", worst, 1e-4)]


def criterion_7(nu=0.75, cases=((0.0, 0.0), (1.0, 0.4), (-1.0, 0.4), (-2.0, 0.0)),
                grid=(0.25, 0.5, 1.0, 2.0, 4.0)):
    neg = imag = 0.0
    for s, tau in cases:
        params, solver = _solver(nu, s, tau)
        Kc = kernel_matrix(params, solver, grid, return_complex=True)
        imag = max(imag, float(np.max(np.abs(Kc.imag))))
        K = Kc.real
        for k in (1, 2, 3):
            for idx in itertools.combinations(range(len(grid)), k):
                neg = max(neg, -float(np.linalg.det(K[np.ix_(idx, idx)])))
    return [_below(7, "most negative principal minor", max(neg, 0.0), 1e-8),
            _below(7, "|Im K|", imag, 1e-7)]


def criterion_8():
    model = build_model(WeightSystem(0.5, 0.5, 1.0, 0.5, 8, 0.25))
    trace = abs(kernel_trace(model) - 8.0)
    rep = max(abs(reproducing_defect(model, x, y)) for x, y in ((0.01, 0.02), (0.3, 1.1), (2.0, 2.0)))
    return [_below(8, "trace - 8", trace, 1e-6),
            _below(8, "reproducing identity", rep, 1e-6)]


def criterion_9(K, L, ns=(8, 16, 24), grid=(0.5, 1.0, 2.0), alpha=0.25):
    from tacnode.errors import TacnodeError
    from tacnode.phase import scaling_params

    s, tau, _ = scaling_params(0.5, 0.5, K, L)
    limit = tacnode_limit(alpha, s, tau, grid)
    devs = []
    for n in ns:
        try:
            rep = scaling_compare(n, K, L, grid=grid, alpha=alpha, limit=limit)
            devs.append(rep.max_reldev)
        except TacnodeError:
            devs.append(math.nan)
    ok = all(np.isfinite(devs)) and all(b < a for a, b in zip(devs, devs[1:]))
    shown = ", ".join(f"n={n}: {d:.3g}" for n, d in zip(ns, devs))
    return [Outcome(9, f"(K, L)=({K:g}, {L:g}) decreasing deviation [{shown}]",
                    devs[-1], devs[0] if np.isfinite(devs[0]) else math.nan, ok)]


def criterion_10(burn_in=10_000, sweeps=2_000, seed=0):
    n, m = 20, 64
    ens = init_ensemble(n, m, 0.5, 0.5, 0.8, seed=seed)
    res = run_chain(ens, sweeps, burn_in=burn_in)
    p, q = mp_endpoints(0.5, 0.5, 0.5, 0.8)
    pos = res.samples[..., m // 2].ravel()
    inside = float(np.mean((pos >= p - 0.05) & (pos <= q + 0.05)))

    ens = init_ensemble(n, m, 0.5, 0.5, 1.0, seed=seed)
    res = run_chain(ens, sweeps, burn_in=burn_in)
    prof = minimum_profile(res)
    j = int(np.argmin(prof[1:-1])) + 1
    t_min = res.times[j]
    return [Outcome(10, "Case I fraction inside [p-0.05, q+0.05]", inside, 0.99, inside >= 0.99),
            _below(10, f"critical minimum at t={t_min:.3f}, |t - 1/2|", abs(t_min - 0.5), 0.1)]


CLI_RUNS = (
    ("pii", "--nu", "0.25", "--grid", "0,1,2"),
    ("lax-check", "--s", "0.5", "--tau", "0.5"),
    ("kernel", "--grid", "0.5,1", "--threads", "2"),
    ("finite-n", "--n", "2", "--grid", "0.1,0.5", "--quad-size", "256"),
    ("scaling", "--n", "2", "--grid", "1"),
    ("phase", "--sweep-t", "0.1:0.9:5", "--sweep-T", "0.5:2:4"),
    ("sample", "--n", "5", "--m", "10", "--sweeps", "40", "--burn-in", "40", "--seed", "3"),
)


def criterion_11(runs=CLI_RUNS):
    env = dict(os.environ, PYTHONPATH=os.path.abspath(SRC))
    mismatched = []
    with tempfile.TemporaryDirectory() as tmp:
        for argv in runs:
            blobs = []
            for k in range(2):
                path = os.path.join(tmp, f"{argv[0]}-{k}.csv")
                stats = os.path.join(tmp, f"{argv[0]}-{k}.json")
                extra = ["--json", stats] if argv[0] == "sample" else []
                subprocess.run([sys.executable, "-m", "tacnode.cli", *argv, *extra, "-o", path],
                               check=True, env=env, capture_output=True)
                blob = open(path, "rb").read().replace(stats.encode(), b"")
                if extra:
                    blob += open(stats, "rb").read()
                blobs.append(blob)
            if blobs[0] != blobs[1]:
                mismatched.append(argv[0])
    return [Outcome(11, f"byte-identical reruns of {len(runs)} subcommands", float(len(mismatched)),
                    0.0, not mismatched)]


# pytest -------------------------------------------------------------------

def _check(outcomes):
    for o in outcomes:
        record(o.line())
    failed = [o.line() for o in outcomes if not o.passed]
    assert not failed, "\n".join(failed)


def test_criterion_1_right_tails():
    _check([o for o in criterion_1() if "right" in o.label])


def test_criterion_1_left_tail_small_nu():
    _check([o for o in criterion_1((0.25,)) if "left" in o.label])


@pytest.mark.xfail(strict=True, reason="q(-20) - sqrt(10) is about nu/40 + O(nu^2), which "
                   "exceeds 5e-3 relative for nu >= 0.75")
@pytest.mark.parametrize("nu", [0.75, 1.5])
def test_criterion_1_left_tail(nu):
    _check([o for o in criterion_1((nu,)) if "left" in o.label])


def test_criterion_2():
    _check(criterion_2())


def test_criterion_3():
    _check(criterion_3())


def test_criterion_4():
    _check(criterion_4())


def test_criterion_5():
    _check(criterion_5())


def test_criterion_6():
    _check(criterion_6())


def test_criterion_7():
    _check(criterion_7())


def test_criterion_8():
    _check(criterion_8())


def test_criterion_9_centre():
    _check(criterion_9(0.0, 0.0))


@pytest.mark.xfail(strict=True, reason="t = 1/2 + 8^(-1/3) = 1 leaves no paths at n = 8")
def test_criterion_9_shifted():
    _check(criterion_9(1.0, 0.0))


def test_criterion_10():
    _check(criterion_10())


def test_criterion_11():
    _check(criterion_11())


def main(selected):
    runners = {
        1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
        6: criterion_6, 7: criterion_7, 8: criterion_8,
        9: lambda: criterion_9(0.0, 0.0) + criterion_9(1.0, 0.0),
        10: criterion_10, 11: criterion_11,
    }
    failed = 0
    for k in selected or sorted(runners):
        for o in runners[k]():
            print(o.line(), flush=True)
            failed += not o.passed
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main([int(a) for a in sys.argv[1:]]))
