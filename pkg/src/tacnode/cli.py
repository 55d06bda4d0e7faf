"""Command-line front end.

Every subcommand writes CSV: ``#`` header lines carrying the package version,
the subcommand and the fully resolved configuration, then one header row and
the data, numbers printed with 17 significant digits. Output is a pure
function of the arguments unless ``--stamp`` adds a timestamp line.

Exit codes: 0 success, 2 invalid input, 3 numerical failure.

Defaults
--------
All numerical defaults live in :data:`DEFAULTS`:

============  =====================================  ==========================
key           value                                  used by
============  =====================================  ==========================
nu            0.75                                   pii, lax-check, kernel
s, tau        0, 0                                   lax-check, kernel
x_range       -20:20 (PII interval)                  pii
pii_grid      4001 points                            pii
kernel_grid   0.1:5:50                               kernel
a, b          0.5, 0.5                               finite-n, scaling, phase, sample
bigT, t       1, 0.5                                 finite-n, sample
alpha         0.25                                   finite-n, scaling, sample
n             8 (finite-n, scaling), 20 (sample)     finite-n, scaling, sample
m             64                                     sample
sweeps        2000 after 10000 burn-in, thin 10      sample
seed          0                                      sample
bits          256 (or ``TACNODE_PRECISION_BITS``)    finite-n, scaling
============  =====================================  ==========================
"""

from __future__ import annotations

import argparse
import csv
import datetime
import io
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .errors import TacnodeError

log = logging.getLogger("tacnode")

DEFAULTS = {
    "nu": 0.75,
    "s": 0.0,
    "tau": 0.0,
    "x_range": "-20:20",
    "pii_grid": 4001,
    "pii_out": "-10:10:201",
    "kernel_grid": "0.1:5:50",
    "a": 0.5,
    "b": 0.5,
    "bigT": 1.0,
    "t": 0.5,
    "alpha": 0.25,
    "n_finite": 8,
    "finite_grid": "0.01:1:10",
    "scaling_grid": "0.5,1,2",
    "n_sample": 20,
    "m": 64,
    "sweeps": 2000,
    "burn_in": 10_000,
    "thin": 10,
    "seed": 0,
    "sweep_t": "0.05:0.95:19",
    "sweep_T": "0.5:2:16",
    "imag_tol": 1e-7,
}

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3


def _fmt(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def parse_grid(spec):
    """``"lo:hi:count"`` for a linspace or ``"x1,x2,..."`` for explicit values."""
    spec = str(spec).strip()
    try:
        if ":" in spec:
            parts = spec.split(":")
            if len(parts) != 3:
                raise ValueError
            lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
            if count < 1:
                raise ValueError
            return [float(v) for v in np.linspace(lo, hi, count)]
        return [float(v) for v in spec.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {spec!r}; use lo:hi:count or a,b,c") from None


def parse_range(spec):
    vals = str(spec).split(":")
    try:
        lo, hi = float(vals[0]), float(vals[1])
    except (ValueError, IndexError):
        raise argparse.ArgumentTypeError(f"bad range {spec!r}; use lo:hi") from None
    return lo, hi


class Table:
    """Rows plus the header lines that describe how they were produced."""

    def __init__(self, columns, rows=None, extra=None):
        self.columns = list(columns)
        self.rows = list(rows or [])
        self.extra = extra or {}

    def render(self, command, config, stamp=False):
        buf = io.StringIO()
        buf.write(f"# tacnode {__version__}\n")
        buf.write(f"# command: {command}\n")
        buf.write("# config: " + json.dumps(config, sort_keys=True, default=str) + "\n")
        buf.write("# provenance: numpy " + np.__version__ + "\n")
        for key in sorted(self.extra):
            buf.write(f"# {key}: {_fmt(self.extra[key])}\n")
        if stamp:
            now = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
            buf.write(f"# timestamp: {now}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([_fmt(v) for v in row])
        return buf.getvalue()


def _pool_map(fn, items, threads):
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


# subcommand bodies --------------------------------------------------------

def cmd_pii(args):
    from .painleve import PIIConfig, hamiltonian, solve_hastings_mcleod

    lo, hi = args.x_range
    sol = solve_hastings_mcleod(PIIConfig(nu=args.nu, x_min=lo, x_max=hi, grid_size=args.grid_size))
    xs = np.asarray(args.grid)
    q = sol.q_at(xs)
    qp = sol.qprime_at(xs)
    u = hamiltonian(sol, xs)
    rows = zip(xs, q, qp, u)
    return Table(["x", "q", "qprime", "u"], rows,
                 {"residual": sol.residual, "iterations": sol.iterations})


def cmd_lax_check(args):
    from .laxpair import check_compatibility
    from .painleve import PIIConfig, solve_hastings_mcleod

    sol = solve_hastings_mcleod(PIIConfig(nu=args.nu))
    rep = check_compatibility(sol, args.s, args.tau)
    rows = [(name, rep.nu, rep.s, rep.tau, r) for name, r in rep.rows]
    return Table(["identity", "nu", "s", "tau", "residual"], rows,
                 {"max_residual": rep.max_residual()})


_KERNEL_STATE = {}


def _kernel_solver(nu, s, tau):
    key = (nu, s, tau)
    if key not in _KERNEL_STATE:
        from .laxpair import MParams, entries_from_pii
        from .painleve import PIIConfig, solve_hastings_mcleod
        from .rhkernel import RHSolver

        sol = solve_hastings_mcleod(PIIConfig(nu=nu))
        params = MParams(nu, s, tau).validate()
        _KERNEL_STATE[key] = (params, RHSolver(params, entries_from_pii(sol, s, tau)))
    return _KERNEL_STATE[key]


def _kernel_point(job):
    from .rhkernel import tacnode_kernel

    nu, s, tau, u, v, imag_tol = job
    params, solver = _kernel_solver(nu, s, tau)
    return tacnode_kernel(params, solver, u, v, imag_tol=imag_tol)


def cmd_kernel(args):
    grid = args.grid
    if args.diag_only:
        pairs = [(u, u) for u in grid]
    else:
        pairs = [(u, v) for u in grid for v in grid]
    jobs = [(args.nu, args.s, args.tau, u, v, args.imag_tol) for u, v in pairs]
    vals = _pool_map(_kernel_point, jobs, args.threads)
    if args.diag_only:
        return Table(["u", "K"], [(u, k) for (u, _), k in zip(pairs, vals)])
    return Table(["u", "v", "K"], [(u, v, k) for (u, v), k in zip(pairs, vals)])


def cmd_finite_n(args):
    from .finiten import WeightSystem, build_model, finite_kernel

    ws = WeightSystem(args.a, args.b, args.bigT, args.t, args.n, args.alpha)
    model = build_model(ws, quad_size=args.quad_size, precision_bits_=args.bits)
    rows = [(x, y, finite_kernel(model, x, y)) for x in args.grid for y in args.grid]
    return Table(["x", "y", "K_n"], rows,
                 {"condition": model.condition, "X_cut": model.X_cut, "nodes": model.quad_size})


def cmd_scaling(args):
    from .finiten import scaling_compare

    rep = scaling_compare(args.n, args.K, args.L, grid=tuple(args.grid), a=args.a, b=args.b,
                          alpha=args.alpha, L1=args.L1, L2=args.L2,
                          quad_size=args.quad_size, precision_bits_=args.bits)
    rows = [(r.u, r.v, r.finite, r.limit, r.reldev) for r in rep.rows]
    return Table(["u", "v", "finite", "limit", "reldev"], rows,
                 {"s_star": rep.s, "tau_star": rep.tau, "kappa": rep.kappa, "t": rep.t,
                  "T": rep.T, "max_reldev": rep.max_reldev})


def cmd_phase(args):
    from .phase import classify_phase

    rows = []
    for t in args.sweep_t:
        for T in args.sweep_T:
            rows.append((t, T, classify_phase(args.a, args.b, t, T).value))
    return Table(["t", "T", "phase"], rows)


def cmd_sample(args):
    from .sampler import init_ensemble, minimum_profile, run_chain, summarize

    ens = init_ensemble(args.n, args.m, args.a, args.b, args.bigT, seed=args.seed,
                        alpha=args.alpha)
    res = run_chain(ens, args.sweeps, burn_in=args.burn_in, thin=args.thin)
    x = ens.x[0]
    rows = [(i, j, j / args.m, x[i, j]) for i in range(args.n) for j in range(args.m + 1)]
    if args.json:
        prof = minimum_profile(res) if res.samples.shape[0] else np.full(args.m + 1, np.nan)
        inner = prof[1:-1]
        jmin = int(np.argmin(inner)) + 1 if inner.size else 0
        mid = summarize(res, 0.5) if res.samples.shape[0] else None
        stats = {
            "acceptance": res.acceptance,
            "samples": int(res.samples.shape[0]),
            "sweeps": args.sweeps,
            "burn_in": args.burn_in,
            "thin": args.thin,
            "seed": args.seed,
            "min_slice_t": jmin / args.m,
            "min_slice_mean": float(prof[jmin]),
            "mid_min": mid.minimum if mid else None,
            "mid_max": mid.maximum if mid else None,
            "mid_q01": mid.quantiles[0.01] if mid else None,
            "mid_q99": mid.quantiles[0.99] if mid else None,
        }
        with open(args.json, "w") as fh:
            json.dump(stats, fh, sort_keys=True, indent=1)
            fh.write("\n")
    return Table(["path_index", "slice_index", "t", "x"], rows,
                 {"acceptance": res.acceptance})


def cmd_selftest(args):
    from .selftest import run_checks

    results = run_checks(quick=not args.full)
    rows = [(r.name, r.value, r.limit, r.passed) for r in results]
    table = Table(["check", "value", "limit", "pass"], rows)
    table.failed = [r.name for r in results if not r.passed]
    return table


# parser -------------------------------------------------------------------

def _add_common(p):
    p.add_argument("-o", "--output", default="-", help="output CSV path (default stdout)")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                   help="worker processes for grid evaluation")
    p.add_argument("--stamp", action="store_true", help="add a timestamp header line")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    D = DEFAULTS
    ap = argparse.ArgumentParser(prog="tacnode", description=__doc__.split("\n\n")[0])
    ap.add_argument("--version", action="version", version=f"tacnode {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pii", help="Hastings-McLeod solution of Painleve II")
    p.add_argument("--nu", type=float, default=D["nu"])
    p.add_argument("--x-range", type=parse_range, default=parse_range(D["x_range"]))
    p.add_argument("--grid-size", type=int, default=D["pii_grid"])
    p.add_argument("--grid", type=parse_grid, default=parse_grid(D["pii_out"]),
                   help="output abscissae")
    _add_common(p)
    p.set_defaults(func=cmd_pii)

    p = sub.add_parser("lax-check", help="compatibility residuals of the Lax pair")
    p.add_argument("--nu", type=float, default=D["nu"])
    p.add_argument("--s", type=float, default=D["s"])
    p.add_argument("--tau", type=float, default=D["tau"])
    _add_common(p)
    p.set_defaults(func=cmd_lax_check)

    p = sub.add_parser("kernel", help="tacnode kernel on a grid")
    p.add_argument("--nu", type=float, default=D["nu"])
    p.add_argument("--s", type=float, default=D["s"])
    p.add_argument("--tau", type=float, default=D["tau"])
    p.add_argument("--grid", type=parse_grid, default=parse_grid(D["kernel_grid"]))
    p.add_argument("--diag-only", action="store_true", help="only K(u, u)")
    p.add_argument("--imag-tol", type=float, default=D["imag_tol"])
    _add_common(p)
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("finite-n", help="finite-n correlation kernel")
    p.add_argument("--n", type=int, default=D["n_finite"])
    p.add_argument("--a", type=float, default=D["a"])
    p.add_argument("--b", type=float, default=D["b"])
    p.add_argument("--bigT", type=float, default=D["bigT"])
    p.add_argument("--t", type=float, default=D["t"])
    p.add_argument("--alpha", type=float, default=D["alpha"])
    p.add_argument("--grid", type=parse_grid, default=parse_grid(D["finite_grid"]))
    p.add_argument("--quad-size", type=int, default=None)
    p.add_argument("--bits", type=int, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_finite_n)

    p = sub.add_parser("scaling", help="finite-n kernel against its tacnode limit")
    p.add_argument("--n", type=int, default=D["n_finite"])
    p.add_argument("--K", type=float, default=0.0)
    p.add_argument("--L", type=float, default=0.0)
    p.add_argument("--L1", type=float, default=0.0)
    p.add_argument("--L2", type=float, default=0.0)
    p.add_argument("--a", type=float, default=D["a"])
    p.add_argument("--b", type=float, default=D["b"])
    p.add_argument("--alpha", type=float, default=D["alpha"])
    p.add_argument("--grid", type=parse_grid, default=parse_grid(D["scaling_grid"]))
    p.add_argument("--quad-size", type=int, default=None)
    p.add_argument("--bits", type=int, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_scaling)

    p = sub.add_parser("phase", help="phase labels over a (t, T) grid")
    p.add_argument("--a", type=float, default=D["a"])
    p.add_argument("--b", type=float, default=D["b"])
    p.add_argument("--sweep-t", type=parse_grid, default=parse_grid(D["sweep_t"]))
    p.add_argument("--sweep-T", type=parse_grid, default=parse_grid(D["sweep_T"]))
    _add_common(p)
    p.set_defaults(func=cmd_phase)

    p = sub.add_parser("sample", help="MCMC path ensemble")
    p.add_argument("--n", type=int, default=D["n_sample"])
    p.add_argument("--m", type=int, default=D["m"])
    p.add_argument("--a", type=float, default=D["a"])
    p.add_argument("--b", type=float, default=D["b"])
    p.add_argument("--bigT", type=float, default=D["bigT"])
    p.add_argument("--alpha", type=float, default=D["alpha"])
    p.add_argument("--sweeps", type=int, default=D["sweeps"])
    p.add_argument("--burn-in", type=int, default=D["burn_in"])
    p.add_argument("--thin", type=int, default=D["thin"])
    p.add_argument("--seed", type=int, default=D["seed"])
    p.add_argument("--json", default=None, help="path for the JSON statistics summary")
    _add_common(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("selftest", help="run the invariant suite")
    p.add_argument("--full", action="store_true", help="include the slow checks")
    _add_common(p)
    p.set_defaults(func=cmd_selftest)
    return ap


_SKIP = {"func", "output", "threads", "stamp", "verbose"}


def resolved_config(args):
    cfg = {}
    for k, v in sorted(vars(args).items()):
        if k in _SKIP:
            continue
        if isinstance(v, tuple):
            v = list(v)
        cfg[k] = v
    if args.command in ("finite-n", "scaling"):
        from .finiten import precision_bits

        cfg["bits"] = precision_bits(args.bits)
    return cfg


def run(argv=None):
    """Parse ``argv``, run the subcommand and return the exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "threads", 1) < 1:
        parser.error("--threads must be at least 1")
    try:
        table = args.func(args)
        text = table.render(args.command, resolved_config(args), stamp=args.stamp)
    except (TacnodeError, ValueError, ArithmeticError) as exc:
        code = EXIT_INVALID if isinstance(exc, ValueError) else EXIT_NUMERICAL
        print(f"tacnode {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return code
    if args.output == "-":
        sys.stdout.write(text)
    else:
        with open(args.output, "w", newline="") as fh:
            fh.write(text)
    failed = getattr(table, "failed", None)
    if failed:
        print("selftest failures: " + ", ".join(failed), file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
