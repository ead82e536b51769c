"""Command-line front end: compute single divergences, run order sweeps,
search for data-processing violations, solve recovery instances, and run the
verification suites.  Emits JSON (reports, certificates) and CSV (sweeps).

Exit codes: 0 ok, 2 input error, 3 numerical non-convergence, 4 invariant
violation.
"""

from __future__ import annotations

import os

# QDIV_THREADS caps BLAS parallelism; it must be exported before numpy
# initializes its thread pools, which is why this sits above the imports.
_threads = os.environ.get("QDIV_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import argparse
import json
import math
import sys
import time

import numpy as np

from . import __version__
from .divergences import INF, max_divergence, sandwiched_d, umegaki
from .errors import QdivError
from .inequalities import (
    alpha_sweep,
    dp_violation_search,
    trace_inequality_trials,
)
from .oracle import projective_grid_qubit
from .recovery import (
    RecoveryProblem,
    cmi_bound_check,
    measured_recovery_dual_solve,
    optimize_recovery_primal,
    superadditivity_check,
    _solve_by_kind,
)
from .solvers import (
    DEFAULT_CONFIG,
    SolverConfig,
    frank_lieb_q,
    measured_rel_entropy,
    measured_renyi_q,
    petz_umegaki_variational,
)
from .states import (
    DensityOperator,
    commutator_norm,
    matrix_from_json,
    matrix_to_json,
    random_density,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NONCONVERGED = 3
EXIT_INVARIANT = 4

LN2 = math.log(2.0)


class CliInputError(Exception):
    pass


def _enc(x):
    """Finite double, the literal strings 'inf'/'-inf', or None."""
    if x is None:
        return None
    x = float(x)
    if x == INF:
        return "inf"
    if x == -INF:
        return "-inf"
    if math.isnan(x):
        raise QdivError("NaN encountered in output")
    return x


def _scaled(x, bits: bool):
    """Divergence values are rescaled to bits at presentation time only."""
    if x is None:
        return None
    if bits and isinstance(x, float) and math.isfinite(x):
        return x / LN2
    return x


def _manifest(command: str, seed, config: SolverConfig, t0: float, outputs: list) -> dict:
    return {
        "command": command,
        "seed": seed,
        "config": config.to_json(),
        "version": __version__,
        "wall_clock_s": time.monotonic() - t0,
        "outputs": outputs,
    }


def _load_state(path: str) -> tuple[np.ndarray, list]:
    try:
        with open(path) as fh:
            obj = json.load(fh)
        return matrix_from_json(obj)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise CliInputError(f"cannot read state file {path!r}: {exc}") from exc


def _pair_from_args(args) -> tuple[np.ndarray, np.ndarray]:
    if args.generate is not None:
        rng = np.random.default_rng(args.generate)
        rho = random_density(args.dim, seed=rng).matrix
        sigma = random_density(args.dim, seed=rng).matrix
        return rho, sigma
    if not (args.rho and args.sigma):
        raise CliInputError("provide --rho and --sigma files, or --generate SEED")
    return _load_state(args.rho)[0], _load_state(args.sigma)[0]


def _emit(obj: dict, out: str | None):
    text = json.dumps(obj, indent=2)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


# ---------------------------------------------------------------------------
# compute
# ---------------------------------------------------------------------------

COMPUTE_KINDS = (
    "umegaki",
    "measured",
    "measured-renyi",
    "sandwiched",
    "max",
    "petz",
    "frank-lieb",
)


def _parse_alpha(text: str | None):
    if text is None:
        return None
    if text == "inf":
        return INF
    try:
        return float(text)
    except ValueError as exc:
        raise CliInputError(f"bad --alpha {text!r}") from exc


def cmd_compute(args) -> int:
    t0 = time.monotonic()
    rho, sigma = _pair_from_args(args)
    alpha = _parse_alpha(args.alpha)
    needs_alpha = args.kind in ("measured-renyi", "sandwiched", "frank-lieb")
    if needs_alpha and alpha is None:
        raise CliInputError(f"--kind {args.kind} requires --alpha")
    config = DEFAULT_CONFIG
    report = None
    if args.kind == "umegaki":
        value, method = umegaki(rho, sigma), "closed-form"
    elif args.kind == "max":
        value, method = max_divergence(rho, sigma), "closed-form"
    elif args.kind == "sandwiched":
        value, method = sandwiched_d(rho, sigma, alpha), "closed-form"
    elif args.kind == "measured":
        report = measured_rel_entropy(rho, sigma, config)
    elif args.kind == "measured-renyi":
        report = measured_renyi_q(rho, sigma, alpha, config)
    elif args.kind == "petz":
        report = petz_umegaki_variational(rho, sigma, config)
    else:
        report = frank_lieb_q(rho, sigma, alpha, config)
    out = {"kind": args.kind, "alpha": _enc(alpha) if alpha is not None else None}
    if report is None:
        out.update(
            {
                "value": _scaled(_enc(value), args.bits),
                "method": method,
                "converged": True,
            }
        )
        converged = True
    else:
        body = report.to_json()
        body["value"] = _scaled(body["value"], args.bits)
        out.update(body)
        if report.measurement is not None and report.measurement.kind == "projective":
            out["optimal_measurement_basis"] = matrix_to_json(
                report.measurement.basis
            )
        converged = bool(report.converged)
    out["units"] = "bits" if args.bits else "nats"
    out["manifest"] = _manifest(
        "compute", args.generate, config, t0, [args.out] if args.out else []
    )
    _emit(out, args.out)
    return EXIT_OK if converged else EXIT_NONCONVERGED


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def cmd_sweep(args) -> int:
    rho, sigma = _pair_from_args(args)
    grid = None
    if args.grid:
        try:
            grid = [float(tok) for tok in args.grid.split(",")]
        except ValueError as exc:
            raise CliInputError(f"bad --grid {args.grid!r}") from exc
    rows = alpha_sweep(rho, sigma, grid)
    lines = ["alpha,D_alpha,D_alpha_measured,gap"]
    scale = LN2 if args.bits else 1.0
    for row in rows:
        vals = [
            row["alpha"],
            row["d_alpha"] / scale,
            row["d_alpha_measured"] / scale,
            row["gap"] / scale,
        ]
        lines.append(",".join(repr(float(v)) for v in vals))
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# search-violation
# ---------------------------------------------------------------------------


def cmd_search_violation(args) -> int:
    if not 0.0 < args.alpha < 0.5:
        print(f"warning: alpha not in (0,1/2); no violations exist at alpha={args.alpha}",
              file=sys.stderr)
        if args.out:
            open(args.out, "w").close()
        return EXIT_OK
    certs = dp_violation_search(
        args.alpha,
        trials=args.trials,
        seed=args.seed,
        margin_threshold=args.threshold,
    )
    text = "".join(c.to_json() + "\n" for c in certs)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    print(f"{len(certs)} certificate(s) from {args.trials} trials", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# recovery
# ---------------------------------------------------------------------------


def _load_problem(args) -> RecoveryProblem:
    try:
        with open(args.instance) as fh:
            text = fh.read()
        prob = RecoveryProblem.from_json(text)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise CliInputError(f"cannot read instance {args.instance!r}: {exc}") from exc
    if args.kind or args.alpha:
        prob = RecoveryProblem(
            rho_ad=prob.rho_ad,
            sigma_ae=prob.sigma_ae,
            dims_ad=prob.dims_ad,
            dims_ae=prob.dims_ae,
            kind=args.kind or prob.kind,
            alpha=_parse_alpha(args.alpha) if args.alpha else prob.alpha,
        )
    return prob


def cmd_recovery(args) -> int:
    t0 = time.monotonic()
    prob = _load_problem(args)
    config = DEFAULT_CONFIG
    out = {"kind": prob.kind, "alpha": _enc(prob.alpha) if prob.alpha else None}
    if args.tensor:
        other_args = argparse.Namespace(
            instance=args.tensor, kind=args.kind, alpha=args.alpha
        )
        other = _load_problem(other_args)
        report = superadditivity_check(prob, other, config, enforce=False)
        out["superadditivity"] = {
            k: (_enc(v) if isinstance(v, float) else v)
            for k, v in report.items()
        }
    else:
        primal, _, _ = optimize_recovery_primal(prob, config)
        out["primal_value"] = _scaled(_enc(primal), args.bits)
        if args.dual:
            dual, cert = _solve_by_kind(prob, config)
            out["dual_value"] = _scaled(_enc(dual), args.bits)
            out["gap"] = _scaled(_enc(primal - dual), args.bits)
            if cert is not None:
                out["certificate"] = {
                    "r_ad": matrix_to_json(cert.r_ad, list(prob.dims_ad)),
                    "s_af": matrix_to_json(cert.s_af, [prob.d_a, prob.d_f]),
                    "constraint_residual": _enc(cert.constraint_residual),
                    "objective": _enc(cert.objective),
                }
    out["units"] = "bits" if args.bits else "nats"
    out["manifest"] = _manifest(
        "recovery", None, config, t0, [args.out] if args.out else []
    )
    _emit(out, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def _suite_core(seed: int) -> list[tuple[str, bool, str]]:
    rng = np.random.default_rng(seed)
    checks = []
    a = random_density(2, seed=seed).matrix
    b = random_density(2, seed=seed).matrix
    checks.append(("determinism", bool(np.array_equal(a, b)),
                   "identical matrices from equal seeds"))
    ok = True
    for _ in range(20):
        m = random_density(3, seed=rng).matrix
        if abs(float(np.real(np.trace(m))) - 1.0) > 1e-10:
            ok = False
        if float(np.min(np.linalg.eigvalsh(m))) < -1e-12:
            ok = False
    checks.append(("state-invariants", ok, "trace 1 and PSD on 20 samples"))
    p = np.array([0.7, 0.3])
    q = np.array([0.4, 0.6])
    rho, sigma = np.diag(p).astype(complex), np.diag(q).astype(complex)
    target = float(np.sum(p * np.log(p / q)))
    got = measured_rel_entropy(rho, sigma).value
    checks.append(("commuting-kl", abs(got - target) < 1e-7,
                   f"measured vs classical KL, err {abs(got - target):.2e}"))
    worst = -math.inf
    for _ in range(10):
        r = random_density(2, seed=rng).matrix
        s = random_density(2, seed=rng).matrix
        worst = max(worst, measured_rel_entropy(r, s).value - umegaki(r, s))
    checks.append(("measured-le-umegaki", worst <= 1e-8,
                   f"max D^M - D = {worst:.2e}"))
    r = random_density(2, seed=rng).matrix
    s = random_density(2, seed=rng).matrix
    grid = projective_grid_qubit(r, s).value
    solver = measured_rel_entropy(r, s).value
    checks.append(("grid-vs-solver", abs(grid - solver) < 1e-6,
                   f"err {abs(grid - solver):.2e}"))
    trials = trace_inequality_trials(n_trials=200, seed=seed)
    checks.append(("trace-inequalities", trials["violations"] == 0,
                   f"{trials['violations']} violations in 200 trials"))
    return checks


def _suite_renyi(seed: int) -> list[tuple[str, bool, str]]:
    rng = np.random.default_rng(seed + 1)
    checks = []
    worst = 0.0
    for _ in range(5):
        r = random_density(2, seed=rng).matrix
        s = random_density(2, seed=rng).matrix
        worst = max(
            worst,
            abs(measured_renyi_q(r, s, 0.5).value - sandwiched_d(r, s, 0.5)),
        )
    checks.append(("fidelity-boundary", worst < 1e-7,
                   f"max |D^P_1/2 - D_1/2| = {worst:.2e}"))
    worst = -math.inf
    for alpha in (0.6, 2.0, 5.0):
        r = random_density(2, seed=rng).matrix
        s = random_density(2, seed=rng).matrix
        worst = max(
            worst, measured_renyi_q(r, s, alpha).value - sandwiched_d(r, s, alpha)
        )
    checks.append(("data-processing", worst <= 1e-8,
                   f"max D^M_a - D_a = {worst:.2e} over alpha >= 1/2"))
    certs = dp_violation_search(0.3, trials=5, seed=seed)
    checks.append(("violation-exists", len(certs) >= 1,
                   f"{len(certs)}/5 violating pairs at alpha=0.3"))
    return checks


def _suite_recovery(seed: int) -> list[tuple[str, bool, str]]:
    rng = np.random.default_rng(seed + 2)
    checks = []
    rho_ad = random_density(4, seed=rng).matrix
    prob = RecoveryProblem(
        rho_ad=rho_ad, sigma_ae=rho_ad, dims_ad=(2, 2), dims_ae=(2, 2),
        kind="MeasRec",
    )
    cert = measured_recovery_dual_solve(prob)
    checks.append(("perfect-recovery", abs(cert.objective) < 1e-5,
                   f"dual value {cert.objective:.2e} at E = D"))
    sigma_ae = random_density(4, seed=rng).matrix
    rho2 = random_density(4, seed=rng).matrix
    prob2 = RecoveryProblem(
        rho_ad=rho2, sigma_ae=sigma_ae, dims_ad=(2, 2), dims_ae=(2, 2),
        kind="MeasRec",
    )
    cert2 = measured_recovery_dual_solve(prob2)
    cert2.validate(prob2)
    primal, _, _ = optimize_recovery_primal(prob2)
    gap = primal - cert2.objective
    checks.append(("duality-gap", -1e-8 <= gap < 1e-4, f"gap {gap:.2e}"))
    state = random_density(8, rank=2, seed=rng).matrix
    rep = cmi_bound_check(state, (2, 2, 2), SolverConfig(maxiter=25))
    checks.append(("cmi-bound", rep["slack"] >= -1e-5,
                   f"slack {rep['slack']:.2e}"))
    return checks


def cmd_verify(args) -> int:
    suites = {
        "core": [_suite_core],
        "renyi": [_suite_renyi],
        "recovery": [_suite_recovery],
        "all": [_suite_core, _suite_renyi, _suite_recovery],
    }
    checks: list[tuple[str, bool, str]] = []
    for path in args.state or []:
        matrix, _ = _load_state(path)
        try:
            DensityOperator(matrix)
            checks.append((f"state:{path}", True, "density-operator invariants"))
        except QdivError as exc:
            checks.append((f"state:{path}", False, str(exc)))
    for suite in suites[args.suite]:
        checks.extend(suite(args.seed))
    failed = [c for c in checks if not c[1]]
    for name, ok, detail in checks:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    summary = {
        "suite": args.suite,
        "seed": args.seed,
        "passed": len(checks) - len(failed),
        "failed": [name for name, _, _ in failed],
        "version": __version__,
    }
    print(json.dumps(summary))
    return EXIT_OK if not failed else EXIT_INVARIANT


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qdiv",
        description="Measured, Umegaki and sandwiched Renyi relative "
        "entropies via variational formulas; recovery entropies with "
        "duality certificates.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_pair(p):
        p.add_argument("--rho", help="JSON state file for the first argument")
        p.add_argument("--sigma", help="JSON state file for the second argument")
        p.add_argument("--generate", type=int, default=None,
                       help="generate a seeded random full-rank pair instead")
        p.add_argument("--dim", type=int, default=2,
                       help="dimension for --generate (default 2)")

    p = sub.add_parser("compute", help="compute a single divergence")
    add_pair(p)
    p.add_argument("--kind", choices=COMPUTE_KINDS, required=True)
    p.add_argument("--alpha", help="Renyi order (float or 'inf')")
    p.add_argument("--bits", action="store_true", help="report in bits")
    p.add_argument("--out", help="write JSON report here instead of stdout")
    p.set_defaults(func=cmd_compute)

    p = sub.add_parser("sweep", help="order sweep to CSV")
    add_pair(p)
    p.add_argument("--grid", help="comma-separated alpha grid")
    p.add_argument("--bits", action="store_true")
    p.add_argument("--out", help="CSV output path (default stdout)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("search-violation",
                       help="search for data-processing violations (alpha < 1/2)")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threshold", type=float, default=1e-4)
    p.add_argument("--out", help="JSON-lines certificate file (default stdout)")
    p.set_defaults(func=cmd_search_violation)

    p = sub.add_parser("recovery", help="solve a recovery instance file")
    p.add_argument("instance", help="JSON instance file")
    p.add_argument("--kind", choices=("Rec", "MeasRec", "RenyiMeasRec", "FlippedRec"))
    p.add_argument("--alpha")
    p.add_argument("--dual", action="store_true",
                   help="also solve the dual and report certificate + gap")
    p.add_argument("--tensor", help="second instance: report joint-vs-sum")
    p.add_argument("--bits", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_recovery)

    p = sub.add_parser("verify", help="run the invariant suites")
    p.add_argument("--suite", choices=("core", "renyi", "recovery", "all"),
                   default="all")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--state", action="append",
                   help="extra state file(s) to validate (repeatable)")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except QdivError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
