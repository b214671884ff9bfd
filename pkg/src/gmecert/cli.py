"""Command-line pipeline: analysis, witness search, tomography, sweeps.

Subcommands: analyze, witness, sweep, simulate, reconstruct, mc, bias,
export-state. Every command that draws random numbers requires --seed, and
every output file embeds the invocation and seed, so reports are exactly
reproducible. Exit codes: 0 success, 2 usage error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import linalg, sdp, separability, states, tomography, witness

EXIT_USAGE = 2
EXIT_NUMERICAL = 3


class UsageError(Exception):
    pass


class NumericalFailure(Exception):
    pass


def _resolve_state(ref: str) -> states.DensityMatrix:
    """Registry key, or a path to a matrix JSON file."""
    try:
        return states.get_state(ref)
    except ValueError as registry_error:
        try:
            with open(ref, "r", encoding="utf-8") as fh:
                obj = json.load(fh)
        except OSError:
            raise UsageError(str(registry_error)) from None
        if "state" in obj:  # reconstruction report
            obj = obj["state"]
        matrix, _ = linalg.matrix_from_json(obj)
        return states.DensityMatrix(matrix)


def _solver_options(args) -> sdp.SolverOptions:
    return sdp.SolverOptions(tolerance=args.tolerance, seed=args.seed)


def _ml_options(args) -> tomography.MlOptions:
    return tomography.MlOptions(
        max_iterations=args.ml_max_iterations, step_tol=args.ml_step_tol
    )


def _invocation(argv) -> str:
    return "gmecert " + " ".join(argv)


def _emit(payload: dict, args, text_lines=None) -> None:
    body = json.dumps(payload, indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(body + "\n")
        if text_lines:
            print("\n".join(text_lines))
    elif args.format == "json" or text_lines is None:
        print(body)
    else:
        print("\n".join(text_lines))


def _require_seed(args) -> None:
    if args.seed is None:
        raise UsageError("--seed is required for commands that draw random numbers")


def _find_witness_checked(rho, args) -> witness.WitnessCertificate:
    cert = witness.find_witness(
        rho, two_body_only=not args.full_witness, options=_solver_options(args)
    )
    if cert.status != sdp.STATUS_OPTIMAL:
        raise NumericalFailure(f"witness SDP did not converge: status={cert.status}")
    if not cert.valid:
        raise NumericalFailure("witness certificate failed independent validation")
    return cert


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_analyze(args, argv) -> int:
    if args.from_reconstruction:
        rho = _resolve_state(args.from_reconstruction)
        ref = args.from_reconstruction
    else:
        if not args.state:
            raise UsageError("analyze needs a state reference or --from-reconstruction")
        rho = _resolve_state(args.state)
        ref = args.state
    reports = separability.analyze_marginals(rho)
    cert = _find_witness_checked(rho, args)
    value = witness.witness_value(cert.w, rho)
    verdict = all(r.beta > 0 for r in reports) and value < 0
    payload = {
        "invocation": _invocation(argv),
        "state": ref,
        "marginals": [r.to_json() for r in reports],
        "witness": {
            "objective": cert.objective,
            "status": cert.status,
            "valid": cert.valid,
            "two_body_only": cert.two_body_only,
            "residuals": dict(cert.residuals),
        },
        "witness_value": value,
        "verdict": "PASS" if verdict else "FAIL",
    }
    lines = [f"state: {ref}"]
    for r in reports:
        lines.append(
            f"beta_{r.pair} = {r.beta:+.6e}  ({'separable' if r.separable else 'NPT'})"
        )
    lines.append(
        f"witness: objective = {cert.objective:+.6e}  status = {cert.status}"
        f"  valid = {'yes' if cert.valid else 'no'}"
    )
    lines.append(f"witness value Tr(rho W) = {value:+.6e}")
    lines.append(
        f"verdict: {'PASS' if verdict else 'FAIL'}"
        " (GME from separable marginals requires all beta > 0 and Tr(rho W) < 0)"
    )
    _emit(payload, args, lines)
    return 0


def cmd_witness(args, argv) -> int:
    rho = _resolve_state(args.state)
    cert = _find_witness_checked(rho, args)
    validation = witness.validate_certificate(cert)
    payload = cert.to_json()
    payload["invocation"] = _invocation(argv)
    payload["validation"] = validation.to_json()
    lines = [
        f"objective = {cert.objective:+.6e}",
        f"status = {cert.status}",
        f"validation = {'pass' if validation.passed else 'FAIL'}",
    ]
    _emit(payload, args, lines)
    return 0


def _sweep_records(args, argv):
    if not (0.0 <= args.p_min < args.p_max <= 1.0):
        raise UsageError("need 0 <= p_min < p_max <= 1")
    if args.steps < 2:
        raise UsageError("need at least 2 sweep steps")
    if args.simulate:
        _require_seed(args)
    base = _resolve_state(args.state)
    grid = np.linspace(args.p_min, args.p_max, args.steps)
    solver = _solver_options(args)
    fixed_w = None
    if args.witness_mode == "fixed":
        fixed_w = _find_witness_checked(base, args).w
    children = (
        np.random.SeedSequence(args.seed).spawn(len(grid)) if args.simulate else [None] * len(grid)
    )
    records = []
    for idx, p in enumerate(grid):
        rho_p = states.rho_noisy(float(p), base)
        record = {"p": float(p)}
        if args.simulate:
            dataset = tomography.simulate_counts(rho_p, args.pairs, children[idx])
            recon = tomography.ml_reconstruct(dataset, _ml_options(args))
            target = recon.rho_hat
        else:
            target = rho_p
        betas = separability.beta_values(target)
        if args.witness_mode == "fixed":
            w = fixed_w
        else:
            w = witness.find_witness(target, not args.full_witness, solver).w
        for pair, beta in zip(separability.PAIRS, betas):
            record[f"beta_{pair}"] = float(beta)
        record["witness_value"] = witness.witness_value(w, target)
        if args.simulate:
            mc = tomography.monte_carlo(
                dataset,
                args.samples,
                tomography.standard_statistics(w),
                rng_seed=int(children[idx].generate_state(1)[0]),
                ml_options=_ml_options(args),
                workers=args.workers,
            )
            for name, summary in mc.statistics.items():
                record[f"{name}_std"] = summary.std
        records.append(record)
    return records


def cmd_sweep(args, argv) -> int:
    records = _sweep_records(args, argv)
    columns = ["p", "beta_AB", "beta_BC", "beta_AC", "witness_value"]
    if args.simulate:
        columns += ["beta_AB_std", "beta_BC_std", "beta_AC_std", "witness_value_std"]
    if args.format == "csv":
        lines = [
            f"# invocation: {_invocation(argv)}",
            f"# witness_mode: {args.witness_mode}",
            ",".join(columns),
        ]
        for record in records:
            lines.append(",".join(f"{record[c]:.12g}" for c in columns))
        body = "\n".join(lines) + "\n"
        if args.out:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(body)
        else:
            sys.stdout.write(body)
    else:
        payload = {
            "invocation": _invocation(argv),
            "witness_mode": args.witness_mode,
            "seed": args.seed,
            "records": records,
        }
        _emit(payload, args)
    return 0


def cmd_simulate(args, argv) -> int:
    _require_seed(args)
    rho = _resolve_state(args.state)
    dataset = tomography.simulate_counts(rho, args.pairs, args.seed)
    payload = {
        "invocation": _invocation(argv),
        "seed": args.seed,
        "state": args.state,
        "mean_pairs": args.pairs,
    }
    payload.update(dataset.to_json())
    _emit(payload, args)
    return 0


def _load_dataset(path: str) -> tomography.TomographyDataset:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return tomography.TomographyDataset.from_json(json.load(fh))
    except (OSError, KeyError, ValueError) as exc:
        raise UsageError(f"cannot load dataset {path!r}: {exc}") from None


def cmd_reconstruct(args, argv) -> int:
    dataset = _load_dataset(args.dataset)
    result = tomography.ml_reconstruct(dataset, _ml_options(args))
    payload = {
        "invocation": _invocation(argv),
        "dataset": args.dataset,
        "state": linalg.matrix_to_json(result.rho_hat.matrix),
        "iterations": result.iterations,
        "converged": result.converged,
        "final_step_norm": result.final_step_norm,
        "log_likelihood": result.log_likelihood,
        "ll_violations": result.ll_violations,
    }
    lines = [
        f"iterations = {result.iterations} (converged = {result.converged})",
        f"log_likelihood = {result.log_likelihood:.9f}",
        f"purity = {tomography.purity(result.rho_hat):.6f}",
    ]
    _emit(payload, args, lines)
    return 0


def cmd_mc(args, argv) -> int:
    _require_seed(args)
    dataset = _load_dataset(args.dataset)
    recon = tomography.ml_reconstruct(dataset, _ml_options(args))
    cert = _find_witness_checked(recon.rho_hat, args)
    if args.witness_mode == "reopt":
        solver = _solver_options(args)
        full = args.full_witness

        def witness_stat(rho):
            return witness.find_witness(rho, not full, solver).objective

        statistics = tomography.standard_statistics(cert.w)
        statistics["witness_value"] = witness_stat
    else:
        statistics = tomography.standard_statistics(cert.w)
    mc = tomography.monte_carlo(
        dataset,
        args.samples,
        statistics,
        rng_seed=args.seed,
        ml_options=_ml_options(args),
        workers=args.workers,
    )
    payload = {
        "invocation": _invocation(argv),
        "seed": args.seed,
        "n_samples": args.samples,
        "witness_mode": args.witness_mode,
        "witness_objective": cert.objective,
        "reconstruction": {
            "iterations": recon.iterations,
            "converged": recon.converged,
        },
        "statistics": {
            name: {"mean": s.mean, "std": s.std} for name, s in mc.statistics.items()
        },
        "joint_satisfaction_fraction": tomography.joint_satisfaction_fraction(mc),
    }
    lines = [
        f"witness objective (reconstructed state) = {cert.objective:+.6e}",
    ]
    for name, s in mc.statistics.items():
        lines.append(f"{name} = {s.mean:+.6e} +- {s.std:.3e}")
    lines.append(f"joint satisfaction fraction = {payload['joint_satisfaction_fraction']:.3f}")
    _emit(payload, args, lines)
    return 0


def cmd_bias(args, argv) -> int:
    _require_seed(args)
    rho = _resolve_state(args.state)
    cert = _find_witness_checked(rho, args)
    report = tomography.bias_study(
        rho,
        cert.w,
        mean_pairs=args.pairs,
        n_trials=args.trials,
        rng_seed=args.seed,
        workers=args.workers,
    )
    payload = report.to_json()
    payload["invocation"] = _invocation(argv)
    payload["state"] = args.state
    lines = []
    for name, (bias, se, _) in report.biases.items():
        sig = abs(bias) / se if se > 0 else float("inf")
        lines.append(f"{name}: bias = {bias:+.3e} +- {se:.3e} ({sig:.1f} se)")
    _emit(payload, args, lines)
    return 0


def cmd_export_state(args, argv) -> int:
    rho = _resolve_state(args.state)
    payload = {
        "invocation": _invocation(argv),
        "state": args.state,
    }
    payload.update(linalg.matrix_to_json(rho.matrix))
    _emit(payload, args)
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_common(sub, *, seed=True, solver=True, ml=False, workers=False):
    sub.add_argument("--out", help="write the JSON/CSV report to this path")
    sub.add_argument("--format", choices=("json", "csv"), default="json")
    if seed:
        sub.add_argument("--seed", type=int, default=None, help="RNG seed (u64)")
    if solver:
        sub.add_argument("--tolerance", type=float, default=1e-8, help="SDP solver tolerance")
        sub.add_argument(
            "--full-witness",
            action="store_true",
            help="drop the two-body support constraint on the witness",
        )
    if ml:
        sub.add_argument("--ml-max-iterations", type=int, default=5000)
        sub.add_argument("--ml-step-tol", type=float, default=1e-10)
    if workers:
        sub.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gmecert",
        description=(
            "Certify genuine multipartite entanglement of three-qubit states "
            "from their separable two-qubit marginals."
        ),
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    p = subparsers.add_parser("analyze", help="marginal PPT analysis + witness verdict")
    p.add_argument("state", nargs="?", help="registry key or matrix JSON path")
    p.add_argument("--from-reconstruction", help="analyze the state in a reconstruction report")
    _add_common(p)
    p.set_defaults(func=cmd_analyze)

    p = subparsers.add_parser("witness", help="solve the witness SDP, emit the certificate")
    p.add_argument("state")
    _add_common(p)
    p.set_defaults(func=cmd_witness)

    p = subparsers.add_parser("sweep", help="mixing-parameter sweep (theory and simulated)")
    p.add_argument("--p-min", type=float, default=0.0)
    p.add_argument("--p-max", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=11)
    p.add_argument("--state", default="rho", help="base state mixed with white noise")
    p.add_argument("--witness-mode", choices=("fixed", "reopt"), default="reopt")
    p.add_argument("--simulate", action="store_true", help="tomography simulation per point")
    p.add_argument("--pairs", type=float, default=350.0)
    p.add_argument("--samples", type=int, default=1000, help="Monte Carlo samples per point")
    _add_common(p, ml=True, workers=True)
    p.set_defaults(func=cmd_sweep)

    p = subparsers.add_parser("simulate", help="simulate the 216-setting tomography protocol")
    p.add_argument("state")
    p.add_argument("--pairs", type=float, default=350.0)
    _add_common(p, solver=False)
    p.set_defaults(func=cmd_simulate)

    p = subparsers.add_parser("reconstruct", help="maximum-likelihood reconstruction")
    p.add_argument("dataset", help="dataset JSON path")
    _add_common(p, seed=False, solver=False, ml=True)
    p.set_defaults(func=cmd_reconstruct)

    p = subparsers.add_parser("mc", help="Monte Carlo resampling of a dataset")
    p.add_argument("dataset")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--witness-mode", choices=("fixed", "reopt"), default="fixed")
    _add_common(p, ml=True, workers=True)
    p.set_defaults(func=cmd_mc)

    p = subparsers.add_parser("bias", help="ML reconstruction bias study")
    p.add_argument("state")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--pairs", type=float, default=350.0)
    _add_common(p, workers=True)
    p.set_defaults(func=cmd_bias)

    p = subparsers.add_parser("export-state", help="write a registry state as matrix JSON")
    p.add_argument("state")
    _add_common(p, seed=False, solver=False)
    p.set_defaults(func=cmd_export_state)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (linalg.NumericalError, NumericalFailure) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
