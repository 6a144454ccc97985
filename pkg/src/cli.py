"""
Command-line front end.

    mtf <command> --config <path> [--out <dir>] [--emit-unscaled]

Commands: eos-table, solve, scan, selftest. Artifacts go to the output
directory; diagnostics go to stderr.

Exit codes: 0 success, 1 configuration or input error, 2 non-convergence,
3 partial scan, 4 self-test failure.
"""

import argparse
import itertools
import logging
import math
import sys
from typing import List, Optional, Sequence, Tuple

from src.config import ensure_output_directory, load_config, parse_config
from src.eos import gas_density, gas_pressure, pressure_bounds
from src.errors import ConfigError, ConvergenceError, MTFError
from src.logger import LOG_LEVELS, create_log_filename, log_banner, setup_logging, suppress_third_party_logs
from src.models import GasState, PhysicalParams, RunConfig, ScaledProblem
from src.mtf import build_scaled_problem, dual_tf_residual, eval_free_energy_functional, scf_solve
from src.scaling import fit_decay_exponent, limit_scan, scale_density, scale_params, to_scaled_problem
from src.selftest import run_checks
from src.utils import (
    format_check_table,
    save_json_report,
    scan_rows,
    solve_report_payload,
    write_csv,
    write_field_csv,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NOT_CONVERGED = 2
EXIT_PARTIAL_SCAN = 3
EXIT_SELFTEST_FAILED = 4

EOS_HEADER = ("mu", "T", "B", "pressure", "density", "lower_bound", "upper_bound")
SCAN_HEADER = ("beta", "pressure", "limit_pressure", "rel_gap", "converged", "error")


def _problem(cfg: RunConfig) -> Tuple[ScaledProblem, Optional[PhysicalParams]]:
    """The scaled problem of a run, and the physical parameters when they were given."""
    grid = cfg.grid
    if cfg.physical is not None:
        prob = to_scaled_problem(
            cfg.physical,
            n=grid.n,
            r_max=grid.r_max,
            r_min_ratio=grid.r_min_ratio,
            spacing=grid.spacing,
        )
        return prob, cfg.physical
    scaled = cfg.scaled
    prob = build_scaled_problem(
        scaled.mu_tilde,
        scaled.T_tilde,
        beta=scaled.beta,
        z=scaled.z,
        confinement=cfg.confinement,
        n=grid.n,
        r_max=grid.r_max,
        r_min_ratio=grid.r_min_ratio,
        spacing=grid.spacing,
    )
    return prob, None


def _solver_options(cfg: RunConfig) -> dict:
    return {
        "damping": cfg.solver.damping,
        "tol": cfg.solver.tol,
        "max_iter": cfg.solver.max_iter,
        "anderson_depth": cfg.solver.anderson_depth,
    }


def _problem_payload(prob: ScaledProblem) -> dict:
    return {
        "mu_tilde": prob.mu_tilde,
        "T_tilde": prob.T_tilde,
        "beta": prob.beta,
        "z": prob.z,
        "regime": prob.regime.value,
        "nodes": prob.grid.size,
        "r_max": prob.grid.extent,
        "confinement": prob.confinement.model_dump(),
    }


def run_eos_table(cfg: RunConfig) -> int:
    """
    Tabulate pressure, density and the pressure sandwich over the μ × T × B grid.

    Rows are sorted by (mu, T, B).
    """
    out_dir = ensure_output_directory(cfg)
    mus, temperatures, fields = sorted(cfg.eos.mu), sorted(cfg.eos.T), sorted(cfg.eos.B)
    if not (mus and temperatures and fields):
        empty = [name for name, values in (("mu", mus), ("T", temperatures), ("B", fields)) if not values]
        logger.warning(f"Empty eos range for {', '.join(empty)}; writing header only")

    rows: List[list] = []
    for mu, T, B in itertools.product(mus, temperatures, fields):
        bounds = pressure_bounds(GasState(mu=mu, T=T, B=B))
        rows.append(
            [mu, T, B, float(gas_pressure(mu, T, B)), float(gas_density(mu, T, B)), bounds.lower, bounds.upper]
        )

    if write_csv(rows, EOS_HEADER, out_dir / "eos_table.csv") is None:
        return EXIT_CONFIG
    logger.info(f"✓ EOS table: {len(rows)} rows")
    return EXIT_OK


def run_solve(cfg: RunConfig) -> int:
    """
    Solve the scaled MTF equation and write density.csv and report.json.

    The report is written whether or not the solve converged.
    """
    out_dir = ensure_output_directory(cfg)
    prob, params = _problem(cfg)
    report = scf_solve(prob, **_solver_options(cfg))

    payload = solve_report_payload(report)
    payload["problem"] = _problem_payload(prob)

    duality = {"free_energy": None, "mu_N_minus_P": prob.mu_tilde * report.particle_number - report.pressure}
    try:
        duality["free_energy"] = eval_free_energy_functional(report.density, prob)
        duality["gap"] = abs(duality["free_energy"] - duality["mu_N_minus_P"]) / max(
            abs(duality["mu_N_minus_P"]), 1e-300
        )
        duality["dual_residual"] = dual_tf_residual(report.density, prob)
    except MTFError as e:
        logger.warning(f"Duality value not available: {e}")
    payload["duality"] = duality

    if cfg.output.emit_unscaled:
        if params is None:
            logger.warning("--emit-unscaled needs a physical parameter block; skipping unscaled values")
        else:
            s = scale_params(params)
            payload["unscaled"] = {
                "Z": params.Z,
                "B": params.B,
                "T": params.T,
                "mu": params.mu,
                "length_scale": s.ell,
                "pressure": params.Z**2 / s.ell * report.pressure,
            }
            write_field_csv(scale_density(report.density, params), out_dir / "density_unscaled.csv")

    density_path = write_field_csv(report.density, out_dir / "density.csv")
    report_path = save_json_report(payload, out_dir / "report.json")
    if density_path is None or report_path is None:
        return EXIT_CONFIG

    if not report.converged:
        logger.warning(
            f"Solve did not converge: residual {report.residual:.3e} after {report.iterations} iterations"
        )
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def run_scan(cfg: RunConfig) -> int:
    """
    Scan β toward a limit branch; write scan.csv and scan_summary.json.

    Failed members stay in the table and make the exit code 3.
    """
    out_dir = ensure_output_directory(cfg)
    prob, _ = _problem(cfg)
    table = limit_scan(
        prob,
        cfg.scan.betas,
        mode=cfg.scan.mode,
        max_workers=cfg.scan.max_workers,
        **_solver_options(cfg),
    )

    exponent = fit_decay_exponent(table.rows)
    summary = {
        "mode": table.mode,
        "limit_beta": table.limit_beta,
        "limit_pressure": table.limit_pressure,
        "limit_converged": table.limit_converged,
        "members": len(table.rows),
        "converged_members": sum(1 for row in table.rows if row.converged),
        "complete": table.complete,
        "gaps_decreasing": table.gaps_decreasing,
        "decay_exponent": exponent,
        "problem": _problem_payload(prob),
    }
    if exponent is None:
        summary["note"] = "insufficient points for a decay fit (needs at least 3 members with a gap)"

    csv_path = write_csv(scan_rows(table), SCAN_HEADER, out_dir / "scan.csv")
    summary_path = save_json_report(summary, out_dir / "scan_summary.json")
    if csv_path is None or summary_path is None:
        return EXIT_CONFIG

    if not table.complete:
        return EXIT_PARTIAL_SCAN
    return EXIT_OK


def run_selftest(cfg: RunConfig) -> int:
    """Run the check battery and print the pass/fail table on stdout."""
    results = run_checks(tolerance_scale=cfg.selftest.tolerance_scale)
    print(format_check_table(results))
    failed = [result.name for result in results if not result.passed]
    if failed:
        logger.warning(f"{len(failed)} checks failed: {', '.join(failed)}")
        return EXIT_SELFTEST_FAILED
    logger.info(f"✓ All {len(results)} checks passed")
    return EXIT_OK


COMMANDS = {
    "eos-table": run_eos_table,
    "solve": run_solve,
    "scan": run_scan,
    "selftest": run_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mtf", description="Finite-temperature magnetic Thomas-Fermi tables, solves and checks"
    )
    parser.add_argument("command", choices=sorted(COMMANDS), help="What to run")
    parser.add_argument("--config", type=str, default=None, help="YAML run configuration")
    parser.add_argument("--out", type=str, default=None, help="Output directory (overrides output.dir)")
    parser.add_argument(
        "--emit-unscaled",
        action="store_true",
        help="Also report physical-unit values when physical parameters are given",
    )
    parser.add_argument(
        "--log-level",
        type=str.upper,
        choices=LOG_LEVELS,
        default=None,
        help="Logging level (overrides logging.level)",
    )
    parser.add_argument(
        "--tolerance-scale",
        type=float,
        default=None,
        help="Multiply every self-test tolerance (0 forces failures)",
    )
    parser.add_argument("--env-file", type=str, default=None, help="Optional .env file")
    return parser


def _apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    output = cfg.output
    if args.out:
        output = output.model_copy(update={"dir": args.out})
    if args.emit_unscaled:
        output = output.model_copy(update={"emit_unscaled": True})
    update = {"output": output}
    if args.tolerance_scale is not None:
        if args.tolerance_scale < 0.0 or math.isnan(args.tolerance_scale):
            raise ConfigError(f"--tolerance-scale must be nonnegative, got {args.tolerance_scale}")
        update["selftest"] = cfg.selftest.model_copy(update={"tolerance_scale": args.tolerance_scale})
    return cfg.model_copy(update=update)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    setup_logging(args.log_level or "INFO")
    suppress_third_party_logs()

    try:
        if args.config:
            cfg = load_config(args.config, env_file=args.env_file, command=args.command)
        else:
            cfg = parse_config({}, command=args.command)
        cfg = _apply_overrides(cfg, args)
    except ConfigError as e:
        logger.error(f"❌ {e}")
        return EXIT_CONFIG

    log_file = cfg.logging.file
    if log_file == "auto":
        log_file = create_log_filename(f"mtf_{args.command}", directory=cfg.output.dir)
    if args.log_level is None or log_file:
        setup_logging(args.log_level or cfg.logging.level, log_file=log_file)

    log_banner(logger, f"mtf {args.command}")

    try:
        return COMMANDS[args.command](cfg)
    except ConfigError as e:
        logger.error(f"❌ {e}")
        return EXIT_CONFIG
    except ConvergenceError as e:
        logger.error(f"❌ {e}")
        logger.debug("Traceback", exc_info=True)
        return EXIT_NOT_CONVERGED
    except MTFError as e:
        logger.error(f"❌ {type(e).__name__}: {e}")
        logger.debug("Traceback", exc_info=True)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
