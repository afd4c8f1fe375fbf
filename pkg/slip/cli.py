"""
Command-line interface for the stance-phase toolkit.
Subcommands simulate, solve, approx, verify, sweep and rerun emit CSV or
JSON artifacts that embed the configuration needed to regenerate them.

Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""

import argparse
import json
import math
import sys
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Sequence

import numpy as np

from slip.asymptotics import DEFAULT_MARGIN, consistency_check, fast_approximation
from slip.bvp import (
    SWEEP_COLUMNS,
    ShootingConfig,
    SweepTable,
    check_stance_inputs,
    k_star_approx,
    quadratic_fit,
    quadratic_reference,
    refined_return,
    solve_stiffness,
    stance_sweep,
)
from slip.errors import DomainError, SlipError
from slip.integrator import IntegratorConfig, default_step, simulate
from slip.model import ModelParams, TouchdownConditions, energy_series
from slip import output_utils
from slip.verify import (
    ConvergenceReport,
    ExperimentConfig,
    LONG_RUN,
    fast_scale_error,
    k_ratio_study,
    slow_scale_error,
    solved_t_star_order,
    t_star_order,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

FORMATS = ("csv", "json")
EXPERIMENTS = ("fast", "slow", "tstar", "kratio")
SIMULATE_COLUMNS = ("t", "tau_plus", "theta", "theta_dot", "L", "L_dot", "energy", "x", "y")
SAMPLE_COLUMNS = (
    "experiment", "K", "eps", "error", "sup_error", "endpoint_error", "energy_drift", "drift_bound", "failure"
)
KRATIO_COLUMNS = ("alpha", "K_star", "K_approx", "ratio", "t_star", "error")

# argparse bookkeeping that is not part of a run's configuration
NON_CONFIG_KEYS = ("command", "out")


class CommandResult(NamedTuple):
    text: str
    summary: Optional[Dict[str, Any]] = None
    total_failure: bool = False


def parse_range(text: str, log: bool = False) -> List[float]:
    """
    Parse "lo:hi:n" (linear, or log-uniform when log=True), "a,b,c" or a single number.

    Raises:
        DomainError: malformed text or an empty grid
    """
    text = str(text).strip()
    try:
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise ValueError(text)
            lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
            if n < 1:
                raise DomainError(f"range {text!r} is empty", field="range")
            if n == 1:
                return [lo]
            if log:
                if lo <= 0 or hi <= 0:
                    raise DomainError(f"log range {text!r} needs positive bounds", field="range")
                return [float(v) for v in np.logspace(math.log10(lo), math.log10(hi), n)]
            return [float(v) for v in np.linspace(lo, hi, n)]
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise DomainError(f"cannot parse range {text!r}; expected lo:hi:n, a list or a number", field="range")
    if not values:
        raise DomainError(f"range {text!r} is empty", field="range")
    return values


def _touchdown(config: Dict[str, Any]) -> TouchdownConditions:
    return TouchdownConditions(config["alpha"], config["U"], config["V"])


def _shooting(config: Dict[str, Any]) -> ShootingConfig:
    return ShootingConfig(tol=config["tol"], step=config.get("step"), max_iter=config["max_iter"])


def _experiment(config: Dict[str, Any], long_run: bool) -> ExperimentConfig:
    base = LONG_RUN if long_run else ExperimentConfig()
    return ExperimentConfig(
        resolution=config.get("resolution") or base.resolution,
        refinement=config.get("refinement") or base.refinement,
        norm=config.get("norm") or base.norm,
    )


def _render(config: Dict[str, Any], command: str, header: Sequence[str], rows: List[Sequence[Any]],
            result: Dict[str, Any], comments: Sequence[str] = ()) -> str:
    if config.get("format", "csv") == "json":
        return output_utils.render_json(command, config, result)
    return output_utils.render_csv(command, config, header, rows, comments)


def cmd_simulate(config: Dict[str, Any]) -> CommandResult:
    """Integrate one stance from touchdown to slow time T."""
    p = ModelParams(config["alpha"], config["U"], config["V"], config["K"])
    if not config["T"] >= 0:
        raise DomainError(f"horizon T must be non-negative, got {config['T']}", field="T")
    step = config.get("step") or default_step(p.eps)
    traj = simulate(p, config["T"], IntegratorConfig(step=step))
    frequency = fast_approximation(p).frequency
    tau_plus = frequency.tau_plus(traj.times)
    energy = energy_series(traj)
    x, y = traj.L * np.sin(traj.theta), traj.L * np.cos(traj.theta)
    columns = [traj.times, tau_plus, traj.theta, traj.theta_rate, traj.L, traj.L_rate, energy, x, y]
    rows = [list(r) for r in zip(*columns)]
    result = {
        "params": p.to_dict(),
        "step": step,
        "omega": frequency.omega,
        "columns": list(SIMULATE_COLUMNS),
        "rows": rows,
    }
    return CommandResult(_render(config, "simulate", SIMULATE_COLUMNS, rows, result))


def cmd_solve(config: Dict[str, Any]) -> CommandResult:
    """Solve for K* by shooting, or report only the closed-form estimate."""
    touchdown = _touchdown(config)
    if config.get("approx_only"):
        result = {"K_approx": k_star_approx(touchdown)}
        return CommandResult(output_utils.render_json("solve", config, result))
    check_stance_inputs(touchdown.alpha, touchdown.U, touchdown.V)
    solution = solve_stiffness(touchdown.alpha, touchdown.U, touchdown.V, _shooting(config), show_progress=True)
    result = {**solution.to_dict(), "K_approx": k_star_approx(touchdown)}
    return CommandResult(output_utils.render_json("solve", config, result))


def cmd_approx(config: Dict[str, Any]) -> CommandResult:
    """Evaluate the fast-scale closed forms on a strained-time grid with the consistency report."""
    p = ModelParams(config["alpha"], config["U"], config["V"], config["K"])
    if not config["T"] > 0 or config["points"] < 2:
        raise DomainError("approx needs T > 0 and at least two points", T=config["T"], points=config["points"])
    approx = fast_approximation(p, config["order"])
    tau = np.linspace(0.0, config["T"], config["points"])
    L, theta = approx.L(tau), approx.theta(tau)
    report = consistency_check(p, config["margin"])
    K_approx = k_star_approx(p) if p.alpha > 0 else math.nan
    mu = refined_return(p).mu if p.L_d > 0 else math.nan
    rows = [list(r) for r in zip(tau, L, theta)]
    comments = [
        f"omega = {approx.frequency.omega!r}",
        f"K_approx = {K_approx!r}",
        f"mu = {mu!r}",
        f"consistency passed = {report.passed}; v-window passed = {report.v_window_passed}",
    ] + [f"failed: {name}" for name in report.failures()]
    result = {
        "frequency": approx.frequency.to_dict(),
        "K_approx": K_approx,
        "mu": mu,
        "consistency": report.to_dict(),
        "rows": rows,
    }
    for name in report.failures():
        output_utils.warn(f"consistency condition not met: {name}")
    return CommandResult(_render(config, "approx", ("tau_plus", "L_tilde", "theta_tilde"), rows, result, comments))


def _report_rows(reports: Sequence[ConvergenceReport]) -> List[List[Any]]:
    return [
        [r.experiment, s.K, s.eps, s.error, s.sup_error, s.endpoint_error, s.energy_drift, s.drift_bound, s.failure]
        for r in reports
        for s in r.samples
    ]


def _slopes(reports: Sequence[ConvergenceReport]) -> Dict[str, Any]:
    return {
        r.experiment: {"slope": r.slope, "residual": r.residual, "excluded": r.excluded, "drift_flagged": r.drift_flagged}
        for r in reports
    }


def cmd_verify(config: Dict[str, Any]) -> CommandResult:
    """Run one convergence experiment over a log-uniform K grid."""
    experiment = config["experiment"]
    if experiment not in EXPERIMENTS:
        raise DomainError(f"unknown experiment {experiment!r}; expected one of {EXPERIMENTS}")
    workers = config.get("workers", 1)
    if experiment == "kratio":
        alphas = parse_range(config["alphas"])
        table = k_ratio_study(alphas, config["U"], config["V"], _shooting(config), workers, show_progress=True)
        rows = [[r.alpha, r.K_star, r.K_approx, r.ratio if r.ok else math.nan, r.t_star, r.error] for r in table.rows]
        result = {"rows": [dict(zip(KRATIO_COLUMNS, row)) for row in rows]}
        text = _render(config, "verify", KRATIO_COLUMNS, rows, result)
        return CommandResult(text, result, table.all_failed)

    touchdown = _touchdown(config)
    Ks = parse_range(config["K"], log=True)
    if experiment == "fast":
        expanding = bool(config.get("expanding"))
        cfg = _experiment(config, long_run=expanding)
        reports = fast_scale_error(
            touchdown, Ks, config["T"], expanding, config["order"], cfg, workers, show_progress=True
        )
    elif experiment == "slow":
        cfg = _experiment(config, long_run=True)
        reports = (slow_scale_error(touchdown, Ks, config["T"], config["method"], cfg, workers, show_progress=True),)
    else:
        cfg = _experiment(config, long_run=False)
        reports = t_star_order(touchdown, Ks, cfg, workers, show_progress=True)
        solved = solved_t_star_order(
            parse_range(config["alphas"]), touchdown.U, touchdown.V, _shooting(config), workers, show_progress=True
        )
        reports = (*reports, solved)

    summary = _slopes(reports)
    for name, fit in summary.items():
        output_utils.ok(f"{name}: slope {fit['slope']:.4f} (residual {fit['residual']:.3g})")
    comments = [f"{name} slope = {fit['slope']!r} residual = {fit['residual']!r}" for name, fit in summary.items()]
    result = {"reports": [r.to_dict() for r in reports]}
    text = _render(config, "verify", SAMPLE_COLUMNS, _report_rows(reports), result, comments)
    return CommandResult(text, summary, all(r.all_failed for r in reports))


def sweep_summary(table: SweepTable) -> Dict[str, Any]:
    """Monotonicity flags and, for a single alpha, the quadratic fit of K*(U)."""
    summary: Dict[str, Any] = {"rows": len(table.rows), "failed": len(table.rows) - len(table.succeeded)}
    alphas, Us = table.config["alphas"], table.config["Us"]
    K = table.column("K_star")
    if len(Us) == 1 and len(alphas) > 1:
        summary["K_star_decreasing_in_alpha"] = bool(np.all(np.diff(K) < 0))
    if len(alphas) == 1 and len(Us) > 1:
        summary["K_star_increasing_in_U"] = bool(np.all(np.diff(K) > 0))
        if len(Us) >= 3:
            try:
                a, b, c = quadratic_fit(Us, K)
                summary["quadratic_fit"] = {"a": a, "b": b, "c": c, "reference_a": quadratic_reference(alphas[0])}
            except DomainError:
                pass
    return summary


def cmd_sweep(config: Dict[str, Any]) -> CommandResult:
    """Solve K* over an alpha x U grid."""
    alphas = parse_range(config["alpha"])
    Us = parse_range(config["U"])
    table = stance_sweep(alphas, Us, config["V"], _shooting(config), config.get("workers", 1), show_progress=True)
    rows = [[getattr(row, name) for name in SWEEP_COLUMNS] for row in table.rows]
    summary = sweep_summary(table)
    comments = [f"{key} = {json.dumps(output_utils.plain(value))}" for key, value in summary.items()]
    result = {"rows": [row.to_dict() for row in table.rows], "summary": summary}
    return CommandResult(_render(config, "sweep", SWEEP_COLUMNS, rows, result, comments), summary, table.all_failed)


COMMANDS: Dict[str, Callable[[Dict[str, Any]], CommandResult]] = {
    "simulate": cmd_simulate,
    "solve": cmd_solve,
    "approx": cmd_approx,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
}


def _add_touchdown(parser: argparse.ArgumentParser, ranges: bool = False) -> None:
    kind = str if ranges else float
    parser.add_argument("--alpha", type=kind, default="0.4" if ranges else 0.4, help="Angle of attack (rad)")
    parser.add_argument("--U", type=kind, default="1.0" if ranges else 1.0, help="Horizontal Froude number")
    parser.add_argument("--V", type=float, default=0.1, help="Vertical Froude number")


def _add_output(parser: argparse.ArgumentParser, default_format: str = "csv") -> None:
    parser.add_argument("--out", type=str, default=None, help="Output file (standard output if omitted)")
    parser.add_argument("--format", choices=FORMATS, default=default_format, help="Output format")


def _add_shooting(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--tol", type=float, default=1e-10, help="Residual tolerance on |L(t*) - 1|")
    parser.add_argument("--step", type=float, default=None, help="Fixed integration step")
    parser.add_argument("--max-iter", dest="max_iter", type=int, default=50, help="Secant iteration budget")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slip", description="Spring-mass running model: stance simulation and asymptotics")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Integrate one stance phase")
    _add_touchdown(p)
    p.add_argument("--K", type=float, default=12.0, help="Dimensionless stiffness")
    p.add_argument("--T", type=float, default=1.0, help="Horizon in slow time")
    p.add_argument("--step", type=float, default=None, help="Fixed step (default min(eps/50, 1e-3))")
    _add_output(p)

    p = sub.add_parser("solve", help="Solve for the stiffness K*")
    _add_touchdown(p)
    _add_shooting(p)
    p.add_argument("--approx-only", dest="approx_only", action="store_true", help="Only evaluate the closed-form K~*")
    _add_output(p, default_format="json")

    p = sub.add_parser("approx", help="Evaluate the fast-scale approximations")
    _add_touchdown(p)
    p.add_argument("--K", type=float, default=400.0, help="Dimensionless stiffness")
    p.add_argument("--T", type=float, default=2.0 * math.pi, help="Strained-time interval end")
    p.add_argument("--points", type=int, default=101, help="Grid points")
    p.add_argument("--order", type=int, choices=(0, 1, 2), default=2, help="Approximation order")
    p.add_argument("--margin", type=float, default=DEFAULT_MARGIN, help="Ratio required for '<<'")
    _add_output(p)

    p = sub.add_parser("verify", help="Run a convergence experiment")
    p.add_argument("experiment", choices=EXPERIMENTS)
    _add_touchdown(p)
    p.add_argument("--K", type=str, default="1e2:1e6:9", help="Stiffness grid lo:hi:n (log-uniform)")
    p.add_argument("--T", type=float, default=None, help="Interval end (pi on the fast scale, 1 on the slow scale)")
    p.add_argument("--expanding", action="store_true", help="Fast experiment on tau+ <= T/eps")
    p.add_argument("--order", type=int, choices=(0, 1, 2), default=2, help="Approximation order")
    p.add_argument("--method", choices=("numerical", "small_angle"), default="numerical", help="Slow-scale reference")
    p.add_argument("--norm", choices=("sup", "endpoint"), default="sup", help="Error norm that is fitted")
    p.add_argument("--resolution", type=int, default=None, help="Steps per unit fast time")
    p.add_argument("--refinement", type=int, default=None, help="Reference step subdivision")
    p.add_argument("--alphas", type=str, default="0.05,0.1,0.2,0.4", help="Angles for kratio and the solved-K* return time")
    p.add_argument("--workers", type=int, default=1, help="Worker processes")
    _add_shooting(p)
    _add_output(p)

    p = sub.add_parser("sweep", help="Solve K* over an alpha x U grid")
    _add_touchdown(p, ranges=True)
    p.add_argument("--workers", type=int, default=1, help="Worker processes")
    _add_shooting(p)
    _add_output(p)

    p = sub.add_parser("rerun", help="Re-run the configuration embedded in an artifact")
    p.add_argument("file", help="CSV or JSON file written by this tool")
    p.add_argument("--out", type=str, default=None, help="Output file (standard output if omitted)")
    return parser


def config_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    config = {k: v for k, v in vars(args).items() if k not in NON_CONFIG_KEYS}
    if args.command == "verify" and config.get("T") is None:
        config["T"] = 1.0 if config["experiment"] == "slow" else math.pi
    return config


def run_command(command: str, config: Dict[str, Any], out: Optional[str] = None) -> int:
    if command not in COMMANDS:
        raise DomainError(f"unknown command {command!r}", command=command)
    result = COMMANDS[command](config)
    written = output_utils.write_output(result.text, out)
    sidecar = output_utils.sidecar_path(out)
    if result.summary is not None and sidecar and config.get("format", "csv") == "csv":
        output_utils.write_output(output_utils.render_json(command, config, result.summary), sidecar)
    if written is not None:
        output_utils.ok(f"wrote {written}")
    if result.total_failure:
        output_utils.error("every sample failed")
        return EXIT_NUMERICAL
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "rerun":
            command, config = output_utils.read_artifact(args.file)
        else:
            command, config = args.command, config_from_args(args)
        return run_command(command, config, args.out)
    except DomainError as e:
        sys.stderr.write(json.dumps(output_utils.plain(e.to_dict())) + "\n")
        return EXIT_VALIDATION
    except SlipError as e:
        sys.stderr.write(json.dumps(output_utils.plain(e.to_dict())) + "\n")
        return EXIT_NUMERICAL
    except OSError as e:
        path = None if e.filename is None else str(e.filename)
        failure = {"error": type(e).__name__, "message": e.strerror or str(e), "path": path}
        sys.stderr.write(json.dumps(output_utils.plain(failure)) + "\n")
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
