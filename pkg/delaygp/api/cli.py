import argparse
import logging
import sys
from typing import Any, Dict, List, Optional, TextIO

from pydantic import ValidationError

from ..application.dtos import ResultTable, ValidationSummary
from ..dependencies import get_experiment_use_cases
from ..domain.exceptions import (
    ConfigurationException,
    DivergenceException,
    DomainException,
    InvalidArgumentException,
    NoSolutionException,
    PreconditionViolationException,
)
from ..domain.models.entities import TradeoffReport
from ..domain.models.enums import ExperimentKind
from ..domain.repositories import ResultRepository
from ..infrastructure.config import Settings, load_config

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_PRECONDITION = 4

# Checked in order, so subclasses come before DomainException
EXIT_CODES = [
    (ConfigurationException, EXIT_CONFIG),
    (ValidationError, EXIT_CONFIG),
    (InvalidArgumentException, EXIT_CONFIG),
    (DivergenceException, EXIT_DIVERGENCE),
    (PreconditionViolationException, EXIT_PRECONDITION),
    (NoSolutionException, EXIT_PRECONDITION),
    (DomainException, EXIT_CONFIG),
]

COMMANDS = {
    "delay-sweep": ExperimentKind.DELAY_SWEEP,
    "dataset-sweep": ExperimentKind.DATASET_SWEEP,
    "online-trigger": ExperimentKind.ONLINE_TRIGGER,
    "tradeoff": ExperimentKind.TRADEOFF_SWEEP,
    "validate-config": None,
}


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML experiment configuration")
    parser.add_argument("--seed", type=int, help="Master RNG seed")
    parser.add_argument("--reps", type=int, help="Monte-Carlo repetitions")
    parser.add_argument("--out", help="Output directory for CSV and JSON files")
    parser.add_argument("--dt", type=float, help="Integration step")
    parser.add_argument("--workers", type=int, help="Parallel repetitions")
    parser.add_argument("--quiet", action="store_true", help="Only log warnings")


def build_parser() -> argparse.ArgumentParser:
    """Build the delaygp argument parser."""
    parser = argparse.ArgumentParser(
        prog="delaygp",
        description="GP tracking control under computational delay",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    helps = {
        "delay-sweep": "Offline GP under constant delays plus the uncompensated baseline",
        "dataset-sweep": "Accuracy-delay trade-off over the training set size",
        "online-trigger": "Event-triggered online learning against the offline GP",
        "tradeoff": "Offline-vs-online certificate",
        "validate-config": "Build the scenario and check the delay bounds",
    }
    for name, text in helps.items():
        sub = subparsers.add_parser(name, help=text)
        _add_common_flags(sub)
        if name == "tradeoff":
            sub.add_argument(
                "--sweep",
                action="store_true",
                help="Also run the online/offline Monte-Carlo comparison per Δ̄",
            )
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {
        "seed": args.seed,
        "repetitions": args.reps,
        "output_dir": args.out,
        "dt": args.dt,
        "workers": args.workers,
    }


def exit_code_for(error: Exception) -> int:
    """Get the process exit code of an exception."""
    for exception_type, code in EXIT_CODES:
        if isinstance(error, exception_type):
            return code
    return EXIT_CONFIG


def run_command(
    args: argparse.Namespace,
    settings: Settings,
    result_repository: Optional[ResultRepository] = None,
    stdout: TextIO = sys.stdout,
    stderr: TextIO = sys.stderr,
) -> int:
    """Run one parsed command and return its exit code."""
    kind = COMMANDS[args.command]
    try:
        config = load_config(args.config, kind=kind, overrides=_overrides(args))
        use_cases = get_experiment_use_cases(config, settings, result_repository)

        if args.command == "validate-config":
            _print_validation(use_cases.validate_config(config), stdout)
        elif args.command == "tradeoff" and not args.sweep:
            _print_report(use_cases.run_tradeoff_report(config), stdout)
        else:
            _print_table(use_cases.run(config), stdout)
    except (DomainException, ValidationError) as e:
        code = exit_code_for(e)
        message = str(e).splitlines()[0] if str(e) else type(e).__name__
        print(f"delaygp: {type(e).__name__}: {message}", file=stderr)
        logger.debug("Command failed", exc_info=True)
        return code
    return EXIT_OK


def _print_validation(summary: ValidationSummary, stdout: TextIO) -> None:
    print(f"kind: {summary.kind.value}", file=stdout)
    print(f"state dimension: {summary.state_dim}", file=stdout)
    print(f"L_f: {summary.l_f:.6g}", file=stdout)
    print(f"Δ̄ < 1/(2 L_f) = {summary.delta_bar_limit:.6g}", file=stdout)
    print(f"P: {summary.p_matrix}", file=stdout)
    print(f"ξ: {summary.xi:.6g}, χ: {summary.chi:.6g}", file=stdout)
    print(f"β: {summary.beta:.6g}", file=stdout)
    print(f"joint confidence: {summary.joint_confidence:.6g}", file=stdout)
    if summary.checked_delta_bars:
        print(f"certified Δ̄: {summary.checked_delta_bars}", file=stdout)


def _print_report(report: TradeoffReport, stdout: TextIO) -> None:
    verdict = "offline certified" if report.offline_certified else "no certificate"
    print(f"Δ̄₁ = {report.delta_bar_1:g}, Δ̄₂ = {report.delta_bar_2:g}", file=stdout)
    print(f"ē₁ = {report.e_bar_offline:.6g}", file=stdout)
    print(f"ē₂ = {report.e_bar_online:.6g}", file=stdout)
    print(
        f"Δ̄₂ ≥ ξη̃/(2(F+F_d)): {report.first_lhs:.6g} ≥ {report.first_rhs:.6g} "
        f"-> {report.first_holds}",
        file=stdout,
    )
    print(
        f"Δ̃ ≥ (ξη̃ − 2(F+F_d)Δ̄₁)/(2(ξL_fF+F+F_d)): {report.second_lhs:.6g} ≥ "
        f"{report.second_rhs:.6g} -> {report.second_holds}",
        file=stdout,
    )
    print(f"verdict: {verdict}", file=stdout)


def _print_table(table: ResultTable, stdout: TextIO) -> None:
    columns = ["series", table.sweep_variable, "mean", "min", "max", "bound"]
    print(f"{columns[0]:<10} " + " ".join(f"{c:>10}" for c in columns[1:]), file=stdout)
    for s in table.summaries:
        bound = f"{s.bound:10.4g}" if s.bound is not None else f"{'-':>10}"
        line = (
            f"{s.series:<10} {s.sweep_value:>10g} {s.mean_max_error:10.4g} "
            f"{s.min_max_error:10.4g} {s.max_max_error:10.4g} {bound}"
        )
        if s.evaluated:
            line += f"  selected {s.selected}/{s.evaluated}"
        print(line, file=stdout)
