"""
Command-line entry point: ``python main.py <subcommand> [flags]``.

Exit codes: 0 success, 1 unexpected error, 2 configuration error,
3 verification failure.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple

from pydantic import ValidationError

from src.cli.config import DEFAULT_GAMMA1, DEFAULT_GAMMA2, SweepSpec, parse_config
from src.cli.sweep import run_sweep, solve_mode, write_csv
from src.cli.verify import verify
from src.logger.logger import Logger, set_global_level
from src.model.errors import AccessModelError, ConfigError
from src.model.throughput import evaluate
from src.model.types import AccessPolicy, Constraints, SystemParams
from src.optimizer.solver import SolverOptions
from src.oracle.network import SimConfig, simulate_network

logger = Logger(__name__)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_VERIFY_FAILED = 3

LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="configuration document")
    common.add_argument("--seed", type=int, help="master seed, overrides the document")
    common.add_argument("--out", type=Path, help="output file (default: standard output)")
    common.add_argument("--log-level", choices=LOG_LEVELS, default="WARNING")

    policy = argparse.ArgumentParser(add_help=False)
    policy.add_argument("--a1", type=float, default=0.8)
    policy.add_argument("--a2", type=float, default=0.3)
    policy.add_argument("--gamma1", type=float, default=DEFAULT_GAMMA1)
    policy.add_argument("--gamma2", type=float, default=DEFAULT_GAMMA2)
    policy.add_argument("--lambda-p", type=float, help="PU arrival rate, overrides the document")

    parser = argparse.ArgumentParser(
        prog="mpr-access",
        description="Throughput-optimal random access for secondary users under MPR.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("eval", parents=[common, policy], help="analytic report for one policy")

    simulate = sub.add_parser("simulate", parents=[common, policy], help="slot simulator")
    simulate.add_argument("--slots", type=int, help="slots to simulate")
    simulate.add_argument("--warmup", type=int, help="slots discarded before counting")
    simulate.add_argument("--trace", type=Path, help="write the per-slot trace CSV here")

    optimize = sub.add_parser("optimize", parents=[common], help="solve one instance")
    optimize.add_argument("--mode", choices=["adaptive", "fixed", "conventional"], default="adaptive")
    optimize.add_argument("--starts", type=int, help="number of local searches")
    optimize.add_argument("--lambda-p", type=float, help="PU arrival rate, overrides the document")
    optimize.add_argument(
        "--require-feasible", action="store_true", help="fail when no policy meets the constraints"
    )

    sweep = sub.add_parser("sweep", parents=[common], help="solve a grid and emit CSV")
    sweep.add_argument("--starts", type=int, help="number of local searches per point")
    sweep.add_argument("--slots", type=int, help="slots per validation run")

    check = sub.add_parser("verify", parents=[common], help="closed forms versus Monte Carlo")
    check.add_argument("--samples", type=int, default=1_000_000, help="samples per grid point")

    serve = sub.add_parser("serve", parents=[common], help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8230)
    serve.add_argument("--workers", type=int, default=1)
    return parser


def load_inputs(
    args: argparse.Namespace, overrides: Optional[Dict[str, Any]] = None
) -> Tuple[SystemParams, Constraints, SweepSpec]:
    """
    Parse ``--config`` (or defaults) and apply flag overrides to the sweep spec.

    Raises:
        ConfigError: Unreadable document or invalid values.
    """
    text = ""
    if args.config is not None:
        try:
            text = args.config.read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read config: {e.strerror}", key=str(args.config)) from e
    params, constraints, spec = parse_config(text)

    updates = {k: v for k, v in (overrides or {}).items() if v is not None}
    if args.seed is not None:
        updates["seed"] = args.seed
    if updates:
        try:
            spec = SweepSpec.model_validate({**spec.model_dump(), **updates})
        except ValidationError as e:
            first = e.errors()[0]
            key = str(first["loc"][0]) if first.get("loc") else None
            raise ConfigError(first["msg"], key=key) from e

    lambda_p = getattr(args, "lambda_p", None)
    if lambda_p is not None:
        try:
            constraints = Constraints.model_validate({**constraints.model_dump(), "lambda_p": lambda_p})
        except ValidationError as e:
            raise ConfigError(e.errors()[0]["msg"], key="lambda_p") from e
    return params, constraints, spec


def _policy(args: argparse.Namespace) -> AccessPolicy:
    try:
        return AccessPolicy(a1=args.a1, a2=args.a2, gamma1=args.gamma1, gamma2=args.gamma2)
    except ValidationError as e:
        first = e.errors()[0]
        key = str(first["loc"][0]) if first.get("loc") else "a2"
        raise ConfigError(first["msg"], key=key) from e


def _emit(text: str, out: Optional[Path]) -> None:
    if out is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(out, "w", encoding="utf-8", newline="") as handle:
        handle.write(text)
    logger.info("Wrote output", path=str(out))


def cmd_eval(args: argparse.Namespace) -> int:
    params, constraints, _ = load_inputs(args)
    report = evaluate(_policy(args), params, constraints.lambda_p, constraints)
    _emit(report.model_dump_json(indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    params, constraints, spec = load_inputs(args, {"sim_slots": args.slots})
    try:
        config = SimConfig(
            n_slots=spec.sim_slots,
            seed=spec.seed,
            lambda_p=constraints.lambda_p,
            policy=_policy(args),
            params=params,
            warmup_slots=args.warmup,
        )
    except ValidationError as e:
        raise ConfigError(e.errors()[0]["msg"], key="warmup") from e
    result = simulate_network(config, str(args.trace) if args.trace else None)
    _emit(result.model_dump_json(indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_optimize(args: argparse.Namespace) -> int:
    params, constraints, spec = load_inputs(args, {"n_starts": args.starts})
    report = solve_mode(
        args.mode,
        params,
        constraints,
        spec.n_starts,
        spec.seed,
        spec.gamma1_fixed,
        spec.gamma2_fixed,
        SolverOptions(start_tolerance=spec.start_tolerance),
    )
    if args.require_feasible:
        report.require_feasible()
    _emit(report.model_dump_json(indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    params, constraints, spec = load_inputs(args, {"n_starts": args.starts, "sim_slots": args.slots})
    _emit(write_csv(run_sweep(spec, params, constraints)), args.out)
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    params, _, spec = load_inputs(args)
    if args.samples < 1:
        raise ConfigError("must be positive", key="samples")
    report = verify(params, args.samples, spec.seed)
    _emit(report.frame().to_csv(index=False, lineterminator="\n"), args.out)
    passed = sum(point.passed for point in report.points)
    sys.stderr.write(
        f"verify: {passed}/{len(report.points)} points within tolerance, "
        f"{'PASS' if report.passed else 'FAIL'}\n"
    )
    return EXIT_OK if report.passed else EXIT_VERIFY_FAILED


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    uvicorn.run("main:app", host=args.host, port=args.port, workers=args.workers)
    return EXIT_OK


COMMANDS = {
    "eval": cmd_eval,
    "simulate": cmd_simulate,
    "optimize": cmd_optimize,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
    "serve": cmd_serve,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one subcommand.

    Args:
        argv (Optional[Sequence[str]]): Arguments without the program name.

    Returns:
        int: Process exit code.
    """
    args = build_parser().parse_args(list(argv) if argv is not None else None)
    set_global_level(getattr(logging, args.log_level))
    try:
        return COMMANDS[args.command](args)
    except ConfigError as e:
        logger.error("Configuration error", detail=e.message)
        sys.stderr.write(f"error: {e.message}\n")
        return EXIT_CONFIG
    except AccessModelError as e:
        logger.error("Model error", detail=e.message)
        sys.stderr.write(f"error: {e.message}\n")
        return EXIT_UNEXPECTED
    except Exception as e:
        logger.exception("Unexpected error", error=str(e))
        return EXIT_UNEXPECTED
