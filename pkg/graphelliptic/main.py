import argparse
import logging
import sys
from typing import List, Optional

from graphelliptic.api import commands
from graphelliptic.config import settings
from graphelliptic.errors import GraphEllipticError
from graphelliptic.utils.logger import log_command, log_result, setup_logging

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphelliptic",
        description="Elliptic problems on weighted graph domains",
    )
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    parser.add_argument("--log-json", action="store_true", help="emit log records as JSON lines")
    parser.add_argument("--threads", type=int, default=None, help="cap on worker threads")
    sub = parser.add_subparsers(dest="command", required=True)

    info = sub.add_parser("info", help="graph and domain summary")
    info.add_argument("graph")

    first = sub.add_parser("lambda1", help="first Dirichlet eigenvalue")
    first.add_argument("graph")

    mp = sub.add_parser("lambda-mp", help="(m,p) Rayleigh constant")
    mp.add_argument("graph")
    mp.add_argument("--m", type=int, default=1)
    mp.add_argument("--p", type=float, default=2.0)
    mp.add_argument("--seed", type=int, default=settings.default_seed)

    solve = sub.add_parser("solve", help="distinct solutions of the semilinear problem")
    solve.add_argument("graph")
    solve.add_argument("problem", nargs="?")
    solve.add_argument("--seed", type=int, default=settings.default_seed)
    solve.add_argument("--budget", type=int, default=None)
    solve.add_argument("--mode", choices=["deflate", "mountain-pass"], default="deflate")
    solve.add_argument("--truncate", action="store_true", help="non-negative solutions through f+")
    solve.add_argument("--yamabe", nargs=2, type=float, metavar=("GAMMA", "P"))
    solve.add_argument("--rho", type=float, default=None)

    sweep = sub.add_parser("sweep", help="solution counts over a lambda grid (CSV)")
    sweep.add_argument("graph")
    sweep.add_argument("problem")
    sweep.add_argument("--lambda-grid", required=True, metavar="A:B:N")
    sweep.add_argument("--seed", type=int, default=settings.default_seed)
    sweep.add_argument("--budget", type=int, default=None)
    sweep.add_argument("--rho", type=float, default=None)

    verify = sub.add_parser("verify", help="hypothesis checks")
    verify.add_argument("graph")
    verify.add_argument("problem")
    verify.add_argument("--rho", type=float, default=None)
    return parser


def dispatch(args: argparse.Namespace) -> str:
    if args.command == "info":
        return commands.cmd_info(args.graph)
    if args.command == "lambda1":
        return commands.cmd_lambda1(args.graph)
    if args.command == "lambda-mp":
        return commands.cmd_lambda_mp(args.graph, args.m, args.p, seed=args.seed)
    if args.command == "solve":
        return commands.cmd_solve(
            args.graph,
            args.problem,
            seed=args.seed,
            budget=args.budget,
            mode=args.mode,
            truncate=args.truncate,
            yamabe=tuple(args.yamabe) if args.yamabe else None,
            rho=args.rho,
        )
    if args.command == "sweep":
        return commands.cmd_sweep(args.graph, args.problem, args.lambda_grid, seed=args.seed,
                                  budget=args.budget, rho=args.rho)
    return commands.cmd_verify(args.graph, args.problem, rho=args.rho)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "solve" and args.mode == "mountain-pass" and args.rho is None:
        parser.error("--mode mountain-pass needs --rho")
    if args.threads is not None:
        settings.threads = max(1, args.threads)
    setup_logging(log_level=args.log_level or settings.log_level, json_output=args.log_json or settings.log_json)
    log_command(logger, args.command, {k: v for k, v in vars(args).items() if k != "command"})

    try:
        output = dispatch(args)
    except GraphEllipticError as e:
        logger.error("%s failed: %s", args.command, e)
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        log_result(logger, args.command, e.exit_code)
        return e.exit_code
    except ValueError as e:
        logger.error("%s rejected its input: %s", args.command, e)
        print(f"ValueError: {e}", file=sys.stderr)
        log_result(logger, args.command, 1)
        return 1

    sys.stdout.write(output)
    log_result(logger, args.command, 0, output.splitlines()[0] if output else None)
    return 0


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
