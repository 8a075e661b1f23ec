#!/usr/bin/env python3
"""
Dissipative Wave Lab
====================

Command-line entry point. Each subcommand is validated against its schema,
routed to a handler and printed as a JSON response envelope on stdout
(kernel dumps print the profile CSV itself). Logs go to stderr.
"""

import argparse
import asyncio
import json
import logging
import sys
from typing import Any, Dict, List, Optional, Tuple

import config
from handlers.cache import CacheHandler
from handlers.experiments import ExperimentHandler
from handlers.kernels import KernelHandler
from handlers.symbols import SymbolHandler
from schemas.command_schemas import get_all_command_schemas
from services.cache_service import ProfileCache
from services.experiment_service import EXIT_CONFIG, EXIT_FAIL, EXIT_PASS
from utils.formatting import format_error_response, format_validation_error
from utils.validation import validate_arguments

logger = logging.getLogger(__name__)

CONFIG_ERROR_TYPES = {"ValidationError", "ConfigError", "SymbolError", "ApplicabilityError"}


class LabCLI:
    """Routes validated commands to their handlers."""

    def __init__(self, cache: Optional[ProfileCache] = None):
        self.cache = cache if cache is not None else ProfileCache()
        self.handlers = self._initialize_handlers()
        self.command_schemas = get_all_command_schemas()

    def _initialize_handlers(self) -> Dict[str, Any]:
        return {
            "symbols": SymbolHandler(),
            "kernels": KernelHandler(self.cache),
            "experiments": ExperimentHandler(self.cache),
            "cache": CacheHandler(self.cache),
        }

    async def dispatch(self, name: str, arguments: Dict[str, Any]) -> str:
        """Validate arguments and run a command; returns the response envelope."""
        if name not in self.command_schemas:
            logger.error(f"Unknown command: {name}")
            return format_error_response(f"Unknown command: {name}")

        validation = validate_arguments(arguments, self.command_schemas[name]["inputSchema"])
        if not validation["valid"]:
            logger.error(f"Invalid arguments for {name}: {validation['errors']}")
            return format_validation_error(validation["errors"])

        return await self._route_command(name, arguments)

    async def _route_command(self, name: str, arguments: Dict[str, Any]) -> str:
        if name == "zoo":
            return await self.handlers["symbols"].list_zoo(arguments.get("dim", 3))
        elif name == "mhcheck":
            return await self.handlers["symbols"].mh_check(**arguments)
        elif name == "kernel":
            return await self.handlers["kernels"].dump_kernel(**arguments)
        elif name == "crucial":
            return await self.handlers["experiments"].crucial(**arguments)
        elif name == "sweep":
            return await self.handlers["experiments"].sweep(**arguments)
        elif name == "run":
            return await self.handlers["experiments"].run_config(**arguments)
        elif name == "cache_info":
            return await self.handlers["cache"].info()
        elif name == "cache_clear":
            return await self.handlers["cache"].clear()
        else:
            raise ValueError(f"Unhandled command: {name}")


def exit_code(response: str) -> int:
    """0 on pass, 1 on failed verdicts or errors, 2 on invalid input."""
    envelope = json.loads(response)
    if envelope.get("status") == "error":
        error_type = envelope.get("error", {}).get("type", "")
        return EXIT_CONFIG if error_type in CONFIG_ERROR_TYPES else EXIT_FAIL
    data = envelope.get("data")
    if isinstance(data, dict):
        return int(data.get("exit_code", EXIT_PASS))
    return EXIT_PASS


def _params(pairs: Optional[List[str]]) -> Dict[str, float]:
    params: Dict[str, float] = {}
    for item in pairs or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"Parameters are key=value, got {item!r}")
        params[key.strip()] = float(value)
    return params


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="Experiment config (JSON)")
    common.add_argument("--out", default=argparse.SUPPRESS, help="Output directory or file")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    common.add_argument("--tolerance-scale", type=float, default=argparse.SUPPRESS)
    common.add_argument("--log-level", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(
        prog="dwlab", parents=[common], allow_abbrev=False,
        description="Spectral experiments for damped wave equations u_tt - Lap u + A u_t = 0",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    zoo = commands.add_parser(
        "zoo", parents=[common], allow_abbrev=False,
        help="List the symbol catalogue",
    )
    zoo.add_argument("--dim", type=int, default=3)

    symbol_args = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    symbol_args.add_argument("--model", required=True)
    symbol_args.add_argument("--param", action="append", metavar="KEY=VALUE")
    symbol_args.add_argument("--dim", type=int, default=3)

    mh = commands.add_parser(
        "mhcheck", parents=[common, symbol_args], allow_abbrev=False,
        help="Mikhlin-Hormander screen",
    )
    mh.add_argument("--band", action="append", choices=["low", "high"])

    kernel = commands.add_parser(
        "kernel", parents=[common, symbol_args], allow_abbrev=False,
        help="Dump one radial profile",
    )
    kernel.add_argument("--t", "--time", dest="t", type=float, required=True)
    kernel.add_argument("--band", default="full", choices=["low", "mid", "high", "full"])
    kernel.add_argument("--points", type=int, default=512)
    kernel.add_argument("--no-cache", action="store_true")

    crucial = commands.add_parser(
        "crucial", parents=[common], allow_abbrev=False,
        help="Oscillatory-diffusive multiplier experiment",
    )
    crucial.add_argument("--n", type=int, required=True)
    crucial.add_argument("--p", required=True)
    crucial.add_argument("--q", required=True)
    crucial.add_argument("--theta", type=float, default=2.0)
    crucial.add_argument("--tau-start", type=float, default=1e-4)
    crucial.add_argument("--tau-stop", type=float, default=1e-1)
    crucial.add_argument("--points", type=int, default=13)

    sweep = commands.add_parser(
        "sweep", parents=[common, symbol_args], allow_abbrev=False,
        help="Theorem sweep of one band",
    )
    sweep.add_argument("--band", required=True, choices=["low", "mid", "high", "full"])
    sweep.add_argument("--p", required=True)
    sweep.add_argument("--q", required=True)
    sweep.add_argument("--t-start", type=float, default=10.0)
    sweep.add_argument("--t-stop", type=float, default=1000.0)
    sweep.add_argument("--points", type=int, default=17)
    sweep.add_argument("--transform", default="hankel", choices=["hankel", "fft"])

    cache = commands.add_parser(
        "cache", parents=[common], allow_abbrev=False,
        help="Inspect or clear the profile cache",
    )
    cache.add_argument("action", choices=["info", "clear"])

    commands.add_parser(
        "run", parents=[common], allow_abbrev=False,
        help="Run an experiment config",
    )
    return parser


def _exponent(text: str) -> Any:
    try:
        return float(text)
    except ValueError:
        return text


def command_arguments(args: argparse.Namespace) -> Tuple[str, Dict[str, Any]]:
    """The schema command name and its arguments for a parsed command line."""
    if args.command == "zoo":
        return "zoo", {"dim": args.dim}
    if args.command == "mhcheck":
        arguments = {"model": args.model, "params": _params(args.param), "dim": args.dim}
        if args.band:
            arguments["bands"] = args.band
        if hasattr(args, "seed"):
            arguments["seed"] = args.seed
        return "mhcheck", arguments
    if args.command == "kernel":
        arguments = {
            "model": args.model, "params": _params(args.param), "dim": args.dim, "band": args.band,
            "t": args.t, "points": args.points, "use_cache": not args.no_cache,
        }
        if hasattr(args, "seed"):
            arguments["seed"] = args.seed
        return "kernel", arguments
    if args.command == "crucial":
        arguments = {
            "n": args.n, "p": _exponent(args.p), "q": _exponent(args.q), "theta": args.theta,
            "tau_start": args.tau_start, "tau_stop": args.tau_stop, "points": args.points,
        }
        if hasattr(args, "tolerance_scale"):
            arguments["tolerance_scale"] = args.tolerance_scale
        return "crucial", arguments
    if args.command == "sweep":
        arguments = {
            "model": args.model, "params": _params(args.param), "dim": args.dim, "band": args.band,
            "p": _exponent(args.p), "q": _exponent(args.q), "t_start": args.t_start,
            "t_stop": args.t_stop, "points": args.points, "transform": args.transform,
        }
        if hasattr(args, "tolerance_scale"):
            arguments["tolerance_scale"] = args.tolerance_scale
        return "sweep", arguments
    if args.command == "cache":
        return f"cache_{args.action}", {}
    arguments = {
        "config": getattr(args, "config", None),
        "out": getattr(args, "out", None),
        "seed": getattr(args, "seed", None),
        "threads": getattr(args, "threads", None),
        "tolerance_scale": getattr(args, "tolerance_scale", None),
    }
    if arguments["config"] is None:
        del arguments["config"]
    return "run", arguments


def main(argv: Optional[List[str]] = None) -> int:
    """Run one command; returns the process exit status."""
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=getattr(args, "log_level", config.log_level).upper(),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        stream=sys.stderr,
    )

    try:
        name, arguments = command_arguments(args)
    except argparse.ArgumentTypeError as e:
        print(format_validation_error([str(e)]))
        return EXIT_CONFIG

    out = getattr(args, "out", None)
    if name == "kernel" and out:
        arguments["out"] = out

    cli = LabCLI()
    response = asyncio.run(cli.dispatch(name, arguments))

    if name == "kernel" and not out:
        envelope = json.loads(response)
        if envelope.get("status") == "success":
            sys.stdout.write(envelope["data"]["csv"])
            return EXIT_PASS
    print(response)
    return exit_code(response)


if __name__ == "__main__":
    sys.exit(main())
