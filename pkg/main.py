import argparse
import json
import logging
import sys

from src.default_constants import EXIT_OK, EXIT_CONFIG_ERROR
from src.errors import PrinstratError
from src.cli.config import Command, load_config
from src.cli.commands import cmd_simulate, cmd_fit, cmd_pir, cmd_asym, cmd_scenario
from src.threading.job_manager import resolve_workers

log = logging.getLogger("prinstrat")


def _json_value(text: str):
    """Flag values given as JSON (lists, objects); plain strings pass through."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prinstrat",
        description="Bayesian principal stratification when principal ignorability may fail.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log debug messages")
    parser.add_argument("-q", "--quiet", action="store_true", help="log warnings only, no progress bars")
    commands = parser.add_subparsers(dest="command", required=True)

    def command(name, help):
        sub = commands.add_parser(name, help=help)
        sub.add_argument("--config", help="JSON config file; flags override its values")
        sub.add_argument("--out", help="output file or directory")
        return sub

    sub = command(Command.Simulate, "draw a dataset from a truth")
    sub.add_argument("--truth", help="preset name or JSON parameter object")
    sub.add_argument("--binary", action="store_const", const=True, help="the truth has a binary intermediate")
    sub.add_argument("--n", type=int)
    sub.add_argument("--seed", type=int)

    sub = command(Command.Fit, "run the Gibbs sampler on a dataset")
    sub.add_argument("data", nargs="?", help="dataset CSV")
    sub.add_argument("--constraints", dest="regime", help="regime name, parts joined with '+'")
    sub.add_argument("--rho", type=float, help="fix rho (p11 for binary data)")
    sub.add_argument("--chain", type=_json_value, help="JSON object of chain settings")
    sub.add_argument("--strata", type=_json_value, help="JSON list of [s0, s1] pairs")

    sub = command(Command.Pir, "partial identification regions of the violation coefficients")
    sub.add_argument("--data", help="dataset CSV")
    sub.add_argument("--truth", help="preset name or JSON parameter object (population moments)")
    sub.add_argument("--binary", action="store_const", const=True)
    sub.add_argument("--rho", type=float)
    sub.add_argument("--rho-sweep", dest="rho_sweep", type=_json_value, help="JSON list of rho values")
    sub.add_argument("--strata", type=_json_value, help="JSON list of [s0, s1] pairs for PCE bands")
    sub.add_argument("--oracle", action="store_const", const=True, help="also scan sigma_y2 by brute force")

    sub = command(Command.Asym, "large sample posterior variance of rho")
    sub.add_argument("--truth")
    sub.add_argument("--t-bar", dest="t_bar", type=float)
    sub.add_argument("--n-values", dest="n_values", type=_json_value, help="JSON list of sample sizes")

    sub = command(Command.Scenario, "run a simulation study")
    sub.add_argument("scenario", nargs="?", help="scenario id")
    sub.add_argument("--check", action="store_const", const=True, help="fail unless every acceptance gate passes")
    sub.add_argument("--draws-dir", dest="draws_dir", help="keep the draws of every fit under this directory")
    sub.add_argument("--threads", type=int, help="worker processes")
    return parser


OVERRIDE_KEYS = {
    Command.Simulate: ("out", "truth", "binary", "n", "seed"),
    Command.Fit: ("out", "data", "regime", "rho", "chain", "strata"),
    Command.Pir: ("out", "data", "truth", "binary", "rho", "rho_sweep", "strata", "oracle"),
    Command.Asym: ("out", "truth", "t_bar", "n_values"),
    Command.Scenario: ("out", "scenario", "check", "draws_dir"),
}


def run(args: argparse.Namespace):
    overrides = {key: getattr(args, key) for key in OVERRIDE_KEYS[args.command]}
    if isinstance(overrides.get("truth"), str):
        overrides["truth"] = _json_value(overrides["truth"])
    config = load_config(args.command, args.config, overrides)
    progress = not args.quiet and sys.stderr.isatty()

    if args.command == Command.Simulate:
        cmd_simulate(config)
    elif args.command == Command.Fit:
        cmd_fit(config, progress)
    elif args.command == Command.Pir:
        cmd_pir(config)
    elif args.command == Command.Asym:
        cmd_asym(config)
    elif args.command == Command.Scenario:
        cmd_scenario(config, resolve_workers(args.threads), progress)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    try:
        run(args)
    except PrinstratError as e:
        log.error("%s", e)
        return e.exit_code
    except OSError as e:
        log.error("%s", e)
        return EXIT_CONFIG_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
