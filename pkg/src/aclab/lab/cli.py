"""Command line entry point: ``aclab {run, verify, convergence}``."""

from __future__ import annotations

import argparse
import sys

from ..dynamics import StepError
from .config import ConfigError, config_keys, convert_flag, load_config
from .pipeline import cmd_convergence, cmd_run, cmd_verify

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _add_key_flags(p: argparse.ArgumentParser) -> None:
    grp = p.add_argument_group("config overrides")
    for key in config_keys():
        grp.add_argument("--" + key.replace("_", "-"), dest=key, metavar="VALUE", default=None)


def _overrides(ns: argparse.Namespace) -> dict:
    return {k: convert_flag(k, getattr(ns, k)) for k in config_keys() if getattr(ns, k) is not None}


def _number_list(text: str, kind):
    try:
        return [kind(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"bad list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="aclab", description="Allen-Cahn entropy and density laboratory.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="simulate a scenario and run the diagnostic suites")
    p.add_argument("config", nargs="?", help="key = value config file")
    _add_key_flags(p)

    p = sub.add_parser("verify", help="re-run diagnostics on a stored run directory")
    p.add_argument("run_dir")
    _add_key_flags(p)

    p = sub.add_parser("convergence", help="radius, entropy and density versus eps and h")
    p.add_argument("config", nargs="?")
    p.add_argument("--eps-list", required=True, help="descending eps values, comma separated")
    p.add_argument("--n-list", required=True, help="ascending cell counts, comma separated")
    _add_key_flags(p)
    return parser


def main(argv=None) -> int:
    try:
        ns = build_parser().parse_args(argv)
        overrides = _overrides(ns)
        if ns.command == "run":
            return cmd_run(load_config(ns.config, overrides))
        if ns.command == "verify":
            return cmd_verify(ns.run_dir, overrides)
        cfg = load_config(ns.config, overrides)
        return cmd_convergence(cfg, _number_list(ns.eps_list, float), _number_list(ns.n_list, int))
    except ConfigError as exc:
        print(f"aclab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StepError as exc:
        print(f"aclab: simulation failed: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
