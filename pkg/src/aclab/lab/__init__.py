"""Run scenarios, verify stored runs and tabulate convergence."""

from .cli import main
from .config import ConfigError, RunConfig, load_config, parse_config_text
from .pipeline import cmd_convergence, cmd_run, cmd_verify, diagnose, simulate

__all__ = ["ConfigError", "RunConfig", "cmd_convergence", "cmd_run", "cmd_verify", "diagnose",
           "load_config", "main", "parse_config_text", "simulate"]
