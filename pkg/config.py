import json
import logging
import os

import toml
from dotenv import load_dotenv

from utils.exceptions import InputNotFoundError, InvalidParameterError, ParseError

logger = logging.getLogger(__name__)

SEED_ENV_VAR = "MICDT_SEED"


def load_environment():
    """Load a .env file from the working directory, if any"""
    load_dotenv()


def _normalize(mapping):
    return {str(key).replace("-", "_"): value for key, value in mapping.items()}


def load_config_file(path):
    """
    Read a TOML or JSON config file

    Args:
        path: File path; a .json suffix selects JSON, anything else TOML

    Returns:
        Dict with hyphens in keys replaced by underscores (tables included)
    """
    if not os.path.isfile(path):
        raise InputNotFoundError(f"Config file not found: {path}")

    try:
        with open(path, encoding="utf-8") as f:
            if path.lower().endswith(".json"):
                document = json.load(f)
            else:
                document = toml.load(f)
    except json.JSONDecodeError as e:
        raise ParseError(f"Malformed JSON config {path}: {e.msg}", row=e.lineno, column=e.colno) from None
    except toml.TomlDecodeError as e:
        raise ParseError(f"Malformed TOML config {path}: {e}") from None

    if not isinstance(document, dict):
        raise ParseError(f"Config file {path} must hold a table of keys")

    config = {}
    for key, value in _normalize(document).items():
        config[key] = _normalize(value) if isinstance(value, dict) else value
    logger.debug(f"Loaded config file {path}: {sorted(config)}")
    return config


def seed_from_environment(environ=None):
    """Seed from MICDT_SEED, or None when unset"""
    environ = os.environ if environ is None else environ
    raw = environ.get(SEED_ENV_VAR, "").strip()
    if not raw:
        return None
    try:
        return int(raw)
    except ValueError:
        raise InvalidParameterError(f"{SEED_ENV_VAR} must be an integer, got '{raw}'") from None


class RunConfig:
    """Effective settings of one subcommand run, with the source of each value."""

    def __init__(self, command, values, sources):
        self.command = command
        self.values = dict(values)
        self.sources = dict(sources)

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    def to_dict(self):
        return {"command": self.command, **self.values}

    def __repr__(self):
        return f"RunConfig({self.command!r}, {self.values!r})"


def resolve_config(command, cli_values, defaults, file_config=None, environ=None):
    """
    Merge settings for a subcommand

    Precedence: command-line flag > [command] table > top-level key >
    MICDT_SEED (seed only) > built-in default.

    Args:
        command: Subcommand name
        cli_values: Parsed flags; None means "not given"
        defaults: Built-in defaults; its keys are the settings that exist
        file_config: Output of load_config_file, or None
        environ: Environment mapping (os.environ by default)

    Returns:
        RunConfig
    """
    file_config = file_config or {}
    table = file_config.get(command, {})
    if not isinstance(table, dict):
        raise ParseError(f"Config entry '{command}' must be a table")

    values = {}
    sources = {}
    for key, default in defaults.items():
        if cli_values.get(key) is not None:
            values[key], sources[key] = cli_values[key], "flag"
        elif key in table:
            values[key], sources[key] = table[key], "config-table"
        elif key in file_config and not isinstance(file_config[key], dict):
            values[key], sources[key] = file_config[key], "config"
        elif key == "seed" and seed_from_environment(environ) is not None:
            values[key], sources[key] = seed_from_environment(environ), "environment"
        else:
            values[key], sources[key] = default, "default"

    config = RunConfig(command, values, sources)
    logger.info(f"Effective {command} config: {config.to_dict()}")
    return config
