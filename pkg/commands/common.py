import logging
import sys

from utils.exceptions import InvalidParameterError, UsageError

logger = logging.getLogger(__name__)


def require(config, key):
    """Value of a mandatory setting"""
    value = config.get(key)
    if value is None:
        raise UsageError(f"{config.command}: --{key.replace('_', '-')} is required")
    return value


def as_int(config, key):
    value = config.get(key)
    try:
        if isinstance(value, bool) or int(value) != float(value):
            raise ValueError
        return int(value)
    except (TypeError, ValueError):
        raise InvalidParameterError(f"{key} must be an integer, got {value!r}") from None


def as_float(config, key):
    value = config.get(key)
    try:
        if isinstance(value, bool):
            raise ValueError
        return float(value)
    except (TypeError, ValueError):
        raise InvalidParameterError(f"{key} must be a number, got {value!r}") from None


def write_output(text, path=None):
    """Write text to a file, or to stdout when no path is given"""
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    logger.info(f"Wrote {path}")
