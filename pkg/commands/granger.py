import logging

import pandas as pd

from commands.common import as_float, as_int, require, write_output
from models.var_model import granger_table
from utils.exceptions import UsageError
from utils.timeseries import load_csv

logger = logging.getLogger(__name__)

COLUMNS = ["source", "target", "var_restricted", "var_full", "f_value"]

DEFAULTS = {
    "input": None,
    "lags": 1,
    "pairs": None,
    "threshold": None,
    "pretty": False,
    "out": None,
    "delimiter": ",",
    "no_header": False,
    "time_column": None,
}


def add_parser(subparsers):
    parser = subparsers.add_parser("granger", help="Pairwise Granger factors F = ln(var[e]/var[eps])")
    parser.add_argument("--input", help="CSV file, one channel per column")
    parser.add_argument("--lags", type=int, help="Lags D in both regressions (default 1)")
    parser.add_argument("--pairs", help="Comma-separated source:target pairs (default: all ordered pairs)")
    parser.add_argument("--threshold", type=float, help="Keep only rows with f_value above this")
    parser.add_argument("--pretty", action="store_true", default=None, help="Aligned text instead of CSV")
    parser.add_argument("--out", help="Output path (stdout if omitted)")
    parser.add_argument("--delimiter", help="CSV delimiter (default ',')")
    parser.add_argument("--no-header", action="store_true", default=None, help="CSV has no header row")
    parser.add_argument("--time-column", help="Header label of a time column to drop")
    parser.set_defaults(handler=run, defaults=DEFAULTS)
    return parser


def parse_pairs(text):
    """'a:b,c:d' -> [('a', 'b'), ('c', 'd')]"""
    if isinstance(text, (list, tuple)):
        text = ",".join(text)
    pairs = []
    for item in text.split(","):
        source, sep, target = item.strip().partition(":")
        if not sep or not source.strip() or not target.strip():
            raise UsageError(f"Bad pair '{item.strip()}'; expected source:target")
        pairs.append((source.strip(), target.strip()))
    return pairs


def run(config):
    series = load_csv(
        require(config, "input"),
        delimiter=config["delimiter"],
        has_header=not config["no_header"],
        time_column=config["time_column"],
    )
    pairs = parse_pairs(config["pairs"]) if config["pairs"] else None
    results = granger_table(series, as_int(config, "lags"), pairs)

    if config["threshold"] is not None:
        threshold = as_float(config, "threshold")
        results = [result for result in results if result.causes(threshold)]

    table = pd.DataFrame([result.to_dict() for result in results], columns=COLUMNS)
    if config["pretty"]:
        text = table.to_string(index=False) + "\n"
    else:
        text = table.to_csv(index=False, lineterminator="\n")
    write_output(text, config["out"])
    logger.info(f"Granger table: {len(table)} pairs, lags {as_int(config, 'lags')}")
    return 0
