import logging

from commands.common import require, write_output
from model_store import load_model
from models.svar_model import causal_factors

logger = logging.getLogger(__name__)

DEFAULTS = {
    "model": None,
    "raw_units": False,
    "pretty": False,
    "out": None,
}


def add_parser(subparsers):
    parser = subparsers.add_parser("factors", help="Table of structural and Granger factors")
    parser.add_argument("--model", help="Model JSON file")
    parser.add_argument("--raw-units", action="store_true", default=None, help="Report factors in sensor units")
    parser.add_argument("--pretty", action="store_true", default=None, help="Aligned text instead of CSV")
    parser.add_argument("--out", help="Output path (stdout if omitted)")
    parser.set_defaults(handler=run, defaults=DEFAULTS)
    return parser


def run(config):
    model = load_model(require(config, "model"))
    if config["raw_units"]:
        model = model.in_raw_units()

    table = causal_factors(model).to_frame()
    if config["pretty"]:
        text = table.to_string(index=False) + "\n"
    else:
        text = table.to_csv(index=False, lineterminator="\n")
    write_output(text, config["out"])
    return 0
