import json
import logging

from commands.common import as_int, require, write_output
from commands.simulate import noise_from_config
from model_store import load_model
from utils.simulate import counterfactual_report, parse_edit

logger = logging.getLogger(__name__)

DEFAULTS = {
    "model": None,
    "edit": None,
    "combine": False,
    "samples": 10000,
    "noise": "laplace",
    "scale": None,
    "seed": 0,
    "burn_in": 1000,
    "out": None,
}


def add_parser(subparsers):
    parser = subparsers.add_parser("counterfactual", help="What-if report for edited models")
    parser.add_argument("--model", help="Model JSON file")
    parser.add_argument("--edit", action="append",
                        help="structural:SRC->DST=V, lagK:SRC->DST=V or clamp:CH=V (repeatable)")
    parser.add_argument("--combine", action="store_true", default=None,
                        help="Apply every --edit as one scenario instead of one scenario each")
    parser.add_argument("--samples", type=int, help="Samples per simulation (default 10000)")
    parser.add_argument("--noise", choices=["laplace", "uniform", "gaussian"], help="Noise family (default laplace)")
    parser.add_argument("--scale", type=float, help="Noise standard deviation for every channel")
    parser.add_argument("--seed", type=int, help="Shared noise seed (default 0, or MICDT_SEED)")
    parser.add_argument("--burn-in", type=int, help="Discarded leading samples (default 1000)")
    parser.add_argument("--out", help="Report JSON path (stdout if omitted)")
    parser.set_defaults(handler=run, defaults=DEFAULTS)
    return parser


def build_scenarios(edits, combine):
    edits = [edits] if isinstance(edits, str) else list(edits or [])
    interventions = [parse_edit(text) for text in edits]
    if combine:
        return [interventions] if interventions else []
    return [[intervention] for intervention in interventions]


def run(config):
    model = load_model(require(config, "model"))
    scenarios = build_scenarios(config["edit"], config["combine"])

    report = counterfactual_report(
        model,
        scenarios,
        as_int(config, "samples"),
        noise_from_config(config, model),
        burn_in=as_int(config, "burn_in"),
    )
    report.config = config.to_dict()

    write_output(json.dumps(report.to_dict(), indent=2) + "\n", config["out"])
    logger.info(f"Counterfactual report: baseline plus {len(report.scenarios)} scenario(s)")
    return 0
