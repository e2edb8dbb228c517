import logging

from commands.common import as_float, require, write_output
from model_store import load_model
from utils.exceptions import UsageError
from utils.fence_graph import build_fence_graph, to_dot, to_json

logger = logging.getLogger(__name__)

DEFAULTS = {
    "model": None,
    "threshold": 0.05,
    "format": "dot",
    "uncorrected": False,
    "min_width": 1.0,
    "max_width": 5.0,
    "out": None,
}


def add_parser(subparsers):
    parser = subparsers.add_parser("graph", help="Render the fence graph of a model as DOT or JSON")
    parser.add_argument("--model", help="Model JSON file")
    parser.add_argument("--threshold", type=float, help="Minimum |factor| drawn (default 0.05)")
    parser.add_argument("--format", choices=["dot", "json"], help="Output format (default dot)")
    parser.add_argument("--uncorrected", action="store_true", default=None,
                        help="Draw uncorrected Granger factors M^d instead of S^d")
    parser.add_argument("--min-width", type=float, help="Smallest pen width (default 1)")
    parser.add_argument("--max-width", type=float, help="Largest pen width (default 5)")
    parser.add_argument("--out", help="Output path (stdout if omitted)")
    parser.set_defaults(handler=run, defaults=DEFAULTS)
    return parser


def run(config):
    model = load_model(require(config, "model"))
    graph = build_fence_graph(model, as_float(config, "threshold"), use_corrected=not config["uncorrected"])

    if config["format"] == "dot":
        text = to_dot(graph, as_float(config, "min_width"), as_float(config, "max_width"))
    elif config["format"] == "json":
        text = to_json(graph)
    else:
        raise UsageError(f"graph: unknown format '{config['format']}'")

    write_output(text, config["out"])
    return 0
