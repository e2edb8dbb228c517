import io
import logging

import numpy as np

from commands.common import as_float, as_int, require, write_output
from model_store import load_model
from utils.simulate import NoiseSpec, simulate_svar
from utils.timeseries import write_csv

logger = logging.getLogger(__name__)

DEFAULTS = {
    "model": None,
    "samples": 1000,
    "noise": "laplace",
    "scale": None,
    "seed": 0,
    "burn_in": 1000,
    "solver": "substitution",
    "raw_units": False,
    "out": None,
}


def add_parser(subparsers):
    parser = subparsers.add_parser("simulate", help="Generate data from a model")
    parser.add_argument("--model", help="Model JSON file")
    parser.add_argument("--samples", type=int, help="Samples to write (default 1000)")
    parser.add_argument("--noise", choices=["laplace", "uniform", "gaussian"], help="Noise family (default laplace)")
    parser.add_argument("--scale", type=float,
                        help="Noise standard deviation for every channel (default: sqrt of the model's noise variances)")
    parser.add_argument("--seed", type=int, help="Noise seed (default 0, or MICDT_SEED)")
    parser.add_argument("--burn-in", type=int, help="Discarded leading samples (default 1000)")
    parser.add_argument("--solver", choices=["substitution", "inverse"], help="Contemporaneous solver")
    parser.add_argument("--raw-units", action="store_true", default=None,
                        help="Map output back to sensor units with the model's preprocessing")
    parser.add_argument("--out", help="CSV path (stdout if omitted)")
    parser.set_defaults(handler=run, defaults=DEFAULTS)
    return parser


def noise_from_config(config, model):
    """NoiseSpec from flags, defaulting the scale to the model's innovation std"""
    if config["scale"] is None:
        scale = np.sqrt(model.noise_variances)
    else:
        scale = as_float(config, "scale")
    return NoiseSpec(family=config["noise"], scale=scale, seed=as_int(config, "seed"))


def run(config):
    model = load_model(require(config, "model"))
    series = simulate_svar(
        model,
        as_int(config, "samples"),
        noise_from_config(config, model),
        burn_in=as_int(config, "burn_in"),
        solver=config["solver"],
    )
    if config["raw_units"]:
        series = model.preprocessing.inverse(series)

    if config["out"] is None:
        buffer = io.StringIO()
        write_csv(series, buffer)
        write_output(buffer.getvalue())
    else:
        write_csv(series, config["out"])
        logger.info(f"Wrote {series.n_samples} samples to {config['out']}")
    return 0
