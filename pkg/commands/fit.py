import json
import logging

from model_store import model_to_dict, save_model
from models.ica_lingam import IcaConfig
from models.svar_model import SvarConfig, fit_svar
from models.var_model import KalmanConfig
from commands.common import as_float, as_int, require, write_output
from utils.timeseries import load_csv

logger = logging.getLogger(__name__)

DEFAULTS = {
    "input": None,
    "lags": 1,
    "method": "ols",
    "prune_threshold": 0.05,
    "seed": 0,
    "out": None,
    "delimiter": ",",
    "no_header": False,
    "time_column": None,
    "no_standardize": False,
    "contrast": "logcosh",
    "strategy": "symmetric",
    "max_iter": 200,
    "tol": 1e-4,
    "kalman_q": 0.0,
    "kalman_r": 1.0,
    "kalman_p0": 1e6,
}


def add_parser(subparsers):
    parser = subparsers.add_parser("fit", help="Fit an SVAR model to a CSV series")
    parser.add_argument("--input", help="CSV file, one channel per column")
    parser.add_argument("--lags", type=int, help="VAR order D (default 1)")
    parser.add_argument("--method", choices=["ols", "kalman"], help="Step-1 VAR estimator (default ols)")
    parser.add_argument("--prune-threshold", type=float, help="Drop |S0| entries below this (default 0.05)")
    parser.add_argument("--seed", type=int, help="FastICA seed (default 0, or MICDT_SEED)")
    parser.add_argument("--out", help="Model JSON path (stdout if omitted)")
    parser.add_argument("--delimiter", help="CSV delimiter (default ',')")
    parser.add_argument("--no-header", action="store_true", default=None, help="CSV has no header row")
    parser.add_argument("--time-column", help="Header label of a time column to drop")
    parser.add_argument("--no-standardize", action="store_true", default=None, help="Fit on raw units")
    parser.add_argument("--contrast", choices=["logcosh", "cube"], help="FastICA contrast")
    parser.add_argument("--strategy", choices=["symmetric", "deflation"], help="FastICA strategy")
    parser.add_argument("--max-iter", type=int, help="FastICA iteration cap")
    parser.add_argument("--tol", type=float, help="FastICA convergence tolerance")
    parser.add_argument("--kalman-q", type=float, help="Kalman process noise")
    parser.add_argument("--kalman-r", type=float, help="Kalman observation noise")
    parser.add_argument("--kalman-p0", type=float, help="Kalman initial covariance")
    parser.set_defaults(handler=run, defaults=DEFAULTS)
    return parser


def build_svar_config(config):
    return SvarConfig(
        var_method=config["method"],
        kalman=KalmanConfig(
            q=as_float(config, "kalman_q"),
            r=as_float(config, "kalman_r"),
            p0=as_float(config, "kalman_p0"),
        ),
        ica=IcaConfig(
            contrast=config["contrast"],
            max_iter=as_int(config, "max_iter"),
            tol=as_float(config, "tol"),
            seed=as_int(config, "seed"),
            strategy=config["strategy"],
        ),
        prune_threshold=as_float(config, "prune_threshold"),
        standardize=not config["no_standardize"],
    )


def run(config):
    series = load_csv(
        require(config, "input"),
        delimiter=config["delimiter"],
        has_header=not config["no_header"],
        time_column=config["time_column"],
    )
    model = fit_svar(series, as_int(config, "lags"), build_svar_config(config))
    model = model.with_meta(run_config=config.to_dict())

    if config["out"] is None:
        write_output(json.dumps(model_to_dict(model), indent=2) + "\n")
    else:
        save_model(model, config["out"])

    logger.info(f"Fit complete: S0 causal order {[model.channels[i] for i in model.s0.causal_order]}")
    return 0
