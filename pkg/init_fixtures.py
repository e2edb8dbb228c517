#!/usr/bin/env python
"""
Demo fixture generation script
Writes named demo systems as CSV series plus their ground-truth model JSON.
"""
import argparse
import logging
import os

import numpy as np

from model_store import save_model
from models.ica_lingam import StructuralMatrix
from models.svar_model import SvarModel
from utils.exceptions import InvalidParameterError
from utils.simulate import NoiseSpec, simulate_svar
from utils.timeseries import StandardizationParams, write_csv

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

# Default fixture systems; matrix rows are effects, columns are causes
DEFAULT_FIXTURES = {
    "bearing4": {
        "channels": ["b1", "b2", "b3", "b4"],
        "s0": [
            [0.0, 0.5, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0],
            [0.4, 0.0, 0.0, 0.0],
            [0.0, 0.3, -0.6, 0.0],
        ],
        "causal_order": [1, 0, 2, 3],
        "lagged": [
            [
                [0.5, 0.0, 0.0, 0.0],
                [0.0, 0.4, 0.0, 0.0],
                [0.0, 0.2, 0.3, 0.0],
                [0.0, 0.0, 0.0, 0.5],
            ],
        ],
        "noise_variances": [1.0, 1.0, 1.0, 1.0],
    },
    "driven_pair": {
        "channels": ["y1", "y2"],
        "s0": [[0.0, 0.0], [0.0, 0.0]],
        "causal_order": [0, 1],
        "lagged": [[[0.0, 0.9], [0.0, 0.0]]],
        "noise_variances": [0.01, 1.0],
    },
    "independent_pair": {
        "channels": ["y1", "y2"],
        "s0": [[0.0, 0.0], [0.0, 0.0]],
        "causal_order": [0, 1],
        "lagged": [[[0.0, 0.0], [0.0, 0.0]]],
        "noise_variances": [1.0, 1.0],
    },
}


def build_fixture_model(name):
    """Ground-truth SvarModel of a named fixture"""
    if name not in DEFAULT_FIXTURES:
        raise InvalidParameterError(f"Unknown fixture '{name}'; have {sorted(DEFAULT_FIXTURES)}")
    system = DEFAULT_FIXTURES[name]

    s0 = np.array(system["s0"])
    lagged = np.array(system["lagged"])
    structural = StructuralMatrix(s0=s0, causal_order=system["causal_order"], pruned=True)
    uncorrected = np.stack([np.linalg.solve(np.eye(len(s0)) - s0, s) for s in lagged])

    return SvarModel(
        channels=tuple(system["channels"]),
        s0=structural,
        lagged=lagged,
        uncorrected_lagged=uncorrected,
        noise_variances=system["noise_variances"],
        preprocessing=StandardizationParams.identity(len(s0)),
        fit_meta={"method": "fixture", "fixture": name, "edits": []},
    )


def write_fixtures(out_dir, n_samples=20000, seed=0, names=None):
    """
    Simulate and write fixtures

    Args:
        out_dir: Output directory (created if missing)
        n_samples: Samples per series
        seed: Noise seed
        names: Fixture names (all by default)

    Returns:
        Dict name -> (csv path, model path)
    """
    os.makedirs(out_dir, exist_ok=True)
    written = {}
    for name in names or sorted(DEFAULT_FIXTURES):
        model = build_fixture_model(name)
        noise = NoiseSpec(family="laplace", scale=np.sqrt(model.noise_variances), seed=seed)
        series = simulate_svar(model, n_samples, noise)

        csv_path = os.path.join(out_dir, f"{name}.csv")
        model_path = os.path.join(out_dir, f"{name}_truth.json")
        write_csv(series, csv_path)
        save_model(model, model_path)
        written[name] = (csv_path, model_path)
        logger.info(f"Wrote fixture {name}: {series.n_channels} channels x {n_samples} samples")
    return written


def reset_fixtures(out_dir):
    """Remove previously generated fixture files"""
    for name in DEFAULT_FIXTURES:
        for path in (os.path.join(out_dir, f"{name}.csv"), os.path.join(out_dir, f"{name}_truth.json")):
            if os.path.exists(path):
                os.remove(path)
                logger.warning(f"Removed {path}")


def main(argv=None):
    """Main entry point with command-line argument handling"""
    parser = argparse.ArgumentParser(description="Generate demo SVAR fixtures")
    parser.add_argument("--out", default="fixtures", help="Output directory (default fixtures/)")
    parser.add_argument("--samples", type=int, default=20000, help="Samples per series (default 20000)")
    parser.add_argument("--seed", type=int, default=0, help="Noise seed (default 0)")
    parser.add_argument("--reset", action="store_true", help="Delete existing fixture files first")
    args = parser.parse_args(argv)

    if args.reset:
        logger.warning(f"Resetting fixtures in {args.out}...")
        reset_fixtures(args.out)
    write_fixtures(args.out, args.samples, args.seed)
    logger.info("Fixture generation complete!")
    return 0


if __name__ == "__main__":
    main()
