from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from models.ica_lingam import (
    IcaConfig,
    StructuralMatrix,
    check_non_gaussianity,
    fastica,
    lingam_from_ica,
    prune_to_dag,
)
from models.var_model import KalmanConfig, fit_var_kalman, fit_var_ols, residuals
from utils.exceptions import (
    DimensionMismatchError,
    InsufficientDataError,
    InvalidParameterError,
    SingularStructureError,
    UnstableModelWarning,
)
from utils.timeseries import StandardizationParams, standardize

# Set up logging
logger = logging.getLogger(__name__)

VAR_METHODS = ("ols", "kalman")
ICA_SAMPLES_PER_CHANNEL = 50
MAX_STRUCTURE_CONDITION = 1e12
CONSISTENCY_TOLERANCE = 1e-10


@dataclass(frozen=True)
class SvarConfig:
    """Settings for one end-to-end SVAR fit."""

    var_method: str = "ols"
    kalman: KalmanConfig = field(default_factory=KalmanConfig)
    ica: IcaConfig = field(default_factory=IcaConfig)
    prune_threshold: float = 0.05
    standardize: bool = True

    def __post_init__(self):
        if self.var_method not in VAR_METHODS:
            raise InvalidParameterError(f"var_method must be one of {VAR_METHODS}, got '{self.var_method}'")
        if not self.prune_threshold >= 0:
            raise InvalidParameterError(f"prune_threshold must be >= 0, got {self.prune_threshold}")


@dataclass(frozen=True, eq=False)
class SvarModel:
    """
    Fitted structural VAR: y_t = S0 y_t + sum_d S^d y_{t-d} + e_t.

    lagged and uncorrected_lagged have shape (D, C, C); index d - 1 holds
    lag d. clamps maps channel labels to constant levels for simulation.
    """

    channels: tuple
    s0: StructuralMatrix
    lagged: np.ndarray = field(repr=False)
    uncorrected_lagged: np.ndarray = field(repr=False)
    noise_variances: np.ndarray
    preprocessing: StandardizationParams = field(repr=False)
    fit_meta: dict = field(default_factory=dict, repr=False)
    clamps: dict = field(default_factory=dict)

    def __post_init__(self):
        channels = tuple(str(label) for label in self.channels)
        n_channels = len(channels)
        lagged = np.array(self.lagged, dtype=float)
        uncorrected = np.array(self.uncorrected_lagged, dtype=float)
        noise = np.array(self.noise_variances, dtype=float).reshape(-1)

        if len(set(channels)) != n_channels:
            raise InvalidParameterError(f"duplicate channel labels in {list(channels)}")
        if self.s0.n_channels != n_channels:
            raise DimensionMismatchError(f"s0 is {self.s0.n_channels}x{self.s0.n_channels} for {n_channels} channels")
        for name, lags in (("lagged", lagged), ("uncorrected_lagged", uncorrected)):
            if lags.ndim != 3 or lags.shape[0] < 1 or lags.shape[1:] != (n_channels, n_channels):
                raise DimensionMismatchError(f"{name} must be (D, {n_channels}, {n_channels}), got {lags.shape}")
        if uncorrected.shape != lagged.shape:
            raise DimensionMismatchError("lagged and uncorrected_lagged must have the same order")
        if noise.size != n_channels or np.any(noise <= 0):
            raise InvalidParameterError(f"noise_variances must be {n_channels} positive values")
        if self.preprocessing.means.size != n_channels:
            raise DimensionMismatchError("preprocessing does not match the channel count")
        unknown = set(self.clamps) - set(channels)
        if unknown:
            raise InvalidParameterError(f"clamps refer to unknown channels {sorted(unknown)}")

        for array in (lagged, uncorrected, noise):
            array.setflags(write=False)
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "lagged", lagged)
        object.__setattr__(self, "uncorrected_lagged", uncorrected)
        object.__setattr__(self, "noise_variances", noise)
        object.__setattr__(self, "fit_meta", dict(self.fit_meta))
        object.__setattr__(self, "clamps", {str(k): float(v) for k, v in self.clamps.items()})

    @property
    def order(self):
        return self.lagged.shape[0]

    @property
    def n_channels(self):
        return len(self.channels)

    def index_of(self, label):
        return self.channels.index(label)

    def with_meta(self, **updates):
        """Copy of the model with fit_meta entries added or replaced"""
        meta = dict(self.fit_meta)
        meta.update(updates)
        return replace(self, fit_meta=meta)

    def in_raw_units(self):
        """
        Re-express every factor in sensor units

        A standardized factor S[i, j] becomes S[i, j] * std_i / std_j, and
        noise variances scale by std_i ** 2.

        Returns:
            SvarModel with identity preprocessing
        """
        stds = self.preprocessing.stds
        ratio = stds[:, None] / stds[None, :]
        s0 = StructuralMatrix(self.s0.s0 * ratio, self.s0.causal_order, self.s0.pruned)
        return replace(
            self,
            s0=s0,
            lagged=self.lagged * ratio,
            uncorrected_lagged=self.uncorrected_lagged * ratio,
            noise_variances=self.noise_variances * stds ** 2,
            preprocessing=StandardizationParams(self.preprocessing.means, np.ones_like(stds)),
            clamps=dict(self.clamps),
            fit_meta={**self.fit_meta, "units": "raw"},
        )


@dataclass(frozen=True, eq=False)
class CausalFactors:
    """Reported factors; every Granger diagonal is masked to exactly zero."""

    channels: tuple
    structural: np.ndarray
    granger_corrected: np.ndarray
    granger_uncorrected: np.ndarray

    def to_frame(self, channels=None):
        """
        Long table of off-diagonal factors

        Args:
            channels: Optional labels overriding the stored ones

        Returns:
            DataFrame with columns kind, lag, source, target, value
        """
        labels = list(channels) if channels is not None else list(self.channels)
        rows = []

        def _add(kind, lag, matrix):
            for i, target in enumerate(labels):
                for j, source in enumerate(labels):
                    if i != j:
                        rows.append((kind, lag, source, target, float(matrix[i, j])))

        _add("structural", 0, self.structural)
        for d, matrix in enumerate(self.granger_corrected, start=1):
            _add("granger_corrected", d, matrix)
        for d, matrix in enumerate(self.granger_uncorrected, start=1):
            _add("granger_uncorrected", d, matrix)

        return pd.DataFrame(rows, columns=["kind", "lag", "source", "target", "value"])


def corrected_lagged(s0, m):
    """
    Step-4 correction S^d = (I - S0) M^d

    Args:
        s0: StructuralMatrix or C x C array
        m: C x C reduced-form lag matrix

    Returns:
        C x C structural lag matrix
    """
    s0 = s0.s0 if isinstance(s0, StructuralMatrix) else np.asarray(s0, dtype=float)
    m = np.asarray(m, dtype=float)
    if s0.ndim != 2 or m.shape != s0.shape or s0.shape[0] != s0.shape[1]:
        raise DimensionMismatchError(f"shapes {s0.shape} and {m.shape} do not agree")
    return (np.eye(s0.shape[0]) - s0) @ m


def structure_inverse(s0):
    """(I - S0)^-1 with a conditioning guard"""
    s0 = s0.s0 if isinstance(s0, StructuralMatrix) else np.asarray(s0, dtype=float)
    a = np.eye(s0.shape[0]) - s0
    condition = np.linalg.cond(a)
    if not np.isfinite(condition) or condition > MAX_STRUCTURE_CONDITION:
        raise SingularStructureError(f"(I - S0) is singular (condition number {condition:.3g})")
    return np.linalg.inv(a)


def reduced_form(model):
    """Reduced-form lag matrices A^d = (I - S0)^-1 S^d, shape (D, C, C)"""
    inverse = structure_inverse(model.s0)
    return np.stack([inverse @ s for s in model.lagged])


def companion_radius(lag_matrices):
    """Spectral radius of the companion matrix of stacked (D, C, C) lag matrices"""
    order, n_channels, _ = lag_matrices.shape
    companion = np.zeros((n_channels * order, n_channels * order))
    companion[:n_channels, :] = np.hstack(list(lag_matrices))
    companion[n_channels:, :-n_channels] = np.eye(n_channels * (order - 1))
    return float(np.max(np.abs(np.linalg.eigvals(companion))))


def companion_spectral_radius(model):
    """Spectral radius of the VAR(D) companion matrix of the reduced form"""
    return companion_radius(reduced_form(model))


def causal_factors(model):
    """
    Structural and Granger factor matrices for reporting

    Args:
        model: SvarModel

    Returns:
        CausalFactors with masked Granger diagonals
    """
    corrected = np.array(model.lagged)
    uncorrected = np.array(model.uncorrected_lagged)
    diagonal = np.arange(model.n_channels)
    corrected[:, diagonal, diagonal] = 0.0
    uncorrected[:, diagonal, diagonal] = 0.0
    return CausalFactors(
        channels=model.channels,
        structural=np.array(model.s0.s0),
        granger_corrected=corrected,
        granger_uncorrected=uncorrected,
    )


def fit_svar(series, order, config=None):
    """
    Fit a structural VAR in four steps

    1. VAR(D) fit (OLS or Kalman) on the optionally standardized series
    2. Reduced-form residuals
    3. FastICA + LiNGAM for S0, pruned to a DAG
    4. Corrected lag matrices S^d = (I - S0) M^d

    Args:
        series: MultichannelSeries
        order: Number of lags D
        config: SvarConfig

    Returns:
        SvarModel holding both corrected and uncorrected lag matrices
    """
    config = config or SvarConfig()
    if int(order) != order or order < 1:
        raise InvalidParameterError(f"order must be a positive integer, got {order}")
    order = int(order)
    n_channels, n_samples = series.n_channels, series.n_samples
    required = n_channels * order + ICA_SAMPLES_PER_CHANNEL * n_channels
    if n_samples <= required:
        raise InsufficientDataError(
            f"SVAR({order}) on {n_channels} channels needs N > {required}, got N = {n_samples}"
        )

    fit_warnings = []

    if config.standardize:
        working, params = standardize(series)
    else:
        working, params = series, StandardizationParams.identity(n_channels)

    logger.info(f"Step 1: {config.var_method.upper()} VAR({order}) on {n_channels} channels x {n_samples} samples")
    if config.var_method == "kalman":
        var = fit_var_kalman(working, order, config.kalman)
    else:
        var = fit_var_ols(working, order)

    logger.info("Step 2: reduced-form residuals")
    resid = residuals(working, var)
    message = check_non_gaussianity(resid.data)
    if message:
        fit_warnings.append(message)

    logger.info(f"Step 3: FastICA ({config.ica.strategy}, {config.ica.contrast}) + LiNGAM")
    ica = fastica(resid.data, config.ica)
    if ica.convergence.gaussian_flag:
        fit_warnings.append("Independent components look Gaussian; S0 is not identifiable")
    structural = prune_to_dag(lingam_from_ica(ica), config.prune_threshold)

    logger.info("Step 4: corrected lag matrices")
    lagged = np.stack([corrected_lagged(structural, m) for m in var.lag_matrices])

    structural_noise = (np.eye(n_channels) - structural.s0) @ resid.data
    noise_variances = structural_noise.var(axis=1)

    radius = companion_radius(var.lag_matrices)
    logger.debug(f"Companion spectral radius {radius:.4f}")
    if radius >= 1:
        message = f"Fitted VAR is not stable (companion spectral radius {radius:.4f} >= 1)"
        warnings.warn(message, UnstableModelWarning, stacklevel=2)
        fit_warnings.append(message)

    fit_meta = {
        "method": var.method,
        "seed": config.ica.seed,
        "prune_threshold": config.prune_threshold,
        "samples": n_samples,
        "standardized": bool(config.standardize),
        "ica_iterations": ica.convergence.iterations,
        "ica_final_delta": ica.convergence.final_delta,
        "warnings": fit_warnings,
        "edits": [],
    }

    return SvarModel(
        channels=series.channels,
        s0=structural,
        lagged=lagged,
        uncorrected_lagged=var.lag_matrices,
        noise_variances=noise_variances,
        preprocessing=params,
        fit_meta=fit_meta,
    )


def consistency_error(model):
    """Largest |S^d - (I - S0) M^d| over all lags"""
    expected = np.stack([corrected_lagged(model.s0, m) for m in model.uncorrected_lagged])
    return float(np.max(np.abs(model.lagged - expected)))
