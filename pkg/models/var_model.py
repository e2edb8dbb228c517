from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import linalg

from utils.exceptions import (
    DegenerateCorrelationError,
    DimensionMismatchError,
    InsufficientDataError,
    InvalidParameterError,
    NumericalDivergenceError,
    SelfPairError,
    SingularRegressorsError,
)

# Set up logging
logger = logging.getLogger(__name__)

MAX_GRAM_CONDITION = 1e12


@dataclass(frozen=True)
class VarModel:
    """
    Reduced-form VAR(D) fit: y_t = sum_d M^d y_{t-d} + n_t.

    lag_matrices has shape (D, C, C); lag_matrices[d - 1] is M^d.
    """

    lag_matrices: np.ndarray = field(repr=False)
    innovation_covariance: np.ndarray = field(repr=False)
    method: str = "ols"
    samples_used: int = 0

    def __post_init__(self):
        lags = np.array(self.lag_matrices, dtype=float)
        cov = np.array(self.innovation_covariance, dtype=float)
        if lags.ndim != 3 or lags.shape[1] != lags.shape[2] or lags.shape[0] < 1:
            raise DimensionMismatchError(f"lag_matrices must be (D, C, C), got {lags.shape}")
        if cov.shape != lags.shape[1:]:
            raise DimensionMismatchError(
                f"innovation_covariance shape {cov.shape} does not match C = {lags.shape[1]}"
            )
        lags.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "lag_matrices", lags)
        object.__setattr__(self, "innovation_covariance", cov)

    @property
    def order(self):
        return self.lag_matrices.shape[0]

    @property
    def n_channels(self):
        return self.lag_matrices.shape[1]


@dataclass(frozen=True)
class Residuals:
    """Step-2 residuals; column k belongs to sample index start_index + k."""

    data: np.ndarray = field(repr=False)
    start_index: int


@dataclass(frozen=True)
class KalmanConfig:
    """Random-walk coefficient tracker settings."""

    q: float = 0.0
    r: float = 1.0
    p0: float = 1e6

    def __post_init__(self):
        if not self.q >= 0:
            raise InvalidParameterError(f"process noise q must be >= 0, got {self.q}")
        if not self.r > 0:
            raise InvalidParameterError(f"observation noise r must be > 0, got {self.r}")
        if not self.p0 > 0:
            raise InvalidParameterError(f"initial covariance p0 must be > 0, got {self.p0}")


@dataclass(frozen=True)
class GrangerResult:
    """Pairwise Granger statistic F = ln(var[e] / var[eps]) for source -> target."""

    source: str
    target: str
    var_restricted: float
    var_full: float
    f_value: float
    lags: int

    def causes(self, threshold=0.0):
        """True when the source Granger-causes the target at the given threshold"""
        return self.f_value > threshold

    def to_dict(self):
        return {
            "source": self.source,
            "target": self.target,
            "var_restricted": self.var_restricted,
            "var_full": self.var_full,
            "f_value": self.f_value,
        }


class YuleWalkerAr2(NamedTuple):
    s1: float
    s2: float


def _check_order(order):
    if int(order) != order or order < 1:
        raise InvalidParameterError(f"order must be a positive integer, got {order}")
    return int(order)


def lagged_design(data, order):
    """
    Build the stacked-lag regression problem of a VAR(D)

    Args:
        data: C x N array
        order: Number of lags D

    Returns:
        Tuple (Z, Y): Z is (N-D) x (C*D) with block d holding y_{t-d},
        Y is (N-D) x C holding y_t for t = D..N-1
    """
    n_channels, n_samples = data.shape
    z = np.empty((n_samples - order, n_channels * order))
    for d in range(1, order + 1):
        z[:, (d - 1) * n_channels:d * n_channels] = data[:, order - d:n_samples - d].T
    y = data[:, order:].T
    return z, y


def _stack_to_lags(b, n_channels, order):
    """Coefficient block B ((C*D) x C) -> lag matrices (D, C, C)"""
    return np.stack([b[(d - 1) * n_channels:d * n_channels, :].T for d in range(1, order + 1)])


def _check_conditioning(z):
    condition = np.linalg.cond(z.T @ z)
    logger.debug(f"Regressor Gram condition number: {condition:.3g}")
    if not np.isfinite(condition) or condition > MAX_GRAM_CONDITION:
        raise SingularRegressorsError(
            f"Regressor Gram matrix condition number {condition:.3g} exceeds {MAX_GRAM_CONDITION:.0e}; "
            "check for collinear or duplicated channels"
        )


def _least_squares(z, y):
    """Solve min ||Y - Z B||^2 with a conditioning guard"""
    _check_conditioning(z)
    b, _, _, _ = linalg.lstsq(z, y)
    return b


def _check_var_inputs(series, order):
    order = _check_order(order)
    n_channels, n_samples = series.data.shape
    # T = N - D equations must outnumber the C * D regressors
    required = max(n_channels * order + 1, (n_channels + 1) * order)
    if n_samples <= required:
        raise InsufficientDataError(
            f"VAR({order}) on {n_channels} channels needs N > {required}, got N = {n_samples}"
        )
    return order


def fit_var_ols(series, order):
    """
    Fit an intercept-free VAR(D) by ordinary least squares

    Args:
        series: MultichannelSeries (standardized upstream)
        order: Number of lags D

    Returns:
        VarModel with method "ols"
    """
    order = _check_var_inputs(series, order)
    n_channels = series.n_channels

    z, y = lagged_design(series.data, order)
    b = _least_squares(z, y)
    resid = y - z @ b

    covariance = np.cov(resid.T, bias=True).reshape(n_channels, n_channels)
    covariance = (covariance + covariance.T) / 2

    logger.info(f"OLS VAR({order}) fit on {n_channels} channels, {z.shape[0]} equations")
    return VarModel(
        lag_matrices=_stack_to_lags(b, n_channels, order),
        innovation_covariance=covariance,
        method="ols",
        samples_used=z.shape[0],
    )


def fit_var_kalman(series, order, config=None):
    """
    Track VAR(D) coefficients with a Kalman filter

    The stacked coefficients are the state (constant when q = 0, a random
    walk when q > 0) and each time step observes y_t through the regression
    y_t = B^T z_t + n_t. All channels share the regressor z_t and isotropic
    priors, so one covariance matrix serves every channel.

    Args:
        series: MultichannelSeries
        order: Number of lags D
        config: KalmanConfig (defaults to q=0, r=1, p0=1e6)

    Returns:
        VarModel with method "kalman" holding the final-state estimate
    """
    config = config or KalmanConfig()
    order = _check_var_inputs(series, order)
    n_channels = series.n_channels

    z, y = lagged_design(series.data, order)
    n_states = z.shape[1]
    _check_conditioning(z)

    estimate = np.zeros((n_states, n_channels))
    covariance = np.eye(n_states) * config.p0
    process = np.eye(n_states) * config.q

    for step in range(z.shape[0]):
        regressor = z[step]

        # Predict
        covariance = covariance + process

        # Update
        p_z = covariance @ regressor
        innovation_variance = regressor @ p_z + config.r
        gain = p_z / innovation_variance
        error = y[step] - regressor @ estimate
        estimate = estimate + np.outer(gain, error)
        covariance = covariance - np.outer(gain, p_z)
        covariance = (covariance + covariance.T) / 2

        try:
            np.linalg.cholesky(covariance)
        except np.linalg.LinAlgError:
            raise NumericalDivergenceError(
                f"Kalman state covariance lost positive definiteness at step {step + order}"
            ) from None

    resid = y - z @ estimate
    innovation = np.cov(resid.T, bias=True).reshape(n_channels, n_channels)
    innovation = (innovation + innovation.T) / 2

    logger.info(
        f"Kalman VAR({order}) fit on {n_channels} channels, {z.shape[0]} steps "
        f"(q={config.q}, r={config.r}, p0={config.p0})"
    )
    return VarModel(
        lag_matrices=_stack_to_lags(estimate, n_channels, order),
        innovation_covariance=innovation,
        method="kalman",
        samples_used=z.shape[0],
    )


def residuals(series, model):
    """
    Step-2 residuals n_t = y_t - sum_d M^d y_{t-d}

    Args:
        series: MultichannelSeries
        model: VarModel

    Returns:
        Residuals of width N - D starting at sample index D
    """
    if model.n_channels != series.n_channels:
        raise DimensionMismatchError(
            f"model has {model.n_channels} channels, series has {series.n_channels}"
        )
    if model.order >= series.n_samples:
        raise DimensionMismatchError(
            f"model order {model.order} is not smaller than N = {series.n_samples}"
        )

    order = model.order
    data = series.data
    n_samples = series.n_samples
    resid = data[:, order:].copy()
    for d in range(1, order + 1):
        resid -= model.lag_matrices[d - 1] @ data[:, order - d:n_samples - d]
    return Residuals(data=resid, start_index=order)


def granger_statistic(var_restricted, var_full):
    """
    Granger causality factor F = ln(var[e] / var[eps])

    Args:
        var_restricted: Prediction-error variance without the source's lags
        var_full: Prediction-error variance with the source's lags

    Returns:
        F value
    """
    if not var_restricted > 0 or not var_full > 0:
        raise InvalidParameterError(
            f"variances must be positive, got var[e]={var_restricted}, var[eps]={var_full}"
        )
    return float(np.log(var_restricted / var_full))


def _mean_squared_residual(z, y):
    b = _least_squares(z, y)
    resid = y - z @ b
    return float(np.mean(resid ** 2))


def pairwise_granger(series, source, target, order):
    """
    Classical two-channel Granger causality source -> target

    Args:
        series: MultichannelSeries
        source: Label of the candidate cause
        target: Label of the effect
        order: Number of lags D in both regressions

    Returns:
        GrangerResult with in-sample variances and F = ln(var[e]/var[eps])
    """
    order = _check_order(order)
    if source == target:
        raise SelfPairError(f"source and target are both '{source}'")
    src = series.channel(source)
    tgt = series.channel(target)
    n_samples = series.n_samples
    # The full fit has 2D regressors on N - D rows
    required = max(2 * order + 1, 3 * order)
    if n_samples <= required:
        raise InsufficientDataError(
            f"Granger with D={order} needs N > {required}, got N = {n_samples}"
        )

    z_full, y = lagged_design(np.vstack([tgt, src]), order)
    # Columns alternate target/source per lag block
    own_lags = z_full[:, 0::2]
    y = y[:, :1]

    var_restricted = _mean_squared_residual(own_lags, y)
    var_full = _mean_squared_residual(z_full, y)
    if not var_full > 0:
        raise SingularRegressorsError(f"'{target}' is an exact linear function of the lagged regressors")

    return GrangerResult(
        source=source,
        target=target,
        var_restricted=var_restricted,
        var_full=var_full,
        f_value=granger_statistic(var_restricted, var_full),
        lags=order,
    )


def granger_table(series, order, pairs=None):
    """
    Pairwise Granger factors for many ordered pairs

    Args:
        series: MultichannelSeries
        order: Number of lags D
        pairs: Optional list of (source, target) label pairs; all ordered pairs if None

    Returns:
        List of GrangerResult in request (or channel) order
    """
    if pairs is None:
        pairs = [
            (source, target)
            for target in series.channels
            for source in series.channels
            if source != target
        ]
    return [pairwise_granger(series, source, target, order) for source, target in pairs]


def yule_walker_ar2(rho1, rho2):
    """
    Closed-form AR(2) coefficients from lag-1 and lag-2 autocorrelations

    Args:
        rho1: Lag-1 autocorrelation, |rho1| < 1
        rho2: Lag-2 autocorrelation

    Returns:
        YuleWalkerAr2(s1, s2)
    """
    if not abs(rho1) < 1:
        raise DegenerateCorrelationError(f"|rho1| must be < 1, got {rho1}")
    denom = 1 - rho1 ** 2
    s1 = rho1 * (1 - rho2) / denom
    s2 = (rho2 - rho1 ** 2) / denom
    return YuleWalkerAr2(s1=s1, s2=s2)


def yule_walker(rho):
    """
    AR(p) coefficients from autocorrelations rho_1..rho_p

    Args:
        rho: Sequence of p autocorrelations (rho_0 = 1 implied)

    Returns:
        Array of p AR coefficients
    """
    rho = np.asarray(rho, dtype=float).reshape(-1)
    if rho.size < 1:
        raise InvalidParameterError("need at least one autocorrelation")
    column = np.concatenate([[1.0], rho[:-1]])
    try:
        coefficients = linalg.solve_toeplitz(column, rho)
    except linalg.LinAlgError:
        raise DegenerateCorrelationError("Toeplitz correlation matrix is singular") from None
    if not np.all(np.isfinite(coefficients)):
        raise DegenerateCorrelationError("Toeplitz correlation matrix is singular")
    return coefficients
