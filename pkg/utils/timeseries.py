from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import signal

from utils.exceptions import (
    ConstantChannelError,
    DuplicateLabelError,
    EmptyInputError,
    InputNotFoundError,
    InvalidParameterError,
    InvalidSeriesError,
    LagTooLargeError,
    ParseError,
    UnknownChannelError,
)

# Set up logging
logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = "%.17g"


@dataclass(frozen=True)
class MultichannelSeries:
    """
    Immutable C-channel, N-sample vector time series.

    Data is stored channel-major (one row per channel) so per-channel
    passes walk contiguous memory.
    """

    channels: tuple
    data: np.ndarray = field(repr=False)
    sample_index_origin: int = 0

    def __post_init__(self):
        channels = tuple(str(label) for label in self.channels)
        data = np.array(self.data, dtype=float)

        if data.ndim == 1:
            data = data.reshape(1, -1)
        if data.ndim != 2:
            raise InvalidSeriesError(f"data must be 2D (channels x samples), got shape {data.shape}")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise InvalidSeriesError(f"need at least one channel and one sample, got shape {data.shape}")
        if len(channels) != data.shape[0]:
            raise InvalidSeriesError(
                f"{len(channels)} labels for {data.shape[0]} channels"
            )
        if not np.isfinite(data).all():
            raise InvalidSeriesError("data contains non-finite values (NaN/Inf)")
        if any(not label for label in channels):
            raise InvalidSeriesError("channel labels must be nonempty")
        if len(set(channels)) != len(channels):
            raise DuplicateLabelError(f"duplicate channel labels in {list(channels)}")

        data.setflags(write=False)
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "sample_index_origin", int(self.sample_index_origin))

    @property
    def n_channels(self):
        return self.data.shape[0]

    @property
    def n_samples(self):
        return self.data.shape[1]

    def index_of(self, label):
        """Return the row index of a channel label"""
        try:
            return self.channels.index(label)
        except ValueError:
            raise UnknownChannelError(f"Unknown channel '{label}'; have {list(self.channels)}") from None

    def channel(self, label):
        """Return one channel's samples as a 1D array"""
        return self.data[self.index_of(label)]

    def to_frame(self):
        """Return the series as a samples x channels DataFrame"""
        index = pd.RangeIndex(self.sample_index_origin, self.sample_index_origin + self.n_samples)
        return pd.DataFrame(self.data.T, columns=list(self.channels), index=index)


@dataclass(frozen=True)
class StandardizationParams:
    """Per-channel affine parameters used to standardize a series."""

    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self):
        means = np.array(self.means, dtype=float).reshape(-1)
        stds = np.array(self.stds, dtype=float).reshape(-1)
        if means.shape != stds.shape:
            raise InvalidParameterError("means and stds must have the same length")
        if not np.all(np.isfinite(means)):
            raise InvalidParameterError("means must be finite")
        if not np.all(np.isfinite(stds) & (stds > 0)):
            raise InvalidParameterError(f"stds must be finite and > 0, got {stds.tolist()}")
        means.setflags(write=False)
        stds.setflags(write=False)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "stds", stds)

    @classmethod
    def identity(cls, n_channels):
        return cls(np.zeros(n_channels), np.ones(n_channels))

    @property
    def is_identity(self):
        return bool(np.all(self.means == 0.0) and np.all(self.stds == 1.0))

    def inverse(self, series):
        """
        Map a standardized series back to sensor units

        Args:
            series: MultichannelSeries in standardized units

        Returns:
            MultichannelSeries in the original units
        """
        if series.n_channels != self.means.size:
            raise InvalidParameterError(
                f"series has {series.n_channels} channels, parameters cover {self.means.size}"
            )
        raw = series.data * self.stds[:, None] + self.means[:, None]
        return MultichannelSeries(series.channels, raw, series.sample_index_origin)


def load_csv(path, delimiter=",", has_header=True, time_column=None):
    """
    Load a multichannel series from a CSV file

    Args:
        path: File path
        delimiter: Field delimiter
        has_header: Whether the first row holds channel labels
        time_column: Optional header label of a time column to drop

    Returns:
        MultichannelSeries with channels in file column order
    """
    if not os.path.isfile(path):
        raise InputNotFoundError(f"Input file not found: {path}")

    try:
        raw = pd.read_csv(
            path,
            sep=delimiter,
            header=None,
            dtype=str,
            keep_default_na=False,
            skip_blank_lines=True,
            encoding="utf-8",
        )
    except pd.errors.EmptyDataError:
        raise EmptyInputError(f"No data in {path}") from None
    except pd.errors.ParserError as e:
        raise ParseError(f"Malformed CSV in {path}: {e}") from None

    if has_header:
        labels = [label.strip() for label in raw.iloc[0].tolist()]
        body = raw.iloc[1:].reset_index(drop=True)
    else:
        labels = [f"ch{i + 1}" for i in range(raw.shape[1])]
        body = raw

    if body.shape[0] == 0:
        raise EmptyInputError(f"No data rows in {path}")

    seen = set()
    for label in labels:
        if label in seen:
            raise DuplicateLabelError(f"Duplicate channel label '{label}' in {path}")
        seen.add(label)

    keep = list(range(len(labels)))
    if time_column is not None:
        if not has_header:
            raise InvalidParameterError("time_column requires a header row")
        if time_column not in labels:
            raise UnknownChannelError(f"Time column '{time_column}' not in header {labels}")
        keep.remove(labels.index(time_column))
    if not keep:
        raise EmptyInputError(f"No channel columns in {path}")

    columns = []
    for col in keep:
        text = body.iloc[:, col].str.strip()
        values = pd.to_numeric(text, errors="coerce").to_numpy(dtype=float)
        bad = ~np.isfinite(values)
        if bad.any():
            row = int(np.argmax(bad)) + 1
            raise ParseError(
                f"Non-numeric or non-finite cell {text.iloc[row - 1]!r} in {path}",
                row=row,
                column=col + 1,
            )
        # Re-parse with Python's correctly rounded float conversion
        columns.append(text.to_numpy(dtype=object).astype(float))

    series = MultichannelSeries(tuple(labels[col] for col in keep), np.vstack(columns))
    logger.info(f"Loaded {series.n_channels} channels x {series.n_samples} samples from {path}")
    return series


def write_csv(series, path, delimiter=",", include_header=True):
    """
    Write a series to CSV, one channel per column

    Args:
        series: MultichannelSeries to write
        path: Destination file path (or writable buffer)
        delimiter: Field delimiter
        include_header: Whether to write channel labels as the first row
    """
    frame = pd.DataFrame(series.data.T, columns=list(series.channels))
    frame.to_csv(
        path,
        sep=delimiter,
        header=include_header,
        index=False,
        float_format=CSV_FLOAT_FORMAT,
        lineterminator="\n",
    )


def standardize(series):
    """
    Standardize every channel to zero mean and unit (population) std

    Args:
        series: MultichannelSeries

    Returns:
        Tuple of (standardized series, StandardizationParams)
    """
    means = series.data.mean(axis=1)
    stds = series.data.std(axis=1)

    for label, std in zip(series.channels, stds):
        if not std > 0:
            raise ConstantChannelError(label)

    scaled = (series.data - means[:, None]) / stds[:, None]
    # Second pass removes the rounding residue left by the first
    scaled = scaled - scaled.mean(axis=1, keepdims=True)

    params = StandardizationParams(means, stds)
    return MultichannelSeries(series.channels, scaled, series.sample_index_origin), params


def window(series, start, stop):
    """
    Cut a half-open window [start, stop) of samples out of a series

    Args:
        series: MultichannelSeries
        start: First sample position (0-based, relative to the series)
        stop: One past the last sample position

    Returns:
        MultichannelSeries whose sample_index_origin is shifted by start
    """
    if not 0 <= start < stop <= series.n_samples:
        raise InvalidParameterError(
            f"window [{start}, {stop}) outside series of {series.n_samples} samples"
        )
    return MultichannelSeries(
        series.channels,
        series.data[:, start:stop],
        series.sample_index_origin + start,
    )


@dataclass(frozen=True)
class AutocorrelationLags:
    """Biased sample autocorrelations rho_1..rho_L of one channel (rho_0 = 1 is implied)."""

    channel: str
    rho: np.ndarray
    lag_count: int

    def toeplitz(self):
        """Full (L+1)x(L+1) correlation matrix implied by rho_0..rho_L"""
        from scipy.linalg import toeplitz
        return toeplitz(np.concatenate([[1.0], self.rho]))


def _centered_correlation(x, y):
    """Full biased cross-correlation sequence sum_t x_t y_{t-k} for k = -(N-1)..N-1"""
    return signal.correlate(x, y, mode="full", method="auto")


def autocorrelation(series, channel, max_lag):
    """
    Biased sample autocorrelation of one channel

    Args:
        series: MultichannelSeries
        channel: Channel label
        max_lag: Number of lags L to compute (1 <= L < N)

    Returns:
        AutocorrelationLags holding rho_1..rho_L
    """
    y = series.channel(channel)
    n = y.size

    if max_lag < 1:
        raise InvalidParameterError(f"max_lag must be >= 1, got {max_lag}")
    if max_lag >= n:
        raise LagTooLargeError(f"max_lag {max_lag} must be smaller than N = {n}")

    x = y - y.mean()
    denom = np.dot(x, x)
    if denom == 0:
        raise ConstantChannelError(channel)

    full = _centered_correlation(x, x)
    center = n - 1
    rho = full[center + 1:center + 1 + max_lag] / denom
    # Guard the |rho| <= 1 bound against FFT round-off
    rho = np.clip(rho, -1.0, 1.0)
    rho.setflags(write=False)

    return AutocorrelationLags(channel=channel, rho=rho, lag_count=int(max_lag))


def cross_correlation(series, source, target, max_lag):
    """
    Biased sample cross-correlation between two channels

    Args:
        series: MultichannelSeries
        source: Label of the (lagged) source channel
        target: Label of the target channel
        max_lag: Largest lag L

    Returns:
        Array of L+1 values, entry k = corr(target_t, source_{t-k})
    """
    a = series.channel(target)
    b = series.channel(source)
    n = a.size

    if max_lag < 0:
        raise InvalidParameterError(f"max_lag must be >= 0, got {max_lag}")
    if max_lag >= n:
        raise LagTooLargeError(f"max_lag {max_lag} must be smaller than N = {n}")

    a = a - a.mean()
    b = b - b.mean()
    norm = np.sqrt(np.dot(a, a) * np.dot(b, b))
    if norm == 0:
        label = target if np.dot(a, a) == 0 else source
        raise ConstantChannelError(label)

    full = _centered_correlation(a, b)
    center = n - 1
    return full[center:center + max_lag + 1] / norm
