from __future__ import annotations

import functools
import itertools
import logging
import warnings
from dataclasses import dataclass, field

import networkx as nx
import numpy as np
from scipy import linalg, stats
from scipy.optimize import linear_sum_assignment

from utils.exceptions import (
    DimensionMismatchError,
    InsufficientDataError,
    InvalidParameterError,
    NoConvergenceError,
    NonGaussianityWarning,
    PermutationDegenerateError,
    RankDeficientError,
)

# Set up logging
logger = logging.getLogger(__name__)

RANK_TOLERANCE = 1e-10
MAX_UNMIXING_CONDITION = 1e10
MIN_DIAGONAL = 1e-8
EXHAUSTIVE_LIMIT = 8
SAMPLES_PER_CHANNEL = 50
GAUSSIAN_KURTOSIS = 0.1


@dataclass(frozen=True)
class IcaConfig:
    """FastICA settings."""

    contrast: str = "logcosh"
    max_iter: int = 200
    tol: float = 1e-4
    seed: int = 0
    strategy: str = "symmetric"

    def __post_init__(self):
        if self.contrast not in _CONTRASTS:
            raise InvalidParameterError(f"contrast must be one of {sorted(_CONTRASTS)}, got '{self.contrast}'")
        if self.strategy not in ("symmetric", "deflation"):
            raise InvalidParameterError(f"strategy must be 'symmetric' or 'deflation', got '{self.strategy}'")
        if self.max_iter < 1:
            raise InvalidParameterError(f"max_iter must be >= 1, got {self.max_iter}")
        if not self.tol > 0:
            raise InvalidParameterError(f"tol must be > 0, got {self.tol}")


@dataclass(frozen=True)
class WhiteningResult:
    whitened: np.ndarray = field(repr=False)
    whitening_matrix: np.ndarray
    mean: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class IcaConvergence:
    iterations: int
    final_delta: float
    converged: bool
    gaussian_flag: bool
    kurtosis: tuple


@dataclass(frozen=True)
class IcaResult:
    """FastICA output; unmixing maps centered residuals to unit-variance components."""

    unmixing: np.ndarray
    components: np.ndarray = field(repr=False)
    convergence: IcaConvergence


@dataclass(frozen=True)
class StructuralMatrix:
    """
    Contemporaneous causal factors S0 (row = effect, column = cause).

    The diagonal is exactly zero. When pruned, S0 permuted by causal_order
    is strictly lower-triangular.
    """

    s0: np.ndarray
    causal_order: tuple
    pruned: bool = False

    def __post_init__(self):
        s0 = np.array(self.s0, dtype=float)
        if s0.ndim != 2 or s0.shape[0] != s0.shape[1]:
            raise DimensionMismatchError(f"s0 must be square, got shape {s0.shape}")
        order = tuple(int(i) for i in self.causal_order)
        if sorted(order) != list(range(s0.shape[0])):
            raise InvalidParameterError(f"causal_order {order} is not a permutation of 0..{s0.shape[0] - 1}")
        if np.any(np.diag(s0) != 0):
            raise InvalidParameterError("s0 diagonal must be exactly zero")
        s0.setflags(write=False)
        object.__setattr__(self, "s0", s0)
        object.__setattr__(self, "causal_order", order)
        object.__setattr__(self, "pruned", bool(self.pruned))
        if self.pruned and not self.is_lower_in_order():
            raise InvalidParameterError("pruned s0 must be strictly lower-triangular in causal_order")

    @property
    def n_channels(self):
        return self.s0.shape[0]

    def permuted(self):
        """S0 with rows and columns rearranged into causal order"""
        order = list(self.causal_order)
        return self.s0[np.ix_(order, order)]

    def is_lower_in_order(self):
        return bool(np.all(np.triu(self.permuted()) == 0))

    def graph(self, channels=None):
        """Directed graph with an edge cause -> effect for every nonzero entry"""
        labels = list(channels) if channels is not None else list(range(self.n_channels))
        g = nx.DiGraph()
        g.add_nodes_from(labels)
        for i, j in zip(*np.nonzero(self.s0)):
            g.add_edge(labels[j], labels[i], weight=float(self.s0[i, j]))
        return g

    def is_acyclic(self):
        return nx.is_directed_acyclic_graph(self.graph())


# Some standard non-linear functions.
def _logcosh(u):
    gu = np.tanh(u)
    return gu, (1 - gu ** 2).mean(axis=-1)


def _cube(u):
    return u ** 3, (3 * u ** 2).mean(axis=-1)


_CONTRASTS = {"logcosh": _logcosh, "cube": _cube}


def _sym_decorrelation(w):
    """ Symmetric decorrelation
    i.e. W <- (W * W.T) ^{-1/2} * W
    """
    s, u = linalg.eigh(w @ w.T)
    return (u * (1.0 / np.sqrt(s))) @ u.T @ w


def _gs_decorrelation(w, basis, j):
    """Orthogonalize w against the first j (orthonormal) rows of basis"""
    return w - (w @ basis[:j].T) @ basis[:j]


def _row_change(new, old):
    """Largest entry change per row, ignoring the sign of each row"""
    plus = np.abs(new - old).max(axis=-1)
    minus = np.abs(new + old).max(axis=-1)
    return np.minimum(plus, minus)


def whiten(data):
    """
    Whiten data with the inverse principal square root of its covariance

    Args:
        data: C x T array

    Returns:
        WhiteningResult with identity-covariance data and the whitening matrix
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise DimensionMismatchError(f"data must be 2D, got shape {data.shape}")

    mean = data.mean(axis=1, keepdims=True)
    centered = data - mean
    covariance = centered @ centered.T / data.shape[1]

    eigvals, eigvecs = linalg.eigh(covariance)
    if eigvals.max() <= 0 or eigvals.min() <= RANK_TOLERANCE * eigvals.max():
        raise RankDeficientError(
            f"sample covariance is rank deficient (eigenvalues {eigvals.min():.3g} .. {eigvals.max():.3g})"
        )

    whitening = (eigvecs / np.sqrt(eigvals)) @ eigvecs.T
    return WhiteningResult(whitened=whitening @ centered, whitening_matrix=whitening, mean=mean.ravel())


def _ica_symmetric(x, g, w_init, tol, max_iter):
    w = _sym_decorrelation(w_init)
    n_samples = x.shape[1]
    delta = np.inf
    for iteration in range(1, max_iter + 1):
        gwtx, g_wtx = g(w @ x)
        w1 = _sym_decorrelation(gwtx @ x.T / n_samples - g_wtx[:, None] * w)
        delta = float(_row_change(w1, w).max())
        w = w1
        if delta < tol:
            break
    return w, iteration, delta


def _ica_deflation(x, g, w_init, tol, max_iter):
    n_components = w_init.shape[0]
    w = np.zeros((n_components, n_components))
    iterations = []
    deltas = []

    # j is the index of the extracted component
    for j in range(n_components):
        wj = _gs_decorrelation(w_init[j].copy(), w, j)
        wj /= np.linalg.norm(wj)
        delta = np.inf
        for iteration in range(1, max_iter + 1):
            gwtx, g_wtx = g(wj @ x)
            w1 = (x * gwtx).mean(axis=1) - g_wtx * wj
            w1 = _gs_decorrelation(w1, w, j)
            w1 /= np.linalg.norm(w1)
            delta = float(_row_change(w1, wj))
            wj = w1
            if delta < tol:
                break
        iterations.append(iteration)
        deltas.append(delta)
        w[j] = wj

    return w, max(iterations), max(deltas)


def excess_kurtosis(data):
    """Per-row excess (Fisher) kurtosis with the biased estimator"""
    return stats.kurtosis(np.atleast_2d(data), axis=1, fisher=True, bias=True)


def check_non_gaussianity(data, tol=GAUSSIAN_KURTOSIS):
    """
    Warn when every row looks Gaussian

    Args:
        data: C x T residuals
        tol: Excess kurtosis magnitude below which a row counts as Gaussian

    Returns:
        Warning message, or None when at least one row is non-Gaussian
    """
    kurt = excess_kurtosis(data)
    if np.all(np.abs(kurt) < tol):
        message = (
            "Residuals look Gaussian (all |excess kurtosis| < "
            f"{tol}: {np.round(kurt, 3).tolist()}); LiNGAM identification is unreliable"
        )
        warnings.warn(message, NonGaussianityWarning, stacklevel=2)
        return message
    return None


def fastica(data, config=None):
    """
    Fixed-point FastICA on C x T data

    Args:
        data: C x T array (whitened internally)
        config: IcaConfig

    Returns:
        IcaResult with the full unmixing matrix and recovered components
    """
    config = config or IcaConfig()
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise DimensionMismatchError(f"data must be 2D, got shape {data.shape}")
    n_channels, n_samples = data.shape
    if n_samples < SAMPLES_PER_CHANNEL * n_channels:
        raise InsufficientDataError(
            f"FastICA needs T >= {SAMPLES_PER_CHANNEL * n_channels} for {n_channels} channels, got {n_samples}"
        )

    white = whiten(data)
    rng = np.random.default_rng(config.seed)
    w_init = rng.standard_normal((n_channels, n_channels))
    g = _CONTRASTS[config.contrast]

    if config.strategy == "symmetric":
        rotation, iterations, delta = _ica_symmetric(white.whitened, g, w_init, config.tol, config.max_iter)
    else:
        rotation, iterations, delta = _ica_deflation(white.whitened, g, w_init, config.tol, config.max_iter)

    logger.debug(f"FastICA ({config.strategy}, {config.contrast}): {iterations} iterations, delta {delta:.3g}")
    if not delta < config.tol:
        raise NoConvergenceError(iterations, delta)

    unmixing = rotation @ white.whitening_matrix
    condition = np.linalg.cond(unmixing)
    if not condition < MAX_UNMIXING_CONDITION:
        raise RankDeficientError(f"unmixing matrix condition number {condition:.3g} is too large")

    components = rotation @ white.whitened
    kurt = excess_kurtosis(components)
    gaussian_flag = bool(np.all(np.abs(kurt) < GAUSSIAN_KURTOSIS))
    if gaussian_flag:
        logger.warning("FastICA components look Gaussian; the separation is not identifiable")

    return IcaResult(
        unmixing=unmixing,
        components=components,
        convergence=IcaConvergence(
            iterations=iterations,
            final_delta=delta,
            converged=True,
            gaussian_flag=gaussian_flag,
            kurtosis=tuple(float(k) for k in kurt),
        ),
    )


def amari_error(unmixing, mixing):
    """
    Normalized Amari index of unmixing @ mixing (0 = perfect up to scaled permutation)

    Args:
        unmixing: C x C estimated unmixing matrix
        mixing: C x C true mixing matrix

    Returns:
        Error in [0, 1]
    """
    p = np.abs(np.asarray(unmixing) @ np.asarray(mixing))
    n = p.shape[0]
    if n < 2:
        return 0.0
    rows = (p.sum(axis=1) / p.max(axis=1) - 1).sum()
    cols = (p.sum(axis=0) / p.max(axis=0) - 1).sum()
    return float((rows + cols) / (2 * n * (n - 1)))


@functools.lru_cache(maxsize=EXHAUSTIVE_LIMIT)
def _permutations(n):
    return np.array(list(itertools.permutations(range(n))), dtype=int)


def _best_row_permutation(w):
    """Row order of W whose diagonal is as large as possible"""
    n = w.shape[0]
    magnitude = np.abs(w)

    if n <= EXHAUSTIVE_LIMIT:
        perms = _permutations(n)
        diag = magnitude[perms, np.arange(n)]
        with np.errstate(divide="ignore"):
            cost = np.where(diag < MIN_DIAGONAL, np.inf, 1.0 / diag).sum(axis=1)
        best = int(np.argmin(cost))
        if not np.isfinite(cost[best]):
            raise PermutationDegenerateError("every row permutation leaves a (near-)zero diagonal entry")
        return tuple(int(i) for i in perms[best])

    with np.errstate(divide="ignore"):
        cost = -np.log(magnitude)
    cost[magnitude < MIN_DIAGONAL] = 1e12
    rows, positions = linear_sum_assignment(cost)
    perm = np.empty(n, dtype=int)
    perm[positions] = rows
    if np.any(magnitude[perm, np.arange(n)] < MIN_DIAGONAL):
        raise PermutationDegenerateError("every row permutation leaves a (near-)zero diagonal entry")
    return tuple(int(i) for i in perm)


def _causal_order(s0):
    """Variable order that pushes the most squared mass below the diagonal"""
    n = s0.shape[0]
    squared = s0 ** 2

    if n <= EXHAUSTIVE_LIMIT:
        perms = _permutations(n)
        upper = np.triu(np.ones((n, n), dtype=bool), k=1)
        arranged = squared[perms[:, :, None], perms[:, None, :]]
        cost = arranged[:, upper].sum(axis=1)
        return tuple(int(i) for i in perms[int(np.argmin(cost))])

    # Greedy: repeatedly place the variable with the fewest remaining causes
    remaining = list(range(n))
    order = []
    while remaining:
        scores = [squared[i, remaining].sum() for i in remaining]
        pick = remaining[int(np.argmin(scores))]
        order.append(pick)
        remaining.remove(pick)
    return tuple(order)


def lingam_from_ica(ica):
    """
    Turn an ICA unmixing matrix into the structural matrix S0

    Args:
        ica: IcaResult

    Returns:
        Unpruned StructuralMatrix with its estimated causal order
    """
    w = np.asarray(ica.unmixing, dtype=float)
    n = w.shape[0]

    row_order = _best_row_permutation(w)
    w_perm = w[list(row_order)]
    w_scaled = w_perm / np.diag(w_perm)[:, None]

    s0 = np.eye(n) - w_scaled
    np.fill_diagonal(s0, 0.0)

    order = _causal_order(s0)
    logger.debug(f"LiNGAM row permutation {row_order}, causal order {order}")
    return StructuralMatrix(s0=s0, causal_order=order, pruned=False)


def prune_to_dag(structural, threshold):
    """
    Enforce the DAG restriction on S0

    Args:
        structural: StructuralMatrix
        threshold: Entries with |value| below this are zeroed first

    Returns:
        Pruned StructuralMatrix, strictly lower-triangular in causal order
    """
    if not threshold >= 0:
        raise InvalidParameterError(f"threshold must be >= 0, got {threshold}")

    s0 = structural.s0.copy()
    s0[np.abs(s0) < threshold] = 0.0

    position = np.empty(structural.n_channels, dtype=int)
    position[list(structural.causal_order)] = np.arange(structural.n_channels)
    # Cause placed after its effect: above the diagonal in causal order
    s0[position[None, :] > position[:, None]] = 0.0
    np.fill_diagonal(s0, 0.0)

    return StructuralMatrix(s0=s0, causal_order=structural.causal_order, pruned=True)
