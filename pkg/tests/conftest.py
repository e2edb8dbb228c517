import networkx as nx
import numpy as np
import pytest

from models.ica_lingam import StructuralMatrix
from models.svar_model import SvarModel, companion_radius
from utils.timeseries import MultichannelSeries, StandardizationParams


def make_model(s0, lagged, channels=None, noise_variances=None, stds=None):
    """SvarModel from plain matrices; causal order derived from the S0 graph"""
    s0 = np.array(s0, dtype=float)
    lagged = np.array(lagged, dtype=float)
    if lagged.ndim == 2:
        lagged = lagged[None]
    n = s0.shape[0]
    channels = tuple(channels or [f"ch{i + 1}" for i in range(n)])

    graph = StructuralMatrix(s0, tuple(range(n))).graph()
    if nx.is_directed_acyclic_graph(graph):
        structural = StructuralMatrix(s0, tuple(nx.lexicographical_topological_sort(graph)), pruned=True)
    else:
        structural = StructuralMatrix(s0, tuple(range(n)), pruned=False)

    inverse = np.linalg.inv(np.eye(n) - s0)
    stds = np.ones(n) if stds is None else np.asarray(stds, dtype=float)
    return SvarModel(
        channels=channels,
        s0=structural,
        lagged=lagged,
        uncorrected_lagged=np.stack([inverse @ s for s in lagged]),
        noise_variances=np.ones(n) if noise_variances is None else noise_variances,
        preprocessing=StandardizationParams(np.zeros(n), stds),
        fit_meta={"edits": []},
    )


def random_triangular_svar(seed, n_channels=4, radius=0.9):
    """Random stable SVAR(1): dense triangular S0 with |entries| in [0.3, 0.8]"""
    rng = np.random.default_rng(seed)
    order = rng.permutation(n_channels)
    s0 = np.zeros((n_channels, n_channels))
    for a in range(n_channels):
        for b in range(a):
            s0[order[a], order[b]] = rng.uniform(0.3, 0.8) * rng.choice([-1.0, 1.0])

    s1 = rng.uniform(-0.5, 0.5, size=(n_channels, n_channels))
    reduced = np.linalg.solve(np.eye(n_channels) - s0, s1)[None]
    current = companion_radius(reduced)
    if current >= radius:
        s1 *= 0.85 * radius / current
    return make_model(s0, s1)


@pytest.fixture
def model_factory():
    return make_model


@pytest.fixture
def triangular_svar_factory():
    return random_triangular_svar


@pytest.fixture
def causal_pair():
    """y1[n] = 0.9 y2[n-1] + 0.1 e1[n], y2 white (N = 10000)"""
    rng = np.random.default_rng(42)
    n = 10000
    y2 = rng.standard_normal(n)
    y1 = np.zeros(n)
    y1[1:] = 0.9 * y2[:-1]
    y1 += 0.1 * rng.standard_normal(n)
    return MultichannelSeries(("y1", "y2"), np.vstack([y1, y2]))


@pytest.fixture
def uncorrelated_pair():
    rng = np.random.default_rng(7)
    return MultichannelSeries(("y1", "y2"), rng.standard_normal((2, 10000)))


@pytest.fixture
def write_text(tmp_path):
    """Write text to a file under tmp_path and return its path"""
    def _write(name, text):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return str(path)
    return _write
