from __future__ import annotations

import logging
import re
import warnings
from dataclasses import dataclass, field, replace

import networkx as nx
import numpy as np
import pandas as pd

from models.ica_lingam import StructuralMatrix
from models.svar_model import companion_radius, structure_inverse
from models.var_model import pairwise_granger
from utils.exceptions import (
    DimensionMismatchError,
    EditSyntaxError,
    InvalidParameterError,
    SelfEdgeStructuralError,
    UnknownEdgeError,
    UnstableModelWarning,
)
from utils.timeseries import MultichannelSeries, autocorrelation

# Set up logging
logger = logging.getLogger(__name__)

NOISE_FAMILIES = ("laplace", "uniform", "gaussian")
INTERVENTION_KINDS = ("zero_structural_edge", "zero_granger_edge", "set_edge", "clamp_channel")
SOLVERS = ("substitution", "inverse")
DEFAULT_BURN_IN = 1000

EDIT_GRAMMAR = "structural:SRC->DST=V | lagK:SRC->DST=V | clamp:CH=V  (e.g. structural:b2->b1=0)"
_LAG_PREFIX = re.compile(r"lag(\d+)")


@dataclass(frozen=True)
class NoiseSpec:
    """
    Innovation noise e_t.

    scale is the per-channel standard deviation (a scalar applies to every
    channel). Standard draws for the whole run come from one seeded
    generator, so two runs with the same seed share the noise stream even
    when their models differ.
    """

    family: str = "laplace"
    scale: object = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.family not in NOISE_FAMILIES:
            raise InvalidParameterError(f"noise family must be one of {NOISE_FAMILIES}, got '{self.family}'")
        scale = np.array(self.scale, dtype=float).reshape(-1)
        if scale.size < 1 or not np.all(scale > 0) or not np.all(np.isfinite(scale)):
            raise InvalidParameterError(f"noise scale must be positive and finite, got {self.scale}")
        scale.setflags(write=False)
        object.__setattr__(self, "scale", scale)

    @property
    def is_gaussian(self):
        return self.family == "gaussian"

    def scales(self, n_channels):
        if self.scale.size == 1:
            return np.full(n_channels, self.scale[0])
        if self.scale.size != n_channels:
            raise DimensionMismatchError(f"{self.scale.size} noise scales for {n_channels} channels")
        return self.scale

    def variances(self, n_channels):
        """Analytic per-channel noise variance"""
        return self.scales(n_channels) ** 2

    def draw(self, n_channels, n_steps):
        """C x n_steps noise matrix"""
        rng = np.random.default_rng(self.seed)
        size = (n_steps, n_channels)
        if self.family == "laplace":
            standard = rng.laplace(0.0, 1.0 / np.sqrt(2.0), size=size)
        elif self.family == "uniform":
            standard = rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), size=size)
        else:
            standard = rng.standard_normal(size=size)
        return (standard * self.scales(n_channels)).T


@dataclass(frozen=True)
class Intervention:
    """One what-if edit; lag 0 addresses S0, lag d >= 1 addresses S^d."""

    kind: str
    target: str
    source: str = None
    lag: int = 0
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in INTERVENTION_KINDS:
            raise InvalidParameterError(f"intervention kind must be one of {INTERVENTION_KINDS}, got '{self.kind}'")
        if self.kind != "clamp_channel" and self.source is None:
            raise InvalidParameterError(f"{self.kind} needs a source channel")
        if self.kind == "zero_structural_edge" and self.lag != 0:
            raise InvalidParameterError("zero_structural_edge acts on lag 0")
        if self.kind == "zero_granger_edge" and self.lag < 1:
            raise InvalidParameterError("zero_granger_edge needs lag >= 1")
        if self.lag < 0:
            raise InvalidParameterError(f"lag must be >= 0, got {self.lag}")
        if not np.isfinite(self.value):
            raise InvalidParameterError(f"value must be finite, got {self.value}")
        if self.kind.startswith("zero_"):
            object.__setattr__(self, "value", 0.0)
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "lag", int(self.lag))

    def describe(self):
        """Edit-string form of the intervention"""
        if self.kind == "clamp_channel":
            return f"clamp:{self.target}={self.value!r}"
        prefix = "structural" if self.lag == 0 else f"lag{self.lag}"
        return f"{prefix}:{self.source}->{self.target}={self.value!r}"


def parse_edit(text):
    """
    Parse an edit string into an Intervention

    Args:
        text: structural:SRC->DST=V, lagK:SRC->DST=V or clamp:CH=V

    Returns:
        Intervention (a zero value on an edge becomes a zero_* kind)
    """
    def _fail(reason):
        raise EditSyntaxError(f"Bad edit '{text}': {reason}. Expected {EDIT_GRAMMAR}")

    prefix, sep, rest = text.strip().partition(":")
    if not sep:
        _fail("missing ':'")
    lhs, eq, value_text = rest.rpartition("=")
    if not eq:
        _fail("missing '='")
    try:
        value = float(value_text.strip())
    except ValueError:
        _fail(f"'{value_text.strip()}' is not a number")
    if not np.isfinite(value):
        _fail("value must be finite")

    prefix = prefix.strip()
    if prefix == "clamp":
        channel = lhs.strip()
        if not channel or "->" in channel:
            _fail("clamp takes a single channel")
        return Intervention(kind="clamp_channel", target=channel, value=value)

    if prefix == "structural":
        lag = 0
    else:
        match = _LAG_PREFIX.fullmatch(prefix)
        if not match or int(match.group(1)) < 1:
            _fail(f"unknown prefix '{prefix}'")
        lag = int(match.group(1))

    source, arrow, target = lhs.partition("->")
    source, target = source.strip(), target.strip()
    if not arrow or not source or not target:
        _fail("edges are written SRC->DST")

    if value == 0.0:
        kind = "zero_structural_edge" if lag == 0 else "zero_granger_edge"
    else:
        kind = "set_edge"
    return Intervention(kind=kind, target=target, source=source, lag=lag, value=value)


def _reorder_structure(s0, previous):
    """StructuralMatrix for an edited S0, re-deriving a causal order when needed"""
    candidate = StructuralMatrix(s0=s0, causal_order=previous.causal_order, pruned=False)
    if candidate.is_lower_in_order():
        return StructuralMatrix(s0=s0, causal_order=previous.causal_order, pruned=previous.pruned)

    graph = candidate.graph()
    if nx.is_directed_acyclic_graph(graph):
        order = tuple(nx.lexicographical_topological_sort(graph))
        return StructuralMatrix(s0=s0, causal_order=order, pruned=previous.pruned)

    logger.warning("Edited structural graph has a cycle; simulation will use the explicit inverse")
    return candidate


def apply_intervention(model, intervention):
    """
    Apply one edit to a model

    Args:
        model: SvarModel
        intervention: Intervention

    Returns:
        New SvarModel with the edit applied and recorded in fit_meta["edits"]
    """
    if intervention.target not in model.channels:
        raise UnknownEdgeError(f"Unknown channel '{intervention.target}'; have {list(model.channels)}")

    edits = list(model.fit_meta.get("edits", [])) + [intervention.describe()]

    if intervention.kind == "clamp_channel":
        clamps = {**model.clamps, intervention.target: intervention.value}
        return replace(model, clamps=clamps, fit_meta={**model.fit_meta, "edits": edits})

    if intervention.source not in model.channels:
        raise UnknownEdgeError(f"Unknown channel '{intervention.source}'; have {list(model.channels)}")
    if intervention.lag > model.order:
        raise UnknownEdgeError(f"Lag {intervention.lag} exceeds model order {model.order}")

    i = model.index_of(intervention.target)
    j = model.index_of(intervention.source)

    if intervention.lag == 0:
        if i == j:
            raise SelfEdgeStructuralError(f"Structural self-edge on '{intervention.target}' is not allowed")
        s0 = np.array(model.s0.s0)
        s0[i, j] = intervention.value
        return replace(
            model,
            s0=_reorder_structure(s0, model.s0),
            clamps=dict(model.clamps),
            fit_meta={**model.fit_meta, "edits": edits},
        )

    lagged = np.array(model.lagged)
    lagged[intervention.lag - 1, i, j] = intervention.value
    return replace(model, lagged=lagged, clamps=dict(model.clamps), fit_meta={**model.fit_meta, "edits": edits})


def apply_interventions(model, interventions):
    for intervention in interventions:
        model = apply_intervention(model, intervention)
    return model


def _mutilated_parameters(model):
    """S0 and lag matrices with clamped channels cut off from their causes"""
    s0 = np.array(model.s0.s0)
    lagged = np.array(model.lagged)
    clamped = [model.index_of(label) for label in model.clamps]
    s0[clamped, :] = 0.0
    lagged[:, clamped, :] = 0.0
    return s0, lagged, clamped


def _lower_in_order(s0, order):
    index = list(order)
    return bool(np.all(np.triu(s0[np.ix_(index, index)]) == 0))


def simulate_svar(model, n_samples, noise=None, burn_in=DEFAULT_BURN_IN, solver="substitution"):
    """
    Forward-simulate y_t = S0 y_t + sum_d S^d y_{t-d} + e_t from zero initial conditions

    Args:
        model: SvarModel
        n_samples: Number of samples to return
        noise: NoiseSpec (Laplace, unit scale, seed 0 by default)
        burn_in: Leading samples to discard
        solver: "substitution" (causal-order forward substitution) or "inverse"

    Returns:
        MultichannelSeries of n_samples samples
    """
    noise = noise or NoiseSpec()
    if int(n_samples) != n_samples or n_samples < 1:
        raise InvalidParameterError(f"n_samples must be a positive integer, got {n_samples}")
    if int(burn_in) != burn_in or burn_in < 0:
        raise InvalidParameterError(f"burn_in must be a non-negative integer, got {burn_in}")
    if solver not in SOLVERS:
        raise InvalidParameterError(f"solver must be one of {SOLVERS}, got '{solver}'")
    n_samples, burn_in = int(n_samples), int(burn_in)

    n_channels, order = model.n_channels, model.order
    total = burn_in + n_samples

    if noise.is_gaussian:
        logger.warning("Gaussian noise: LiNGAM recovery is not expected to succeed on this data")

    s0, lagged, clamped = _mutilated_parameters(model)
    inverse = structure_inverse(s0)
    radius = companion_radius(np.stack([inverse @ m for m in lagged]))
    if radius >= 1:
        warnings.warn(
            f"Model is not stable (companion spectral radius {radius:.4f} >= 1); simulation may diverge",
            UnstableModelWarning,
            stacklevel=2,
        )

    e = noise.draw(n_channels, total)
    for label, index in zip(model.clamps, clamped):
        e[index, :] = model.clamps[label]

    use_substitution = solver == "substitution" and _lower_in_order(s0, model.s0.causal_order)
    causal_order = list(model.s0.causal_order)

    y = np.zeros((n_channels, total))
    for t in range(total):
        r = e[:, t].copy()
        for d in range(1, min(order, t) + 1):
            r += lagged[d - 1] @ y[:, t - d]
        if use_substitution:
            for i in causal_order:
                y[i, t] = r[i] + s0[i] @ y[:, t]
        else:
            y[:, t] = inverse @ r

    logger.info(
        f"Simulated {n_samples} samples ({burn_in} burn-in) with {noise.family} noise, "
        f"seed {noise.seed}, {'substitution' if use_substitution else 'inverse'} solver"
    )
    return MultichannelSeries(model.channels, y[:, burn_in:])


def impulse_response(model, channel, horizon, size=1.0):
    """
    Deterministic response to a single structural shock

    Args:
        model: SvarModel
        channel: Label of the shocked channel
        horizon: Last step to report
        size: Shock size at step 0

    Returns:
        DataFrame indexed by step 0..horizon with one column per channel
    """
    if channel not in model.channels:
        raise UnknownEdgeError(f"Unknown channel '{channel}'; have {list(model.channels)}")
    if horizon < 0:
        raise InvalidParameterError(f"horizon must be >= 0, got {horizon}")

    s0, lagged, clamped = _mutilated_parameters(model)
    inverse = structure_inverse(s0)

    y = np.zeros((model.n_channels, horizon + 1))
    shock = np.zeros(model.n_channels)
    shock[model.index_of(channel)] = size
    shock[clamped] = 0.0
    for t in range(horizon + 1):
        r = shock.copy() if t == 0 else np.zeros(model.n_channels)
        for d in range(1, min(model.order, t) + 1):
            r += lagged[d - 1] @ y[:, t - d]
        y[:, t] = inverse @ r

    frame = pd.DataFrame(y.T, columns=list(model.channels))
    frame.index.name = "step"
    return frame


# ----------------------------------
# Counterfactual reports
# ----------------------------------

def _series_metrics(series, order):
    """Variance, lag-1 autocorrelation and pairwise Granger F; None where undefined"""
    constant = {label: bool(np.ptp(series.channel(label)) == 0) for label in series.channels}

    variances = {label: float(series.channel(label).var()) for label in series.channels}
    autocorr1 = {
        label: None if constant[label] else float(autocorrelation(series, label, 1).rho[0])
        for label in series.channels
    }
    granger_f = {}
    for target in series.channels:
        for source in series.channels:
            if source == target:
                continue
            key = f"{source}->{target}"
            if constant[source] or constant[target]:
                granger_f[key] = None
            else:
                granger_f[key] = pairwise_granger(series, source, target, order).f_value
    return {"variances": variances, "autocorr1": autocorr1, "granger_f": granger_f}


def _metric_deltas(scenario, baseline):
    deltas = {}
    for name, values in scenario.items():
        deltas[name] = {
            key: None if value is None or baseline[name][key] is None else value - baseline[name][key]
            for key, value in values.items()
        }
    return deltas


@dataclass
class CounterfactualReport:
    baseline: dict
    scenarios: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def to_dict(self):
        document = {"baseline": self.baseline, "scenarios": self.scenarios}
        if self.config:
            document["config"] = self.config
        return document


def counterfactual_report(model, scenarios, n_samples, noise=None, burn_in=DEFAULT_BURN_IN):
    """
    Compare a baseline simulation with intervened simulations

    Every simulation reuses the same noise stream (common random numbers),
    so differences come from the edits alone.

    Args:
        model: SvarModel
        scenarios: List of scenarios; each is an Intervention or a list of them
        n_samples: Samples per simulation
        noise: NoiseSpec shared by every simulation
        burn_in: Burn-in samples per simulation

    Returns:
        CounterfactualReport
    """
    noise = noise or NoiseSpec()

    baseline_series = simulate_svar(model, n_samples, noise, burn_in)
    baseline = _series_metrics(baseline_series, model.order)
    report = CounterfactualReport(baseline=baseline)

    for scenario in scenarios:
        interventions = [scenario] if isinstance(scenario, Intervention) else list(scenario)
        edited = apply_interventions(model, interventions)
        series = simulate_svar(edited, n_samples, noise, burn_in)
        metrics = _series_metrics(series, model.order)
        report.scenarios.append({
            "interventions": [intervention.describe() for intervention in interventions],
            "metrics": metrics,
            "deltas": _metric_deltas(metrics, baseline),
        })
        logger.info(f"Scenario {[i.describe() for i in interventions]} simulated")

    return report
