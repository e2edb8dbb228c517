import json
import logging
from dataclasses import dataclass, field

from utils.exceptions import InvalidParameterError, ParseError

logger = logging.getLogger(__name__)

GRANGER_COLUMN = "t_granger"
STRUCTURAL_COLUMN = "t_structural"
EDGE_COLORS = {"structural": "blue", "granger": "green"}


def fence_columns(order):
    """Column tags t-D .. t-1, t_granger, t_structural"""
    return tuple(f"t-{d}" for d in range(order, 0, -1)) + (GRANGER_COLUMN, STRUCTURAL_COLUMN)


@dataclass(frozen=True, order=True)
class FenceNode:
    column: str
    channel: str


@dataclass(frozen=True)
class FenceEdge:
    source: FenceNode
    target: FenceNode
    weight: float
    kind: str
    sign: str

    @classmethod
    def from_factor(cls, source, target, weight, kind):
        return cls(source, target, float(weight), kind, "positive" if weight > 0 else "negative")


@dataclass(frozen=True)
class FenceGraph:
    """
    Fence-graph view of a fitted SVAR.

    One column per lag plus two current-time columns: Granger edges run
    from a lag column into t_granger, structural edges stay inside
    t_structural.
    """

    columns: tuple
    channels: tuple
    edges: tuple = ()
    threshold: float = 0.0
    nodes: tuple = field(init=False)

    def __post_init__(self):
        columns = tuple(self.columns)
        channels = tuple(self.channels)
        if len(columns) < 3 or columns[-2:] != (GRANGER_COLUMN, STRUCTURAL_COLUMN):
            raise InvalidParameterError(f"fence columns must end with {GRANGER_COLUMN}, {STRUCTURAL_COLUMN}")
        object.__setattr__(self, "columns", columns)
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "nodes", tuple(FenceNode(c, ch) for c in columns for ch in channels))

        lag_columns = set(columns[:-2])
        known = set(self.nodes)
        for edge in self.edges:
            if edge.source not in known or edge.target not in known:
                raise InvalidParameterError(f"edge {edge} refers to a node outside the fence")
            if edge.weight == 0 or abs(edge.weight) < self.threshold:
                raise InvalidParameterError(f"edge weight {edge.weight} is below the threshold {self.threshold}")
            if edge.kind == "granger":
                if edge.target.column != GRANGER_COLUMN or edge.source.column not in lag_columns:
                    raise InvalidParameterError(f"granger edge must run from a lag column into {GRANGER_COLUMN}")
            elif edge.kind == "structural":
                if edge.source.column != STRUCTURAL_COLUMN or edge.target.column != STRUCTURAL_COLUMN:
                    raise InvalidParameterError(f"structural edge must stay inside {STRUCTURAL_COLUMN}")
                if edge.source.channel == edge.target.channel:
                    raise InvalidParameterError("structural self-edge")
            else:
                raise InvalidParameterError(f"unknown edge kind '{edge.kind}'")
            if edge.sign != ("positive" if edge.weight > 0 else "negative"):
                raise InvalidParameterError(f"edge sign '{edge.sign}' contradicts weight {edge.weight}")

        object.__setattr__(self, "edges", tuple(sorted(self.edges, key=self._edge_key)))

    def _node_key(self, node):
        return self.columns.index(node.column), self.channels.index(node.channel)

    def _edge_key(self, edge):
        return self._node_key(edge.source) + self._node_key(edge.target)

    def edges_of_kind(self, kind):
        return [edge for edge in self.edges if edge.kind == kind]


def build_fence_graph(model, threshold=0.05, use_corrected=True):
    """
    Build the fence graph of a model

    Args:
        model: SvarModel
        threshold: Minimum |factor| drawn as an edge
        use_corrected: Granger edges from S^d (True) or from M^d (False)

    Returns:
        FenceGraph with C * (D + 2) nodes
    """
    if not threshold >= 0:
        raise InvalidParameterError(f"threshold must be >= 0, got {threshold}")

    channels = model.channels
    columns = fence_columns(model.order)

    def _keep(value):
        return value != 0 and abs(value) >= threshold

    edges = []
    s0 = model.s0.s0
    for i, target in enumerate(channels):
        for j, source in enumerate(channels):
            if i != j and _keep(s0[i, j]):
                edges.append(FenceEdge.from_factor(
                    FenceNode(STRUCTURAL_COLUMN, source), FenceNode(STRUCTURAL_COLUMN, target), s0[i, j], "structural"
                ))

    lags = model.lagged if use_corrected else model.uncorrected_lagged
    for d, matrix in enumerate(lags, start=1):
        for i, target in enumerate(channels):
            for j, source in enumerate(channels):
                if i != j and _keep(matrix[i, j]):
                    edges.append(FenceEdge.from_factor(
                        FenceNode(f"t-{d}", source), FenceNode(GRANGER_COLUMN, target), matrix[i, j], "granger"
                    ))

    logger.info(
        f"Fence graph: {len(columns) * len(channels)} nodes, {len(edges)} edges "
        f"(threshold {threshold}, {'corrected' if use_corrected else 'uncorrected'} Granger factors)"
    )
    return FenceGraph(columns=columns, channels=channels, edges=tuple(edges), threshold=threshold)


def _quote(text):
    return '"' + str(text).replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(graph, min_width=1.0, max_width=5.0):
    """
    Render a fence graph as a Graphviz digraph

    Structural edges are blue, Granger edges green, negative factors dashed.
    Pen width grows linearly with |weight|; the largest edge gets max_width.

    Args:
        graph: FenceGraph
        min_width: Pen width of a zero-weight edge
        max_width: Pen width of the largest edge

    Returns:
        DOT text
    """
    if not 0 < min_width <= max_width:
        raise InvalidParameterError(f"need 0 < min_width <= max_width, got {min_width}, {max_width}")

    def node_id(node):
        column, channel = graph._node_key(node)
        return f"c{column}_n{channel}"

    largest = max((abs(edge.weight) for edge in graph.edges), default=0.0)

    lines = [
        "digraph fence {",
        "    rankdir=LR;",
        "    newrank=true;",
        "    node [shape=circle];",
    ]
    for c, column in enumerate(graph.columns):
        lines.append(f"    subgraph cluster_{c} {{")
        lines.append(f"        label={_quote(column)};")
        lines.append("        rank=same;")
        lines.append("        color=white;")
        for n, channel in enumerate(graph.channels):
            lines.append(f"        c{c}_n{n} [label={_quote(channel)}];")
        lines.append("    }")

    # Column chain keeps the columns in left-to-right order
    for c in range(len(graph.columns) - 1):
        lines.append(f"    c{c}_n0 -> c{c + 1}_n0 [style=invis];")

    for edge in graph.edges:
        width = min_width + (max_width - min_width) * abs(edge.weight) / largest
        style = "solid" if edge.sign == "positive" else "dashed"
        color = EDGE_COLORS[edge.kind]
        lines.append(
            f"    {node_id(edge.source)} -> {node_id(edge.target)} "
            f"[color={color}, style={style}, penwidth={width:.3f}, label={_quote(format(edge.weight, '.3f'))}];"
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


def _node_dict(node):
    return {"column": node.column, "channel": node.channel}


def to_json(graph):
    """Serialize a fence graph; from_json reverses it exactly"""
    document = {
        "columns": list(graph.columns),
        "channels": list(graph.channels),
        "threshold": graph.threshold,
        "nodes": [_node_dict(node) for node in graph.nodes],
        "edges": [
            {
                "src": _node_dict(edge.source),
                "dst": _node_dict(edge.target),
                "weight": edge.weight,
                "kind": edge.kind,
                "sign": edge.sign,
            }
            for edge in graph.edges
        ],
    }
    return json.dumps(document, indent=2) + "\n"


def from_json(text):
    """Parse fence-graph JSON produced by to_json"""
    try:
        document = json.loads(text)
        edges = tuple(
            FenceEdge(
                source=FenceNode(**item["src"]),
                target=FenceNode(**item["dst"]),
                weight=float(item["weight"]),
                kind=item["kind"],
                sign=item["sign"],
            )
            for item in document["edges"]
        )
        graph = FenceGraph(
            columns=tuple(document["columns"]),
            channels=tuple(document["channels"]),
            edges=edges,
            threshold=float(document.get("threshold", 0.0)),
        )
    except json.JSONDecodeError as e:
        raise ParseError(f"Malformed fence-graph JSON: {e.msg}", row=e.lineno, column=e.colno) from None
    except (KeyError, TypeError) as e:
        raise ParseError(f"Fence-graph JSON is missing or mistypes a field: {e}") from None

    nodes = [FenceNode(**item) for item in document.get("nodes", [])]
    if nodes and nodes != list(graph.nodes):
        raise ParseError("Fence-graph JSON node list does not match its columns and channels")
    return graph
