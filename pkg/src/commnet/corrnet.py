"""Correlation matrices, correlation distance, and planar edge filtering.

The planarity-filtered graph keeps, for each window, the strongest pairwise
similarities whose edges can be drawn in the plane without crossings. The
result is always connected, planar, and carries exactly 3(N - 2) edges.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .errors import DataError
from .marketdata import WindowSlice

EDGE_HEADER = "i,j,weight_signed,weight_unsigned,distance"


@dataclass(frozen=True)
class CorrelationMatrix:
    """Symmetric Pearson correlation matrix with unit diagonal."""

    values: np.ndarray
    window_index: int = -1


@dataclass(frozen=True)
class DistanceMatrix:
    """Correlation distance sqrt(2 (1 - C)), entries in [0, 2]."""

    values: np.ndarray
    window_index: int = -1


@dataclass
class PmfgNetwork:
    """Planarity-filtered graph with signed, unsigned and distance views.

    ``edges`` holds (i, j, signed, unsigned, distance) tuples with i < j.
    """

    n: int
    nodes: list
    edges: list
    window_index: int = -1
    period: str = ""
    label: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def _fill(self, column: int) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        for edge in self.edges:
            i, j = edge[0], edge[1]
            out[i, j] = out[j, i] = edge[column]
        return out

    def signed_adjacency(self) -> np.ndarray:
        return self._fill(2)

    def unsigned_adjacency(self) -> np.ndarray:
        return self._fill(3)

    def distance_adjacency(self) -> np.ndarray:
        return self._fill(4)

    def binary_adjacency(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        for i, j, *_ in self.edges:
            out[i, j] = out[j, i] = 1.0
        return out

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for i, j, *_ in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def to_graph(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(range(self.n))
        for i, j, signed, unsigned, distance in self.edges:
            graph.add_edge(i, j, signed=signed, unsigned=unsigned, distance=distance)
        return graph


def pearson(window) -> CorrelationMatrix:
    """Pearson correlations between all stock pairs of a window.

    Accepts a WindowSlice or a plain stocks x samples array. Stocks with
    zero variance make the coefficient undefined; they are reported by
    ticker in the raised DataError so the caller can drop them.
    """
    if isinstance(window, WindowSlice):
        data = window.returns
        names = window.tickers or [str(i) for i in range(data.shape[0])]
        index = window.window_index
    else:
        data = np.asarray(window, dtype=float)
        names = [str(i) for i in range(data.shape[0])]
        index = -1
    if data.ndim != 2 or data.shape[1] < 2:
        raise DataError("need at least two samples per stock")
    spread = data.std(axis=1)
    if np.any(spread == 0):
        flat = [names[i] for i in np.flatnonzero(spread == 0)]
        raise DataError(f"zero-variance stocks: {', '.join(flat)}")
    corr = np.corrcoef(data)
    corr = np.clip((corr + corr.T) / 2.0, -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    return CorrelationMatrix(values=corr, window_index=index)


def to_distance(corr: CorrelationMatrix) -> DistanceMatrix:
    """Map correlations to distances d = sqrt(2 (1 - C)).

    The radicand is clamped at zero to absorb rounding on C slightly
    above 1.
    """
    values = np.sqrt(np.clip(2.0 * (1.0 - corr.values), 0.0, None))
    np.fill_diagonal(values, 0.0)
    return DistanceMatrix(values=values, window_index=corr.window_index)


def to_unsigned(corr: CorrelationMatrix) -> CorrelationMatrix:
    """Affine map (1 + C) / 2 onto [0, 1]; preserves the ordering of entries."""
    return CorrelationMatrix(values=(1.0 + corr.values) / 2.0, window_index=corr.window_index)


def is_planar(graph_or_adjacency):
    """Exact planarity test; returns (bool, embedding or None).

    The embedding witness is a combinatorial planar embedding when the
    graph is planar.
    """
    if isinstance(graph_or_adjacency, nx.Graph):
        graph = graph_or_adjacency
    else:
        adj = np.asarray(graph_or_adjacency)
        graph = nx.Graph()
        graph.add_nodes_from(range(adj.shape[0]))
        ii, jj = np.nonzero(np.triu(adj, 1))
        graph.add_edges_from(zip(ii.tolist(), jj.tolist()))
    ok, embedding = nx.check_planarity(graph, counterexample=False)
    return bool(ok), (embedding if ok else None)


def build_pmfg(corr: CorrelationMatrix, rank_by: str = "unsigned",
               nodes=None, label: str = "", period: str = "") -> PmfgNetwork:
    """Insert edges in descending similarity, keeping those that stay planar.

    Candidate edges are ranked by the unsigned similarity (1 + C) / 2 by
    default; any strictly increasing transform of C gives the same edge set,
    so ranking by C itself is equivalent. ``rank_by="signed"`` ranks raw
    correlations instead, which differs only when negative correlations are
    present and is not used by the reference pipeline. Equal similarities
    are broken by lexicographic (i, j) order so the construction is
    deterministic.

    Every graph with at most eight edges is planar, so the incremental
    planarity re-test starts once the ninth edge is in place.
    """
    if rank_by not in ("unsigned", "signed"):
        raise ValueError(f"rank_by must be 'unsigned' or 'signed', got {rank_by!r}")
    values = corr.values
    n = values.shape[0]
    if n < 3:
        raise ValueError("need at least three nodes")
    unsigned = (1.0 + values) / 2.0
    distance = np.sqrt(np.clip(2.0 * (1.0 - values), 0.0, None))

    iu, ju = np.triu_indices(n, 1)
    sims = unsigned[iu, ju] if rank_by == "unsigned" else values[iu, ju]
    order = np.lexsort((ju, iu, -sims))

    target = 3 * (n - 2)
    graph = nx.Graph()
    graph.add_nodes_from(range(n))
    edges = []
    for k in order:
        i, j = int(iu[k]), int(ju[k])
        graph.add_edge(i, j)
        if graph.number_of_edges() > 8:
            ok, _ = nx.check_planarity(graph, counterexample=False)
            if not ok:
                graph.remove_edge(i, j)
                continue
        edges.append((i, j, float(values[i, j]), float(unsigned[i, j]), float(distance[i, j])))
        if len(edges) == target:
            break

    return PmfgNetwork(
        n=n,
        nodes=list(nodes) if nodes is not None else list(range(n)),
        edges=edges,
        window_index=corr.window_index,
        period=period,
        label=label,
    )


def network_summary(net: PmfgNetwork) -> dict:
    """Average strength, distance-weighted diameter, and clustering.

    Strengths use the unsigned weights; the diameter is the largest
    all-pairs shortest path over the correlation-distance edge lengths.
    Raises DataError when the graph is disconnected (diameter undefined).
    """
    from .netmeasures import all_pairs_shortest_paths, average_clustering

    unsigned = net.unsigned_adjacency()
    strengths = unsigned.sum(axis=1)
    spl = all_pairs_shortest_paths(net.distance_adjacency(), adjacency=net.binary_adjacency())
    return {
        "avg_weighted_degree": float(strengths.mean()),
        "weighted_diameter": float(spl.max()),
        "clustering_coefficient": average_clustering(net.binary_adjacency()),
    }


def write_network(net: PmfgNetwork, path, extra: dict | None = None) -> None:
    """Edge list CSV plus JSON metadata sidecar."""
    path = str(path)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(EDGE_HEADER + "\n")
        for i, j, signed, unsigned, distance in net.edges:
            fh.write(f"{i},{j},{signed!r},{unsigned!r},{distance!r}\n")
    sidecar = {
        "n": net.n,
        "nodes": [str(x) for x in net.nodes],
        "window_index": net.window_index,
        "period": net.period,
        "label": net.label,
        "edge_count": net.edge_count,
    }
    if extra:
        sidecar.update(extra)
    with open(path + ".json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_network(path) -> PmfgNetwork:
    """Read a network written by :func:`write_network`."""
    path = str(path)
    edges = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != EDGE_HEADER:
            raise DataError(f"unexpected edge list header in {path}: {header!r}")
        for line in fh:
            i, j, signed, unsigned, distance = line.rstrip("\n").split(",")
            edges.append((int(i), int(j), float(signed), float(unsigned), float(distance)))
    with open(path + ".json", encoding="utf-8") as fh:
        sidecar = json.load(fh)
    return PmfgNetwork(
        n=int(sidecar["n"]),
        nodes=list(sidecar["nodes"]),
        edges=edges,
        window_index=int(sidecar.get("window_index", -1)),
        period=sidecar.get("period", ""),
        label=sidecar.get("label", ""),
    )
