"""Topology measures: shortest paths, edge betweenness, clustering, and the
communicability family.

Communicability between two nodes sums walks of every length k with weight
1/k!, which is the (i, j) entry of the matrix exponential of the adjacency.
The derived communicability distance zeta_ij = sqrt(g_ii + g_jj - 2 g_ij)
is a Euclidean metric, and routing shortest paths over zeta restricted to
the graph's edges gives the shortest communicability path length.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import networkx as nx
import numpy as np
from scipy.sparse.csgraph import csgraph_from_dense, dijkstra

from .errors import DataError, NumericError

SPL = "SPL"
EBC = "EBC"
COMM = "COMM"
COMM_DIST = "COMM_DIST"
SHORT_COMM_PATH = "SHORT_COMM_PATH"
HSPL = "HSPL"
HEBC = "HEBC"
HCOMM = "HCOMM"

TOPOLOGY_KINDS = (SPL, EBC, COMM, COMM_DIST, SHORT_COMM_PATH)
GEOMETRY_KINDS = (HSPL, HEBC, HCOMM)
ALL_KINDS = TOPOLOGY_KINDS + GEOMETRY_KINDS

UNWEIGHTED = "unweighted"
WEIGHTED = "weighted"

# Radicand in the communicability distance may go slightly negative through
# rounding; anything below this is treated as a genuinely non-PSD input.
_ZETA_CLAMP = -1e-12


@dataclass(frozen=True)
class MeasureMatrix:
    """Symmetric per-window matrix for one measure kind."""

    kind: str
    values: np.ndarray
    window_index: int = -1
    weighting: str = WEIGHTED


@dataclass(frozen=True)
class CommunicabilityMatrix:
    """Matrix exponential of a (possibly strength-normalized) adjacency."""

    values: np.ndarray
    normalization: str = "none"
    window_index: int = -1


def _require_symmetric(matrix: np.ndarray, what: str) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise NumericError(f"{what} must be a square matrix")
    scale = max(1.0, float(np.abs(matrix).max()) if matrix.size else 1.0)
    if float(np.abs(matrix - matrix.T).max()) > 1e-10 * scale:
        raise NumericError(f"{what} must be symmetric")
    return matrix


def matrix_exponential_symmetric(matrix: np.ndarray) -> np.ndarray:
    """exp(M) for symmetric M through the eigendecomposition M = Q L Q^T.

    exp(M) = Q exp(L) Q^T; the result is re-symmetrized to remove rounding
    asymmetry. Raises NumericError on non-symmetric input.
    """
    matrix = _require_symmetric(matrix, "matrix exponential input")
    eigenvalues, eigenvectors = np.linalg.eigh(matrix)
    result = (eigenvectors * np.exp(eigenvalues)) @ eigenvectors.T
    return (result + result.T) / 2.0


def communicability(adjacency: np.ndarray, window_index: int = -1) -> CommunicabilityMatrix:
    """Walk-weighted connectivity exp(A) of a simple undirected graph.

    Entry (i, j) sums walks of every length between i and j with weight
    1/k!, so short routes dominate but all alternatives contribute.
    """
    adjacency = _require_symmetric(adjacency, "adjacency")
    return CommunicabilityMatrix(
        values=matrix_exponential_symmetric(adjacency),
        normalization="none",
        window_index=window_index,
    )


def weighted_communicability(weights: np.ndarray, window_index: int = -1) -> CommunicabilityMatrix:
    """Strength-normalized communicability exp(S^{-1/2} W S^{-1/2}).

    S = diag(s_i) with s_i the node strengths, so heavily weighted nodes do
    not dominate the measure. Raises DataError on an isolated node (zero
    strength).
    """
    weights = _require_symmetric(weights, "weight matrix")
    strengths = weights.sum(axis=1)
    if np.any(strengths <= 0):
        bad = np.flatnonzero(strengths <= 0).tolist()
        raise DataError(f"nodes with zero strength: {bad}")
    inv_root = 1.0 / np.sqrt(strengths)
    normalized = weights * np.outer(inv_root, inv_root)
    return CommunicabilityMatrix(
        values=matrix_exponential_symmetric(normalized),
        normalization="strength",
        window_index=window_index,
    )


def communicability_distance(comm, weighting: str = WEIGHTED) -> MeasureMatrix:
    """zeta_ij = sqrt(g_ii + g_jj - 2 g_ij), a Euclidean metric on nodes.

    Tiny negative radicands from rounding are clamped to zero; anything
    materially negative means the input was not positive semidefinite and
    raises NumericError.
    """
    if isinstance(comm, CommunicabilityMatrix):
        g = comm.values
        window_index = comm.window_index
    else:
        g = _require_symmetric(comm, "communicability matrix")
        window_index = -1
    diag = np.diag(g)
    radicand = diag[:, None] + diag[None, :] - 2.0 * g
    if float(radicand.min()) < _ZETA_CLAMP:
        raise NumericError(
            f"communicability distance radicand {radicand.min():.3e} below clamp; input not PSD"
        )
    values = np.sqrt(np.clip(radicand, 0.0, None))
    np.fill_diagonal(values, 0.0)
    return MeasureMatrix(kind=COMM_DIST, values=values, window_index=window_index,
                         weighting=weighting)


def comm_weighted_adjacency(zeta, adjacency: np.ndarray) -> np.ndarray:
    """Mask the communicability distance onto the edge set: X = zeta * A."""
    zeta_values = zeta.values if isinstance(zeta, MeasureMatrix) else np.asarray(zeta, float)
    adjacency = np.asarray(adjacency, dtype=float)
    if zeta_values.shape != adjacency.shape:
        raise ValueError(
            f"shape mismatch: zeta {zeta_values.shape} vs adjacency {adjacency.shape}"
        )
    return zeta_values * (adjacency != 0)


def all_pairs_shortest_paths(lengths: np.ndarray, adjacency: np.ndarray | None = None) -> np.ndarray:
    """Exact all-pairs shortest path lengths over nonnegative edge lengths.

    ``lengths`` holds per-edge lengths with 0 meaning "no edge" unless an
    explicit ``adjacency`` says otherwise (which allows genuine zero-length
    edges). Raises DataError when some pair is unreachable.
    """
    lengths = np.asarray(lengths, dtype=float)
    if np.any(lengths < 0):
        raise ValueError("edge lengths must be nonnegative")
    mask = (lengths != 0) if adjacency is None else (np.asarray(adjacency) != 0)
    dense = np.where(mask, lengths, np.inf)
    graph = csgraph_from_dense(dense, null_value=np.inf)
    dist = dijkstra(graph, directed=False)
    unreachable = ~np.isfinite(dist)
    np.fill_diagonal(unreachable, False)
    if unreachable.any():
        i, j = np.argwhere(unreachable)[0]
        raise DataError(
            f"graph is disconnected: {int(unreachable.sum()) // 2} unreachable pairs, "
            f"e.g. ({int(i)}, {int(j)})"
        )
    np.fill_diagonal(dist, 0.0)
    return dist


def shortest_path_lengths(lengths: np.ndarray, adjacency: np.ndarray | None = None,
                          window_index: int = -1, weighting: str = WEIGHTED,
                          kind: str = SPL) -> MeasureMatrix:
    """All-pairs shortest path matrix; pass binary lengths for hop counts."""
    values = all_pairs_shortest_paths(lengths, adjacency=adjacency)
    return MeasureMatrix(kind=kind, values=values, window_index=window_index,
                         weighting=weighting)


def shortest_communicability_path_lengths(masked_zeta: np.ndarray,
                                          adjacency: np.ndarray | None = None,
                                          window_index: int = -1,
                                          weighting: str = WEIGHTED) -> MeasureMatrix:
    """Shortest paths over edge lengths zeta_ij restricted to graph edges.

    Because zeta is a metric, every entry dominates the direct distance:
    result_ij >= zeta_ij.
    """
    return shortest_path_lengths(masked_zeta, adjacency=adjacency,
                                 window_index=window_index, weighting=weighting,
                                 kind=SHORT_COMM_PATH)


def edge_betweenness(adjacency: np.ndarray, lengths: np.ndarray | None = None,
                     window_index: int = -1, kind: str = EBC) -> MeasureMatrix:
    """Fraction of shortest paths crossing each edge, summed over pairs.

    Each unordered pair {i, j} contributes once, splitting its weight over
    the equally short routes. When ``lengths`` is given, shortest paths are
    measured by summed edge lengths; otherwise by hop count. Values are
    returned in matrix form with zeros off the edge set.
    """
    adjacency = np.asarray(adjacency)
    n = adjacency.shape[0]
    graph = nx.Graph()
    graph.add_nodes_from(range(n))
    ii, jj = np.nonzero(np.triu(adjacency, 1))
    weighting = UNWEIGHTED
    if lengths is None:
        graph.add_edges_from(zip(ii.tolist(), jj.tolist()))
        centrality = nx.edge_betweenness_centrality(graph, normalized=False)
    else:
        lengths = np.asarray(lengths, dtype=float)
        for i, j in zip(ii.tolist(), jj.tolist()):
            graph.add_edge(i, j, length=float(lengths[i, j]))
        centrality = nx.edge_betweenness_centrality(graph, normalized=False, weight="length")
        weighting = WEIGHTED
    if not nx.is_connected(graph):
        raise DataError("edge betweenness requires a connected graph")
    values = np.zeros((n, n))
    for (i, j), score in centrality.items():
        values[i, j] = values[j, i] = score
    return MeasureMatrix(kind=kind, values=values, window_index=window_index,
                         weighting=weighting)


def average_clustering(matrix: np.ndarray, weighted: bool = False) -> float:
    """Closed-triplet ratio: sum_ijm a_ij a_jm a_mi / sum_i k_i (k_i - 1).

    The weighted variant substitutes edge weights in the numerator while the
    denominator keeps binary degrees. Graphs with no connected triplet
    return 0 by convention.
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.shape[0] < 3:
        raise ValueError("need at least three nodes")
    binary = (matrix != 0).astype(float)
    np.fill_diagonal(binary, 0.0)
    degrees = binary.sum(axis=1)
    denominator = float(np.sum(degrees * (degrees - 1)))
    if denominator == 0:
        return 0.0
    base = matrix * (binary if weighted else 1.0) if weighted else binary
    numerator = float(np.trace(base @ base @ base))
    return numerator / denominator


def write_measure(measure: MeasureMatrix, path, extra: dict | None = None) -> None:
    """Dense CSV of the matrix plus a JSON sidecar with kind and window."""
    path = str(path)
    with open(path, "w", encoding="utf-8") as fh:
        for row in measure.values:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    sidecar = {
        "kind": measure.kind,
        "window_index": measure.window_index,
        "weighting": measure.weighting,
        "n": int(measure.values.shape[0]),
    }
    if extra:
        sidecar.update(extra)
    with open(path + ".json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_measure(path) -> MeasureMatrix:
    """Read a measure written by :func:`write_measure`."""
    path = str(path)
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            rows.append([float(v) for v in line.rstrip("\n").split(",")])
    with open(path + ".json", encoding="utf-8") as fh:
        sidecar = json.load(fh)
    return MeasureMatrix(
        kind=sidecar["kind"],
        values=np.array(rows),
        window_index=int(sidecar.get("window_index", -1)),
        weighting=sidecar.get("weighting", WEIGHTED),
    )
