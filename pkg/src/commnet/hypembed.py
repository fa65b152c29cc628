"""Embedding of filtered correlation graphs into the hyperbolic disc.

The pipeline is: geodesic distances along the graph's correlation-distance
edges, classical MDS down to the plane, angular coordinates from the planar
positions (raw angles or rank-equalized), and radial coordinates from the
degree ranking with the power-law exponent setting how strongly hubs are
pulled toward the disc centre. Edge weights 1 / (1 + x) over the hyperbolic
distance x then feed the geometric variants of the topology measures.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .corrnet import PmfgNetwork
from .errors import DataError
from .netmeasures import (
    HCOMM,
    HEBC,
    HSPL,
    MeasureMatrix,
    WEIGHTED,
    all_pairs_shortest_paths,
    edge_betweenness,
    shortest_path_lengths,
    weighted_communicability,
)

CIRCULAR = "CA"
EQUIDISTANT = "EA"

_ORIGIN_EPS = 1e-12


@dataclass
class EuclideanEmbedding:
    """Planar coordinates from classical MDS plus the top two eigenvalues."""

    coords: np.ndarray
    eigenvalues: np.ndarray
    degenerate: bool = False


@dataclass
class PolarEmbedding:
    """Per-node polar coordinates in the hyperbolic disc.

    ``r`` follows the degree ranking (rank 1 = highest degree, smallest
    radius); ``theta`` comes from the planar embedding. ``beta`` is
    1 / (gamma - 1) clamped into (0, 1].
    """

    r: np.ndarray
    theta: np.ndarray
    beta: float
    gamma: float
    adjustment: str = CIRCULAR
    degrees: np.ndarray | None = None
    ranks: np.ndarray | None = None
    eigenvalues: np.ndarray | None = None
    window_index: int = -1
    meta: dict = field(default_factory=dict)


@dataclass
class HyperbolicNetwork:
    """Source topology re-weighted by w = 1 / (1 + hyperbolic distance)."""

    n: int
    nodes: list
    edges: list  # (i, j, weight, distance) tuples, i < j
    window_index: int = -1
    period: str = ""
    label: str = ""

    def weight_matrix(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        for i, j, w, _ in self.edges:
            out[i, j] = out[j, i] = w
        return out

    def distance_matrix(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        for i, j, _, x in self.edges:
            out[i, j] = out[j, i] = x
        return out

    def binary_adjacency(self) -> np.ndarray:
        out = np.zeros((self.n, self.n))
        for i, j, *_ in self.edges:
            out[i, j] = out[j, i] = 1.0
        return out


def geodesic_distance_matrix(net: PmfgNetwork) -> np.ndarray:
    """Shortest-path distances over the graph's correlation-distance edges.

    The filtered graph is already sparse and connected, so its own edges
    serve as the neighbourhood graph for the geodesics.
    """
    return all_pairs_shortest_paths(net.distance_adjacency(), adjacency=net.binary_adjacency())


def isomap_2d(geodesics: np.ndarray) -> EuclideanEmbedding:
    """Classical MDS of a geodesic distance matrix down to two dimensions.

    Double-centre B = -1/2 J D^2 J with J = I - (1/N) 11^T, take the top two
    eigenpairs, and scale the eigenvectors by sqrt(eigenvalue). Eigenvector
    sign is fixed so the entry of largest magnitude is positive. When the
    second eigenvalue is not positive the geometry is degenerate; the points
    are embedded on a line and the embedding is flagged.
    """
    distances = np.asarray(geodesics, dtype=float)
    n = distances.shape[0]
    if distances.shape[1] != n:
        raise ValueError("distance matrix must be square")
    if np.abs(np.diag(distances)).max() > 1e-12 or distances.min() < 0:
        raise ValueError("distance matrix must be nonnegative with zero diagonal")
    if np.abs(distances - distances.T).max() > 1e-10:
        raise ValueError("distance matrix must be symmetric")

    centering = np.eye(n) - np.full((n, n), 1.0 / n)
    gram = -0.5 * centering @ (distances ** 2) @ centering
    gram = (gram + gram.T) / 2.0
    eigenvalues, eigenvectors = np.linalg.eigh(gram)
    top = np.argsort(eigenvalues)[::-1][:2]
    lam = eigenvalues[top]
    vecs = eigenvectors[:, top]
    for k in range(2):
        pivot = int(np.argmax(np.abs(vecs[:, k])))
        if vecs[pivot, k] < 0:
            vecs[:, k] = -vecs[:, k]
    degenerate = bool(lam[1] <= 1e-12 * max(lam[0], 1e-300))
    coords = vecs * np.sqrt(np.clip(lam, 0.0, None))
    if degenerate:
        warnings.warn("degenerate geometry: second MDS eigenvalue is not positive; "
                      "embedding on a line")
        coords[:, 1] = 0.0
    return EuclideanEmbedding(coords=coords, eigenvalues=lam, degenerate=degenerate)


def angular_ca(embedding: EuclideanEmbedding) -> np.ndarray:
    """Raw planar angles atan2(y, x) mapped into [0, 2 pi).

    A node exactly at the origin has no angle; its x coordinate is perturbed
    by 1e-12 and a warning is emitted.
    """
    coords = embedding.coords.copy()
    at_origin = np.flatnonzero((coords[:, 0] == 0) & (coords[:, 1] == 0))
    if at_origin.size:
        warnings.warn(f"{at_origin.size} node(s) at the origin; perturbing x by {_ORIGIN_EPS}")
        coords[at_origin, 0] = _ORIGIN_EPS
    return np.mod(np.arctan2(coords[:, 1], coords[:, 0]), 2.0 * np.pi)


def angular_ea(ca_angles: np.ndarray) -> np.ndarray:
    """Equidistant angles 2 pi (t - 1) / N from the ascending rank t of each
    raw angle; ties break by node index, and the circular ordering of the
    nodes is preserved."""
    ca_angles = np.asarray(ca_angles, dtype=float)
    n = ca_angles.shape[0]
    order = np.argsort(ca_angles, kind="stable")
    ranks = np.empty(n, dtype=int)
    ranks[order] = np.arange(1, n + 1)
    return 2.0 * np.pi * (ranks - 1) / n


def fit_power_law_gamma(degrees, k_min: int | None = None) -> float:
    """Continuous maximum-likelihood exponent of a degree sequence.

    gamma = 1 + m / sum(log(k_i / (k_min - 1/2))) over the m degrees at or
    above k_min (default: the minimum degree). The estimate is clamped at 2
    so beta = 1 / (gamma - 1) stays in (0, 1]. All-equal degrees leave the
    exponent unidentified and raise DataError; callers fall back to a
    configured default.
    """
    degrees = np.asarray(degrees, dtype=float)
    if degrees.size < 10:
        raise ValueError("need at least 10 nodes to fit the exponent")
    if degrees.min() < 1:
        raise ValueError("degrees must be at least 1")
    if np.all(degrees == degrees[0]):
        raise DataError("all degrees equal; power-law exponent undefined")
    if k_min is None:
        k_min = int(degrees.min())
    tail = degrees[degrees >= k_min]
    gamma = 1.0 + tail.size / float(np.sum(np.log(tail / (k_min - 0.5))))
    return max(gamma, 2.0)


def radial_coords(degrees, gamma: float, zeta_curv: float = 1.0):
    """Radii r = (2 / zeta_curv) (beta ln(rank) + (1 - beta) ln(N)).

    Nodes are ranked by descending degree (ties by node index, rank 1
    first), so hubs sit nearest the disc centre; rank N lands at radius
    (2 / zeta_curv) ln(N) regardless of beta. Returns (radii, ranks) in the
    original node order.
    """
    if gamma <= 1.0:
        raise ValueError("gamma must exceed 1")
    degrees = np.asarray(degrees, dtype=float)
    n = degrees.size
    beta = min(1.0 / (gamma - 1.0), 1.0)
    order = np.lexsort((np.arange(n), -degrees))
    ranks = np.empty(n, dtype=int)
    ranks[order] = np.arange(1, n + 1)
    radii = (2.0 / zeta_curv) * (beta * np.log(ranks) + (1.0 - beta) * np.log(n))
    return radii, ranks


def angular_gap(theta_i, theta_j):
    """Circular angle gap pi - |pi - |t_i - t_j||, wrapped onto [0, pi]."""
    return np.pi - np.abs(np.pi - np.abs(theta_i - theta_j))


def hyperbolic_distance(r_i: float, theta_i: float, r_j: float, theta_j: float,
                        zeta_curv: float = 1.0) -> float:
    """Distance between two polar points on the constant-curvature disc.

    Evaluated through u = 2 sinh^2(zeta dr / 2) + 2 sinh(zeta r_i)
    sinh(zeta r_j) sin^2(dtheta / 2) and x = log1p(u + sqrt(u (u + 2))) /
    zeta, which is algebraically arccosh of the usual expression but avoids
    the catastrophic cancellation of the textbook form when the points are
    close. A zero angle gap reduces exactly to |r_i - r_j|.
    """
    return float(hyperbolic_distance_matrix(
        np.array([r_i, r_j]), np.array([theta_i, theta_j]), zeta_curv)[0, 1])


def hyperbolic_distance_matrix(radii: np.ndarray, angles: np.ndarray,
                               zeta_curv: float = 1.0) -> np.ndarray:
    """All-pairs hyperbolic distances for polar coordinates."""
    radii = np.asarray(radii, dtype=float) * zeta_curv
    angles = np.asarray(angles, dtype=float)
    if np.any(radii < 0):
        raise ValueError("radii must be nonnegative")
    gap = angular_gap(angles[:, None], angles[None, :])
    dr = radii[:, None] - radii[None, :]
    u = (2.0 * np.sinh(dr / 2.0) ** 2
         + 2.0 * np.outer(np.sinh(radii), np.sinh(radii)) * np.sin(gap / 2.0) ** 2)
    u = np.clip(u, 0.0, None)  # equivalent to clamping the arccosh argument at 1
    dist = np.log1p(u + np.sqrt(u * (u + 2.0))) / zeta_curv
    np.fill_diagonal(dist, 0.0)
    return dist


def embed_pmfg(net: PmfgNetwork, adjustment: str = CIRCULAR,
               gamma: float | None = None, gamma_fallback: float = 3.0,
               zeta_curv: float = 1.0) -> PolarEmbedding:
    """Full embedding of one filtered graph into the hyperbolic disc."""
    if adjustment not in (CIRCULAR, EQUIDISTANT):
        raise ValueError(f"adjustment must be {CIRCULAR!r} or {EQUIDISTANT!r}")
    geodesics = geodesic_distance_matrix(net)
    euclidean = isomap_2d(geodesics)
    theta = angular_ca(euclidean)
    if adjustment == EQUIDISTANT:
        theta = angular_ea(theta)
    degrees = net.degrees()
    fitted = gamma
    if fitted is None:
        try:
            fitted = fit_power_law_gamma(degrees)
        except (DataError, ValueError):
            fitted = gamma_fallback
    radii, ranks = radial_coords(degrees, fitted, zeta_curv)
    return PolarEmbedding(
        r=radii,
        theta=theta,
        beta=min(1.0 / (fitted - 1.0), 1.0),
        gamma=float(fitted),
        adjustment=adjustment,
        degrees=degrees,
        ranks=ranks,
        eigenvalues=euclidean.eigenvalues,
        window_index=net.window_index,
        meta={"degenerate": euclidean.degenerate, "zeta_curv": zeta_curv},
    )


def hyperbolic_reweight(net: PmfgNetwork, embedding: PolarEmbedding,
                        zeta_curv: float = 1.0) -> HyperbolicNetwork:
    """Keep the edge set, set each weight to 1 / (1 + hyperbolic distance)."""
    if embedding.r.shape[0] != net.n:
        raise ValueError("embedding does not cover all nodes")
    dist = hyperbolic_distance_matrix(embedding.r, embedding.theta, zeta_curv)
    edges = [
        (i, j, 1.0 / (1.0 + dist[i, j]), float(dist[i, j]))
        for i, j, *_ in net.edges
    ]
    return HyperbolicNetwork(
        n=net.n,
        nodes=list(net.nodes),
        edges=edges,
        window_index=net.window_index,
        period=net.period,
        label=net.label,
    )


def hyperbolic_measures(hnet: HyperbolicNetwork) -> dict:
    """Geometric measure set on the re-weighted topology.

    Shortest-path style measures use the hyperbolic distance x = 1/w - 1 as
    edge length (distance semantics); the communicability variant applies
    strength normalization to the similarity weights w.
    """
    adjacency = hnet.binary_adjacency()
    lengths = hnet.distance_matrix()
    weights = hnet.weight_matrix()
    spl = shortest_path_lengths(lengths, adjacency=adjacency,
                                window_index=hnet.window_index, kind=HSPL)
    ebc = edge_betweenness(adjacency, lengths=lengths,
                           window_index=hnet.window_index, kind=HEBC)
    comm = weighted_communicability(weights, window_index=hnet.window_index)
    return {
        HSPL: spl,
        HEBC: ebc,
        HCOMM: MeasureMatrix(kind=HCOMM, values=comm.values,
                             window_index=hnet.window_index, weighting=WEIGHTED),
    }


def write_embedding(embedding: PolarEmbedding, path, nodes=None, extra: dict | None = None) -> None:
    """Per-node polar CSV plus JSON sidecar with the fit parameters."""
    path = str(path)
    n = embedding.r.shape[0]
    nodes = list(nodes) if nodes is not None else list(range(n))
    degrees = embedding.degrees if embedding.degrees is not None else np.zeros(n, dtype=int)
    ranks = embedding.ranks if embedding.ranks is not None else np.zeros(n, dtype=int)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("node,r,theta,degree,rank\n")
        for k in range(n):
            fh.write(f"{nodes[k]},{float(embedding.r[k])!r},{float(embedding.theta[k])!r},"
                     f"{int(degrees[k])},{int(ranks[k])}\n")
    sidecar = {
        "gamma": embedding.gamma,
        "beta": embedding.beta,
        "adjustment": embedding.adjustment,
        "eigenvalues": [float(v) for v in (embedding.eigenvalues
                                           if embedding.eigenvalues is not None else [])],
        "window_index": embedding.window_index,
        "meta": embedding.meta,
    }
    if extra:
        sidecar.update(extra)
    with open(path + ".json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_embedding(path) -> PolarEmbedding:
    """Read an embedding written by :func:`write_embedding`."""
    path = str(path)
    r, theta, degrees, ranks = [], [], [], []
    with open(path, encoding="utf-8") as fh:
        fh.readline()
        for line in fh:
            _, rv, tv, dv, kv = line.rstrip("\n").split(",")
            r.append(float(rv))
            theta.append(float(tv))
            degrees.append(int(dv))
            ranks.append(int(kv))
    with open(path + ".json", encoding="utf-8") as fh:
        sidecar = json.load(fh)
    return PolarEmbedding(
        r=np.array(r),
        theta=np.array(theta),
        beta=float(sidecar["beta"]),
        gamma=float(sidecar["gamma"]),
        adjustment=sidecar.get("adjustment", CIRCULAR),
        degrees=np.array(degrees, dtype=int),
        ranks=np.array(ranks, dtype=int),
        eigenvalues=np.array(sidecar.get("eigenvalues", [])),
        window_index=int(sidecar.get("window_index", -1)),
        meta=sidecar.get("meta", {}),
    )
