"""Independent brute-force oracles used to freeze expected test values.

Everything here deliberately avoids the implementation paths it checks:
the matrix exponential oracle is a scaled Taylor series, shortest paths come
from Floyd-Warshall, planarity from forbidden-minor search, betweenness and
clustering from exhaustive enumeration.
"""

from __future__ import annotations

import math
from functools import lru_cache
from itertools import combinations

import numpy as np


def taylor_expm(matrix: np.ndarray, terms: int = 60) -> np.ndarray:
    """Scaling-and-squaring matrix exponential with a fixed-length Taylor tail."""
    matrix = np.asarray(matrix, dtype=float)
    norm = float(np.abs(matrix).sum(axis=1).max()) if matrix.size else 0.0
    squarings = max(0, int(math.ceil(math.log2(norm))) + 1) if norm > 1 else 0
    scaled = matrix / (2.0 ** squarings)
    result = np.eye(matrix.shape[0])
    term = np.eye(matrix.shape[0])
    for k in range(1, terms):
        term = term @ scaled / k
        result = result + term
    for _ in range(squarings):
        result = result @ result
    return result


def series_communicability(adjacency: np.ndarray, terms: int = 40) -> np.ndarray:
    """Plain truncated walk series sum_k A^k / k! (no scaling)."""
    adjacency = np.asarray(adjacency, dtype=float)
    result = np.eye(adjacency.shape[0])
    term = np.eye(adjacency.shape[0])
    for k in range(1, terms):
        term = term @ adjacency / k
        result = result + term
    return result


def floyd_warshall(lengths: np.ndarray, adjacency: np.ndarray | None = None) -> np.ndarray:
    """Reference all-pairs shortest paths by relaxation over every midpoint."""
    lengths = np.asarray(lengths, dtype=float)
    mask = (lengths != 0) if adjacency is None else (np.asarray(adjacency) != 0)
    dist = np.where(mask, lengths, np.inf)
    np.fill_diagonal(dist, 0.0)
    n = dist.shape[0]
    for mid in range(n):
        dist = np.minimum(dist, dist[:, mid:mid + 1] + dist[mid:mid + 1, :])
    return dist


def two_pass_correlation(x, y) -> float:
    """Direct-summation Pearson coefficient (two explicit passes)."""
    x = [float(v) for v in x]
    y = [float(v) for v in y]
    n = len(x)
    mean_x = sum(x) / n
    mean_y = sum(y) / n
    cov = sum((a - mean_x) * (b - mean_y) for a, b in zip(x, y))
    var_x = sum((a - mean_x) ** 2 for a in x)
    var_y = sum((b - mean_y) ** 2 for b in y)
    return cov / math.sqrt(var_x * var_y)


# --- planarity by forbidden-minor search -----------------------------------

def _edge(a, b):
    return (a, b) if a < b else (b, a)


def _contains_k5(edges, vertices):
    edge_set = set(edges)
    for combo in combinations(sorted(vertices), 5):
        if all(_edge(a, b) in edge_set for a, b in combinations(combo, 2)):
            return True
    return False


def _contains_k33(edges, vertices):
    edge_set = set(edges)
    for combo in combinations(sorted(vertices), 6):
        for left in combinations(combo, 3):
            right = [v for v in combo if v not in left]
            if all(_edge(a, b) in edge_set for a in left for b in right):
                return True
    return False


def _contract(edges, keep, drop):
    out = set()
    for a, b in edges:
        a2 = keep if a == drop else a
        b2 = keep if b == drop else b
        if a2 != b2:
            out.add(_edge(a2, b2))
    return frozenset(out)


@lru_cache(maxsize=None)
def _has_minor(edges, target):
    vertices = sorted({v for e in edges for v in e})
    min_v, min_e = (5, 10) if target == "k5" else (6, 9)
    if len(vertices) < min_v or len(edges) < min_e:
        return False
    check = _contains_k5 if target == "k5" else _contains_k33
    if check(edges, vertices):
        return True
    for a, b in sorted(edges):
        if _has_minor(_contract(edges, a, b), target):
            return True
    return False


def is_planar_bruteforce(adjacency: np.ndarray) -> bool:
    """Planar iff the graph has neither a K5 nor a K3,3 minor.

    Exponential minor search; only sensible for small graphs (N <= 8 or so).
    An Euler-bound shortcut skips the search when too few edges exist for
    either forbidden minor.
    """
    adjacency = np.asarray(adjacency)
    ii, jj = np.nonzero(np.triu(adjacency, 1))
    edges = frozenset(_edge(int(a), int(b)) for a, b in zip(ii, jj))
    if len(edges) < 9:  # both forbidden minors need at least 9 edges
        return True
    return not (_has_minor(edges, "k5") or _has_minor(edges, "k33"))


# --- path enumeration ---------------------------------------------------------

def enumerate_shortest_paths(adjacency: np.ndarray, lengths: np.ndarray | None = None):
    """All shortest paths per unordered pair by exhaustive simple-path search.

    Returns (betweenness matrix, total average edge count), where the second
    value is sum over pairs of the mean number of edges on that pair's
    shortest paths.
    """
    adjacency = np.asarray(adjacency)
    n = adjacency.shape[0]
    neighbours = [np.flatnonzero(adjacency[v]).tolist() for v in range(n)]

    def simple_paths(source, target):
        stack = [(source, [source])]
        while stack:
            node, path = stack.pop()
            if node == target:
                yield path
                continue
            for nxt in neighbours[node]:
                if nxt not in path:
                    stack.append((nxt, path + [nxt]))

    def path_cost(path):
        if lengths is None:
            return float(len(path) - 1)
        return float(sum(lengths[a, b] for a, b in zip(path, path[1:])))

    betweenness = np.zeros((n, n))
    total_avg_edges = 0.0
    for s in range(n):
        for t in range(s + 1, n):
            paths = list(simple_paths(s, t))
            if not paths:
                continue
            costs = [path_cost(p) for p in paths]
            best = min(costs)
            shortest = [p for p, c in zip(paths, costs) if c <= best * (1 + 1e-12) + 1e-12]
            share = 1.0 / len(shortest)
            total_avg_edges += sum(len(p) - 1 for p in shortest) * share
            for path in shortest:
                for a, b in zip(path, path[1:]):
                    betweenness[a, b] += share
                    betweenness[b, a] += share
    return betweenness, total_avg_edges


def clustering_bruteforce(adjacency: np.ndarray, weights: np.ndarray | None = None) -> float:
    """Closed-triplet ratio by explicit triple enumeration."""
    adjacency = (np.asarray(adjacency) != 0).astype(float)
    n = adjacency.shape[0]
    numerator = 0.0
    for i in range(n):
        for j in range(n):
            for m in range(n):
                if adjacency[i, j] and adjacency[j, m] and adjacency[m, i]:
                    if weights is None:
                        numerator += 1.0
                    else:
                        numerator += weights[i, j] * weights[j, m] * weights[m, i]
    degrees = adjacency.sum(axis=1)
    denominator = float(np.sum(degrees * (degrees - 1)))
    return 0.0 if denominator == 0 else numerator / denominator


# --- sampling helpers ---------------------------------------------------------

def discrete_power_law_degrees(gamma: float, k_min: int, size: int, seed: int) -> np.ndarray:
    """Integer degree sample whose tail follows k^-gamma."""
    rng = np.random.default_rng(seed)
    u = rng.random(size)
    return np.floor((k_min - 0.5) * (1.0 - u) ** (-1.0 / (gamma - 1.0)) + 0.5).astype(int)


def random_connected_adjacency(n: int, rng, extra_edges: int = 0) -> np.ndarray:
    """Random spanning tree plus a few extra edges; always connected."""
    adjacency = np.zeros((n, n))
    order = rng.permutation(n)
    for k in range(1, n):
        a, b = order[k], order[int(rng.integers(0, k))]
        adjacency[a, b] = adjacency[b, a] = 1.0
    candidates = [(i, j) for i in range(n) for j in range(i + 1, n) if not adjacency[i, j]]
    if candidates and extra_edges:
        picks = rng.choice(len(candidates), size=min(extra_edges, len(candidates)),
                           replace=False)
        for k in np.atleast_1d(picks):
            i, j = candidates[int(k)]
            adjacency[i, j] = adjacency[j, i] = 1.0
    return adjacency
