"""Permutation tests on per-pair path lengths and the rank-sum shift test.

For every node pair the statistic is the difference between the mean value
over stable-period windows and the mean over volatile-period windows. The
null distribution comes from re-splitting the pooled windows into groups of
the original sizes; the two-sided p-value is (1 + #{|null| >= |observed|})
/ (resamples + 1), which never reaches zero.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import DataError
from .netmeasures import MeasureMatrix

DECREASE = "decrease_in_volatile"
INCREASE = "increase_in_volatile"

# Exact rank-sum enumeration is capped to keep small-side enumeration from
# exploding when the other sample is huge.
_EXACT_LIMIT = 500_000


@dataclass(frozen=True)
class PairDifferenceResult:
    pair: tuple
    delta: float
    p_value: float
    significant: bool
    direction: str


@dataclass
class SignificanceSummary:
    kind: str
    total_pairs: int
    significant_fraction: float
    n_decrease: int
    n_increase: int
    median_stable: float
    median_volatile: float
    wilcoxon_p: float
    wilcoxon_alternative: str
    alpha: float
    n_resamples: int


@dataclass
class ScanResult:
    summary: SignificanceSummary
    results: list
    pairs: np.ndarray          # n_pairs x 2 index array
    mean_stable: np.ndarray    # per-pair mean over stable windows
    mean_volatile: np.ndarray  # per-pair mean over volatile windows
    delta_matrix: np.ndarray   # symmetric stable-minus-volatile means


def _stack_values(matrices) -> np.ndarray:
    values = [m.values if isinstance(m, MeasureMatrix) else np.asarray(m, float)
              for m in matrices]
    if not values:
        raise DataError("empty window group")
    shape = values[0].shape
    for v in values:
        if v.shape != shape:
            raise DataError("window matrices have mismatched shapes")
    return np.stack(values)


def pair_mean_difference(stable, volatile, pair) -> float:
    """Mean over stable windows minus mean over volatile windows at (i, j)."""
    s = _stack_values(stable)
    v = _stack_values(volatile)
    if s.shape[1:] != v.shape[1:]:
        raise DataError("stable and volatile matrices have mismatched shapes")
    i, j = pair
    return float(s[:, i, j].mean() - v[:, i, j].mean())


def _group_key(block: np.ndarray) -> tuple:
    return block.shape[0], hashlib.sha256(np.ascontiguousarray(block).tobytes()).hexdigest()


def _null_counts(first: np.ndarray, second: np.ndarray, observed_abs: np.ndarray,
                 n_resamples: int, seed: int) -> np.ndarray:
    """Count resampled |mean difference| >= observed |difference| per column.

    The resampling schedule is tied to a canonical, argument-order-free
    ordering of the two groups, so exchanging them reproduces exactly the
    same null |difference| draws (the two-sided p-value is then invariant
    under the exchange, while the observed difference just flips sign).
    """
    if _group_key(second) < _group_key(first):
        first, second = second, first
    pooled = np.concatenate([first, second], axis=0)
    n_first = first.shape[0]
    n = pooled.shape[0]
    rng = np.random.default_rng([int(seed)])
    counts = np.zeros(pooled.shape[1], dtype=np.int64)
    for _ in range(n_resamples):
        perm = rng.permutation(n)
        null = pooled[perm[:n_first]].mean(axis=0) - pooled[perm[n_first:]].mean(axis=0)
        counts += np.abs(null) >= observed_abs
    return counts


def permutation_test(stable, volatile, pair, n_resamples: int = 1000,
                     seed: int = 0, alpha: float = 0.001) -> PairDifferenceResult:
    """Two-sided permutation test of the per-pair mean difference."""
    if n_resamples < 1:
        raise ValueError("n_resamples must be at least 1")
    s = _stack_values(stable)
    v = _stack_values(volatile)
    if s.shape[0] + v.shape[0] < 4:
        raise DataError("need at least four windows in total")
    i, j = pair
    s_col = s[:, i, j].reshape(-1, 1)
    v_col = v[:, i, j].reshape(-1, 1)
    delta = float(s_col.mean() - v_col.mean())
    counts = _null_counts(s_col, v_col, np.array([abs(delta)]), n_resamples, seed)
    p_value = float((1 + counts[0]) / (n_resamples + 1))
    return PairDifferenceResult(
        pair=(int(i), int(j)),
        delta=delta,
        p_value=p_value,
        significant=p_value < alpha,
        direction=DECREASE if delta > 0 else INCREASE,
    )


def run_significance_scan(stable, volatile, alpha: float = 0.001,
                          n_resamples: int = 1000, seed: int = 0,
                          kind: str = "", adjust: str | None = None) -> ScanResult:
    """Permutation test over every distinct node pair with a shared schedule.

    One permutation schedule serves all pairs, which keeps the scan cheap
    and makes per-pair results coherent under a common null. ``adjust="bh"``
    applies a Benjamini-Hochberg correction to the p-values before the
    significance threshold; the default reports raw permutation p-values.
    """
    if n_resamples < 1:
        raise ValueError("n_resamples must be at least 1")
    s = _stack_values(stable)
    v = _stack_values(volatile)
    if s.shape[1:] != v.shape[1:]:
        raise DataError("stable and volatile matrices have mismatched shapes")
    if s.shape[0] + v.shape[0] < 4:
        raise DataError("need at least four windows in total")
    n = s.shape[1]
    iu, ju = np.triu_indices(n, 1)
    pairs = np.column_stack([iu, ju])

    s_flat = s[:, iu, ju]
    v_flat = v[:, iu, ju]
    mean_stable = s_flat.mean(axis=0)
    mean_volatile = v_flat.mean(axis=0)
    deltas = mean_stable - mean_volatile

    counts = _null_counts(s_flat, v_flat, np.abs(deltas), n_resamples, seed)
    p_values = (1 + counts) / (n_resamples + 1)
    p_for_threshold = benjamini_hochberg(p_values) if adjust == "bh" else p_values
    significant = p_for_threshold < alpha

    results = [
        PairDifferenceResult(
            pair=(int(iu[k]), int(ju[k])),
            delta=float(deltas[k]),
            p_value=float(p_values[k]),
            significant=bool(significant[k]),
            direction=DECREASE if deltas[k] > 0 else INCREASE,
        )
        for k in range(pairs.shape[0])
    ]

    sig_mask = significant
    n_decrease = int(np.sum(sig_mask & (deltas > 0)))
    n_increase = int(np.sum(sig_mask & (deltas <= 0)))
    if sig_mask.any():
        med_s = float(np.median(mean_stable[sig_mask]))
        med_v = float(np.median(mean_volatile[sig_mask]))
        alternative = "less" if n_decrease >= n_increase else "greater"
        wilcoxon_p = wilcoxon_rank_sum_one_sided(
            mean_volatile[sig_mask], mean_stable[sig_mask], alternative
        )
    else:
        med_s = med_v = wilcoxon_p = float("nan")
        alternative = "none"

    delta_matrix = np.zeros((n, n))
    delta_matrix[iu, ju] = deltas
    delta_matrix += delta_matrix.T

    summary = SignificanceSummary(
        kind=kind,
        total_pairs=int(pairs.shape[0]),
        significant_fraction=float(sig_mask.mean()),
        n_decrease=n_decrease,
        n_increase=n_increase,
        median_stable=med_s,
        median_volatile=med_v,
        wilcoxon_p=float(wilcoxon_p),
        wilcoxon_alternative=alternative,
        alpha=alpha,
        n_resamples=n_resamples,
    )
    return ScanResult(summary=summary, results=results, pairs=pairs,
                      mean_stable=mean_stable, mean_volatile=mean_volatile,
                      delta_matrix=delta_matrix)


def benjamini_hochberg(p_values: np.ndarray) -> np.ndarray:
    """Step-up false-discovery-rate adjustment of a p-value vector."""
    p_values = np.asarray(p_values, dtype=float)
    m = p_values.size
    order = np.argsort(p_values, kind="stable")
    scaled = p_values[order] * m / np.arange(1, m + 1)
    adjusted = np.minimum.accumulate(scaled[::-1])[::-1]
    out = np.empty(m)
    out[order] = np.minimum(adjusted, 1.0)
    return out


def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=float)
    sorted_values = values[order]
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and sorted_values[j + 1] == sorted_values[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def wilcoxon_rank_sum_one_sided(sample_a, sample_b, alternative: str) -> float:
    """One-sided rank-sum test of a location shift between two samples.

    ``alternative="less"`` asks whether sample_a is shifted below sample_b
    (small rank sum of a), ``"greater"`` the other way. Ties get midranks.
    For small samples (smaller side at most 8, and at most 500k subsets) the
    p-value is computed by exact enumeration of rank assignments; larger
    samples use the normal approximation with tie-corrected variance and a
    continuity correction.
    """
    if alternative not in ("less", "greater"):
        raise ValueError(f"alternative must be 'less' or 'greater', got {alternative!r}")
    a = np.asarray(sample_a, dtype=float).ravel()
    b = np.asarray(sample_b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise DataError("both samples must be non-empty")
    pooled = np.concatenate([a, b])
    ranks = _midranks(pooled)
    n_a, n_b = a.size, b.size
    n = n_a + n_b
    w_a = float(ranks[:n_a].sum())

    small = min(n_a, n_b)
    if small <= 8 and math.comb(n, small) <= _EXACT_LIMIT:
        total = float(ranks.sum())
        if n_a <= n_b:
            sums = np.fromiter((sum(c) for c in combinations(ranks, n_a)), dtype=float)
        else:
            sums = total - np.fromiter(
                (sum(c) for c in combinations(ranks, n_b)), dtype=float
            )
        eps = 1e-9
        if alternative == "less":
            return float(np.mean(sums <= w_a + eps))
        return float(np.mean(sums >= w_a - eps))

    mean = n_a * (n + 1) / 2.0
    _, tie_counts = np.unique(pooled, return_counts=True)
    tie_term = float(np.sum(tie_counts ** 3 - tie_counts))
    variance = n_a * n_b / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if variance <= 0:
        return 0.5  # every observation tied; no shift evidence either way
    sd = math.sqrt(variance)
    if alternative == "less":
        z = (w_a - mean + 0.5) / sd
    else:
        z = (mean - w_a + 0.5) / sd
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def write_scan(scan: ScanResult, csv_path, json_path, extra: dict | None = None) -> None:
    """Per-pair results CSV and a summary JSON."""
    with open(str(csv_path), "w", encoding="utf-8") as fh:
        fh.write("i,j,delta,p_value,significant,direction\n")
        for r in scan.results:
            fh.write(f"{r.pair[0]},{r.pair[1]},{r.delta!r},{r.p_value!r},"
                     f"{int(r.significant)},{r.direction}\n")
    payload = {
        "kind": scan.summary.kind,
        "total_pairs": scan.summary.total_pairs,
        "significant_fraction": scan.summary.significant_fraction,
        "n_decrease": scan.summary.n_decrease,
        "n_increase": scan.summary.n_increase,
        "median_stable": scan.summary.median_stable,
        "median_volatile": scan.summary.median_volatile,
        "wilcoxon_p": scan.summary.wilcoxon_p,
        "wilcoxon_alternative": scan.summary.wilcoxon_alternative,
        "alpha": scan.summary.alpha,
        "n_resamples": scan.summary.n_resamples,
    }
    if extra:
        payload.update(extra)
    with open(str(json_path), "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2, allow_nan=True)
        fh.write("\n")
