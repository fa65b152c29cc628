"""Stable-versus-volatile classification of measure-matrix windows.

Each window's symmetric measure matrix is flattened into its strict upper
triangle; an edge-frequency mask built from stable training windows keeps
only reliably present links, features are z-scored with training statistics,
a linear SVM ranks them for recursive elimination, and repeated stratified
k-fold cross-validation reports accuracy, AUC, sensitivity and specificity.
Everything downstream of the fold split sees training rows only.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .netmeasures import MeasureMatrix

STABLE_LABEL = 0
VOLATILE_LABEL = 1

METRICS = ("accuracy", "auc", "sensitivity", "specificity")


@dataclass
class FeatureDataset:
    """Windows x features matrix with labels and the pair behind each feature.

    ``adjacency`` optionally carries each window's binary edge indicator in
    the same feature order; the cross-validation mask is built from it.
    """

    X: np.ndarray
    y: np.ndarray
    pairs: np.ndarray
    kind: str = ""
    adjacency: np.ndarray | None = None

    @property
    def n_windows(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]


@dataclass
class MaskMatrix:
    """Edge-frequency mask from stable-period adjacency matrices."""

    frequencies: np.ndarray
    mask: np.ndarray
    threshold: float = 0.25


@dataclass
class LinearSvmModel:
    weights: np.ndarray
    bias: float
    c: float
    n_passes: int = 0
    converged: bool = True

    def decision_scores(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.weights + self.bias


@dataclass
class CvReport:
    """Per-fold metrics with aggregates, selected features, and config echo."""

    folds: list
    means: dict
    stderrs: dict
    config: dict = field(default_factory=dict)
    audit: list | None = None

    def to_dict(self) -> dict:
        return {
            "folds": self.folds,
            "means": self.means,
            "stderrs": self.stderrs,
            "config": self.config,
        }


def vectorize(measures, labels, adjacencies=None, kind: str = "") -> FeatureDataset:
    """Flatten per-window symmetric matrices into strict upper triangles.

    Feature order is row-major over pairs (0,1), (0,2), ..., (N-2,N-1); one
    row per window. ``adjacencies`` may supply the matching binary edge
    matrices for mask construction.
    """
    stacked = []
    n = None
    for m in measures:
        values = m.values if isinstance(m, MeasureMatrix) else np.asarray(m, float)
        if n is None:
            n = values.shape[0]
        elif values.shape[0] != n:
            raise DataError("measure matrices have mismatched dimensions")
        stacked.append(values)
    if not stacked:
        raise DataError("no measure matrices supplied")
    iu, ju = np.triu_indices(n, 1)
    X = np.stack([values[iu, ju] for values in stacked])
    y = np.asarray(labels, dtype=int)
    if y.shape[0] != X.shape[0]:
        raise DataError("label count does not match window count")
    adjacency = None
    if adjacencies is not None:
        adj_stack = [np.asarray(a, float) for a in adjacencies]
        if len(adj_stack) != X.shape[0] or any(a.shape[0] != n for a in adj_stack):
            raise DataError("adjacency list does not match windows")
        adjacency = np.stack([(a != 0).astype(float)[iu, ju] for a in adj_stack])
    if not kind and measures and isinstance(measures[0], MeasureMatrix):
        kind = measures[0].kind
    return FeatureDataset(X=X, y=y, pairs=np.column_stack([iu, ju]), kind=kind,
                          adjacency=adjacency)


def matrix_from_features(row: np.ndarray, n: int) -> np.ndarray:
    """Inverse of :func:`vectorize` for one window (symmetric, zero diagonal)."""
    iu, ju = np.triu_indices(n, 1)
    out = np.zeros((n, n))
    out[iu, ju] = row
    return out + out.T


def build_mask(stable_matrices, threshold: float = 0.25) -> MaskMatrix:
    """Edge-frequency mask: keep links present in strictly more than
    ``threshold`` of the stable matrices."""
    if not len(stable_matrices):
        raise DataError("cannot build a mask from an empty list")
    stack = np.stack([(np.asarray(m) != 0).astype(float) for m in stable_matrices])
    frequencies = stack.mean(axis=0)
    return MaskMatrix(frequencies=frequencies, mask=frequencies > threshold,
                      threshold=threshold)


def _mask_vector(adjacency_rows: np.ndarray, threshold: float) -> np.ndarray:
    return (adjacency_rows.mean(axis=0) > threshold).astype(float)


def standardize(train: np.ndarray, apply_to: np.ndarray):
    """z-score both arrays with the training mean and population sd.

    Zero-spread features map to zero in both outputs, which keeps masked-out
    columns inert.
    """
    train = np.asarray(train, dtype=float)
    apply_to = np.asarray(apply_to, dtype=float)
    mean = train.mean(axis=0)
    sd = train.std(axis=0)
    safe = np.where(sd == 0, 1.0, sd)
    train_scaled = (train - mean) / safe
    apply_scaled = (apply_to - mean) / safe
    dead = sd == 0
    train_scaled[:, dead] = 0.0
    apply_scaled[:, dead] = 0.0
    return train_scaled, apply_scaled


def train_linear_svm(X, y, c: float = 1.0, tol: float = 1e-8,
                     max_iter: int = 4000) -> LinearSvmModel:
    """Soft-margin linear SVM minimizing 0.5 ||w||^2 + c * sum hinge.

    Solved by cyclic coordinate descent on the dual with a precomputed Gram
    matrix; the bias rides along as an augmented constant feature (and is
    therefore weakly regularized). Iteration order is fixed, so the result
    is deterministic. Convergence is declared when the largest dual step in
    a full pass drops below ``tol`` or the pass improves the dual objective
    only negligibly (the zigzag regime of near-singular Gram matrices);
    running out of passes emits a warning and returns the current iterate.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be 2-D with one row per label")
    if np.unique(y).size < 2:
        raise DataError("training data contains a single class")
    if c <= 0:
        raise ValueError("regularization c must be positive")
    signs = np.where(y == VOLATILE_LABEL, 1.0, -1.0)
    n = X.shape[0]
    augmented = np.hstack([X, np.ones((n, 1))])
    signed = augmented * signs[:, None]
    gram = signed @ signed.T
    gram_diag = np.maximum(np.diag(gram).copy(), 1e-12)

    alpha = np.zeros(n)
    gradient_cache = np.zeros(n)  # holds gram @ alpha
    objective = 0.0
    n_passes = 0
    converged = False
    for n_passes in range(1, max_iter + 1):
        largest_step = 0.0
        pass_gain = 0.0
        for i in range(n):
            gradient = gradient_cache[i] - 1.0
            candidate = alpha[i] - gradient / gram_diag[i]
            if candidate < 0.0:
                candidate = 0.0
            elif candidate > c:
                candidate = c
            step = candidate - alpha[i]
            if step != 0.0:
                pass_gain += -step * gradient - 0.5 * step * step * gram_diag[i]
                gradient_cache += step * gram[i]
                alpha[i] = candidate
                if abs(step) > largest_step:
                    largest_step = abs(step)
        objective += pass_gain
        if largest_step < tol or pass_gain <= 1e-13 * (1.0 + abs(objective)):
            converged = True
            break
    if not converged:
        warnings.warn(f"linear SVM did not converge within {max_iter} passes "
                      f"(last max dual step {largest_step:.2e})")
    w_aug = signed.T @ alpha
    return LinearSvmModel(weights=w_aug[:-1], bias=float(w_aug[-1]), c=c,
                          n_passes=n_passes, converged=converged)


def svm_rfe(X, y, keep: int, drop_fraction: float = 0.1, c: float = 1.0,
            tol: float = 1e-5, max_iter: int = 2000) -> np.ndarray:
    """Recursive feature elimination ranked by |w| of a linear SVM.

    Each round drops the ceil(drop_fraction * remaining) features with the
    smallest absolute weight (at least one, never past ``keep``); ties break
    toward dropping the lower feature index. Returns the surviving feature
    indices in ascending order.
    """
    X = np.asarray(X, dtype=float)
    n_features = X.shape[1]
    if not (1 <= keep <= n_features):
        raise ValueError(f"keep must lie in [1, {n_features}], got {keep}")
    if not (0.0 < drop_fraction <= 1.0):
        raise ValueError("drop_fraction must lie in (0, 1]")
    active = np.arange(n_features)
    while active.size > keep:
        model = train_linear_svm(X[:, active], y, c=c, tol=tol, max_iter=max_iter)
        importance = np.abs(model.weights)
        n_drop = min(max(1, int(np.ceil(drop_fraction * active.size))),
                     active.size - keep)
        drop_order = np.lexsort((active, importance))
        active = np.delete(active, drop_order[:n_drop])
    return np.sort(active)


def evaluate(scores, labels) -> dict:
    """Threshold-zero confusion metrics plus rank-based AUC.

    Volatile (label 1) is the positive class; a score strictly above zero
    predicts positive. AUC is P(score_pos > score_neg) + 0.5 P(tie),
    computed from midranks.
    """
    scores = np.asarray(scores, dtype=float).ravel()
    labels = np.asarray(labels, dtype=int).ravel()
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have equal length")
    positive = labels == VOLATILE_LABEL
    n_pos = int(positive.sum())
    n_neg = int(labels.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise DataError("both classes must be present to evaluate")
    predictions = (scores > 0).astype(int)
    accuracy = float(np.mean(predictions == labels))
    sensitivity = float(np.mean(predictions[positive] == 1))
    specificity = float(np.mean(predictions[~positive] == 0))

    order = np.argsort(scores, kind="stable")
    ranks = np.empty(scores.size, dtype=float)
    sorted_scores = scores[order]
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    auc = (ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
    return {
        "accuracy": accuracy,
        "auc": float(auc),
        "sensitivity": sensitivity,
        "specificity": specificity,
    }


def stratified_fold_indices(y, splits: int, repeats: int, seed: int) -> list:
    """(train, test) index pairs for repeated stratified k-fold splitting.

    Class proportions per fold stay within one sample of the global ratio.
    Each repeat reshuffles with a stream derived from (seed, repeat).
    """
    y = np.asarray(y, dtype=int)
    classes, counts = np.unique(y, return_counts=True)
    if counts.min() < splits:
        raise DataError(
            f"smallest class has {counts.min()} windows, fewer than {splits} folds"
        )
    folds = []
    for repeat in range(repeats):
        rng = np.random.default_rng([int(seed), repeat])
        assignment = np.empty(y.size, dtype=int)
        for cls in classes:
            members = rng.permutation(np.flatnonzero(y == cls))
            # spread each class over folds as evenly as possible
            sizes = np.full(splits, members.size // splits)
            sizes[: members.size % splits] += 1
            start = 0
            for fold, size in enumerate(sizes):
                assignment[members[start:start + size]] = fold
                start += size
        for fold in range(splits):
            test = np.flatnonzero(assignment == fold)
            train = np.flatnonzero(assignment != fold)
            folds.append((train, test))
    return folds


def _sha256(array: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(array).tobytes()).hexdigest()


def cross_validate(dataset: FeatureDataset, splits: int = 5, repeats: int = 10,
                   keep_features: int = 1, c: float = 1.0,
                   mask_threshold: float = 0.25, drop_fraction: float = 0.1,
                   seed: int = 0, tol: float = 1e-5, max_iter: int = 2000,
                   audit: bool = False) -> CvReport:
    """Repeated stratified k-fold evaluation of the full nested pipeline.

    Per fold: the edge mask comes from the stable training windows only,
    masked features are z-scored with training statistics, recursive
    elimination runs on the training rows, the final model is fit on the
    surviving features, and the held-out rows are scored once. With
    ``audit=True`` the report records, for every fold, exactly which rows
    each training-only step consumed plus a content hash of the arrays it
    saw, so leakage can be checked after the fact.
    """
    X, y = dataset.X, dataset.y
    if dataset.adjacency is None:
        raise DataError("dataset lacks adjacency information needed for the mask")
    fold_indices = stratified_fold_indices(y, splits, repeats, seed)
    folds = []
    audit_records = [] if audit else None
    for fold_number, (train, test) in enumerate(fold_indices):
        stable_train = train[y[train] == STABLE_LABEL]
        mask = _mask_vector(dataset.adjacency[stable_train], mask_threshold)
        X_train = X[train] * mask
        X_test = X[test] * mask
        X_train, X_test = standardize(X_train, X_test)
        selected = svm_rfe(X_train, y[train], keep=keep_features,
                           drop_fraction=drop_fraction, c=c, tol=tol,
                           max_iter=max_iter)
        model = train_linear_svm(X_train[:, selected], y[train], c=c, tol=tol,
                                 max_iter=max_iter)
        scores = model.decision_scores(X_test[:, selected])
        metrics = evaluate(scores, y[test])
        folds.append({
            "fold": fold_number % splits,
            "repeat": fold_number // splits,
            **metrics,
            "selected": [
                {"feature": int(f),
                 "i": int(dataset.pairs[f, 0]),
                 "j": int(dataset.pairs[f, 1]),
                 "weight": float(w)}
                for f, w in zip(selected, model.weights)
            ],
        })
        if audit:
            audit_records.append({
                "fold": fold_number,
                "test_rows": [int(i) for i in test],
                "mask_rows": [int(i) for i in stable_train],
                "scaler_rows": [int(i) for i in train],
                "rfe_rows": [int(i) for i in train],
                "mask_input_sha256": _sha256(dataset.adjacency[stable_train]),
                "scaler_input_sha256": _sha256(X[train] * mask),
            })
    means = {m: float(np.mean([f[m] for f in folds])) for m in METRICS}
    stderrs = {
        m: float(np.std([f[m] for f in folds], ddof=1) / np.sqrt(len(folds)))
        for m in METRICS
    }
    config = {
        "splits": splits,
        "repeats": repeats,
        "keep_features": keep_features,
        "c": c,
        "mask_threshold": mask_threshold,
        "drop_fraction": drop_fraction,
        "seed": int(seed),
        "kind": dataset.kind,
        "n_windows": int(dataset.n_windows),
        "n_features": int(dataset.n_features),
    }
    return CvReport(folds=folds, means=means, stderrs=stderrs, config=config,
                    audit=audit_records)


def write_report(report: CvReport, json_path, features_csv_path=None) -> None:
    """CvReport JSON plus an optional per-fold selected-feature CSV."""
    with open(str(json_path), "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    if features_csv_path is not None:
        with open(str(features_csv_path), "w", encoding="utf-8") as fh:
            fh.write("fold,repeat,feature,i,j,weight\n")
            for fold in report.folds:
                for sel in fold["selected"]:
                    fh.write(f"{fold['fold']},{fold['repeat']},{sel['feature']},"
                             f"{sel['i']},{sel['j']},{sel['weight']!r}\n")
