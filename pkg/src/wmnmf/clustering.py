"""Cluster extraction from the consensus matrix and evaluation metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment
from sklearn.cluster import KMeans

from .core import ValidationError, WMNMFError
from .graph import build_adjacency


class EigenFailure(WMNMFError, ArithmeticError):
    pass


class LengthMismatch(ValidationError):
    pass


def argmax_assign(Vstar: np.ndarray) -> np.ndarray:
    """Label each row by its largest entry; ties go to the lowest column."""
    return np.argmax(np.asarray(Vstar), axis=1)


def kmeans(points: np.ndarray, k: int, seed=0, n_init: int = 10, max_iter: int = 300) -> np.ndarray:
    """Seeded k-means++ / Lloyd clustering of the rows of ``points``.

    The best of ``n_init`` restarts (by within-cluster sum of squares) wins.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] < k:
        raise ValidationError(f"cannot form {k} clusters from {X.shape[0]} points")
    km = KMeans(n_clusters=k, init="k-means++", n_init=n_init, max_iter=max_iter,
                algorithm="lloyd", random_state=int(seed) % (2**32))
    return km.fit_predict(X)


def spectral_embedding(Vstar: np.ndarray, k: int, knn: int = 5, sigma_sq: float = 1.0) -> np.ndarray:
    """Row-normalized bottom-k eigenvectors of the normalized graph Laplacian."""
    n = Vstar.shape[0]
    A = build_adjacency(np.asarray(Vstar, dtype=float).T, min(knn, n - 1), sigma_sq).toarray()
    deg = A.sum(axis=1)
    inv_sqrt = np.zeros_like(deg)
    pos = deg > 0
    inv_sqrt[pos] = 1.0 / np.sqrt(deg[pos])
    L = np.eye(n) - inv_sqrt[:, None] * A * inv_sqrt[None, :]
    vals, vecs = scipy.linalg.eigh(L, subset_by_index=[0, k - 1])
    if np.linalg.matrix_rank(vecs) < k:
        raise EigenFailure(f"spectral embedding has rank below {k}")
    norms = np.linalg.norm(vecs, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return vecs / norms


def spectral_assign(Vstar: np.ndarray, k: int, seed=0, knn: int = 5, sigma_sq: float = 1.0,
                    n_init: int = 10) -> np.ndarray:
    """Normalized spectral clustering of the rows of the consensus matrix."""
    n = Vstar.shape[0]
    if n < k:
        raise ValidationError(f"cannot form {k} clusters from {n} rows")
    if n < 2:
        return np.zeros(n, dtype=int)
    emb = spectral_embedding(Vstar, k, knn, sigma_sq)
    return kmeans(emb, k, seed=seed, n_init=n_init)


def assign(Vstar: np.ndarray, k: int, method: str = "spectral", seed=0) -> np.ndarray:
    if method == "spectral":
        return spectral_assign(Vstar, k, seed=seed)
    if method == "argmax":
        return argmax_assign(Vstar)
    raise ValueError(f"unknown assignment method {method!r}")


@dataclass(frozen=True)
class ClusteringReport:
    predicted: np.ndarray
    acc: float
    nmi: float
    precision: float
    recall: float
    fscore: float
    adj_ri: float

    METRICS = ("acc", "nmi", "precision", "recall", "fscore", "adj_ri")

    def metrics(self) -> dict:
        return {m: float(getattr(self, m)) for m in self.METRICS}


def contingency(truth, predicted) -> np.ndarray:
    _, t = np.unique(truth, return_inverse=True)
    _, p = np.unique(predicted, return_inverse=True)
    C = np.zeros((t.max() + 1, p.max() + 1), dtype=np.int64)
    np.add.at(C, (t, p), 1)
    return C


def clustering_accuracy(C: np.ndarray) -> float:
    rows, cols = linear_sum_assignment(C, maximize=True)
    return float(C[rows, cols].sum() / C.sum())


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log(p)))


def normalized_mutual_info(C: np.ndarray) -> float:
    """Mutual information over sqrt(H(truth) * H(predicted))."""
    n = C.sum()
    a, b = C.sum(axis=1), C.sum(axis=0)
    ht, hp = _entropy(a), _entropy(b)
    if ht == 0 and hp == 0:
        return 1.0
    if ht == 0 or hp == 0:
        return 0.0
    nz = C > 0
    pij = C[nz] / n
    outer = np.outer(a, b)[nz] / (n * n)
    mi = float(np.sum(pij * np.log(pij / outer)))
    return float(min(max(mi / np.sqrt(ht * hp), 0.0), 1.0))


def _pairs(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.sum(x * (x - 1) / 2))


def pair_counts(C: np.ndarray) -> tuple:
    """(TP, FP, FN) over all observation pairs."""
    tp = _pairs(C)
    same_pred = _pairs(C.sum(axis=0))
    same_true = _pairs(C.sum(axis=1))
    return tp, same_pred - tp, same_true - tp


def score(predicted, truth) -> ClusteringReport:
    """ACC, NMI and the pair-counting metrics of ``predicted`` against ``truth``.

    When no pair is placed together by the prediction (or by the truth),
    precision (recall) is vacuously 1.
    """
    pred = np.asarray(predicted).ravel()
    true = np.asarray(truth).ravel()
    if pred.shape != true.shape:
        raise LengthMismatch(f"{pred.size} predictions vs {true.size} labels")
    if true.size == 0:
        raise ValidationError("cannot score an empty labelling")
    C = contingency(true, pred)
    acc = clustering_accuracy(C)
    nmi = normalized_mutual_info(C)
    tp, fp, fn = pair_counts(C)
    precision = tp / (tp + fp) if tp + fp > 0 else 1.0
    recall = tp / (tp + fn) if tp + fn > 0 else 1.0
    f = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    n = C.sum()
    total = n * (n - 1) / 2
    same_true, same_pred = tp + fn, tp + fp
    expected = same_true * same_pred / total if total > 0 else 0.0
    max_index = (same_true + same_pred) / 2
    if max_index == expected:
        ari = 1.0
    else:
        ari = (tp - expected) / (max_index - expected)
    return ClusteringReport(pred.copy(), acc, nmi, float(precision), float(recall), float(f), float(ari))
