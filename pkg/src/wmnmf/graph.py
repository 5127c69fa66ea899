"""k-nearest-neighbour Gaussian-kernel graphs and their Laplacians."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.spatial.distance import cdist

from .core import ValidationError


class TooFewObservations(ValidationError):
    pass


class AsymmetricInput(ValidationError):
    pass


_BLOCK = 1024


@dataclass(frozen=True)
class LaplacianTriple:
    """Adjacency ``A``, degrees ``d`` (the diagonal of D) and L = D - A.

    The adjacency is kept sparse; dense views are built on request.
    """

    adjacency: sp.csr_array
    degree: np.ndarray

    @property
    def n(self) -> int:
        return self.degree.shape[0]

    @property
    def A(self) -> np.ndarray:
        return self.adjacency.toarray()

    @property
    def D(self) -> np.ndarray:
        return np.diag(self.degree)

    @property
    def L(self) -> np.ndarray:
        return self.D - self.A

    def quadratic_trace(self, V: np.ndarray) -> float:
        """tr(V^T L V) without forming L."""
        return float(np.sum(self.degree[:, None] * V * V) - np.sum(V * (self.adjacency @ V)))


def knn_indices(points: np.ndarray, knn: int) -> tuple:
    """Indices of the ``knn`` nearest rows of ``points`` for every row.

    Self-matches are excluded; equal distances resolve to the lower index.
    Returns the neighbour indices and their squared distances.
    """
    n = points.shape[0]
    if n <= knn:
        raise TooFewObservations(f"need more than knn={knn} observations, got {n}")
    idx = np.empty((n, knn), dtype=np.intp)
    dist = np.empty((n, knn))
    for start in range(0, n, _BLOCK):
        stop = min(start + _BLOCK, n)
        d2 = cdist(points[start:stop], points, metric="sqeuclidean")
        rows = np.arange(stop - start)
        d2[rows, rows + start] = np.inf
        order = np.argsort(d2, axis=1, kind="stable")[:, :knn]
        idx[start:stop] = order
        dist[start:stop] = np.take_along_axis(d2, order, axis=1)
    return idx, dist


def build_adjacency(view: np.ndarray, knn: int = 5, sigma_sq: float = 1.0) -> sp.csr_array:
    """Symmetric kNN heat-kernel adjacency over the columns of ``view``.

    a_ij = exp(-||x_i - x_j||^2 / sigma_sq) when j is one of the ``knn``
    nearest neighbours of i, zero otherwise; the directed graph is
    symmetrized with an entrywise maximum and the diagonal is zero.
    """
    if sigma_sq <= 0:
        raise ValidationError("sigma_sq must be positive")
    points = np.asarray(view, dtype=float).T
    n = points.shape[0]
    idx, d2 = knn_indices(points, knn)
    rows = np.repeat(np.arange(n), knn)
    vals = np.exp(-d2.ravel() / sigma_sq)
    directed = sp.csr_array((vals, (rows, idx.ravel())), shape=(n, n))
    A = directed.maximum(directed.T).tocsr()
    A.setdiag(0)
    A.eliminate_zeros()
    A.sort_indices()
    return A


def build_laplacian(A, atol: float = 0.0) -> LaplacianTriple:
    """Degree vector and Laplacian of a symmetric zero-diagonal adjacency."""
    A = sp.csr_array(A, dtype=float)
    if A.shape[0] != A.shape[1]:
        raise AsymmetricInput(f"adjacency must be square, got {A.shape}")
    diff = A - A.T
    if diff.nnz and np.max(np.abs(diff.data)) > atol:
        raise AsymmetricInput("adjacency is not symmetric")
    if np.any(A.diagonal() != 0):
        raise AsymmetricInput("adjacency must have a zero diagonal")
    if A.nnz and np.min(A.data) < 0:
        raise ValidationError("adjacency entries must be nonnegative")
    degree = np.asarray(A.sum(axis=1)).ravel()
    return LaplacianTriple(adjacency=A, degree=degree)


def view_laplacians(views, knn: int = 5, sigma_sq: float = 1.0) -> list:
    """One LaplacianTriple per view."""
    return [build_laplacian(build_adjacency(v, knn, sigma_sq)) for v in views]


def empty_laplacian(n: int) -> LaplacianTriple:
    return LaplacianTriple(adjacency=sp.csr_array((n, n)), degree=np.zeros(n))


__all__ = [
    "LaplacianTriple",
    "TooFewObservations",
    "AsymmetricInput",
    "build_adjacency",
    "build_laplacian",
    "view_laplacians",
    "knn_indices",
    "empty_laplacian",
]
