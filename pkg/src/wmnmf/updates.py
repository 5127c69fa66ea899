"""Multiplicative and closed-form block updates, plus objective evaluation.

Observation weights and the column-sum matrix Q are diagonal; both are
applied as row/column scalings and never materialized.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import WMNMFError
from .graph import LaplacianTriple


class DegenerateAlpha(WMNMFError, ValueError):
    pass


ALPHA_POWER_FLOOR = 1e-300


@dataclass
class ViewContext:
    """Everything one view's inner iteration reads."""

    X: np.ndarray
    U: np.ndarray
    V: np.ndarray
    consensus: np.ndarray
    alpha_s: float
    p: float
    w: np.ndarray
    laplacian: Optional[LaplacianTriple] = None
    beta: float = 0.0
    denom_guard: float = 1e-12

    @property
    def alpha_p(self) -> float:
        return float(self.alpha_s) ** self.p


def compute_Q(U: np.ndarray) -> np.ndarray:
    """Column sums of U, i.e. the diagonal of Q."""
    return np.asarray(U, dtype=float).sum(axis=0)


def update_U(ctx: ViewContext) -> np.ndarray:
    X, U, V, Vs = ctx.X, ctx.U, ctx.V, ctx.consensus
    w2 = ctx.w * ctx.w
    ap = ctx.alpha_p
    Vw = V * w2[:, None]
    numer = X @ Vw + ap * np.sum(V * Vs, axis=0)
    denom = U @ (Vw.T @ V) + ap * compute_Q(U) * np.sum(V * V, axis=0) + ctx.denom_guard
    return U * (numer / denom)


def update_V(ctx: ViewContext) -> np.ndarray:
    X, U, V, Vs = ctx.X, ctx.U, ctx.V, ctx.consensus
    w2 = ctx.w * ctx.w
    ap = ctx.alpha_p
    q = compute_Q(U)
    numer = w2[:, None] * (X.T @ U) + ap * (Vs * q)
    denom = w2[:, None] * (V @ (U.T @ U)) + ap * (V * (q * q)) + ctx.denom_guard
    if ctx.beta > 0 and ctx.laplacian is not None:
        numer = numer + ctx.beta * (ctx.laplacian.adjacency @ V)
        denom = denom + ctx.beta * (ctx.laplacian.degree[:, None] * V)
    return V * (numer / denom)


def update_alpha(distances: Sequence[float], p: float) -> np.ndarray:
    """Closed-form view weights minimizing sum_s alpha_s^p d_s on the simplex.

    For p == 1 the minimizer is the indicator of the smallest distance
    (lowest index on ties). If some distances are zero the weight is
    split equally among them, which is the p > 1 limit; all-zero
    distances therefore give uniform weights.
    """
    d = np.asarray(distances, dtype=float)
    if d.ndim != 1 or d.size == 0:
        raise ValueError("distances must be a nonempty vector")
    if np.any(d < 0) or not np.all(np.isfinite(d)):
        raise ValueError("distances must be finite and nonnegative")
    if p < 1:
        raise ValueError("p must be >= 1")
    zero = d == 0
    if zero.all():
        return np.full(d.shape, 1.0 / d.size)
    if p == 1:
        out = np.zeros_like(d)
        out[int(np.argmin(d))] = 1.0
        return out
    if zero.any():
        return zero / zero.sum()
    # alpha_s proportional to d_s^(-1/(p-1)); normalized in log space
    logits = -np.log(d) / (p - 1.0)
    logits -= logits.max()
    e = np.exp(logits)
    return e / e.sum()


def update_w(residuals: np.ndarray) -> np.ndarray:
    """Observation weights from per-view squared column residuals.

    ``residuals`` is n_v x N; the result is N x n_v with rows on the
    simplex, each entry inversely proportional to its residual.
    """
    r = np.asarray(residuals, dtype=float)
    if r.ndim != 2:
        raise ValueError("residuals must be an n_v x N matrix")
    if np.any(r < 0) or not np.all(np.isfinite(r)):
        raise ValueError("residuals must be finite and nonnegative")
    r = r.T
    zero = r == 0
    has_zero = zero.any(axis=1)
    out = np.empty_like(r)
    if has_zero.any():
        z = zero[has_zero].astype(float)
        out[has_zero] = z / z.sum(axis=1, keepdims=True)
    rest = ~has_zero
    if rest.any():
        rr = r[rest]
        ratio = rr.min(axis=1, keepdims=True) / rr
        out[rest] = ratio / ratio.sum(axis=1, keepdims=True)
    return out


def update_consensus(V_list, Q_list, alpha, p: float) -> np.ndarray:
    """Weighted average of the column-rescaled coefficient matrices."""
    a = np.asarray(alpha, dtype=float) ** p
    if np.any(a < 0) or np.all(a < ALPHA_POWER_FLOOR):
        raise DegenerateAlpha("all view weights vanish; consensus is undefined")
    c = a / a.sum()
    out = np.zeros_like(np.asarray(V_list[0], dtype=float))
    for cs, V, q in zip(c, V_list, Q_list):
        out += cs * (V * q)
    return out


def column_residuals(X: np.ndarray, U: np.ndarray, V: np.ndarray) -> np.ndarray:
    """sum_j (X - U V^T)_{ji}^2 for every observation i."""
    R = X - U @ V.T
    return np.einsum("ji,ji->i", R, R)


def consensus_distance(V: np.ndarray, U: np.ndarray, consensus: np.ndarray) -> float:
    D = V * compute_Q(U) - consensus
    return float(np.sum(D * D))


def view_terms(ctx: ViewContext) -> tuple:
    """(reconstruction, consensus, manifold) pieces of one view's objective."""
    recon = float(np.sum(ctx.w * ctx.w * column_residuals(ctx.X, ctx.U, ctx.V)))
    cons = ctx.alpha_p * consensus_distance(ctx.V, ctx.U, ctx.consensus)
    manifold = 0.0
    if ctx.beta > 0 and ctx.laplacian is not None:
        manifold = ctx.beta * ctx.laplacian.quadratic_trace(ctx.V)
    return recon, cons, manifold


def objective_single_view(ctx: ViewContext) -> float:
    return float(sum(view_terms(ctx)))


def make_context(state, dataset, laplacians, hp, s: int) -> ViewContext:
    return ViewContext(
        X=dataset.views[s],
        U=state.U[s],
        V=state.V[s],
        consensus=state.consensus,
        alpha_s=float(state.alpha[s]),
        p=hp.effective_p,
        w=state.W[:, s],
        laplacian=None if laplacians is None else laplacians[s],
        beta=hp.effective_beta,
        denom_guard=hp.denom_guard,
    )


def objective_terms(state, dataset, laplacians, hp) -> np.ndarray:
    """n_v x 3 array of per-view (reconstruction, consensus, manifold) terms."""
    return np.array(
        [view_terms(make_context(state, dataset, laplacians, hp, s)) for s in range(dataset.n_views)]
    )


def objective_total(state, dataset, laplacians, hp) -> float:
    return float(objective_terms(state, dataset, laplacians, hp).sum())
