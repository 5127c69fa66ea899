"""Alternating minimization driver: inner U/V sweeps, outer weight refreshes."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import (
    FactorizationState,
    HyperParams,
    MultiViewDataset,
    WMNMFError,
    init_state,
    normalize_views,
)
from .graph import view_laplacians
from .updates import (
    column_residuals,
    compute_Q,
    consensus_distance,
    make_context,
    objective_single_view,
    objective_terms,
    update_alpha,
    update_consensus,
    update_U,
    update_V,
    update_w,
)

logger = logging.getLogger(__name__)


class NonFiniteObjective(WMNMFError, FloatingPointError):
    def __init__(self, message: str, trace: Sequence[float]):
        super().__init__(message)
        self.trace = list(trace)


Observer = Callable[[str, int, FactorizationState], None]


@dataclass(frozen=True)
class SolverRun:
    final_state: FactorizationState
    converged: bool
    outer_iterations: int
    inner_iterations: list
    wall_time: float
    objective_trace: list
    hp: HyperParams
    dataset: MultiViewDataset = field(repr=False)
    laplacians: Optional[list] = field(default=None, repr=False)

    @property
    def consensus(self) -> np.ndarray:
        return self.final_state.consensus

    @property
    def alpha(self) -> np.ndarray:
        return self.final_state.alpha

    @property
    def W(self) -> np.ndarray:
        return self.final_state.W

    @property
    def final_objective(self) -> float:
        return self.objective_trace[-1]

    def objective_decomposition(self) -> np.ndarray:
        """Per-view (reconstruction, consensus, manifold) terms at the end."""
        return objective_terms(self.final_state, self.dataset, self.laplacians, self.hp)


def fit(
    ds: MultiViewDataset,
    hp: HyperParams,
    *,
    normalize: bool = True,
    observer: Optional[Observer] = None,
    laplacians: Optional[list] = None,
) -> SolverRun:
    """Run the weighted multi-view factorization on ``ds``.

    The mode in ``hp`` decides which blocks are learned:

    ========== ======== ======== ==========
    mode       alpha    W        manifold
    ========== ======== ======== ==========
    wm-nmf     learned  learned  beta
    nmf-w1     learned  fixed    beta
    nmf-w2     learned  fixed    off
    multinmf1  1/n_v    fixed    off
    multinmf2  0.01     fixed    off
    ========== ======== ======== ==========

    ``observer(event, view, state)`` is called after every block update
    (events ``"U"``, ``"V"``, ``"alpha"``, ``"w"``, ``"consensus"``) and is
    meant for instrumented test runs.
    """
    t0 = time.perf_counter()
    data = normalize_views(ds) if normalize else ds
    mode = hp.mode
    beta = hp.effective_beta
    if laplacians is None and beta > 0:
        laplacians = view_laplacians(data.views, hp.knn, hp.sigma_sq)
    state = init_state(data, hp)
    nv = data.n_views

    def total():
        return float(objective_terms(state, data, laplacians, hp).sum())

    trace = [total()]
    inner_counts = []
    converged = False
    for outer in range(hp.outer_max):
        counts = []
        for s in range(nv):
            ctx = make_context(state, data, laplacians, hp, s)
            prev = objective_single_view(ctx)
            it = 0
            while it < hp.inner_max:
                it += 1
                ctx.U = update_U(ctx)
                state.U[s] = ctx.U
                if observer is not None:
                    observer("U", s, state)
                ctx.V = update_V(ctx)
                state.V[s] = ctx.V
                if observer is not None:
                    observer("V", s, state)
                cur = objective_single_view(ctx)
                if hp.has_converged(prev, cur):
                    break
                prev = cur
            if not np.isfinite(cur):
                raise NonFiniteObjective(
                    f"view {s} objective became {cur} at outer iteration {outer + 1}", trace + [cur])
            counts.append(it)
        inner_counts.append(counts)

        Q = [compute_Q(u) for u in state.U]
        if mode.learns_alpha:
            d = [consensus_distance(v, u, state.consensus) for u, v in zip(state.U, state.V)]
            state.alpha = update_alpha(d, hp.p)
            if observer is not None:
                observer("alpha", -1, state)
        if mode.learns_w:
            r = np.stack([column_residuals(x, u, v) for x, u, v in zip(data.views, state.U, state.V)])
            state.W = update_w(r)
            if observer is not None:
                observer("w", -1, state)
        state.consensus = update_consensus(state.V, Q, state.alpha, hp.effective_p)
        if observer is not None:
            observer("consensus", -1, state)

        obj = total()
        if not np.isfinite(obj):
            raise NonFiniteObjective(f"objective became {obj} at outer iteration {outer + 1}", trace + [obj])
        trace.append(obj)
        state.outer_iters_run = outer + 1
        if hp.has_converged(trace[-2], obj):
            converged = True
            break

    state.objective_history = list(trace)
    wall = time.perf_counter() - t0
    logger.debug("fit mode=%s outer=%d converged=%s obj=%.6g in %.2fs",
                 mode.value, state.outer_iters_run, converged, trace[-1], wall)
    return SolverRun(
        final_state=state,
        converged=converged,
        outer_iterations=state.outer_iters_run,
        inner_iterations=inner_counts,
        wall_time=wall,
        objective_trace=trace,
        hp=hp,
        dataset=data,
        laplacians=laplacians,
    )


@dataclass(frozen=True)
class MonotonicityReport:
    violations: list
    rel_tol: float

    @property
    def passed(self) -> bool:
        return not self.violations


def audit_monotonicity(run_or_trace, rel_tol: float = 1e-9) -> MonotonicityReport:
    """Flag every index where the objective trace rose by more than ``rel_tol``.

    Each violation is ``(index, previous, current)``.
    """
    trace = run_or_trace.objective_trace if isinstance(run_or_trace, SolverRun) else run_or_trace
    trace = [float(x) for x in trace]
    bad = []
    for i in range(1, len(trace)):
        prev, cur = trace[i - 1], trace[i]
        if cur - prev > rel_tol * abs(prev):
            bad.append((i, prev, cur))
    return MonotonicityReport(violations=bad, rel_tol=rel_tol)


SCALING_AXES = ("n_v", "N", "M", "K")


def scaling_benchmark(base_spec, vary: str, levels: Sequence[int], hp: HyperParams,
                      repeats: int = 1) -> list:
    """Time ``fit`` across one size axis, holding everything else fixed.

    Early stopping is disabled so every level runs the same iteration
    budget. Returns ``(level, seconds)`` pairs, keeping the fastest of
    ``repeats`` runs per level.
    """
    from .synthgen import generate, resize_spec

    if vary not in SCALING_AXES:
        raise ValueError(f"vary must be one of {SCALING_AXES}")
    run_hp = hp.with_(conv_threshold=np.finfo(float).tiny)
    rows = []
    for level in levels:
        level = int(level)
        if vary == "K":
            ds = generate(base_spec)
            level_hp = run_hp.with_(k=level)
        else:
            ds = generate(resize_spec(base_spec, vary, level))
            level_hp = run_hp
        best = np.inf
        for _ in range(max(1, repeats)):
            t0 = time.perf_counter()
            fit(ds, level_hp)
            best = min(best, time.perf_counter() - t0)
        rows.append((level, best))
    return rows


def linear_fit_r2(xs, ys) -> tuple:
    """Least-squares line through (xs, ys); returns (slope, intercept, R^2)."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2
