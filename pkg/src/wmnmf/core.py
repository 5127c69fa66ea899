"""Domain types, validation, normalization and initialization."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np


class WMNMFError(Exception):
    """Base class for all library errors."""


class ValidationError(WMNMFError, ValueError):
    pass


class MismatchedObservations(ValidationError):
    pass


class NegativeEntry(ValidationError):
    pass


class EmptyView(ValidationError):
    pass


class ZeroView(ValidationError):
    pass


class RankTooLarge(ValidationError):
    pass


class InvalidHyperParams(ValidationError):
    pass


class Mode(str, enum.Enum):
    """Solver modes: the full method plus the four ablations."""

    WM_NMF = "wm-nmf"
    NMF_W1 = "nmf-w1"
    NMF_W2 = "nmf-w2"
    MULTINMF1 = "multinmf1"
    MULTINMF2 = "multinmf2"

    @classmethod
    def parse(cls, value: "Mode | str") -> "Mode":
        if isinstance(value, Mode):
            return value
        key = str(value).strip().lower().replace("_", "-")
        for m in cls:
            if m.value == key:
                return m
        raise InvalidHyperParams(f"unknown mode {value!r}")

    @property
    def learns_alpha(self) -> bool:
        return self in (Mode.WM_NMF, Mode.NMF_W1, Mode.NMF_W2)

    @property
    def learns_w(self) -> bool:
        return self is Mode.WM_NMF

    @property
    def uses_manifold(self) -> bool:
        return self in (Mode.WM_NMF, Mode.NMF_W1)


MULTINMF2_ALPHA = 0.01


@dataclass(frozen=True)
class MultiViewDataset:
    """Views of shape (M_s, N) over a shared set of N observations."""

    views: tuple
    labels: Optional[np.ndarray] = None
    view_names: Optional[tuple] = None

    @property
    def n_views(self) -> int:
        return len(self.views)

    @property
    def n_obs(self) -> int:
        return self.views[0].shape[1]

    @property
    def shapes(self) -> list:
        return [v.shape for v in self.views]


@dataclass(frozen=True)
class HyperParams:
    k: int
    p: float = 5.0
    beta: float = 0.01
    inner_max: int = 10
    outer_max: int = 200
    conv_threshold: float = 9e-8
    conv_rule: str = "absolute"
    denom_guard: float = 1e-12
    knn: int = 5
    sigma_sq: float = 1.0
    mode: Mode = Mode.WM_NMF
    fixed_alpha: Optional[tuple] = None
    fixed_w: Optional[np.ndarray] = field(default=None, compare=False)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode.parse(self.mode))
        if self.fixed_alpha is not None:
            object.__setattr__(self, "fixed_alpha", tuple(float(a) for a in self.fixed_alpha))
        if int(self.k) < 1:
            raise InvalidHyperParams("k must be a positive integer")
        if self.p < 1:
            raise InvalidHyperParams("p must be >= 1")
        if self.beta < 0:
            raise InvalidHyperParams("beta must be >= 0")
        if self.conv_threshold <= 0 or self.denom_guard <= 0:
            raise InvalidHyperParams("conv_threshold and denom_guard must be > 0")
        if self.inner_max < 1 or self.outer_max < 0:
            raise InvalidHyperParams("inner_max must be >= 1 and outer_max >= 0")
        if self.conv_rule not in ("relative", "absolute"):
            raise InvalidHyperParams("conv_rule must be 'relative' or 'absolute'")
        if self.knn < 1 or self.sigma_sq <= 0:
            raise InvalidHyperParams("knn must be >= 1 and sigma_sq > 0")
        if self.fixed_alpha is not None and any(a < 0 for a in self.fixed_alpha):
            raise InvalidHyperParams("fixed_alpha entries must be nonnegative")

    @property
    def effective_beta(self) -> float:
        return self.beta if self.mode.uses_manifold else 0.0

    @property
    def effective_p(self) -> float:
        # the equal-weight baselines weight the consensus term by alpha_s itself
        return self.p if self.mode.learns_alpha else 1.0

    def has_converged(self, previous: float, current: float) -> bool:
        gap = abs(previous - current)
        if self.conv_rule == "relative":
            return gap < self.conv_threshold * max(abs(previous), np.finfo(float).tiny)
        return gap < self.conv_threshold

    def with_(self, **changes) -> "HyperParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "k": int(self.k),
            "p": float(self.p),
            "beta": float(self.beta),
            "inner_max": int(self.inner_max),
            "outer_max": int(self.outer_max),
            "conv_threshold": float(self.conv_threshold),
            "conv_rule": self.conv_rule,
            "denom_guard": float(self.denom_guard),
            "knn": int(self.knn),
            "sigma_sq": float(self.sigma_sq),
            "mode": self.mode.value,
            "fixed_alpha": None if self.fixed_alpha is None else list(self.fixed_alpha),
            "fixed_w": None if self.fixed_w is None else np.asarray(self.fixed_w).tolist(),
            "seed": int(self.seed),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HyperParams":
        d = dict(d)
        if d.get("fixed_w") is not None:
            d["fixed_w"] = np.asarray(d["fixed_w"], dtype=float)
        return cls(**d)


@dataclass
class FactorizationState:
    """Per-view factors U (M_s x K), V (N x K), consensus, and weights.

    ``W`` is stored N x n_v: row i holds observation i's weights across views.
    """

    U: list
    V: list
    consensus: np.ndarray
    alpha: np.ndarray
    W: np.ndarray
    objective_history: list = field(default_factory=list)
    outer_iters_run: int = 0

    def copy(self) -> "FactorizationState":
        return FactorizationState(
            U=[u.copy() for u in self.U],
            V=[v.copy() for v in self.V],
            consensus=self.consensus.copy(),
            alpha=self.alpha.copy(),
            W=self.W.copy(),
            objective_history=list(self.objective_history),
            outer_iters_run=self.outer_iters_run,
        )


def validate_dataset(views: Sequence, labels=None, view_names=None) -> MultiViewDataset:
    """Check shapes and signs and return an immutable dataset.

    Inputs are copied, never modified.
    """
    if views is None or len(views) == 0:
        raise EmptyView("at least one view is required")
    arrs = []
    for s, v in enumerate(views):
        a = np.array(v, dtype=float, copy=True)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise EmptyView(f"view {s} must be a nonempty 2-D matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValidationError(f"view {s} contains non-finite entries")
        if np.any(a < 0):
            raise NegativeEntry(f"view {s} has negative entries (min {a.min():g})")
        a.setflags(write=False)
        arrs.append(a)
    n = arrs[0].shape[1]
    for s, a in enumerate(arrs):
        if a.shape[1] != n:
            raise MismatchedObservations(
                f"view {s} has {a.shape[1]} observations, view 0 has {n}"
            )
    lab = None
    if labels is not None:
        lab = np.array(labels, copy=True).astype(int).ravel()
        if lab.shape[0] != n:
            raise ValidationError(f"expected {n} labels, got {lab.shape[0]}")
        lab.setflags(write=False)
    names = None
    if view_names is not None:
        names = tuple(str(x) for x in view_names)
        if len(names) != len(arrs):
            raise ValidationError("view_names length does not match number of views")
    return MultiViewDataset(views=tuple(arrs), labels=lab, view_names=names)


def normalize_views(ds: MultiViewDataset) -> MultiViewDataset:
    """Scale every view so its entries sum to one."""
    out = []
    for s, v in enumerate(ds.views):
        with np.errstate(over="ignore"):
            total = v.sum()
        if not np.isfinite(total):
            raise ValidationError(f"view {s} sum overflows; rescale the data before fitting")
        if not total > 0:
            raise ZeroView(f"view {s} sums to zero and cannot be normalized")
        a = v / total
        a.setflags(write=False)
        out.append(a)
    return MultiViewDataset(views=tuple(out), labels=ds.labels, view_names=ds.view_names)


def check_rank(ds: MultiViewDataset, k: int) -> None:
    limit = min(min(m, n) for m, n in ds.shapes)
    if k >= limit:
        raise RankTooLarge(f"k={k} must be smaller than min(M_s, N)={limit}")


INIT_FLOOR = 1e-6


def init_state(ds: MultiViewDataset, hp: HyperParams) -> FactorizationState:
    """Seeded strictly positive starting point.

    Factors are uniform draws on (1e-6, 1] rescaled so that U V^T matches
    the mean entry of its view (every draw stays inside (0, 1] for
    normalized data); the consensus is drawn on the scale of V Q. View
    and observation weights start uniform at 1/n_v, unless fixed values
    are given in ``hp``.
    """
    check_rank(ds, hp.k)
    rng = np.random.default_rng(hp.seed)
    nv, n, k = ds.n_views, ds.n_obs, hp.k

    def draw(shape):
        # 1 - U[0,1) lies in (0, 1]; affine map onto (floor, 1]
        return INIT_FLOOR + (1.0 - INIT_FLOOR) * (1.0 - rng.random(shape))

    U, V, vq_scale = [], [], []
    for X in ds.views:
        m = X.shape[0]
        # E[(U V^T)_ij] = k c^2 / 4 for entries c * Uniform(0, 1]
        c = min(1.0, 2.0 * np.sqrt(max(X.mean(), np.finfo(float).tiny) / k))
        U.append(c * draw((m, k)))
        V.append(c * draw((n, k)))
        vq_scale.append(m * c * c / 4.0)
    consensus = min(1.0, 2.0 * float(np.mean(vq_scale))) * draw((n, k))
    alpha = initial_alpha(nv, hp)
    W = initial_w(n, nv, hp)
    return FactorizationState(U=U, V=V, consensus=consensus, alpha=alpha, W=W)


def initial_alpha(n_views: int, hp: HyperParams) -> np.ndarray:
    if hp.mode is Mode.MULTINMF2:
        return np.full(n_views, MULTINMF2_ALPHA)
    if hp.fixed_alpha is not None:
        a = np.asarray(hp.fixed_alpha, dtype=float)
        if a.shape != (n_views,):
            raise InvalidHyperParams(f"fixed_alpha needs {n_views} entries")
        return a.copy()
    return np.full(n_views, 1.0 / n_views)


def initial_w(n_obs: int, n_views: int, hp: HyperParams) -> np.ndarray:
    if hp.fixed_w is not None:
        w = np.asarray(hp.fixed_w, dtype=float)
        if w.shape != (n_obs, n_views) or np.any(w < 0):
            raise InvalidHyperParams(f"fixed_w must be a nonnegative {n_obs}x{n_views} matrix")
        return w.copy()
    return np.full((n_obs, n_views), 1.0 / n_views)


def state_invariant_violations(state: FactorizationState, mode: Mode = Mode.WM_NMF, tol: float = 1e-12) -> list:
    """Return human-readable descriptions of broken state invariants."""
    problems = []
    for s, (u, v) in enumerate(zip(state.U, state.V)):
        if not np.all(u > 0):
            problems.append(f"U[{s}] has non-positive entries")
        if not np.all(v > 0):
            problems.append(f"V[{s}] has non-positive entries")
    if np.any(state.consensus < 0):
        problems.append("consensus has negative entries")
    if np.any(state.alpha < 0):
        problems.append("alpha has negative entries")
    if mode is not Mode.MULTINMF2 and abs(state.alpha.sum() - 1.0) > tol:
        problems.append(f"alpha sums to {state.alpha.sum()!r}")
    if np.any(state.W < 0):
        problems.append("W has negative entries")
    rows = np.abs(state.W.sum(axis=1) - 1.0)
    if rows.size and rows.max() > tol:
        problems.append(f"W rows deviate from 1 by up to {rows.max():.3g}")
    return problems
