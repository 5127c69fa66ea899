"""Generalization-bound calculators and empirical probes of the weighting scheme."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import HyperParams, MultiViewDataset, ValidationError, normalize_views
from .updates import update_alpha


class NegativeLogArgument(ValidationError):
    pass


@dataclass(frozen=True)
class BoundInputs:
    """Parameters of the reconstruction-error generalization bounds.

    ``B`` bounds the data (1 after normalization) and ``b`` is the range of
    the weighted loss, which defaults to ``w_star**2``.
    """

    N: int
    M: int
    K: int
    w_star: float
    delta: float
    B: float = 1.0
    b: Optional[float] = None

    def __post_init__(self):
        if self.N <= 0 or self.M <= 0 or self.K <= 0:
            raise ValidationError("N, M and K must be positive")
        if not (0 < self.w_star <= 1):
            raise ValidationError("w_star must lie in (0, 1]")
        if not (0 < self.delta < 1):
            raise ValidationError("delta must lie in (0, 1)")
        if self.B <= 0 or (self.b is not None and self.b <= 0):
            raise ValidationError("B and b must be positive")

    @property
    def loss_range(self) -> float:
        return self.w_star ** 2 if self.b is None else self.b


def dim_dependent_terms(inp: BoundInputs) -> tuple:
    """(2/N, b * sqrt(...)) pieces of the covering-number bound."""
    N, M, K, w = inp.N, inp.M, inp.K, inp.w_star
    log_arg = 4 * (inp.B + K) * math.sqrt(M) * K * N * w ** 2
    inner = M * K * math.log(log_arg) - math.log(inp.delta / 2)
    if inner < 0:
        raise NegativeLogArgument(f"bound radicand is negative ({inner:g}) for {inp}")
    return 2.0 / N, inp.loss_range * math.sqrt(inner / (2 * N))


def dim_dependent_bound(inp: BoundInputs) -> float:
    a, b = dim_dependent_terms(inp)
    return a + b


def dim_independent_terms(inp: BoundInputs) -> tuple:
    """(Rademacher term, confidence term) of the dimension-free bound."""
    N, K, w = inp.N, inp.K, inp.w_star
    rad = w * (4 * K * math.sqrt(math.pi / N) + 2 * K ** 2 * math.sqrt(math.pi / N))
    conf = inp.loss_range * math.sqrt(math.log(1 / inp.delta) / (2 * N))
    return rad, conf


def dim_independent_bound(inp: BoundInputs) -> float:
    a, b = dim_independent_terms(inp)
    return a + b


@dataclass(frozen=True)
class SparsityRow:
    p: float
    alpha: np.ndarray
    max_alpha: float
    entropy: float


def sparsity_probe(distances: Sequence[float], p_grid: Sequence[float]) -> list:
    """View weights and their concentration for each exponent in ``p_grid``."""
    d = np.asarray(distances, dtype=float)
    grid = [float(p) for p in p_grid]
    if any(p <= 1 for p in grid) or any(b < a for a, b in zip(grid, grid[1:])):
        raise ValidationError("p_grid must be ascending with every p > 1")
    rows = []
    for p in grid:
        a = update_alpha(d, p)
        nz = a[a > 0]
        rows.append(SparsityRow(float(p), a, float(a.max()), float(-np.sum(nz * np.log(nz)))))
    return rows


def perturb_views(ds: MultiViewDataset, level: float, rng: np.random.Generator,
                  relative: bool = True) -> MultiViewDataset:
    """Add Gaussian noise of Frobenius norm ``level`` to every view.

    With ``relative`` the norm is ``level * ||X_s||_F``. The result is
    clipped at zero and renormalized.
    """
    if level == 0:
        return ds
    views = []
    for X in ds.views:
        E = rng.standard_normal(X.shape)
        target = level * (np.linalg.norm(X) if relative else 1.0)
        E *= target / np.linalg.norm(E)
        views.append(np.maximum(X + E, 0.0))
    noisy = MultiViewDataset(views=tuple(views), labels=ds.labels, view_names=ds.view_names)
    return normalize_views(noisy)


def solution_distance(run_a, run_b) -> float:
    """sum_s ||U_s - U'_s||_F + ||V_s - V'_s||_F."""
    a, b = run_a.final_state, run_b.final_state
    return float(sum(np.linalg.norm(u - u2) + np.linalg.norm(v - v2)
                     for u, u2, v, v2 in zip(a.U, b.U, a.V, b.V)))


@dataclass(frozen=True)
class PerturbationPoint:
    level: float
    mean_distance: float
    distances: tuple


def perturbation_probe(ds: MultiViewDataset, hp: HyperParams, noise_levels: Sequence[float],
                       trials: int = 10, seed: int = 0, relative: bool = True) -> list:
    """Solution drift of the solver under input noise of increasing size.

    For each trial the clean data and its perturbations are fit from the
    same initialization seed (``hp.seed + trial``).
    """
    from .solver import fit

    levels = [float(x) for x in noise_levels]
    if any(b < a for a, b in zip(levels, levels[1:])):
        raise ValidationError("noise_levels must be ascending")
    base = normalize_views(ds)
    dists = {lv: [] for lv in levels}
    for t in range(trials):
        trial_hp = hp.with_(seed=hp.seed + t)
        clean = fit(base, trial_hp, normalize=False)
        for lv in levels:
            if lv == 0:
                dists[lv].append(0.0)
                continue
            rng = np.random.default_rng([seed, t, int(round(lv * 1e12))])
            noisy = fit(perturb_views(base, lv, rng, relative), trial_hp, normalize=False)
            dists[lv].append(solution_distance(clean, noisy))
    return [PerturbationPoint(lv, float(np.mean(dists[lv])), tuple(dists[lv])) for lv in levels]
