"""Multi-view Gaussian-mixture benchmark data with controlled corruption."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from typing import Optional

import numpy as np
from scipy.linalg import toeplitz

from .core import MultiViewDataset, ValidationError, validate_dataset


class InvalidSpec(ValidationError):
    pass


class RangeOutOfBounds(ValidationError):
    pass


@dataclass(frozen=True)
class Corruption:
    """Gaussian noise on observations ``start <= i < stop``."""

    start: int
    stop: int
    noise_mean: float = 0.0
    noise_sd: float = 1.0
    replace: bool = False


@dataclass(frozen=True)
class ViewSpec:
    n_features: int
    mean_offset: float = 10.0
    variance_scale: float = 1.0
    corruption: Optional[Corruption] = None
    copy_of: Optional[int] = None


@dataclass(frozen=True)
class SynthSpec:
    n_obs: int
    n_clusters: int
    views: tuple
    seed: int = 0
    nonneg: str = "clip"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        views = []
        for v in d["views"]:
            v = dict(v)
            if v.get("corruption") is not None:
                v["corruption"] = Corruption(**v["corruption"])
            views.append(ViewSpec(**v))
        return cls(
            n_obs=int(d["n_obs"]),
            n_clusters=int(d["n_clusters"]),
            views=tuple(views),
            seed=int(d.get("seed", 0)),
            nonneg=d.get("nonneg", "clip"),
        )

    def with_seed(self, seed: int) -> "SynthSpec":
        return replace(self, seed=int(seed))


def check_spec(spec: SynthSpec) -> None:
    if spec.n_clusters < 1 or spec.n_obs < spec.n_clusters:
        raise InvalidSpec("need n_obs >= n_clusters >= 1")
    if not spec.views:
        raise InvalidSpec("at least one view is required")
    if spec.nonneg not in ("clip", "shift"):
        raise InvalidSpec(f"unknown nonneg transform {spec.nonneg!r}")
    for s, v in enumerate(spec.views):
        if v.n_features < 1:
            raise InvalidSpec(f"view {s}: n_features must be >= 1")
        if v.variance_scale <= 0:
            raise InvalidSpec(f"view {s}: variance_scale must be > 0")
        if v.copy_of is not None:
            if not 0 <= v.copy_of < len(spec.views) or v.copy_of == s:
                raise InvalidSpec(f"view {s}: copy_of={v.copy_of} is not another view")
            if spec.views[v.copy_of].copy_of is not None:
                raise InvalidSpec(f"view {s}: cannot copy a view that is itself a copy")
        c = v.corruption
        if c is not None:
            if not (0 <= c.start <= c.stop <= spec.n_obs):
                raise InvalidSpec(
                    f"view {s}: corruption range [{c.start}, {c.stop}) outside [0, {spec.n_obs})"
                )
            if c.noise_sd < 0:
                raise InvalidSpec(f"view {s}: noise_sd must be >= 0")


def balanced_labels(n_obs: int, n_clusters: int, rng: np.random.Generator) -> np.ndarray:
    """Cluster sizes differing by at most one, in random order."""
    labels = np.arange(n_obs) % n_clusters
    rng.shuffle(labels)
    return labels


def toeplitz_power_covariance(n_features: int, b: float) -> np.ndarray:
    """(b * ones) raised entrywise to a zero-diagonal symmetric Toeplitz matrix.

    The exponent matrix is toeplitz(0, 1, ..., M-1), so entry (i, j) is
    b^|i-j|. For b outside (0, 1) the result may be indefinite, in which
    case it is projected onto the PSD cone.
    """
    cov = np.power(b, toeplitz(np.arange(n_features)))
    return nearest_psd(cov)


def nearest_psd(cov: np.ndarray, floor: float = 1e-8) -> np.ndarray:
    vals, vecs = np.linalg.eigh(cov)
    if vals.min() >= floor:
        return cov
    vals = np.maximum(vals, floor)
    return (vecs * vals) @ vecs.T


def _noise(shape, c: Corruption, rng) -> np.ndarray:
    return rng.normal(c.noise_mean, c.noise_sd, size=shape) if c.noise_sd > 0 else np.full(shape, float(c.noise_mean))


def _apply_corruption(X: np.ndarray, c: Corruption, rng) -> np.ndarray:
    out = X.copy()
    if c.stop <= c.start:
        return out
    block = _noise((X.shape[0], c.stop - c.start), c, rng)
    if c.replace:
        out[:, c.start:c.stop] = block
    else:
        out[:, c.start:c.stop] += block
    return out


def _make_nonneg(X: np.ndarray, how: str) -> np.ndarray:
    if how == "shift":
        lo = X.min()
        return X - lo if lo < 0 else X
    return np.maximum(X, 0.0)


def _gaussian_view(v: ViewSpec, labels: np.ndarray, k: int, rng) -> np.ndarray:
    m = v.n_features
    centre_means = rng.uniform(v.mean_offset, v.mean_offset + 10.0, size=(k, m))
    centres = rng.normal(centre_means, 1.0)
    b = rng.uniform(0.1, 1.0)
    cov = v.variance_scale * toeplitz_power_covariance(m, b)
    chol = np.linalg.cholesky(cov + 1e-12 * np.eye(m))
    z = rng.standard_normal((labels.shape[0], m))
    return (centres[labels] + z @ chol.T).T


def generate(spec: SynthSpec) -> MultiViewDataset:
    """Draw a labelled multi-view dataset from ``spec``; views are M_s x N."""
    check_spec(spec)
    rng = np.random.default_rng(spec.seed)
    labels = balanced_labels(spec.n_obs, spec.n_clusters, rng)
    raw = [None] * len(spec.views)
    for s, v in enumerate(spec.views):
        if v.copy_of is None:
            raw[s] = _gaussian_view(v, labels, spec.n_clusters, rng)
    for s, v in enumerate(spec.views):
        if v.copy_of is not None:
            raw[s] = raw[v.copy_of].copy()
    views = []
    for s, v in enumerate(spec.views):
        X = raw[s]
        if v.corruption is not None:
            X = _apply_corruption(X, v.corruption, rng)
        views.append(_make_nonneg(X, spec.nonneg))
    names = [f"view{s + 1}" for s in range(len(views))]
    return validate_dataset(views, labels=labels, view_names=names)


def corrupt(view, obs_range, noise_mean: float, noise_sd: float, seed=None,
            replace: bool = False) -> np.ndarray:
    """Add (or substitute) Gaussian noise on a range of observation columns.

    The result is clipped at zero so it stays a valid view.
    """
    X = np.asarray(view, dtype=float)
    start, stop = obs_range
    if not (0 <= start <= stop <= X.shape[1]):
        raise RangeOutOfBounds(f"range [{start}, {stop}) outside [0, {X.shape[1]}]")
    c = Corruption(int(start), int(stop), float(noise_mean), float(noise_sd), bool(replace))
    return np.maximum(_apply_corruption(X, c, np.random.default_rng(seed)), 0.0)


def _scaled(n: int, full_n: int, n_obs: int) -> int:
    return int(round(n * n_obs / full_n))


def synth1(n_obs: int = 5000, n_clusters: int = 10, seed: int = 0) -> SynthSpec:
    """Six views: four clean, view 5 a noisy copy of view 1, view 6 of view 3.

    Noise is N(0, 5) on the first 300 and N(0, 10) on the first 1000 of
    5000 observations (variances); ranges shrink proportionally with N.
    """
    feats = (100, 150, 50, 200)
    offsets = (10.0, 20.0, 30.0, 40.0)
    views = [ViewSpec(m, a) for m, a in zip(feats, offsets)]
    views.append(ViewSpec(100, 10.0, copy_of=0,
                          corruption=Corruption(0, _scaled(300, 5000, n_obs), 0.0, math.sqrt(5.0))))
    views.append(ViewSpec(50, 30.0, copy_of=2,
                          corruption=Corruption(0, _scaled(1000, 5000, n_obs), 0.0, math.sqrt(10.0))))
    return SynthSpec(n_obs=n_obs, n_clusters=n_clusters, views=tuple(views), seed=seed)


SYNTH2_VARIANCE_SCALE = 4.0


def synth2(n_obs: int = 2000, n_clusters: int = 10, seed: int = 0) -> SynthSpec:
    """Four views; view 2 has inflated variance, view 4 noisy at the end.

    The last 500 of 2000 observations of view 4 get N(45, 20) noise.
    """
    n_bad = _scaled(500, 2000, n_obs)
    views = (
        ViewSpec(100, 10.0),
        ViewSpec(100, 20.0, variance_scale=SYNTH2_VARIANCE_SCALE),
        ViewSpec(100, 30.0),
        ViewSpec(100, 40.0, corruption=Corruption(n_obs - n_bad, n_obs, 45.0, math.sqrt(20.0))),
    )
    return SynthSpec(n_obs=n_obs, n_clusters=n_clusters, views=views, seed=seed)


DESK_N = 800

PRESETS = {
    "synth1": lambda seed=0: synth1(5000, 10, seed),
    "synth1-desk": lambda seed=0: synth1(DESK_N, 10, seed),
    "synth1-4": lambda seed=0: synth1(5000, 4, seed),
    "synth1-4-desk": lambda seed=0: synth1(DESK_N, 4, seed),
    "synth2": lambda seed=0: synth2(2000, 10, seed),
    "synth2-desk": lambda seed=0: synth2(DESK_N, 10, seed),
}


def preset(name: str, seed: int = 0) -> SynthSpec:
    try:
        return PRESETS[name](seed)
    except KeyError:
        raise InvalidSpec(f"unknown preset {name!r}; known: {', '.join(sorted(PRESETS))}") from None


def corrupted_range(spec: SynthSpec, view: int) -> range:
    c = spec.views[view].corruption
    return range(0) if c is None else range(c.start, c.stop)


def resize_spec(spec: SynthSpec, axis: str, level: int) -> SynthSpec:
    """Copy of ``spec`` with one size axis changed (``N``, ``n_v`` or ``M``).

    Corruption ranges follow N proportionally. For ``n_v`` the clean
    views are cycled (with shifted offsets) and copy views are dropped.
    """
    level = int(level)
    if axis == "N":
        views = []
        for v in spec.views:
            c = v.corruption
            if c is not None:
                c = replace(c, start=_scaled(c.start, spec.n_obs, level),
                            stop=_scaled(c.stop, spec.n_obs, level))
            views.append(replace(v, corruption=c))
        return replace(spec, n_obs=level, views=tuple(views))
    if axis == "M":
        return replace(spec, views=tuple(replace(v, n_features=level) for v in spec.views))
    if axis == "n_v":
        clean = [replace(v, corruption=None) for v in spec.views if v.copy_of is None]
        views = []
        for s in range(level):
            v = clean[s % len(clean)]
            views.append(replace(v, mean_offset=v.mean_offset + 10.0 * (s // len(clean))))
        return replace(spec, views=tuple(views))
    raise ValueError(f"cannot resize axis {axis!r}")
