"""Cross K-functions, location-specific K-functions and multi-scale densities.

K-functions here are the plain Ripley-style estimators without edge
correction: the pair (or point) count within radius ``r`` scaled by the domain
area over the class sizes.  Distances use the strict ``d < r`` convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .layout import BandwidthSet, CellLayout, RadiusGrid

__all__ = [
    "KFunctionVector",
    "DensityVector",
    "cross_k",
    "cross_k_matrix",
    "cross_k_arrays",
    "location_k",
    "multiscale_density",
    "k_distance",
    "concat_k",
    "SMALL_CLASS",
]

# classes with fewer cells than this get flagged (their metrics are unreliable)
SMALL_CLASS = 5

_CHUNK = 2048


def _ro(a):
    a = np.asarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class KFunctionVector:
    values: np.ndarray
    radii: np.ndarray
    target_class: int
    source_class: int | None = None
    location: tuple[float, float] | None = None
    n_source: int = 0
    n_target: int = 0
    degenerate: bool = False

    def __post_init__(self):
        object.__setattr__(self, "values", _ro(self.values))
        object.__setattr__(self, "radii", _ro(self.radii))

    def __len__(self):
        return len(self.values)

    @property
    def small_class(self) -> bool:
        """True when a participating class has fewer than ``SMALL_CLASS`` cells."""
        sizes = [self.n_target] if self.source_class is None else [self.n_source, self.n_target]
        return min(sizes) < SMALL_CLASS

    def to_dict(self) -> dict:
        d = {
            "target_class": self.target_class,
            "values": self.values.tolist(),
            "degenerate": self.degenerate,
        }
        if self.source_class is not None:
            d["source_class"] = self.source_class
        if self.location is not None:
            d["location"] = list(self.location)
        return d


@dataclass(frozen=True, eq=False)
class DensityVector:
    values: np.ndarray
    sigmas: np.ndarray
    location: tuple[float, float]
    target_class: int | None = None  # None means all classes

    def __post_init__(self):
        object.__setattr__(self, "values", _ro(self.values))
        object.__setattr__(self, "sigmas", _ro(self.sigmas))

    def __len__(self):
        return len(self.values)


def _radii(radii) -> np.ndarray:
    if isinstance(radii, RadiusGrid):
        return radii.radii
    return RadiusGrid(radii).radii


def _sigmas(sigmas) -> np.ndarray:
    if isinstance(sigmas, BandwidthSet):
        return sigmas.sigmas
    return BandwidthSet(sigmas).sigmas


def _pair_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    dx = a[:, None, 0] - b[None, :, 0]
    dy = a[:, None, 1] - b[None, :, 1]
    return np.sqrt(dx * dx + dy * dy)


def _row_counts(d: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """``out[i, k] = #{j: d[i, j] < radii[k]}``."""
    if d.size * len(radii) <= 1_000_000:
        return np.count_nonzero(d[:, :, None] < radii[None, None, :], axis=1)
    s = np.sort(d, axis=1)
    return np.stack([np.searchsorted(row, radii, side="left") for row in s]).reshape(len(d), len(radii))


def _count_within(a: np.ndarray, b: np.ndarray, radii: np.ndarray, exclude_self: bool) -> np.ndarray:
    """Number of ordered pairs (i, j) with ``|a_i - b_j| < r`` for every r."""
    counts = np.zeros(len(radii), dtype=np.int64)
    for start in range(0, len(a), _CHUNK):
        d = _pair_distances(a[start:start + _CHUNK], b)
        if exclude_self:
            rows = np.arange(len(d))
            d[rows, rows + start] = np.inf
        counts += _row_counts(d, radii).sum(axis=0)
    return counts


def cross_k_arrays(xy: np.ndarray, labels: np.ndarray, n_classes: int, radii: np.ndarray, area: float) -> np.ndarray:
    """Cross K for every (source, target) pair of an in-memory point set.

    Same arithmetic as :func:`cross_k`, shape ``(C, C, len(radii))``.
    """
    out = np.zeros((n_classes, n_classes, len(radii)))
    d = _pair_distances(xy, xy)
    np.fill_diagonal(d, np.inf)
    n = np.bincount(labels, minlength=n_classes)
    per_point = np.zeros((n_classes, len(xy), len(radii)), dtype=np.int64)
    for t in range(n_classes):
        if n[t]:
            per_point[t] = _row_counts(d[:, labels == t], radii)
    for s in range(n_classes):
        if n[s] == 0:
            continue
        rows = labels == s
        for t in range(n_classes):
            n_pairs = n[s] * (n[s] - 1) if s == t else n[s] * n[t]
            if n_pairs:
                out[s, t] = (area / n_pairs) * per_point[t][rows].sum(axis=0)
    return out


def cross_k(layout: CellLayout, source: int, target: int, radii) -> KFunctionVector:
    """Cross K-function of ``target`` cells around ``source`` cells.

    ``values[i] = area / (n_s * n_t) * #{(s, t): d(s, t) < r_i}``.  For
    ``source == target`` self-pairs are skipped and the scale is
    ``area / (n (n - 1))``.  When no valid pair exists the result is all-zero
    with ``degenerate=True``.
    """
    r = _radii(radii)
    layout.check_class(source)
    layout.check_class(target)
    ps, pt = layout.points_of(source), layout.points_of(target)
    ns, nt = len(ps), len(pt)
    same = source == target
    n_pairs = ns * (ns - 1) if same else ns * nt
    if n_pairs == 0:
        return KFunctionVector(np.zeros(len(r)), r, target, source, None, ns, nt, degenerate=True)
    counts = _count_within(ps, pt, r, exclude_self=same)
    scale = layout.area / n_pairs
    return KFunctionVector(scale * counts, r, target, source, None, ns, nt)


def cross_k_matrix(layout: CellLayout, radii) -> np.ndarray:
    """All class pairs at once: array of shape ``(C, C, len(radii))``, [source, target]."""
    r = _radii(radii)
    if len(layout) > _CHUNK:
        c = layout.n_classes
        return np.array([[cross_k(layout, s, t, r).values for t in range(c)] for s in range(c)]).reshape(c, c, len(r))
    return cross_k_arrays(layout.xy, layout.labels, layout.n_classes, r, layout.area)


def location_k_block(targets: np.ndarray, centers: np.ndarray, radii: np.ndarray, area: float) -> np.ndarray:
    """Location K-function of one target set evaluated at many centers.

    Returns shape ``(len(centers), len(radii))``; zero rows when ``targets`` is empty.
    """
    if len(targets) == 0 or len(centers) == 0:
        return np.zeros((len(centers), len(radii)))
    return (area / len(targets)) * _row_counts(_pair_distances(centers, targets), radii)


def density_block(points: np.ndarray, centers: np.ndarray, sigmas: np.ndarray) -> np.ndarray:
    """Sum of normalized 2D Gaussian kernels, shape ``(len(centers), len(sigmas))``."""
    out = np.zeros((len(centers), len(sigmas)))
    if len(points) == 0 or len(centers) == 0:
        return out
    dx = centers[:, None, 0] - points[None, :, 0]
    dy = centers[:, None, 1] - points[None, :, 1]
    d2 = dx * dx + dy * dy
    for j, s in enumerate(sigmas):
        var = s * s
        out[:, j] = np.exp(-d2 / (2.0 * var)).sum(axis=1) / (2.0 * np.pi * var)
    return out


def _check_location(layout: CellLayout, x) -> np.ndarray:
    loc = np.asarray(x, dtype=np.float64).reshape(-1)
    if loc.shape != (2,) or not np.all(np.isfinite(loc)):
        raise ValidationError(f"location must be a finite (x, y) pair, got {x!r}")
    if not layout.contains(loc):
        raise ValidationError(f"location {tuple(loc)} lies outside domain {layout.domain}")
    return loc


def location_k(layout: CellLayout, x, target: int, radii) -> KFunctionVector:
    """K-function of ``target`` cells around an arbitrary location ``x``.

    ``values[i] = area / n_t * #{t: d(x, t) < r_i}``.
    """
    r = _radii(radii)
    loc = _check_location(layout, x)
    layout.check_class(target)
    pt = layout.points_of(target)
    vals = location_k_block(pt, loc[None, :], r, layout.area)[0]
    return KFunctionVector(
        vals, r, target, None, (float(loc[0]), float(loc[1])), 0, len(pt), degenerate=len(pt) == 0
    )


def multiscale_density(layout: CellLayout, x, target: int | None, sigmas) -> DensityVector:
    """Kernel density at ``x`` for several Gaussian bandwidths.

    The kernels are summed, not averaged, so the value grows with the local
    cell count.  ``target=None`` uses every class.
    """
    s = _sigmas(sigmas)
    loc = _check_location(layout, x)
    pts = layout.points_of(target)
    vals = density_block(pts, loc[None, :], s)[0]
    return DensityVector(vals, s, (float(loc[0]), float(loc[1])), target)


def concat_k(vectors: Sequence[KFunctionVector]) -> np.ndarray:
    """Concatenate per-target-class vectors in class-id order."""
    vs = sorted(vectors, key=lambda v: v.target_class)
    return np.concatenate([v.values for v in vs]) if vs else np.zeros(0)


def _as_values(v) -> np.ndarray:
    if isinstance(v, KFunctionVector):
        return v.values
    if isinstance(v, (list, tuple)) and v and isinstance(v[0], KFunctionVector):
        return concat_k(v)
    return np.asarray(v, dtype=np.float64).reshape(-1)


def k_distance(a, b) -> float:
    """Euclidean distance between two (possibly concatenated) K-function vectors."""
    va, vb = _as_values(a), _as_values(b)
    if va.shape != vb.shape:
        raise ValidationError(f"K vectors differ in length: {len(va)} vs {len(vb)}")
    if isinstance(a, KFunctionVector) and isinstance(b, KFunctionVector):
        if not np.array_equal(a.radii, b.radii):
            raise ValidationError("K vectors were sampled on different radius grids")
    return float(np.linalg.norm(va - vb))
