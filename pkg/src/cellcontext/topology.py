"""Distance-transform filtration, hole persistence and enriched diagrams."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import DegenerateInputError, ValidationError
from .layout import BandwidthSet, CellLayout, RadiusGrid
from .spatial import density_block, location_k_block

__all__ = [
    "DistanceField",
    "PersistencePoint",
    "EnrichedPersistenceDiagram",
    "DiagramFeature",
    "grid_axes",
    "default_h",
    "distance_transform",
    "persistence_h1",
    "enrich_diagram",
    "per_class_diagrams",
    "union_diagram",
    "vectorize_diagram",
    "default_buckets",
]

GRID_DIVISIONS = 512
MAX_H_FRACTION = 0.05
FLOOR_FACTOR = 2.0


def default_h(layout_or_domain) -> float:
    dom = layout_or_domain.domain if isinstance(layout_or_domain, CellLayout) else layout_or_domain
    return min(dom[2] - dom[0], dom[3] - dom[1]) / GRID_DIVISIONS


def grid_axes(domain, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Node coordinates of the analysis grid: ``x0 + j*h`` up to ``x1`` (inclusive)."""
    x0, y0, x1, y1 = domain
    nx = int(math.floor((x1 - x0) / h + 1e-9)) + 1
    ny = int(math.floor((y1 - y0) / h + 1e-9)) + 1
    return x0 + h * np.arange(nx), y0 + h * np.arange(ny)


@dataclass(frozen=True, eq=False)
class DistanceField:
    """Distance to the nearest cell sampled on a regular grid.

    ``grid[i, j]`` is the value at ``(xs[j], ys[i])``; ``origin`` is node (0, 0).
    """

    grid: np.ndarray
    h: float
    xs: np.ndarray
    ys: np.ndarray

    @property
    def origin(self) -> tuple[float, float]:
        return float(self.xs[0]), float(self.ys[0])

    @property
    def shape(self):
        return self.grid.shape

    def node_xy(self, flat_index: int) -> tuple[float, float]:
        i, j = divmod(int(flat_index), len(self.xs))
        return float(self.xs[j]), float(self.ys[i])


@dataclass(frozen=True)
class PersistencePoint:
    birth: float
    death: float
    center: tuple[float, float]
    cell: tuple[int, int] = (-1, -1)  # (row, col) of the grid node that fills the hole

    @property
    def persistence(self) -> float:
        return self.death - self.birth


def _check_h(domain, h: float) -> float:
    h = float(h)
    shorter = min(domain[2] - domain[0], domain[3] - domain[1])
    if not (h > 0) or h > MAX_H_FRACTION * shorter * (1 + 1e-12):
        raise ValidationError(
            f"grid spacing {h} must be in (0, {MAX_H_FRACTION} * shorter side = {MAX_H_FRACTION * shorter}]"
        )
    return h


def edt_grid(points: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    order = np.lexsort((points[:, 0], points[:, 1]))
    p = np.ascontiguousarray(points[order])
    return _kernels.edt_sites(p[:, 0].copy(), p[:, 1].copy(), xs, ys)


def distance_transform(layout: CellLayout, class_filter: int | None = None, h: float | None = None) -> DistanceField:
    """Exact Euclidean distance transform of one class (or all cells) on the grid."""
    if h is None:
        h = default_h(layout)
    h = _check_h(layout.domain, h)
    pts = layout.points_of(class_filter)
    if len(pts) == 0:
        raise DegenerateInputError(
            "no cells to build a distance transform from"
            + ("" if class_filter is None else f" (class {class_filter})")
        )
    xs, ys = grid_axes(layout.domain, h)
    grid = edt_grid(pts, xs, ys)
    grid.setflags(write=False)
    return DistanceField(grid, h, xs, ys)


def h1_arrays(grid: np.ndarray, floor: float):
    """Raw (birth, death, flat vertex) arrays above ``floor``, in canonical order."""
    b, d, v = _kernels.grid_h1_pairs(grid)
    keep = (d - b) > floor
    b, d, v = b[keep], d[keep], v[keep]
    order = np.lexsort((v, -(d - b)))
    return b[order], d[order], v[order]


def persistence_h1(field: DistanceField, floor: float | None = None) -> list[PersistencePoint]:
    """Holes of the sublevel filtration of a distance field.

    Each point's ``center`` is the grid node whose entry fills the hole (a local
    maximum of the field).  Features with persistence ``<= floor`` (default
    ``2h``) are treated as pixelation noise and dropped.  Output is sorted by
    decreasing persistence, then by (row, col) of the center.
    """
    if floor is None:
        floor = FLOOR_FACTOR * field.h
    b, d, v = h1_arrays(np.ascontiguousarray(field.grid), floor)
    nx = len(field.xs)
    return [
        PersistencePoint(float(bi), float(di), field.node_xy(vi), divmod(int(vi), nx))
        for bi, di, vi in zip(b, d, v)
    ]


@dataclass(frozen=True, eq=False)
class EnrichedPersistenceDiagram:
    """Persistence points of one class, each carrying K and density enrichments.

    ``k_vectors[i]`` is the concatenation of the location K-functions of every
    target class (class-id order) at hole ``i``'s center; ``densities[i]`` its
    multi-scale density vector.  ``class_id`` is None for the all-classes diagram.
    """

    class_id: int | None
    points: tuple[PersistencePoint, ...]
    k_vectors: np.ndarray
    densities: np.ndarray
    n_cells: int = 0

    def __post_init__(self):
        for name in ("k_vectors", "densities"):
            a = np.asarray(getattr(self, name), dtype=np.float64)
            a = a.reshape(len(self.points), -1) if a.ndim != 2 else a
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        object.__setattr__(self, "points", tuple(self.points))
        if self.k_vectors.shape[0] != len(self.points) or self.densities.shape[0] != len(self.points):
            raise ValidationError("enrichment rows must match the number of points")

    def __len__(self):
        return len(self.points)

    @property
    def k_arity(self) -> int:
        return self.k_vectors.shape[1]

    @property
    def density_arity(self) -> int:
        return self.densities.shape[1]

    def births(self) -> np.ndarray:
        return np.array([p.birth for p in self.points])

    def deaths(self) -> np.ndarray:
        return np.array([p.death for p in self.points])

    def persistences(self) -> np.ndarray:
        return np.array([p.persistence for p in self.points])

    def pairs(self) -> np.ndarray:
        """``(n, 2)`` array of (birth, death)."""
        return np.array([[p.birth, p.death] for p in self.points]).reshape(-1, 2)

    def to_dict(self) -> dict:
        return {
            "class_id": self.class_id,
            "n_cells": self.n_cells,
            "points": [
                {
                    "birth": p.birth,
                    "death": p.death,
                    "center": list(p.center),
                    "k_vec": self.k_vectors[i].tolist(),
                    "density_vec": self.densities[i].tolist(),
                }
                for i, p in enumerate(self.points)
            ],
        }

    @classmethod
    def from_dict(cls, d: dict, k_arity: int | None = None, density_arity: int | None = None):
        pts = d.get("points", [])
        points = [PersistencePoint(float(p["birth"]), float(p["death"]), tuple(map(float, p["center"]))) for p in pts]
        kv = np.array([p.get("k_vec", []) for p in pts], dtype=np.float64)
        dv = np.array([p.get("density_vec", []) for p in pts], dtype=np.float64)
        if not pts:
            kv = np.zeros((0, k_arity or 0))
            dv = np.zeros((0, density_arity or 0))
        return cls(d.get("class_id"), points, kv, dv, int(d.get("n_cells", 0)))


def enrichment_arrays(layout_xy, labels, n_classes, area, centers, radii, sigmas, per_class_density=False):
    """K and density enrichment rows for hole centers (array form)."""
    k_blocks = [location_k_block(layout_xy[labels == c], centers, radii, area) for c in range(n_classes)]
    kv = np.concatenate(k_blocks, axis=1) if k_blocks else np.zeros((len(centers), 0))
    if per_class_density:
        dv = np.concatenate(
            [density_block(layout_xy[labels == c], centers, sigmas) for c in range(n_classes)], axis=1
        )
    else:
        dv = density_block(layout_xy, centers, sigmas)
    return kv, dv


def _radii(r):
    return r.radii if isinstance(r, RadiusGrid) else RadiusGrid(r).radii


def _sigmas(s):
    return s.sigmas if isinstance(s, BandwidthSet) else BandwidthSet(s).sigmas


def enrich_diagram(
    points: Sequence[PersistencePoint],
    layout: CellLayout,
    radii,
    sigmas,
    class_id: int | None = None,
    per_class_density: bool = False,
) -> EnrichedPersistenceDiagram:
    """Attach location K-functions (every class) and multi-scale density at each hole center."""
    r, s = _radii(radii), _sigmas(sigmas)
    centers = np.array([p.center for p in points], dtype=np.float64).reshape(-1, 2)
    for c in centers:
        if not layout.contains(c):
            raise ValidationError(f"hole center {tuple(c)} outside domain {layout.domain}")
    kv, dv = enrichment_arrays(
        layout.xy, layout.labels, layout.n_classes, layout.area, centers, r, s, per_class_density
    )
    n_cells = len(layout) if class_id is None else int(layout.counts()[class_id])
    return EnrichedPersistenceDiagram(class_id, tuple(points), kv, dv, n_cells)


def per_class_diagrams(
    layout: CellLayout,
    h: float | None = None,
    radii=None,
    sigmas=None,
    floor: float | None = None,
    per_class_density: bool = False,
) -> list[EnrichedPersistenceDiagram]:
    """One enriched diagram per class; the filtration uses only that class's
    cells, the enrichment the whole layout."""
    if h is None:
        h = default_h(layout)
    radii = RadiusGrid.default_for(layout.shorter_side) if radii is None else radii
    sigmas = BandwidthSet.default_for(layout.shorter_side) if sigmas is None else sigmas
    out = []
    for c in range(layout.n_classes):
        if layout.counts()[c] == 0:
            pts = []
        else:
            pts = persistence_h1(distance_transform(layout, c, h), floor)
        out.append(enrich_diagram(pts, layout, radii, sigmas, c, per_class_density))
    return out


def union_diagram(layout, h=None, radii=None, sigmas=None, floor=None, per_class_density=False):
    """Diagram of all cells regardless of class (``class_id`` None)."""
    if h is None:
        h = default_h(layout)
    radii = RadiusGrid.default_for(layout.shorter_side) if radii is None else radii
    sigmas = BandwidthSet.default_for(layout.shorter_side) if sigmas is None else sigmas
    pts = [] if len(layout) == 0 else persistence_h1(distance_transform(layout, None, h), floor)
    return enrich_diagram(pts, layout, radii, sigmas, None, per_class_density)


# ---------------------------------------------------------------------------
# vectorization


@dataclass(frozen=True, eq=False)
class DiagramFeature:
    log_histogram: np.ndarray
    buckets: tuple[float, ...] = field(default=())

    def __len__(self):
        return len(self.log_histogram)


def default_buckets(shorter_side: float) -> list[float]:
    return [f * shorter_side for f in (0.0, 0.01, 0.02, 0.04, 0.08, 0.16)]


def _check_buckets(buckets) -> np.ndarray:
    b = np.asarray(list(buckets), dtype=np.float64).reshape(-1)
    if b.size and np.isinf(b[-1]) and b[-1] > 0:
        b = b[:-1]
    if b.size == 0 or b[0] != 0.0:
        raise ValidationError(f"bucket boundaries must start at 0, got {list(buckets)}")
    if not np.all(np.isfinite(b)) or np.any(np.diff(b) <= 0):
        raise ValidationError(f"bucket boundaries must be finite and strictly increasing: {list(buckets)}")
    return b


def vectorize_diagram(diagram, buckets) -> DiagramFeature:
    """Log-histogram of persistence values.

    ``buckets`` are the left edges ``[0, b1, ..., bk]``; the buckets are
    ``[0, b1), [b1, b2), ..., [bk, inf)``.  Entry ``k`` is ``log(1 + count_k)``.
    A trailing ``inf`` in ``buckets`` is accepted and ignored.
    """
    edges = _check_buckets(buckets)
    if isinstance(diagram, EnrichedPersistenceDiagram):
        pers = diagram.persistences()
    else:
        pers = np.array([p.persistence if isinstance(p, PersistencePoint) else float(p) for p in diagram])
    counts = np.zeros(len(edges))
    if len(pers):
        idx = np.searchsorted(edges, pers, side="right") - 1
        np.add.at(counts, idx[idx >= 0], 1)
    return DiagramFeature(np.log1p(counts), tuple(edges.tolist()))
