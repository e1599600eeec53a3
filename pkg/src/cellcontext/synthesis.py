"""Layout synthesis by simulated annealing on the configuration objective.

Everything here runs in normalized coordinates: the reference domain is
mapped onto (-1, 1)^2 and every length in :class:`SynthesisConfig` (radii,
bandwidths, grid spacing, move scale, minimum separation) is in those units.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .config import load_defaults
from .errors import FormatError, ValidationError
from .layout import UNIT_DOMAIN, BandwidthSet, CellLayout, RadiusGrid, normalize_to_unit
from .matching import configuration_loss_arrays, match_arrays
from .spatial import cross_k_arrays, cross_k_matrix
from .topology import FLOOR_FACTOR, edt_grid, enrichment_arrays, grid_axes, h1_arrays, per_class_diagrams

__all__ = [
    "SynthesisConfig",
    "SynthesisTrace",
    "Objective",
    "init_layout",
    "objective",
    "synthesize",
    "remove_overlaps",
]

UNIT_SIDE = 2.0


@dataclass(frozen=True)
class SynthesisConfig:
    radii: RadiusGrid
    sigmas: BandwidthSet
    h: float
    init_jitter_sigma: float
    steps: int
    t0: float
    decay: float
    move_scale: float
    lambda_k: float
    lambda_cc: float
    seed: int
    min_separation: float
    teleport_prob: float = 0.1

    def __post_init__(self):
        if not isinstance(self.radii, RadiusGrid):
            object.__setattr__(self, "radii", RadiusGrid(self.radii))
        if not isinstance(self.sigmas, BandwidthSet):
            object.__setattr__(self, "sigmas", BandwidthSet(self.sigmas))
        if int(self.steps) < 1:
            raise ValidationError("steps must be >= 1")
        if not self.t0 > 0:
            raise ValidationError("t0 must be > 0")
        if not 0 < self.decay < 1:
            raise ValidationError("decay must lie in (0, 1)")
        if self.lambda_k < 0 or self.lambda_cc < 0 or (self.lambda_k == 0 and self.lambda_cc == 0):
            raise ValidationError("weights must be >= 0 and not both zero")
        if not 0 < self.h <= 0.05 * UNIT_SIDE:
            raise ValidationError(f"h must lie in (0, {0.05 * UNIT_SIDE}]")
        if self.init_jitter_sigma < 0 or self.move_scale <= 0 or self.min_separation < 0:
            raise ValidationError("jitter >= 0, move_scale > 0 and min_separation >= 0 required")
        if not 0 <= self.teleport_prob <= 1:
            raise ValidationError("teleport_prob must lie in [0, 1]")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValidationError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "steps", int(self.steps))
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def floor(self) -> float:
        return FLOOR_FACTOR * self.h

    @classmethod
    def default(cls, defaults=None, **overrides) -> "SynthesisConfig":
        d = load_defaults() if defaults is None else defaults
        s = d["synthesis"]
        rd = d["radii"]
        kw = dict(
            radii=np.linspace(rd["start_fraction"] * UNIT_SIDE, rd["stop_fraction"] * UNIT_SIDE, int(rd["count"])),
            sigmas=[f * UNIT_SIDE for f in d["sigma_fractions"]],
            h=UNIT_SIDE / float(s["grid_divisions"]),
            init_jitter_sigma=float(s["init_jitter_sigma"]),
            steps=int(s["steps"]),
            t0=float(s["t0"]),
            decay=float(s["decay"]),
            move_scale=float(s["move_scale"]),
            lambda_k=float(s["lambda_k"]),
            lambda_cc=float(s["lambda_cc"]),
            seed=int(s["seed"]),
            min_separation=float(s["min_separation_fraction"]) * UNIT_SIDE,
            teleport_prob=float(s["teleport_prob"]),
        )
        unknown = set(overrides) - set(kw)
        if unknown:
            raise ValidationError(f"unknown synthesis settings: {sorted(unknown)}")
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kw)

    @classmethod
    def from_json(cls, path, defaults=None, **overrides) -> "SynthesisConfig":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise FormatError(f"config {path}: {e.msg} (line {e.lineno})") from None
        if not isinstance(doc, dict):
            raise FormatError(f"config {path} must be a JSON object")
        doc.update({k: v for k, v in overrides.items() if v is not None})
        return cls.default(defaults, **doc)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["radii"] = self.radii.radii.tolist()
        d["sigmas"] = self.sigmas.sigmas.tolist()
        return d


class Objective(NamedTuple):
    total: float
    l_cc: float
    k_term: float


@dataclass
class SynthesisTrace:
    total: list[float] = field(default_factory=list)
    l_cc: list[float] = field(default_factory=list)
    k_term: list[float] = field(default_factory=list)
    accepted: list[bool] = field(default_factory=list)
    initial: Objective | None = None
    best: Objective | None = None
    k_scale: float = 1.0

    def __len__(self):
        return len(self.total)

    def append(self, obj: Objective, accepted: bool):
        self.total.append(obj.total)
        self.l_cc.append(obj.l_cc)
        self.k_term.append(obj.k_term)
        self.accepted.append(bool(accepted))

    def best_so_far(self) -> np.ndarray:
        start = [self.initial.total] if self.initial is not None else []
        return np.minimum.accumulate(np.array(start + self.total))[len(start):]

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "total", "l_cc", "k_term", "accepted"])
            for i in range(len(self)):
                w.writerow([i, repr(self.total[i]), repr(self.l_cc[i]), repr(self.k_term[i]), int(self.accepted[i])])


# ---------------------------------------------------------------------------


def _mesh(n: int) -> np.ndarray:
    """Row-major ``ceil(sqrt n)``-wide mesh of cell centers tiling (-1, 1)^2."""
    if n == 0:
        return np.zeros((0, 2))
    cols = math.ceil(math.sqrt(n))
    rows = math.ceil(n / cols)
    xc = -1.0 + (2.0 * np.arange(cols) + 1.0) / cols
    yc = -1.0 + (2.0 * np.arange(rows) + 1.0) / rows
    gx, gy = np.meshgrid(xc, yc)
    return np.column_stack([gx.ravel(), gy.ravel()])[:n]


def _init_unit(counts, jitter_sigma: float, rng: np.random.Generator):
    xy, labels = [], []
    for c, n in enumerate(counts):
        pts = _mesh(int(n))
        if jitter_sigma > 0 and len(pts):
            pts = pts + rng.normal(0.0, jitter_sigma, size=pts.shape)
        xy.append(np.clip(pts, -1.0, 1.0))
        labels.append(np.full(int(n), c, dtype=np.int64))
    return np.concatenate(xy), np.concatenate(labels)


def init_layout(reference: CellLayout, jitter_sigma: float, seed) -> CellLayout:
    """Per-class jittered mesh over the reference domain with the reference's counts."""
    if len(reference) == 0:
        raise ValidationError("reference layout has no cells")
    if jitter_sigma < 0:
        raise ValidationError("jitter_sigma must be >= 0")
    rng = np.random.default_rng(seed)
    _, tf = normalize_to_unit(reference)
    xy, labels = _init_unit(reference.counts(), jitter_sigma, rng)
    return tf.from_unit(CellLayout(xy, labels, UNIT_DOMAIN, reference.class_names))


class _Evaluator:
    """Objective against one fixed (normalized) reference.

    Persistence pairs are cached per class by the caller; everything else is
    recomputed on every call, so a cached evaluation equals a fresh one.
    """

    def __init__(self, reference_unit: CellLayout, config: SynthesisConfig):
        self.config = config
        self.class_names = reference_unit.class_names
        self.n_classes = reference_unit.n_classes
        self.radii = config.radii.radii
        self.sigmas = config.sigmas.sigmas
        self.xs, self.ys = grid_axes(UNIT_DOMAIN, config.h)
        self.area = UNIT_SIDE * UNIT_SIDE
        self.k_scale = 1.0 / (self.n_classes ** 2 * len(self.radii))
        ref_diagrams = per_class_diagrams(
            reference_unit, config.h, config.radii, config.sigmas, config.floor
        )
        self.ref_k = [d.k_vectors for d in ref_diagrams]
        self.ref_den = [d.densities for d in ref_diagrams]
        self.ref_cross = cross_k_matrix(reference_unit, config.radii)

    def class_pairs(self, xy, labels, c):
        pts = xy[labels == c]
        if len(pts) == 0:
            return np.zeros(0), np.zeros(0), np.zeros(0, dtype=np.int64)
        grid = edt_grid(pts, self.xs, self.ys)
        return h1_arrays(grid, self.config.floor)

    def all_pairs(self, xy, labels):
        return [self.class_pairs(xy, labels, c) for c in range(self.n_classes)]

    def evaluate(self, xy, labels, pairs) -> Objective:
        cfg = self.config
        nx = len(self.xs)
        l_cc = 0.0
        if cfg.lambda_cc > 0:
            for c in range(self.n_classes):
                verts = pairs[c][2]
                rows, cols = np.divmod(verts, nx)
                centers = np.column_stack([self.xs[cols], self.ys[rows]])
                kv, dv = enrichment_arrays(xy, labels, self.n_classes, self.area, centers, self.radii, self.sigmas)
                match, _ = match_arrays(kv, self.ref_k[c])
                l_cc += configuration_loss_arrays(dv, self.ref_den[c], match)
        k_term = 0.0
        if cfg.lambda_k > 0:
            diff = cross_k_arrays(xy, labels, self.n_classes, self.radii, self.area) - self.ref_cross
            k_term = self.k_scale * float(np.sum(diff * diff))
        return Objective(cfg.lambda_cc * l_cc + cfg.lambda_k * k_term, l_cc, k_term)


def _unit_pair(candidate: CellLayout, reference: CellLayout):
    if candidate.class_names != reference.class_names:
        raise ValidationError(
            f"class sets differ: {list(candidate.class_names)} vs {list(reference.class_names)}"
        )
    cand_unit, _ = normalize_to_unit(candidate)
    ref_unit, _ = normalize_to_unit(reference)
    return cand_unit, ref_unit


def objective(candidate: CellLayout, reference: CellLayout, config: SynthesisConfig) -> Objective:
    """``lambda_cc * L_CC + lambda_k * K_term`` in normalized coordinates.

    ``L_CC`` sums the configuration loss of the per-class enriched diagrams;
    ``K_term`` is the squared cross-K mismatch over every class pair divided by
    ``n_classes**2 * len(radii)``.
    """
    cand_unit, ref_unit = _unit_pair(candidate, reference)
    ev = _Evaluator(ref_unit, config)
    return ev.evaluate(cand_unit.xy, cand_unit.labels, ev.all_pairs(cand_unit.xy, cand_unit.labels))


def _greedy_keep(xy: np.ndarray, min_separation: float) -> np.ndarray:
    keep = np.zeros(len(xy), dtype=bool)
    kept = []
    for i in range(len(xy)):
        if kept:
            d = np.hypot(*(xy[kept] - xy[i]).T)
            if np.any(d < min_separation):
                continue
        kept.append(i)
        keep[i] = True
    return keep


def remove_overlaps(layout: CellLayout, min_separation: float) -> CellLayout:
    """Drop every point closer than ``min_separation`` to an already kept point.

    Points are scanned in index order; kept points are not moved.
    """
    if min_separation < 0:
        raise ValidationError("min_separation must be >= 0")
    if min_separation == 0 or len(layout) == 0:
        return layout
    keep = _greedy_keep(layout.xy, min_separation)
    return layout.replace(xy=layout.xy[keep], labels=layout.labels[keep])


def synthesize(reference: CellLayout, config: SynthesisConfig, *, return_init: bool = False):
    """Anneal a jittered mesh towards the reference's configuration.

    Each step moves one uniformly chosen point, by a normal step of scale
    ``move_scale`` clamped to the domain or, with probability
    ``teleport_prob``, to a uniform random position.  Downhill moves are always
    accepted, uphill ones with probability ``exp(-delta / T)``; ``T`` decays
    geometrically from ``t0``.  The best layout seen is overlap-filtered and
    mapped back to the reference domain.

    Returns ``(layout, trace)``, or ``(layout, trace, init)`` with ``return_init``.
    """
    if len(reference) == 0:
        raise ValidationError("reference layout has no cells")
    ref_unit, tf = normalize_to_unit(reference)
    rng = np.random.default_rng(config.seed)
    xy, labels = _init_unit(reference.counts(), config.init_jitter_sigma, rng)
    init_unit = CellLayout(xy, labels, UNIT_DOMAIN, reference.class_names)

    ev = _Evaluator(ref_unit, config)
    pairs = ev.all_pairs(xy, labels)
    current = ev.evaluate(xy, labels, pairs)
    trace = SynthesisTrace(initial=current, k_scale=ev.k_scale)
    best, best_xy = current, xy.copy()
    temperature = config.t0
    n = len(xy)
    for _ in range(config.steps):
        k = int(rng.integers(n))
        old = xy[k].copy()
        if rng.random() < config.teleport_prob:
            xy[k] = rng.uniform(-1.0, 1.0, size=2)
        else:
            xy[k] = np.clip(old + rng.normal(0.0, config.move_scale, size=2), -1.0, 1.0)
        c = labels[k]
        saved = pairs[c]
        pairs[c] = ev.class_pairs(xy, labels, c)
        proposal = ev.evaluate(xy, labels, pairs)
        delta = proposal.total - current.total
        accept = delta < 0 or rng.random() < math.exp(-delta / temperature)
        if accept:
            current = proposal
            if current.total < best.total:
                best, best_xy = current, xy.copy()
        else:
            xy[k] = old
            pairs[c] = saved
        trace.append(current, accept)
        temperature *= config.decay
    trace.best = best
    best_unit = CellLayout(best_xy, labels, UNIT_DOMAIN, reference.class_names)
    out = tf.from_unit(remove_overlaps(best_unit, config.min_separation))
    if return_init:
        return out, trace, tf.from_unit(init_unit)
    return out, trace


def with_overrides(config: SynthesisConfig, **kw) -> SynthesisConfig:
    return replace(config, **{k: v for k, v in kw.items() if v is not None})
