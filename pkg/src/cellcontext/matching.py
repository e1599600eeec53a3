"""Hole matching between enriched diagrams, the configuration loss and
layout-comparison metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ValidationError
from .layout import CellLayout
from .spatial import SMALL_CLASS, cross_k_matrix
from .topology import EnrichedPersistenceDiagram, per_class_diagrams

__all__ = [
    "DUMMY",
    "HoleMatching",
    "MetricReport",
    "linear_assignment",
    "optimal_match",
    "cell_configuration_loss",
    "pd_emd",
    "pd_ccmd",
    "cross_k_error",
    "metric_report",
]

DUMMY = None

PD_EMD_NOTE = "1-Wasserstein, L2 ground metric, unmatched points go to their diagonal projection"


def linear_assignment(cost) -> np.ndarray:
    """Column assigned to each row in a min-cost perfect matching (square ``cost``)."""
    c = np.ascontiguousarray(cost, dtype=np.float64)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValidationError(f"cost matrix must be square, got shape {c.shape}")
    if c.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    return _kernels.hungarian(c)


@dataclass(frozen=True)
class HoleMatching:
    """Perfect matching after dummy padding; ``None`` marks a dummy hole."""

    pairs: tuple[tuple[int | None, int | None], ...]
    cost: float

    def __len__(self):
        return len(self.pairs)


def _padded_cost(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Square cost of matching rows of ``a`` to rows of ``b``; the shorter side
    is padded with zero vectors (dummy holes)."""
    n = max(len(a), len(b))
    cost = np.zeros((n, n))
    if len(a) and len(b):
        diff = a[:, None, :] - b[None, :, :]
        cost[: len(a), : len(b)] = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    if len(a) < n:
        cost[len(a):, : len(b)] = np.linalg.norm(b, axis=1)[None, :]
    if len(b) < n:
        cost[: len(a), len(b):] = np.linalg.norm(a, axis=1)[:, None]
    return cost


def _check_arity(gen: EnrichedPersistenceDiagram, ref: EnrichedPersistenceDiagram):
    if gen.k_arity != ref.k_arity:
        raise ValidationError(f"K enrichment arity differs: {gen.k_arity} vs {ref.k_arity}")


def match_arrays(k_gen: np.ndarray, k_ref: np.ndarray):
    """Optimal matching of K vectors; returns (col_of_row, cost matrix)."""
    cost = _padded_cost(k_gen, k_ref)
    return linear_assignment(cost), cost


def optimal_match(gen: EnrichedPersistenceDiagram, ref: EnrichedPersistenceDiagram) -> HoleMatching:
    """Minimum total K-distance one-to-one matching of holes.

    The smaller diagram is padded with dummy holes whose K vector is zero, so a
    real hole left unmatched costs the norm of its own K vector.
    """
    _check_arity(gen, ref)
    cols, cost = match_arrays(gen.k_vectors, ref.k_vectors)
    ng, nr = len(gen), len(ref)
    pairs = tuple(
        (i if i < ng else DUMMY, int(j) if j < nr else DUMMY) for i, j in enumerate(cols)
    )
    total = float(sum(cost[i, j] for i, j in enumerate(cols)))
    return HoleMatching(pairs, total)


def _pair_arrays(matching: HoleMatching):
    gi = np.array([-1 if g is None else g for g, _ in matching.pairs], dtype=np.int64)
    ri = np.array([-1 if r is None else r for _, r in matching.pairs], dtype=np.int64)
    return gi, ri


def _take(rows: np.ndarray, idx: np.ndarray, width: int) -> np.ndarray:
    out = np.zeros((len(idx), width))
    ok = idx >= 0
    out[ok] = rows[idx[ok]]
    return out


def configuration_loss_arrays(d_gen, d_ref, cols) -> float:
    n = len(cols)
    if n == 0:
        return 0.0
    gi = np.arange(n)
    gi = np.where(gi < len(d_gen), gi, -1)
    ri = np.where(cols < len(d_ref), cols, -1)
    width = d_gen.shape[1] if len(d_gen) else d_ref.shape[1]
    a, b = _take(d_gen, gi, width), _take(d_ref, ri, width)
    return float(np.sum(np.sqrt(np.sum((a - b) ** 2, axis=1))))


def cell_configuration_loss(
    gen: EnrichedPersistenceDiagram,
    ref: EnrichedPersistenceDiagram,
    matching: HoleMatching | None = None,
) -> float:
    """Sum of multi-scale density distances between K-matched holes.

    Holes matched to a dummy contribute the norm of their own density vector.
    The matching is recomputed unless one is passed in.
    """
    if matching is None:
        matching = optimal_match(gen, ref)
    else:
        _check_arity(gen, ref)
    if gen.density_arity != ref.density_arity and len(gen) and len(ref):
        raise ValidationError("density enrichment arity differs")
    gi, ri = _pair_arrays(matching)
    if len(gi) == 0:
        return 0.0
    width = gen.density_arity if len(gen) else ref.density_arity
    a, b = _take(gen.densities, gi, width), _take(ref.densities, ri, width)
    return float(np.sum(np.sqrt(np.sum((a - b) ** 2, axis=1))))


def _bd(diagram) -> np.ndarray:
    if isinstance(diagram, EnrichedPersistenceDiagram):
        return diagram.pairs()
    if len(diagram) and hasattr(diagram[0], "birth"):
        return np.array([[p.birth, p.death] for p in diagram])
    return np.asarray(diagram, dtype=np.float64).reshape(-1, 2)


def pd_emd(gen, ref) -> float:
    """Earth mover's distance between two persistence diagrams.

    Points may be sent to their orthogonal projection on the diagonal at a
    cost of ``(death - birth) / sqrt(2)``; the ground metric is Euclidean.
    """
    a, b = _bd(gen), _bd(ref)
    na, nb = len(a), len(b)
    n = na + nb
    if n == 0:
        return 0.0
    cost = np.zeros((n, n))
    if na and nb:
        cost[:na, :nb] = np.hypot(a[:, None, 0] - b[None, :, 0], a[:, None, 1] - b[None, :, 1])
    cost[:na, nb:] = ((a[:, 1] - a[:, 0]) / math.sqrt(2.0))[:, None]
    cost[na:, :nb] = ((b[:, 1] - b[:, 0]) / math.sqrt(2.0))[None, :]
    cols = linear_assignment(cost)
    return float(cost[np.arange(n), cols].sum())


def pd_ccmd(
    gen: EnrichedPersistenceDiagram,
    ref: EnrichedPersistenceDiagram,
    gen_layout_class_count: int | None = None,
    ref_layout_class_count: int | None = None,
) -> float:
    """Mean absolute persistence difference over K-matched hole pairs.

    Dummy holes have zero persistence.  Returns 0 when either layout has fewer
    than five cells in the class, where the comparison is too noisy to mean
    anything.  Counts default to the diagrams' ``n_cells``.
    """
    ng = gen.n_cells if gen_layout_class_count is None else gen_layout_class_count
    nr = ref.n_cells if ref_layout_class_count is None else ref_layout_class_count
    if ng < SMALL_CLASS or nr < SMALL_CLASS:
        return 0.0
    m = optimal_match(gen, ref)
    if len(m) == 0:
        return 0.0
    pg, pr = gen.persistences(), ref.persistences()
    diffs = [
        abs((0.0 if g is None else pg[g]) - (0.0 if r is None else pr[r])) for g, r in m.pairs
    ]
    return float(np.mean(diffs))


def _check_same_classes(gen: CellLayout, ref: CellLayout):
    if gen.class_names != ref.class_names:
        raise ValidationError(f"class sets differ: {list(gen.class_names)} vs {list(ref.class_names)}")


def expected_class_count(ref: CellLayout) -> float:
    """Mean cells per class in the reference; the cross-K error scale."""
    n_bar = len(ref) / ref.n_classes if ref.n_classes else 0.0
    return n_bar if n_bar > 0 else 1.0


def cross_k_error(gen: CellLayout, ref: CellLayout, radii) -> tuple[np.ndarray, np.ndarray]:
    """Per source class MAE and RMSE between concatenated cross-K vectors.

    Both are already averaged over the vector length, then divided by the
    reference's mean per-class cell count.
    """
    _check_same_classes(gen, ref)
    kg = cross_k_matrix(gen, radii)
    kr = cross_k_matrix(ref, radii)
    c = ref.n_classes
    diff = (kg - kr).reshape(c, -1)
    n_bar = expected_class_count(ref)
    if diff.shape[1] == 0:
        return np.zeros(c), np.zeros(c)
    mae = np.mean(np.abs(diff), axis=1) / n_bar
    rmse = np.sqrt(np.mean(diff ** 2, axis=1)) / n_bar
    return mae, rmse


METRICS = ("pd_emd", "pd_ccmd", "k_mae", "k_rmse")


@dataclass
class MetricReport:
    class_names: tuple[str, ...]
    per_class: dict[int, dict[str, float]]
    mean: dict[str, float]
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "classes": list(self.class_names),
            "per_class": {str(c): dict(v) for c, v in self.per_class.items()},
            "mean": dict(self.mean),
            "meta": dict(self.meta),
        }

    def to_table(self, digits: int = 4) -> str:
        """Plain-text table: metric groups by rows, one column per class plus mean."""
        cols = list(self.class_names) + ["mean"]
        width = max(10, digits + 6, *(len(c) + 2 for c in cols))
        lines = ["metric".ljust(10) + "".join(c.rjust(width) for c in cols)]
        for m in METRICS:
            vals = [self.per_class[c][m] for c in range(len(self.class_names))] + [self.mean[m]]
            lines.append(m.ljust(10) + "".join(f"{v:.{digits}f}".rjust(width) for v in vals))
        return "\n".join(lines)


def metric_report(gen: CellLayout, ref: CellLayout, config=None) -> MetricReport:
    """Per-class PD-EMD, PD-CCMD and cross-K MAE/RMSE, plus their class means.

    ``config`` is an :class:`~cellcontext.config.AnalysisConfig`; defaults are
    derived from the reference domain when omitted.  Empty classes score 0 and
    still count towards the mean.
    """
    from .config import AnalysisConfig

    _check_same_classes(gen, ref)
    if config is None:
        config = AnalysisConfig.for_layout(ref)
    kw = dict(h=config.h, radii=config.radii, sigmas=config.sigmas, floor=config.floor,
              per_class_density=config.per_class_density)
    dg = per_class_diagrams(gen, **kw)
    dr = per_class_diagrams(ref, **kw)
    mae, rmse = cross_k_error(gen, ref, config.radii)
    cg, cr = gen.counts(), ref.counts()
    per_class = {}
    for c in range(ref.n_classes):
        per_class[c] = {
            "pd_emd": pd_emd(dg[c], dr[c]),
            "pd_ccmd": pd_ccmd(dg[c], dr[c], int(cg[c]), int(cr[c])),
            "k_mae": float(mae[c]),
            "k_rmse": float(rmse[c]),
        }
    n = max(ref.n_classes, 1)
    mean = {m: float(sum(per_class[c][m] for c in per_class) / n) for m in METRICS}
    meta = {
        "pd_emd": PD_EMD_NOTE,
        "k_normalization": expected_class_count(ref),
        "config": config.to_dict(),
    }
    return MetricReport(tuple(ref.class_names), per_class, mean, meta)
