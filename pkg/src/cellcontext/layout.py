"""Cell layout data model, radius/bandwidth grids and file I/O.

A layout is a set of 2D points, each tagged with a class index, living in an
axis-aligned rectangular domain.  Two on-disk containers are supported:

CSV::

    # domain: 0,0,100,100
    # classes: tumor,stromal
    x,y,class
    10,20,tumor

The ``#`` metadata lines are optional.  JSON::

    {"domain": [x0, y0, x1, y1], "classes": [...], "points": [[x, y, class_id], ...]}
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import FormatError, ValidationError

__all__ = [
    "CellLayout",
    "RadiusGrid",
    "BandwidthSet",
    "UnitTransform",
    "load_layout",
    "save_layout",
    "normalize_to_unit",
    "UNIT_DOMAIN",
]

UNIT_DOMAIN = (-1.0, -1.0, 1.0, 1.0)
BBOX_MARGIN = 0.02


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _check_domain(domain) -> tuple[float, float, float, float]:
    try:
        x0, y0, x1, y1 = (float(v) for v in domain)
    except (TypeError, ValueError):
        raise ValidationError(f"domain must be four numbers, got {domain!r}") from None
    if not all(math.isfinite(v) for v in (x0, y0, x1, y1)):
        raise ValidationError("domain bounds must be finite")
    if not (x1 > x0 and y1 > y0):
        raise ValidationError(f"domain {domain!r} has non-positive width or height")
    return x0, y0, x1, y1


@dataclass(frozen=True, eq=False)
class CellLayout:
    """Immutable multi-class point layout.

    ``xy`` is an ``(n, 2)`` float64 array, ``labels`` an ``(n,)`` int array of
    indices into ``class_names``.
    """

    xy: np.ndarray
    labels: np.ndarray
    domain: tuple[float, float, float, float]
    class_names: tuple[str, ...]

    def __init__(self, xy, labels, domain, class_names):
        xy = np.array(xy, dtype=np.float64).reshape(-1, 2)
        labels = np.array(labels, dtype=np.int64).reshape(-1)
        domain = _check_domain(domain)
        class_names = tuple(str(c) for c in class_names)
        if len(labels) != len(xy):
            raise ValidationError(f"{len(xy)} points but {len(labels)} labels")
        if len(set(class_names)) != len(class_names):
            raise ValidationError(f"duplicate class names in {class_names}")
        if len(labels) and (labels.min() < 0 or labels.max() >= len(class_names)):
            raise ValidationError("class id out of range of class_names")
        if not np.all(np.isfinite(xy)):
            raise ValidationError("non-finite coordinate")
        x0, y0, x1, y1 = domain
        outside = (xy[:, 0] < x0) | (xy[:, 0] > x1) | (xy[:, 1] < y0) | (xy[:, 1] > y1)
        if outside.any():
            i = int(np.argmax(outside))
            raise ValidationError(f"point {i} at {tuple(xy[i])} lies outside domain {domain}")
        object.__setattr__(self, "xy", _frozen(xy))
        object.__setattr__(self, "labels", _frozen(labels))
        object.__setattr__(self, "domain", domain)
        object.__setattr__(self, "class_names", class_names)

    def __len__(self) -> int:
        return len(self.labels)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CellLayout):
            return NotImplemented
        return (
            self.domain == other.domain
            and self.class_names == other.class_names
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.xy, other.xy)
        )

    __hash__ = None

    def __repr__(self) -> str:
        return (
            f"CellLayout(n={len(self)}, domain={self.domain}, "
            f"classes={list(self.class_names)}, counts={self.counts().tolist()})"
        )

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def width(self) -> float:
        return self.domain[2] - self.domain[0]

    @property
    def height(self) -> float:
        return self.domain[3] - self.domain[1]

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def shorter_side(self) -> float:
        return min(self.width, self.height)

    def counts(self) -> np.ndarray:
        """Number of points per class, indexed by class id."""
        return np.bincount(self.labels, minlength=self.n_classes)

    def points_of(self, class_id: int | None) -> np.ndarray:
        """Coordinates of one class, or of every point when ``class_id`` is None."""
        if class_id is None:
            return self.xy
        self.check_class(class_id)
        return self.xy[self.labels == class_id]

    def check_class(self, class_id: int) -> None:
        if not (0 <= int(class_id) < self.n_classes):
            raise ValidationError(f"class id {class_id} not in 0..{self.n_classes - 1}")

    def contains(self, xy) -> bool:
        x, y = float(xy[0]), float(xy[1])
        x0, y0, x1, y1 = self.domain
        return x0 <= x <= x1 and y0 <= y <= y1

    def replace(self, xy=None, labels=None, domain=None) -> "CellLayout":
        return CellLayout(
            self.xy if xy is None else xy,
            self.labels if labels is None else labels,
            self.domain if domain is None else domain,
            self.class_names,
        )


def _check_increasing_positive(values, what):
    arr = np.array(values, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise ValidationError(f"{what} must be non-empty")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise ValidationError(f"{what} must be finite and > 0, got {arr.tolist()}")
    if np.any(np.diff(arr) <= 0):
        raise ValidationError(f"{what} must be strictly increasing, got {arr.tolist()}")
    return _frozen(arr)


@dataclass(frozen=True, eq=False)
class RadiusGrid:
    """Radii at which K-functions are sampled."""

    radii: np.ndarray

    def __init__(self, radii):
        object.__setattr__(self, "radii", _check_increasing_positive(radii, "radii"))

    def __len__(self):
        return len(self.radii)

    def __eq__(self, other):
        return isinstance(other, RadiusGrid) and np.array_equal(self.radii, other.radii)

    __hash__ = None

    @classmethod
    def default_for(cls, shorter_side: float, lo=0.05, hi=0.40, n=8) -> "RadiusGrid":
        return cls(np.linspace(lo * shorter_side, hi * shorter_side, n))


@dataclass(frozen=True, eq=False)
class BandwidthSet:
    """Gaussian kernel standard deviations for the multi-scale density."""

    sigmas: np.ndarray

    def __init__(self, sigmas):
        object.__setattr__(self, "sigmas", _check_increasing_positive(sigmas, "sigmas"))

    def __len__(self):
        return len(self.sigmas)

    def __eq__(self, other):
        return isinstance(other, BandwidthSet) and np.array_equal(self.sigmas, other.sigmas)

    __hash__ = None

    @classmethod
    def default_for(cls, shorter_side: float, fractions=(0.015, 0.03, 0.06, 0.12)) -> "BandwidthSet":
        return cls([f * shorter_side for f in fractions])


# ---------------------------------------------------------------------------
# normalization


@dataclass(frozen=True)
class UnitTransform:
    """Per-axis affine map from a domain onto (-1, -1)..(1, 1)."""

    domain: tuple[float, float, float, float]

    def _center_scale(self):
        x0, y0, x1, y1 = self.domain
        return (
            np.array([(x0 + x1) / 2.0, (y0 + y1) / 2.0]),
            np.array([(x1 - x0) / 2.0, (y1 - y0) / 2.0]),
        )

    def forward(self, xy) -> np.ndarray:
        c, s = self._center_scale()
        return (np.asarray(xy, dtype=np.float64) - c) / s

    def inverse(self, uv) -> np.ndarray:
        c, s = self._center_scale()
        return np.asarray(uv, dtype=np.float64) * s + c

    def to_unit(self, layout: CellLayout) -> CellLayout:
        uv = np.clip(self.forward(layout.xy), -1.0, 1.0)
        return CellLayout(uv, layout.labels, UNIT_DOMAIN, layout.class_names)

    def from_unit(self, layout: CellLayout) -> CellLayout:
        x0, y0, x1, y1 = self.domain
        xy = self.inverse(layout.xy)
        # rounding can push boundary points a hair outside
        xy[:, 0] = np.clip(xy[:, 0], x0, x1)
        xy[:, 1] = np.clip(xy[:, 1], y0, y1)
        return CellLayout(xy, layout.labels, self.domain, layout.class_names)


def normalize_to_unit(layout: CellLayout) -> tuple[CellLayout, UnitTransform]:
    """Map a layout's domain onto (-1,-1)..(1,1) with independent axis scales.

    Returns the normalized layout together with the transform; use
    ``transform.from_unit`` (or ``transform.inverse`` on raw arrays) to go back.
    """
    transform = UnitTransform(_check_domain(layout.domain))
    return transform.to_unit(layout), transform


# ---------------------------------------------------------------------------
# I/O


def _infer_format(path: Path, fmt: str | None) -> str:
    if fmt is None:
        fmt = path.suffix.lower().lstrip(".")
    fmt = fmt.lower()
    if fmt not in ("csv", "json"):
        raise FormatError(f"unknown layout format {fmt!r} (expected csv or json)")
    return fmt


def _bbox_domain(xy: np.ndarray, margin: float):
    if len(xy) == 0:
        raise ValidationError("cannot infer a domain for an empty layout; declare one")
    lo, hi = xy.min(axis=0), xy.max(axis=0)
    diag = float(np.hypot(*(hi - lo)))
    pad = margin * diag if diag > 0 else 1.0
    return (lo[0] - pad, lo[1] - pad, hi[0] + pad, hi[1] + pad)


def _resolve_classes(names: Sequence[str], class_map):
    """Turn class strings into ids, honouring an optional fixed class map."""
    if class_map is None:
        order: dict[str, int] = {}
        for n in names:
            order.setdefault(n, len(order))
        return [order[n] for n in names], list(order)
    if isinstance(class_map, Mapping):
        lookup = {str(k): int(v) for k, v in class_map.items()}
        size = max(lookup.values(), default=-1) + 1
        ordered = [None] * size
        for k, v in lookup.items():
            ordered[v] = k
        if any(o is None for o in ordered):
            raise ValidationError("class map ids must be contiguous from 0")
    else:
        ordered = [str(c) for c in class_map]
        lookup = {c: i for i, c in enumerate(ordered)}
    ids = []
    for rec, n in enumerate(names, start=1):
        if n not in lookup:
            raise ValidationError(f"record {rec}: unknown class {n!r}")
        ids.append(lookup[n])
    return ids, ordered


def _parse_float(text, rec, field):
    try:
        v = float(text)
    except ValueError:
        raise FormatError(f"field {field!r} is not a number: {text!r}", rec) from None
    if not math.isfinite(v):
        raise FormatError(f"field {field!r} is not finite: {text!r}", rec)
    return v


def _read_csv(text: str):
    meta: dict[str, str] = {}
    rows = []
    lines = text.splitlines()
    body = []
    for line in lines:
        s = line.strip()
        if s.startswith("#"):
            key, _, val = s.lstrip("#").partition(":")
            meta[key.strip().lower()] = val.strip()
        elif s:
            body.append(line)
    reader = csv.reader(body)
    header_seen = False
    for raw in reader:
        cells = [c.strip() for c in raw]
        if not header_seen and [c.lower() for c in cells] == ["x", "y", "class"]:
            header_seen = True
            continue
        header_seen = True
        rows.append(cells)
    xs, ys, names = [], [], []
    for rec, cells in enumerate(rows, start=1):
        if len(cells) != 3 or cells[2] == "":
            raise FormatError(f"expected 3 fields x,y,class, got {len(cells)}: {cells}", rec)
        xs.append(_parse_float(cells[0], rec, "x"))
        ys.append(_parse_float(cells[1], rec, "y"))
        names.append(cells[2])
    domain = None
    if "domain" in meta:
        parts = meta["domain"].split(",")
        if len(parts) != 4:
            raise FormatError(f"domain metadata needs 4 numbers: {meta['domain']!r}")
        domain = [_parse_float(p, None, "domain") for p in parts]
    classes = None
    if meta.get("classes"):
        classes = [c.strip() for c in meta["classes"].split(",")]
    return np.column_stack([xs, ys]) if xs else np.zeros((0, 2)), names, domain, classes


def _read_json(text: str):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(f"invalid JSON at line {e.lineno}: {e.msg}") from None
    if not isinstance(doc, dict) or "points" not in doc:
        raise FormatError("JSON layout must be an object with a 'points' array")
    classes = doc.get("classes")
    pts = doc["points"]
    if not isinstance(pts, list):
        raise FormatError("'points' must be an array")
    xs, ys, ids = [], [], []
    for rec, p in enumerate(pts, start=1):
        if not isinstance(p, (list, tuple)) or len(p) != 3:
            raise FormatError(f"point must be [x, y, class_id], got {p!r}", rec)
        xs.append(_parse_float(p[0], rec, "x"))
        ys.append(_parse_float(p[1], rec, "y"))
        c = p[2]
        if isinstance(c, bool) or not isinstance(c, (int, str)):
            raise FormatError(f"class must be an integer id or a name, got {c!r}", rec)
        ids.append(c)
    xy = np.column_stack([xs, ys]) if xs else np.zeros((0, 2))
    return xy, ids, doc.get("domain"), classes


def load_layout(
    path,
    format: str | None = None,
    *,
    domain=None,
    class_map=None,
    margin: float = BBOX_MARGIN,
) -> CellLayout:
    """Read a layout from CSV or JSON.

    ``domain`` overrides any domain stored in the file.  Without either, the
    domain is the points' bounding box padded by ``margin`` times its diagonal.
    ``class_map`` (list of names, or name -> id mapping) fixes the class order;
    unknown classes then raise :class:`ValidationError`.
    """
    path = Path(path)
    fmt = _infer_format(path, format)
    text = path.read_text(encoding="utf-8")
    if fmt == "csv":
        xy, names, file_domain, file_classes = _read_csv(text)
        if class_map is None and file_classes is not None:
            class_map = file_classes
        labels, class_names = _resolve_classes(names, class_map)
    else:
        xy, raw, file_domain, file_classes = _read_json(text)
        if all(isinstance(c, int) for c in raw):
            if file_classes is None:
                raise FormatError("integer class ids require a 'classes' list")
            class_names = [str(c) for c in file_classes]
            labels = list(raw)
            for rec, c in enumerate(labels, start=1):
                if not 0 <= c < len(class_names):
                    raise ValidationError(f"record {rec}: class id {c} out of range")
            if class_map is not None:
                names = [class_names[c] for c in labels]
                labels, class_names = _resolve_classes(names, class_map)
        else:
            if any(isinstance(c, int) for c in raw) and file_classes is None:
                raise FormatError("integer class ids require a 'classes' list")
            names = [c if isinstance(c, str) else str(file_classes[c]) for c in raw]
            labels, class_names = _resolve_classes(names, class_map or file_classes)
    dom = domain if domain is not None else file_domain
    if dom is None:
        dom = _bbox_domain(xy, margin)
    return CellLayout(xy, labels, dom, class_names)


def _fmt(v: float) -> str:
    return repr(float(v))


def layout_to_json_dict(layout: CellLayout) -> dict:
    return {
        "domain": list(layout.domain),
        "classes": list(layout.class_names),
        "points": [[float(x), float(y), int(c)] for (x, y), c in zip(layout.xy, layout.labels)],
    }


def save_layout(layout: CellLayout, path, format: str | None = None) -> None:
    """Write a layout; floats use shortest round-trip repr so reloads are exact."""
    path = Path(path)
    fmt = _infer_format(path, format)
    if fmt == "csv":
        for name in layout.class_names:
            if "," in name or "\n" in name:
                raise ValidationError(f"class name {name!r} cannot be stored in CSV metadata")
        buf = io.StringIO()
        buf.write("# domain: " + ",".join(_fmt(v) for v in layout.domain) + "\n")
        buf.write("# classes: " + ",".join(layout.class_names) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y", "class"])
        for (x, y), c in zip(layout.xy, layout.labels):
            w.writerow([_fmt(x), _fmt(y), layout.class_names[c]])
        text = buf.getvalue()
    else:
        text = json.dumps(layout_to_json_dict(layout), indent=1) + "\n"
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def iter_class_partition(layout: CellLayout) -> Iterable[tuple[int, np.ndarray]]:
    for c in range(layout.n_classes):
        yield c, layout.points_of(c)
