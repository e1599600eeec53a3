"""Versioned defaults and the analysis configuration derived from them.

All defaults are stated relative to the shorter side of the domain so one file
serves every layout.  Set ``CELLCONTEXT_DEFAULTS`` to a JSON file to override
the packaged copy; every report echoes the defaults it was produced with.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import FormatError, ValidationError
from .layout import BandwidthSet, CellLayout, RadiusGrid

DEFAULTS_ENV = "CELLCONTEXT_DEFAULTS"


def load_defaults(path=None) -> dict:
    path = path or os.environ.get(DEFAULTS_ENV)
    try:
        if path:
            with open(path, encoding="utf-8") as fh:
                return json.load(fh)
        return json.loads(resources.files("cellcontext").joinpath("defaults.json").read_text("utf-8"))
    except json.JSONDecodeError as e:
        raise FormatError(f"defaults file {path}: {e.msg} (line {e.lineno})") from None


@dataclass(frozen=True)
class AnalysisConfig:
    """Descriptor settings in the layout's own length units."""

    radii: RadiusGrid
    sigmas: BandwidthSet
    h: float
    floor: float
    buckets: tuple[float, ...]
    per_class_density: bool = False
    union_diagram: bool = False
    defaults_version: int | None = None

    @classmethod
    def for_domain(cls, domain, defaults=None, *, radii=None, sigmas=None, h=None,
                   floor=None, buckets=None, per_class_density=False, union_diagram=False):
        d = load_defaults() if defaults is None else defaults
        side = min(domain[2] - domain[0], domain[3] - domain[1])
        if side <= 0:
            raise ValidationError(f"degenerate domain {domain}")
        if radii is None:
            rd = d["radii"]
            radii = np.linspace(rd["start_fraction"] * side, rd["stop_fraction"] * side, int(rd["count"]))
        if sigmas is None:
            sigmas = [f * side for f in d["sigma_fractions"]]
        if h is None:
            h = side / float(d["grid_divisions"])
        if floor is None:
            floor = float(d["persistence_floor_factor"]) * h
        if buckets is None:
            buckets = [f * side for f in d["bucket_fractions"]]
        return cls(
            radii if isinstance(radii, RadiusGrid) else RadiusGrid(radii),
            sigmas if isinstance(sigmas, BandwidthSet) else BandwidthSet(sigmas),
            float(h),
            float(floor),
            tuple(float(b) for b in buckets),
            bool(per_class_density),
            bool(union_diagram),
            d.get("version"),
        )

    @classmethod
    def for_layout(cls, layout: CellLayout, defaults=None, **overrides) -> "AnalysisConfig":
        return cls.for_domain(layout.domain, defaults, **overrides)

    def to_dict(self) -> dict:
        return {
            "radii": self.radii.radii.tolist(),
            "sigmas": self.sigmas.sigmas.tolist(),
            "h": self.h,
            "persistence_floor": self.floor,
            "buckets": list(self.buckets),
            "per_class_density": self.per_class_density,
            "union_diagram": self.union_diagram,
            "defaults_version": self.defaults_version,
        }
