"""Command-line interface: analyze, compare, synthesize, vectorize, render.

Exit codes: 0 success, 2 I/O (missing or unreadable file), 3 validation or
format errors (including bad arguments), 4 internal errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .config import AnalysisConfig, load_defaults
from .errors import CellContextError, FormatError
from .layout import CellLayout, load_layout, save_layout
from .matching import metric_report
from .render import render_svg
from .spatial import cross_k_matrix
from .synthesis import SynthesisConfig, synthesize
from .topology import EnrichedPersistenceDiagram, per_class_diagrams, union_diagram, vectorize_diagram

EXIT_OK, EXIT_IO, EXIT_VALIDATION, EXIT_INTERNAL = 0, 2, 3, 4


class UsageError(CellContextError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_descriptor_flags(p):
    p.add_argument("--radii", type=_floats, help="comma-separated K-function radii")
    p.add_argument("--sigmas", type=_floats, help="comma-separated density bandwidths")
    p.add_argument("--grid-h", type=float, help="distance-transform grid spacing")
    p.add_argument("--buckets", type=_floats, help="persistence bucket left edges, starting at 0")
    p.add_argument("--union-diagram", action="store_true", help="also compute the all-classes diagram")
    p.add_argument("--format", choices=("csv", "json"), help="layout file format (default: from extension)")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="cellcontext", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", help="descriptors of one layout as JSON")
    p.add_argument("layout")
    p.add_argument("-o", "--output", help="report path (default: stdout)")
    _add_descriptor_flags(p)

    p = sub.add_parser("compare", help="metric table of a generated layout against a reference")
    p.add_argument("generated")
    p.add_argument("reference")
    p.add_argument("-o", "--output", help="JSON report path")
    _add_descriptor_flags(p)

    p = sub.add_parser("synthesize", help="anneal a new layout matching a reference")
    p.add_argument("reference")
    p.add_argument("-o", "--output", required=True, help="synthesized layout path")
    p.add_argument("--trace", help="trace CSV path (default: <output stem>.trace.csv)")
    p.add_argument("--config", help="JSON file of synthesis settings")
    p.add_argument("--seed", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--lambda-cc", type=float)
    p.add_argument("--lambda-k", type=float)
    p.add_argument("--min-separation", type=float, help="in normalized units, domain side = 2")
    p.add_argument("--emit-init", action="store_true", help="also write and score the initial layout")
    p.add_argument("--summary", help="write the metric summary as JSON here")
    _add_descriptor_flags(p)

    p = sub.add_parser("vectorize", help="log-histogram features of diagrams")
    p.add_argument("input", help="layout file, or an analyze report / diagram JSON")
    p.add_argument("-o", "--output", help="JSON path (default: stdout)")
    _add_descriptor_flags(p)

    p = sub.add_parser("render", help="SVG picture of a layout and optional diagram")
    p.add_argument("layout")
    p.add_argument("--diagram", help="analyze report or diagram JSON")
    p.add_argument("-o", "--output", required=True, help="SVG path")
    p.add_argument("--format", choices=("csv", "json"))
    return ap


# ---------------------------------------------------------------------------


def _analysis_config(layout: CellLayout, args, defaults) -> AnalysisConfig:
    return AnalysisConfig.for_layout(
        layout, defaults,
        radii=getattr(args, "radii", None),
        sigmas=getattr(args, "sigmas", None),
        h=getattr(args, "grid_h", None),
        buckets=getattr(args, "buckets", None),
        union_diagram=getattr(args, "union_diagram", False),
    )


def _emit(doc: dict, path) -> None:
    text = json.dumps(doc, indent=1, sort_keys=False) + "\n"
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _header(command: str, defaults: dict) -> dict:
    return {"tool": "cellcontext", "version": __version__, "command": command, "defaults": defaults}


def _layout_summary(layout: CellLayout) -> dict:
    return {
        "domain": list(layout.domain),
        "classes": list(layout.class_names),
        "counts": layout.counts().tolist(),
    }


def _features(diagrams, buckets) -> list[dict]:
    out = []
    for d in diagrams:
        f = vectorize_diagram(d, buckets)
        out.append({"class_id": d.class_id, "n_holes": len(d), "log_histogram": f.log_histogram.tolist()})
    return out


def analyze_report(layout: CellLayout, cfg: AnalysisConfig, defaults: dict) -> dict:
    kw = dict(h=cfg.h, radii=cfg.radii, sigmas=cfg.sigmas, floor=cfg.floor,
              per_class_density=cfg.per_class_density)
    diagrams = per_class_diagrams(layout, **kw)
    counts = layout.counts()
    c = layout.n_classes
    degenerate = [[bool((counts[s] * (counts[s] - 1) if s == t else counts[s] * counts[t]) == 0)
                   for t in range(c)] for s in range(c)]
    doc = _header("analyze", defaults)
    doc.update({
        "config": cfg.to_dict(),
        "layout": _layout_summary(layout),
        "cross_k": {
            "radii": cfg.radii.radii.tolist(),
            "matrix": cross_k_matrix(layout, cfg.radii).tolist(),
            "degenerate": degenerate,
        },
        "diagrams": [d.to_dict() for d in diagrams],
        "features": _features(diagrams, cfg.buckets),
    })
    if cfg.union_diagram:
        u = union_diagram(layout, **kw)
        doc["union_diagram"] = u.to_dict()
        doc["union_feature"] = _features([u], cfg.buckets)[0]
    return doc


def cmd_analyze(args) -> int:
    defaults = load_defaults()
    layout = load_layout(args.layout, args.format)
    _emit(analyze_report(layout, _analysis_config(layout, args, defaults), defaults), args.output)
    return EXIT_OK


def cmd_compare(args) -> int:
    defaults = load_defaults()
    gen = load_layout(args.generated, args.format)
    ref = load_layout(args.reference, args.format)
    report = metric_report(gen, ref, _analysis_config(ref, args, defaults))
    print(report.to_table())
    if args.output:
        doc = _header("compare", defaults)
        doc.update(report.to_dict())
        _emit(doc, args.output)
    return EXIT_OK


def _sibling(path: Path, suffix: str) -> Path:
    return path.with_name(path.stem + suffix)


def cmd_synthesize(args) -> int:
    defaults = load_defaults()
    # --format picks the output format here; the reference is read by extension
    ref = load_layout(args.reference)
    overrides = dict(seed=args.seed, steps=args.steps, lambda_cc=args.lambda_cc, lambda_k=args.lambda_k,
                     min_separation=args.min_separation)
    # descriptor overrides are given in reference units; synthesis works on a side of 2
    scale = 2.0 / ref.shorter_side if ref.shorter_side > 0 else 1.0
    if args.radii:
        overrides["radii"] = [r * scale for r in args.radii]
    if args.sigmas:
        overrides["sigmas"] = [s * scale for s in args.sigmas]
    if args.grid_h is not None:
        overrides["h"] = args.grid_h * scale
    if args.config:
        config = SynthesisConfig.from_json(args.config, defaults, **overrides)
    else:
        config = SynthesisConfig.default(defaults, **overrides)
    out_path = Path(args.output)
    fmt = args.format or (out_path.suffix.lower().lstrip(".") or "csv")
    synth, trace, init = synthesize(ref, config, return_init=True)
    save_layout(synth, out_path, fmt)
    trace.to_csv(args.trace or _sibling(out_path, ".trace.csv"))

    acfg = _analysis_config(ref, args, defaults)
    report = metric_report(synth, ref, acfg)
    summary = _header("synthesize", defaults)
    summary.update({
        "synthesis_config": config.to_dict(),
        "objective": {"initial": trace.initial._asdict(), "best": trace.best._asdict()},
        "n_cells": len(synth),
        "metrics": report.to_dict(),
    })
    print(f"objective: initial {trace.initial.total:.6g}  best {trace.best.total:.6g}  "
          f"({len(trace)} steps, {len(synth)} cells kept)")
    print("synthesized vs reference")
    print(report.to_table())
    if args.emit_init:
        init_path = _sibling(out_path, ".init." + fmt)
        save_layout(init, init_path, fmt)
        init_report = metric_report(init, ref, acfg)
        summary["init_metrics"] = init_report.to_dict()
        print("initial vs reference")
        print(init_report.to_table())
    if args.summary:
        _emit(summary, args.summary)
    return EXIT_OK


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: {e.msg} (line {e.lineno})") from None


def _diagrams_from_doc(doc) -> list[dict]:
    """Diagram dicts from an analyze report, a single diagram, or a list of diagrams."""
    if isinstance(doc, list):
        return doc
    if isinstance(doc, dict) and "diagrams" in doc:
        return list(doc["diagrams"])
    if isinstance(doc, dict) and isinstance(doc.get("points"), list) and all(
        isinstance(p, dict) for p in doc["points"]
    ):
        return [doc]
    raise FormatError("expected an analyze report or diagram JSON")


def _is_diagram_json(path: Path) -> bool:
    if path.suffix.lower() != ".json":
        return False
    doc = _read_json(path)
    if isinstance(doc, dict) and "diagrams" in doc:
        return True
    pts = doc.get("points") if isinstance(doc, dict) else None
    return isinstance(pts, list) and bool(pts) and isinstance(pts[0], dict)


def cmd_vectorize(args) -> int:
    defaults = load_defaults()
    path = Path(args.input)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    doc = _header("vectorize", defaults)
    if _is_diagram_json(path):
        src = _read_json(path)
        diagrams = [EnrichedPersistenceDiagram.from_dict(d) for d in _diagrams_from_doc(src)]
        buckets = args.buckets
        if buckets is None and isinstance(src, dict):
            buckets = src.get("config", {}).get("buckets")
        if buckets is None:
            raise UsageError("--buckets is required for diagram input without a config")
    else:
        layout = load_layout(path, args.format)
        cfg = _analysis_config(layout, args, defaults)
        diagrams = per_class_diagrams(layout, h=cfg.h, radii=cfg.radii, sigmas=cfg.sigmas, floor=cfg.floor)
        if cfg.union_diagram:
            diagrams.append(union_diagram(layout, h=cfg.h, radii=cfg.radii, sigmas=cfg.sigmas, floor=cfg.floor))
        buckets = cfg.buckets
    doc["buckets"] = [float(b) for b in buckets]
    doc["features"] = _features(diagrams, buckets)
    _emit(doc, args.output)
    return EXIT_OK


def cmd_render(args) -> int:
    layout = load_layout(args.layout, args.format)
    diagrams = None
    if args.diagram:
        diagrams = _diagrams_from_doc(_read_json(args.diagram))
    Path(args.output).write_text(render_svg(layout, diagrams), encoding="utf-8")
    return EXIT_OK


COMMANDS = {
    "analyze": cmd_analyze,
    "compare": cmd_compare,
    "synthesize": cmd_synthesize,
    "vectorize": cmd_vectorize,
    "render": cmd_render,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except (FileNotFoundError, IsADirectoryError, PermissionError) as e:
        print(f"cellcontext: {e}", file=sys.stderr)
        return EXIT_IO
    except OSError as e:
        print(f"cellcontext: I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except (CellContextError, ValueError) as e:
        print(f"cellcontext: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as e:  # noqa: BLE001
        print(f"cellcontext: internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
