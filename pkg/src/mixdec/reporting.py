"""Structured reports, schemas, and export formats.

Reports are plain dicts serialized as canonical JSON (sorted keys,
compact separators, no timestamps), so identical inputs yield
byte-identical files.  Every report validates against a schema shipped
with the package.  Timestamps live only in the run manifest.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from importlib import resources

import jsonschema
import numpy as np

from . import orbits as orbits_mod
from .decomposition import CyclicDecomposition
from .errors import ConfigError, SurgeryInstanceError
from .surgery import (
    Chart,
    PerturbationDomain,
    PseudoOrbit,
    SurgeryResult,
    Tile,
    make_domain,
)
from .systems import MapSystem, system_from_config
from .transition import BoxCovering, TransitionGraph

VERSION = "0.1.0"


def plain(value):
    """Recursively convert numpy/complex values into JSON-safe types."""
    if isinstance(value, dict):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [plain(v) for v in value.tolist()]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, (np.bool_,)):
        return bool(value)
    return value


def canonical_json(report: dict) -> str:
    return json.dumps(plain(report), sort_keys=True, separators=(",", ":"))


def load_schema(name: str) -> dict:
    ref = resources.files("mixdec.schemas").joinpath(f"{name}.schema.json")
    return json.loads(ref.read_text(encoding="utf-8"))


def validate_report(report: dict, schema_name: str) -> None:
    jsonschema.validate(plain(report), load_schema(schema_name))


def config_hash(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass
class RunManifest:
    config_hash: str
    subcommand: str
    parameters: dict
    started: str
    finished: str
    outputs: list = field(default_factory=list)
    version: str = VERSION

    def to_dict(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "version": self.version,
            "subcommand": self.subcommand,
            "parameters": plain(self.parameters),
            "started": self.started,
            "finished": self.finished,
            "outputs": sorted(self.outputs),
        }


# -- report builders ----------------------------------------------------


def system_constants(sys: MapSystem) -> dict:
    from .systems import H_FD, TAU_INV, TAU_JAC

    return {
        "lipschitz": float(sys.lipschitz),
        "tau_inv": TAU_INV,
        "tau_jac": TAU_JAC,
        "h_fd": H_FD,
    }


def decomposition_report(
    sys: MapSystem,
    covering: BoxCovering,
    graph: TransitionGraph,
    decompositions: list,
    trapping,
    oracle_periods=None,
    region=None,
) -> dict:
    classes = []
    for idx, dec in enumerate(decompositions):
        assert dec.period == len(dec.classes)
        classes.append(
            {
                "nodes": list(dec.cls.nodes),
                "size": len(dec.cls.nodes),
                "period": dec.period,
                "oracle_period": None
                if oracle_periods is None
                else oracle_periods[idx],
                "cyclic_classes": [list(p) for p in dec.classes],
                "mixing": [
                    {
                        "exponent": c.exponent,
                        "bound": c.bound,
                        "failure": c.failure,
                    }
                    for c in dec.certificates
                ],
            }
        )
    prov = graph.provenance
    report = {
        "system": sys.name,
        "depth": covering.depth,
        "n_boxes": covering.n_boxes,
        "n_edges": graph.n_edges(),
        "region": plain(region),
        "constants": {
            **system_constants(sys),
            "samples_per_axis": prov.samples_per_axis if prov else None,
            "padding": prov.padding if prov else None,
        },
        "classes": classes,
        "trapping_regions": [list(t) for t in trapping],
    }
    validate_report(report, "decomposition")
    return report


def orbit_record(orbit, report=None) -> dict:
    rec = {
        "period": orbit.period,
        "points": plain(orbit.points),
        "multipliers": plain(list(orbit.multipliers)),
        "residual": float(orbit.residual),
    }
    if report is not None:
        rec["verdict"] = report.verdict
        rec["relation"] = list(report.relation) if report.relation else None
    return rec


def orbits_report(sys: MapSystem, found, reports, max_period: int) -> dict:
    report = {
        "system": sys.name,
        "max_period": max_period,
        "constants": {
            **system_constants(sys),
            "tau_orb": orbits_mod.TAU_ORB,
            "tau_unit": orbits_mod.TAU_UNIT,
            "tau_rel": orbits_mod.TAU_REL,
            "k_max": orbits_mod.K_MAX,
        },
        "orbits": [orbit_record(o, r) for o, r in zip(found, reports)],
    }
    validate_report(report, "orbits")
    return report


def kset_report(sys, found, ell, max_period, region=None) -> dict:
    report = {
        "system": sys.name,
        "ell": ell,
        "max_period": max_period,
        "region": plain(region),
        "constants": {
            **system_constants(sys),
            "tau_orb": orbits_mod.TAU_ORB,
        },
        "orbits": [orbit_record(o) for o in found],
    }
    validate_report(report, "kset")
    return report


def homoclinic_report(
    sys, orbit, times_result, budget, ell_related=None
) -> dict:
    from .manifolds import DELTA_LOC, H_MAN, TAU_ANG_DEG, TAU_TRANSV_DEG

    report = {
        "system": sys.name,
        "orbit": orbit_record(orbit),
        "n_max": times_result.n_range[1],
        "budget": float(budget),
        "times": list(times_result.times),
        "ell": times_result.ell,
        "ell_with_related_periods": ell_related,
        "inconclusive": list(times_result.inconclusive),
        "constants": {
            "h_man": H_MAN,
            "tau_ang_deg": TAU_ANG_DEG,
            "tau_transv_deg": TAU_TRANSV_DEG,
            "delta_loc": DELTA_LOC,
        },
    }
    validate_report(report, "homoclinic")
    return report


def domain_constants(dom: PerturbationDomain) -> dict:
    return {
        "theta": dom.theta,
        "delta": dom.delta,
        "N": dom.n_steps,
        "eta": dom.eta,
        "eta_overridden": dom.eta_overridden,
        "n_charts": len(dom.charts),
        "n_tiles": sum(len(c.tiles) for c in dom.charts),
    }


def shortcut_event_record(event) -> dict:
    return {
        "kind": event.kind,
        "pair": list(event.pair),
        "tile": list(event.tile) if event.tile is not None else None,
        "k": event.k,
        "branch_kept": event.branch_kept,
        "length_kept": event.length_kept,
        "length_dropped": event.length_dropped,
        "base_relocated": event.base_relocated,
        "radii_before": plain(event.radii_before),
        "radius_after": event.radius_after,
        "merge_count": event.merge_count,
        "condition3_lost": event.condition3_lost,
    }


def surgery_report(
    sys,
    dom: PerturbationDomain,
    initial_length: int,
    result: SurgeryResult,
    requestable=None,
) -> dict:
    report = {
        "system": getattr(sys, "name", ""),
        "constants": domain_constants(dom),
        "initial_length": initial_length,
        "final_length": result.pseudo_orbit.length,
        "ell": result.ell,
        "condition3_requestable": requestable,
        "jumps": list(result.pseudo_orbit.jumps),
        "sequences": [
            {
                "jump": seq.jump,
                "chart": seq.chart,
                "tile": seq.tile,
                "points": plain(seq.points),
                "defects": plain(seq.defects),
                "radii": plain(seq.radii),
                "bounds": plain(seq.bounds),
                "merge_counts": list(seq.merge_counts),
            }
            for seq in result.sequences
        ],
        "trace": [shortcut_event_record(e) for e in result.trace],
        "condition1": result.condition1,
        "condition2": result.condition2,
        "condition3": result.condition3,
    }
    validate_report(report, "surgery")
    return report


def close_report(sys, dom, closing, sizes=None) -> dict:
    report = {
        "system": getattr(sys, "name", ""),
        "constants": domain_constants(dom),
        "trivial": closing.trivial,
        "period": closing.orbit.period,
        "residual": float(closing.orbit.residual),
        "anchor_shift": closing.anchor_shift,
        "in_region": closing.in_region,
        "orbit_points": plain(closing.orbit.points),
        "bumps": [
            {
                "center": plain(b.center),
                "radius": b.radius,
                "displacement": plain(b.displacement),
            }
            for b in getattr(closing.system, "bumps", ())
        ],
    }
    if sizes is not None:
        report["perturbation_c0"] = sizes[0]
        report["perturbation_c1"] = sizes[1]
    if closing.surgery is not None:
        report["surgery"] = {
            "final_length": closing.surgery.pseudo_orbit.length,
            "trace": [shortcut_event_record(e) for e in closing.surgery.trace],
            "condition1": closing.surgery.condition1,
            "condition2": closing.surgery.condition2,
            "condition3": closing.surgery.condition3,
        }
    validate_report(report, "close")
    return report


def domain_report_dict(dom: PerturbationDomain, report) -> dict:
    out = {
        "valid": report.valid,
        "constants": domain_constants(dom),
        "violations": [
            {"kind": v.kind, "message": v.message} for v in report.violations
        ],
        "warnings": [
            {"kind": w.kind, "message": w.message} for w in report.warnings
        ],
    }
    validate_report(out, "domain-report")
    return out


# -- surgery instance (de)serialization ----------------------------------


def domain_to_dict(dom: PerturbationDomain) -> dict:
    return {
        "theta": dom.theta,
        "delta": dom.delta,
        "N": dom.n_steps,
        "eta": dom.eta if dom.eta_overridden else None,
        "charts": [
            {
                "center": plain(c.center),
                "half_widths": plain(c.half_widths),
                "tiles": [
                    {"center": plain(t.center), "edge": t.edge}
                    for t in c.tiles
                ],
            }
            for c in dom.charts
        ],
    }


def domain_from_dict(data: dict) -> PerturbationDomain:
    try:
        charts = [
            Chart(
                center=np.asarray(c["center"], dtype=float),
                half_widths=np.asarray(c["half_widths"], dtype=float),
                tiles=tuple(
                    Tile(
                        center=np.asarray(t["center"], dtype=float),
                        edge=float(t["edge"]),
                    )
                    for t in c["tiles"]
                ),
            )
            for c in data["charts"]
        ]
        return make_domain(
            charts,
            n_steps=int(data["N"]),
            theta=float(data["theta"]),
            delta=float(data["delta"]),
            eta_override=data.get("eta"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SurgeryInstanceError(f"malformed domain: {exc}") from exc


def instance_to_dict(sys: MapSystem, dom, po: PseudoOrbit, ell=None) -> dict:
    return {
        "system": plain(dict(sys.config)),
        "domain": domain_to_dict(dom),
        "pseudo_orbit": {
            "points": plain(po.points),
            "jumps": list(po.jumps),
        },
        "ell": ell,
    }


def instance_from_dict(data: dict):
    from .surgery import make_pseudo_orbit

    if "system" not in data:
        raise SurgeryInstanceError("instance needs an inline 'system' config")
    try:
        sys = system_from_config(dict(data["system"]))
    except ConfigError as exc:
        raise SurgeryInstanceError(f"bad system config: {exc}") from exc
    dom = domain_from_dict(data["domain"])
    po_data = data.get("pseudo_orbit")
    po = None
    if po_data is not None:
        po = make_pseudo_orbit(
            sys,
            dom,
            np.asarray(po_data["points"], dtype=float),
            jumps=po_data.get("jumps"),
        )
    return sys, dom, po, data.get("ell")


# -- exports -------------------------------------------------------------


def graph_to_dot(graph: TransitionGraph, name: str = "transitions") -> str:
    lines = [f"digraph {name} {{"]
    for u in range(graph.n):
        lines.append(f"  {u};")
    for u, v in graph.edges():
        lines.append(f"  {u} -> {v};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def orbits_to_csv(found, reports=None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["orbit_id", "period", "residual", "verdict", "points",
         "multipliers"]
    )
    for i, orbit in enumerate(found):
        verdict = reports[i].verdict if reports else ""
        writer.writerow(
            [
                i,
                orbit.period,
                repr(float(orbit.residual)),
                verdict,
                ";".join(
                    ",".join(repr(float(x)) for x in p) for p in orbit.points
                ),
                ";".join(
                    f"{m.real!r}{m.imag:+}j" for m in orbit.multipliers
                ),
            ]
        )
    return buf.getvalue()


# -- SVG plots -----------------------------------------------------------

_PALETTE = [
    "#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3",
    "#937860", "#da8bc3", "#8c8c8c", "#ccb974", "#64b5cd",
]


def _svg_header(width, height):
    return (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">\n'
        f'<rect width="{width}" height="{height}" fill="white"/>\n'
    )


def svg_covering(covering: BoxCovering, decompositions, path) -> bool:
    """Box covering colored by cyclic class; d <= 2 only."""
    if covering.dim > 2:
        return False
    width, height = 640, 640 if covering.dim == 2 else 120
    span = covering.hi - covering.lo

    color_of = {}
    for dec_i, dec in enumerate(decompositions):
        for cls_i, part in enumerate(dec.classes):
            color = _PALETTE[(dec_i * 3 + cls_i) % len(_PALETTE)]
            for node in part:
                color_of[node] = color

    parts = [_svg_header(width, height)]
    for i in range(covering.n_boxes):
        lo = covering.box_lo(i)
        hi = covering.box_hi(i)
        x0 = (lo[0] - covering.lo[0]) / span[0] * width
        x1 = (hi[0] - covering.lo[0]) / span[0] * width
        if covering.dim == 2:
            y0 = height - (hi[1] - covering.lo[1]) / span[1] * height
            y1 = height - (lo[1] - covering.lo[1]) / span[1] * height
        else:
            y0, y1 = 10, height - 10
        fill = color_of.get(i, "#eeeeee")
        parts.append(
            f'<rect x="{x0:.2f}" y="{y0:.2f}" width="{x1 - x0:.2f}" '
            f'height="{y1 - y0:.2f}" fill="{fill}" stroke="black" '
            'stroke-width="0.4"/>\n'
        )
    parts.append("</svg>\n")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("".join(parts))
    return True


def svg_manifolds(sys, curves, crossings, path) -> bool:
    """Manifold polylines with crossing markers; d = 2 only."""
    if sys.dim != 2:
        return False
    width = height = 640
    span = sys.widths

    def to_px(p):
        x = (p[0] - sys.lo[0]) / span[0] * width
        y = height - (p[1] - sys.lo[1]) / span[1] * height
        return x, y

    parts = [_svg_header(width, height)]
    for ci, curve in enumerate(curves):
        color = _PALETTE[ci % len(_PALETTE)]
        runs = [[curve.points[0]]]
        for k in range(1, len(curve.points)):
            step = curve.points[k] - curve.points[k - 1]
            if np.any(np.abs(step) > 0.5 * span):  # wrap: break the line
                runs.append([])
            runs[-1].append(curve.points[k])
        for run in runs:
            if len(run) < 2:
                continue
            pts = " ".join(
                "{:.2f},{:.2f}".format(*to_px(p)) for p in run
            )
            parts.append(
                f'<polyline points="{pts}" fill="none" stroke="{color}" '
                'stroke-width="1"/>\n'
            )
    for hit in crossings:
        x, y = to_px(hit.point)
        parts.append(
            f'<circle cx="{x:.2f}" cy="{y:.2f}" r="3" fill="none" '
            'stroke="black" stroke-width="1"/>\n'
        )
    parts.append("</svg>\n")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("".join(parts))
    return True


def svg_surgery(before, after, path) -> bool:
    """Before/after ball diagram of a surgery run (d = 1)."""
    all_balls = []
    for label, sequences in (("before", before), ("after", after)):
        for seq in sequences:
            for k in range(seq.n_balls):
                center, radius = seq.ball(k)
                all_balls.append((label, k, float(center[0]), radius))
    if not all_balls:
        return False
    width, height = 800, 240
    xs = [b[2] for b in all_balls]
    lo, hi = min(xs), max(xs)
    span = (hi - lo) or 1.0
    lo -= 0.05 * span
    span *= 1.1
    rmax = max(b[3] for b in all_balls) or 1.0
    parts = [_svg_header(width, height)]
    for label, k, cx, r in all_balls:
        y = 60 + k * 30 + (0 if label == "before" else 120)
        x = (cx - lo) / span * width
        rr = max(r / rmax * 10.0, 1.5)
        color = "#4c72b0" if label == "before" else "#c44e52"
        parts.append(
            f'<circle cx="{x:.2f}" cy="{y}" r="{rr:.2f}" fill="none" '
            f'stroke="{color}" stroke-width="1"/>\n'
        )
    parts.append(
        '<text x="10" y="20" font-size="12">balls before (top) / after '
        "(bottom), radii rescaled</text>\n"
    )
    parts.append("</svg>\n")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("".join(parts))
    return True
