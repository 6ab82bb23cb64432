"""The mixdec command line: batch runs with structured reports.

Exit codes: 0 success, 1 usage error, 2 computation error,
3 certificate failure.
"""

from __future__ import annotations

import argparse
import json
import sys as _sysmod
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import reporting
from .decomposition import (
    cyclic_classes,
    period_oracle,
    recurrent_classes,
    trapping_regions,
)
from .errors import (
    CertificateError,
    ClassTooLargeError,
    ConfigError,
    MixdecError,
    SurgeryInvariantError,
)
from .manifolds import detect_cycle, grow_manifold, intersection_times
from .orbits import classify, find_periodic_orbits, k_set
from .reporting import RunManifest, canonical_json
from .surgery import (
    Chart,
    Tile,
    close_orbit,
    condition3_requestable,
    make_domain,
    perturbation_size,
    run_surgery,
    validate_domain,
)
from .systems import system_from_file
from .transition import build_graph

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_COMPUTATION = 2
EXIT_CERTIFICATE = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _parse_region(chunks, dim):
    if not chunks:
        return None
    region = []
    for chunk in chunks:
        vals = [float(v) for v in chunk.split(",")]
        if len(vals) != 2 * dim:
            raise _UsageError(
                f"--region needs {2 * dim} comma-separated numbers "
                f"(lo,hi per axis), got {chunk!r}"
            )
        lo = [vals[2 * i] for i in range(dim)]
        hi = [vals[2 * i + 1] for i in range(dim)]
        region.append((lo, hi))
    return region


def _now():
    return datetime.now(timezone.utc).isoformat()


def _emit(out_dir: Path, name: str, text: str, outputs: list) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    outputs.append(name)
    return path


def _load_system(path):
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise _UsageError(f"cannot read config {path}: {exc}") from exc
    try:
        sys_obj = system_from_file(path)
    except ConfigError as exc:
        raise _UsageError(str(exc)) from exc
    return sys_obj, reporting.config_hash(raw)


def _auto_domain(x, tile_edge, n_steps, theta):
    x = np.asarray(x, dtype=float)
    chart = Chart(
        center=x.copy(),
        half_widths=np.full(len(x), 0.8 * tile_edge),
        tiles=(Tile(center=x.copy(), edge=tile_edge),),
    )
    return make_domain(
        [chart], n_steps=n_steps, theta=theta, delta=3.0 * tile_edge
    )


# -- subcommand handlers -------------------------------------------------


def _cmd_decompose(args, out_dir, outputs):
    sys_obj, digest = _load_system(args.config)
    region = _parse_region(args.region, sys_obj.dim)
    covering, graph = build_graph(sys_obj, args.depth, region=region)
    classes = recurrent_classes(graph)
    decs = [cyclic_classes(graph, c) for c in classes]
    oracle = []
    for c in classes:
        try:
            oracle.append(period_oracle(graph, c))
        except ClassTooLargeError:
            oracle.append(None)
    traps = trapping_regions(graph)
    report = reporting.decomposition_report(
        sys_obj, covering, graph, decs, traps,
        oracle_periods=oracle, region=region,
    )
    _emit(out_dir, "decompose.report.json", canonical_json(report), outputs)
    _emit(out_dir, "transitions.dot", reporting.graph_to_dot(graph), outputs)
    svg_path = out_dir / "covering.svg"
    if reporting.svg_covering(covering, decs, svg_path):
        outputs.append("covering.svg")
    elif not args.quiet:
        print("spatial plot skipped: dimension > 2")
    if not args.quiet:
        for dec in decs:
            print(
                f"class of {len(dec.cls.nodes)} boxes: period {dec.period}, "
                f"{len(dec.classes)} cyclic classes"
            )
    return digest, report


def _cmd_orbits(args, out_dir, outputs):
    sys_obj, digest = _load_system(args.config)
    found = find_periodic_orbits(
        sys_obj, args.max_period, seeds_per_axis=args.seeds
    )
    reports = [classify(o) for o in found]
    report = reporting.orbits_report(sys_obj, found, reports, args.max_period)
    _emit(out_dir, "orbits.report.json", canonical_json(report), outputs)
    if args.format == "csv":
        _emit(
            out_dir, "orbits.csv",
            reporting.orbits_to_csv(found, reports), outputs,
        )
    if not args.quiet:
        print(f"{len(found)} periodic orbits up to period {args.max_period}")
    return digest, report


def _cmd_homoclinic(args, out_dir, outputs):
    sys_obj, digest = _load_system(args.config)
    found = find_periodic_orbits(
        sys_obj, args.max_period, seeds_per_axis=args.seeds
    )
    saddles = [o for o in found if o.is_saddle()]
    if not 0 <= args.orbit_id < len(saddles):
        raise _UsageError(
            f"--orbit-id {args.orbit_id} out of range: "
            f"{len(saddles)} saddle orbits found"
        )
    orbit = saddles[args.orbit_id]
    times = intersection_times(
        sys_obj, orbit, orbit, n_max=args.nmax, budget=args.budget
    )
    ell_related = None
    if args.relate:
        import math

        ell_related = times.ell
        for other in saddles:
            if other is orbit:
                continue
            verdict = detect_cycle(
                sys_obj, orbit, other, budget=args.budget, ell=times.ell
            )
            if verdict.verdict:
                ell_related = math.gcd(ell_related, other.period)
    report = reporting.homoclinic_report(
        sys_obj, orbit, times, args.budget, ell_related=ell_related
    )
    _emit(out_dir, "homoclinic.report.json", canonical_json(report), outputs)
    if sys_obj.dim == 2:
        curves = [
            grow_manifold(sys_obj, orbit, stab, b, args.budget)
            for stab in ("unstable", "stable")
            for b in (1, -1)
        ]
        from .manifolds import detect_crossings

        hits = detect_crossings(sys_obj, curves[0], curves[2])
        if reporting.svg_manifolds(
            sys_obj, curves, hits.crossings, out_dir / "manifolds.svg"
        ):
            outputs.append("manifolds.svg")
    if not args.quiet:
        print(f"times {list(times.times)} -> ell = {times.ell}")
    return digest, report


def _cmd_kset(args, out_dir, outputs):
    sys_obj, digest = _load_system(args.config)
    region = _parse_region(args.region, sys_obj.dim)
    found = k_set(
        sys_obj, args.ell, region=region, max_period=args.max_period,
        seeds_per_axis=args.seeds,
    )
    report = reporting.kset_report(
        sys_obj, found, args.ell, args.max_period, region=region
    )
    _emit(out_dir, "kset.report.json", canonical_json(report), outputs)
    if args.format == "csv":
        _emit(out_dir, "kset.csv", reporting.orbits_to_csv(found), outputs)
    if not args.quiet:
        print(f"{len(found)} orbits with period not a multiple of {args.ell}")
    return digest, report


def _load_instance(path):
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise _UsageError(f"cannot read instance {path}: {exc}") from exc
    try:
        data = json.loads(raw.decode("utf-8"))
    except json.JSONDecodeError as exc:
        raise _UsageError(f"{path}: parse error at line {exc.lineno}, "
                          f"column {exc.colno}: {exc.msg}") from exc
    return data, reporting.config_hash(raw)


def _cmd_surgery(args, out_dir, outputs):
    data, digest = _load_instance(args.instance)
    sys_obj, dom, po, inst_ell = reporting.instance_from_dict(data)
    if po is None:
        raise _UsageError("instance has no pseudo-orbit")
    ell = args.ell if args.ell is not None else inst_ell
    requestable = None if ell is None else condition3_requestable(po, ell)
    before_sequences = None
    initial_length = po.length
    result = run_surgery(sys_obj, dom, po, ell=ell)
    report = reporting.surgery_report(
        sys_obj, dom, initial_length, result, requestable=requestable
    )
    _emit(out_dir, "surgery.report.json", canonical_json(report), outputs)
    if reporting.svg_surgery(
        result.sequences, result.sequences, out_dir / "surgery.svg"
    ):
        outputs.append("surgery.svg")
    if not result.certified:
        raise CertificateError("surgery result failed certification")
    if not args.quiet:
        print(
            f"length {initial_length} -> {result.pseudo_orbit.length}, "
            f"{len(result.trace)} shortcuts, certified"
        )
    return digest, report


def _cmd_close(args, out_dir, outputs):
    sys_obj, digest = _load_system(args.config)
    x = [float(v) for v in args.point.split(",")]
    if len(x) != sys_obj.dim:
        raise _UsageError(
            f"--point needs {sys_obj.dim} comma-separated coordinates"
        )
    region = _parse_region(args.region, sys_obj.dim)
    dom = _auto_domain(x, args.tile_edge, args.n_steps, args.theta)
    closing = close_orbit(
        sys_obj, dom, x, ell=args.ell, region=region, budget=args.budget
    )
    sizes = perturbation_size(
        sys_obj, closing.system, sample_budget=1000, seed=args.seed
    ) if not closing.trivial else (0.0, 0.0)
    report = reporting.close_report(sys_obj, dom, closing, sizes=sizes)
    _emit(out_dir, "close.report.json", canonical_json(report), outputs)
    if not args.quiet:
        print(
            f"closed orbit of period {closing.orbit.period}, residual "
            f"{closing.orbit.residual:.2e}, C0/C1 = {sizes[0]:.3g}/"
            f"{sizes[1]:.3g}"
        )
    return digest, report


def _cmd_validate_domain(args, out_dir, outputs):
    data, digest = _load_instance(args.instance)
    sys_obj, dom, _po, _ = reporting.instance_from_dict(data)
    report_obj = validate_domain(dom, sys_obj)
    report = reporting.domain_report_dict(dom, report_obj)
    _emit(out_dir, "domain.report.json", canonical_json(report), outputs)
    if not args.quiet:
        state = "valid" if report_obj.valid else (
            f"{len(report_obj.violations)} violation(s)"
        )
        print(f"domain: {state}")
    return digest, report


_HANDLERS = {
    "decompose": _cmd_decompose,
    "orbits": _cmd_orbits,
    "homoclinic": _cmd_homoclinic,
    "kset": _cmd_kset,
    "surgery": _cmd_surgery,
    "close": _cmd_close,
    "validate-domain": _cmd_validate_domain,
}


def build_parser() -> _Parser:
    parser = _Parser(prog="mixdec", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out-dir", default=".")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("decompose", help="recurrent classes and mixing")
    p.add_argument("config")
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--region", nargs="*", default=None)
    common(p)

    p = sub.add_parser("orbits", help="Newton periodic-orbit search")
    p.add_argument("config")
    p.add_argument("--max-period", type=int, required=True)
    p.add_argument("--seeds", type=int, default=12)
    common(p)

    p = sub.add_parser("homoclinic", help="intersection times of a saddle")
    p.add_argument("config")
    p.add_argument("--orbit-id", type=int, required=True)
    p.add_argument("--nmax", type=int, required=True)
    p.add_argument("--max-period", type=int, default=2)
    p.add_argument("--seeds", type=int, default=12)
    p.add_argument("--budget", type=float, default=4.0)
    p.add_argument("--relate", action="store_true",
                   help="also gcd in periods of cycle-related orbits")
    common(p)

    p = sub.add_parser("kset", help="periodic orbits off the period lattice")
    p.add_argument("config")
    p.add_argument("--ell", type=int, required=True)
    p.add_argument("--max-period", type=int, default=6)
    p.add_argument("--seeds", type=int, default=12)
    p.add_argument("--region", nargs="*", default=None)
    common(p)

    p = sub.add_parser("surgery", help="run shortcut surgery on an instance")
    p.add_argument("instance")
    p.add_argument("--ell", type=int, default=None)
    common(p)

    p = sub.add_parser("close", help="close a near-return into a periodic orbit")
    p.add_argument("config")
    p.add_argument("--point", required=True)
    p.add_argument("--ell", type=int, required=True)
    p.add_argument("--budget", type=int, default=1000)
    p.add_argument("--tile-edge", type=float, default=0.1)
    p.add_argument("--n-steps", type=int, default=2)
    p.add_argument("--theta", type=float, default=0.5)
    p.add_argument("--region", nargs="*", default=None)
    common(p)

    p = sub.add_parser("validate-domain", help="check tiled-domain axioms")
    p.add_argument("instance")
    common(p)
    return parser


def run(subcommand: str, argv: list) -> RunManifest:
    """Programmatic entry: execute one subcommand, return its manifest."""
    parser = build_parser()
    args = parser.parse_args([subcommand, *argv])
    out_dir = Path(args.out_dir)
    outputs: list = []
    started = _now()
    digest, _report = _HANDLERS[subcommand](args, out_dir, outputs)
    manifest = RunManifest(
        config_hash=digest,
        subcommand=subcommand,
        parameters={
            k: v
            for k, v in sorted(vars(args).items())
            if k not in ("subcommand", "quiet")
        },
        started=started,
        finished=_now(),
        outputs=list(outputs),
    )
    manifest_name = f"{subcommand}.manifest.json"
    manifest.outputs.append(manifest_name)
    path = out_dir / manifest_name
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(manifest.to_dict(), sort_keys=True, indent=1))
        fh.write("\n")
    reporting.validate_report(manifest.to_dict(), "manifest")
    return manifest


def main(argv=None) -> int:
    argv = list(_sysmod.argv[1:] if argv is None else argv)
    try:
        if not argv:
            raise _UsageError("a subcommand is required")
        run(argv[0], argv[1:])
        return EXIT_OK
    except _UsageError as exc:
        print(f"usage error: {exc}", file=_sysmod.stderr)
        return EXIT_USAGE
    except (CertificateError, SurgeryInvariantError) as exc:
        print(f"certificate failure: {exc}", file=_sysmod.stderr)
        return EXIT_CERTIFICATE
    except MixdecError as exc:
        print(f"computation error: {exc}", file=_sysmod.stderr)
        return EXIT_COMPUTATION


if __name__ == "__main__":
    raise SystemExit(main())
