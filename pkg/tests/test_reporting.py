import json

import numpy as np
import pytest

from mixdec import reporting
from mixdec.decomposition import cyclic_classes, recurrent_classes, trapping_regions
from mixdec.generators import random_overlap_instance, random_surgery_instance
from mixdec.reporting import (
    canonical_json,
    domain_from_dict,
    domain_to_dict,
    graph_to_dot,
    instance_from_dict,
    instance_to_dict,
    orbits_to_csv,
    plain,
)
from mixdec.surgery import run_surgery, secondary_shortcuts, validate_domain
from mixdec.transition import build_graph, graph_from_edges


def test_plain_handles_numpy_and_complex():
    out = plain(
        {
            "a": np.array([1.5, 2.5]),
            "b": np.int64(3),
            "c": complex(1, -2),
            "d": (np.float64(0.25), [np.bool_(True)]),
        }
    )
    assert out == {"a": [1.5, 2.5], "b": 3, "c": [1.0, -2.0],
                   "d": [0.25, [True]]}


def test_canonical_json_is_sorted_and_compact():
    s = canonical_json({"b": 1, "a": [1.0, 2.0]})
    assert s == '{"a":[1.0,2.0],"b":1}'


def test_decomposition_report_roundtrip(doubling):
    covering, graph = build_graph(doubling, depth=3)
    classes = recurrent_classes(graph)
    decs = [cyclic_classes(graph, c) for c in classes]
    report = reporting.decomposition_report(
        doubling, covering, graph, decs, trapping_regions(graph)
    )
    # schema-validated inside the builder; spot-check content
    assert report["depth"] == 3
    assert report["classes"][0]["period"] == 1
    text = canonical_json(report)
    assert json.loads(text) == json.loads(text)


def test_dot_export():
    g = graph_from_edges(3, [(0, 1), (1, 2), (2, 0)])
    dot = graph_to_dot(g)
    assert "digraph" in dot
    assert "0 -> 1;" in dot
    assert dot.count("->") == 3


def test_orbit_csv(cat):
    from mixdec.orbits import classify, find_periodic_orbits

    found = find_periodic_orbits(cat, 1)
    text = orbits_to_csv(found, [classify(o) for o in found])
    lines = text.strip().splitlines()
    assert lines[0].startswith("orbit_id,period")
    assert len(lines) == 2
    assert ",hyperbolic," in lines[1]


def test_surgery_instance_roundtrip():
    sys, dom, po, info = random_surgery_instance(3, ell=2)
    data = json.loads(canonical_json(instance_to_dict(sys, dom, po, ell=2)))
    sys2, dom2, po2, ell = instance_from_dict(data)
    assert ell == 2
    assert dom2.theta == dom.theta
    assert dom2.eta == dom.eta
    assert not dom2.eta_overridden
    assert po2.length == po.length
    assert po2.jumps == po.jumps
    assert np.allclose(po2.points, po.points)
    result = run_surgery(sys2, dom2, po2, ell=2)
    assert result.certified


def test_domain_dict_preserves_override():
    sys, dom, po, info = random_surgery_instance(5)
    data = domain_to_dict(dom)
    assert data["eta"] is None  # paper constant, not overridden
    dom2 = domain_from_dict(data)
    assert dom2.eta == dom.eta

    import dataclasses

    forced = dataclasses.replace(dom, eta=0.25, eta_overridden=True)
    data = domain_to_dict(forced)
    assert data["eta"] == 0.25
    dom3 = domain_from_dict(data)
    assert dom3.eta_overridden and dom3.eta == 0.25


def test_surgery_report_schema():
    sys, dom, po, sequences, info = random_overlap_instance(2, ell=3)
    result = secondary_shortcuts(sys, dom, po, sequences, ell=3)
    report = reporting.surgery_report(sys, dom, info["length"], result,
                                      requestable=True)
    assert report["condition2"] is True
    assert report["final_length"] == result.pseudo_orbit.length


def test_domain_report_schema(translation_line):
    sys, dom, po, info = random_surgery_instance(1)
    rep = validate_domain(dom, sys)
    data = reporting.domain_report_dict(dom, rep)
    assert data["valid"] is True


def test_svg_covering(tmp_path, rotation_quarter):
    covering, graph = build_graph(rotation_quarter, depth=2)
    decs = [cyclic_classes(graph, c) for c in recurrent_classes(graph)]
    path = tmp_path / "covering.svg"
    assert reporting.svg_covering(covering, decs, path)
    text = path.read_text()
    assert text.startswith("<?xml")
    assert text.count("<rect") == 4 + 1  # boxes plus background


def test_svg_manifolds(tmp_path, cat):
    from mixdec.manifolds import detect_crossings, grow_manifold
    from mixdec.orbits import find_periodic_orbits

    orb = find_periodic_orbits(cat, 1)[0]
    wu = grow_manifold(cat, orb, "unstable", 1, 1.5)
    ws = grow_manifold(cat, orb, "stable", 1, 1.5)
    hits = detect_crossings(cat, wu, ws)
    path = tmp_path / "manifolds.svg"
    assert reporting.svg_manifolds(cat, [wu, ws], hits.crossings, path)
    text = path.read_text()
    assert "<polyline" in text
    assert text.count("<circle") == len(hits.crossings)


def test_svg_surgery(tmp_path):
    sys, dom, po, sequences, info = random_overlap_instance(4, ell=None)
    result = secondary_shortcuts(sys, dom, po, dict(sequences))
    path = tmp_path / "surgery.svg"
    assert reporting.svg_surgery(
        tuple(sequences.values()), result.sequences, path
    )
    assert "<circle" in path.read_text()
