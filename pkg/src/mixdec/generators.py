"""Seeded random instances for the property suites.

Two surgery-instance families are produced, matching the two halves of
the shortcut machinery:

* :func:`random_surgery_instance` builds a genuine circle-rotation
  pseudo-orbit hopping between tiled lattice sites, with deliberate
  revisits so that primary shortcuts fire; every jump displacement is
  sized against the paper constant eta = (theta/4)^4.
* :func:`random_overlap_instance` builds a tiled row with many jumps
  and hand-laid connecting sequences whose balls overlap across
  abutting tiles, driving the secondary-shortcut merges (the
  ten-jumps-over-thirty-tiles shape).

Everything is driven by numpy's default_rng so a seed reproduces
instances bit-for-bit.
"""

from __future__ import annotations

import math

import numpy as np

from .surgery import (
    Chart,
    ConnectingSequence,
    PseudoOrbit,
    Tile,
    make_domain,
    make_pseudo_orbit,
)
from .systems import MapSystem, system_from_config
from .transition import TransitionGraph, graph_from_edges

LATTICE = 41  # prime grid order for the rotation instances


def random_digraph(rng, max_nodes: int = 12, density=(0.1, 0.5)) -> TransitionGraph:
    """A seeded digraph with <= max_nodes nodes and uniform edge density."""
    n = int(rng.integers(2, max_nodes + 1))
    p = float(rng.uniform(*density))
    mask = rng.random((n, n)) < p
    edges = [(int(u), int(v)) for u, v in np.argwhere(mask)]
    return graph_from_edges(n, edges)


def _rotation_system(alpha: float) -> MapSystem:
    cfg = {
        "dimension": 1,
        "domain": [[0.0, 1.0]],
        "periodic": [True],
        "map": [f"x1 + {alpha!r}"],
        "inverse": [f"x1 - {alpha!r}"],
        "jacobian": ["1"],
        "lipschitz": 1.0,
        "name": "surgery-rotation",
    }
    return system_from_config(cfg, name="surgery-rotation")


def _translation_system() -> MapSystem:
    cfg = {
        "dimension": 1,
        "domain": [[-100.0, 100000.0]],
        "periodic": [False],
        "map": ["x1 + 50"],
        "inverse": ["x1 - 50"],
        "jacobian": ["1"],
        "lipschitz": 1.0,
        "name": "surgery-translation",
    }
    return system_from_config(cfg, name="surgery-translation")


def random_surgery_instance(seed: int, ell: int | None = None):
    """A valid d=1 rotation instance with the paper constant eta.

    The rotation is p/41 plus a tiny drift; charts sit on a few lattice
    sites, the pseudo-orbit hops between them with jump clusters far
    smaller than the tiles, and scheduled revisits plant same-tile pairs
    for the primary shortcuts.  The orbit length avoids multiples of
    ell when period control is requested.

    Returns (system, domain, pseudo_orbit, info).
    """
    rng = np.random.default_rng(seed)
    N = int(rng.integers(2, 4))
    theta = float(rng.uniform(0.55, 0.9))
    eta = (theta / 4.0) ** 4

    p = int(rng.integers(7, 35))
    while math.gcd(p, LATTICE) != 1:
        p += 1
    p_inv = pow(p, -1, LATTICE)
    cell = 1.0 / LATTICE

    # hosted sites: pairwise differences off +-p, ..., +-(N-1)p so all
    # chart iterates f^k(V_s), 0 <= k <= N-1, stay pairwise disjoint
    n_sites = int(rng.integers(3, 6))
    forbidden = set()
    for k in range(1, N):
        forbidden.add((k * p) % LATTICE)
        forbidden.add((-k * p) % LATTICE)
    for _ in range(500):
        sites = sorted(
            int(s) for s in rng.choice(LATTICE, size=n_sites, replace=False)
        )
        diffs = {(a - b) % LATTICE for a in sites for b in sites if a != b}
        if not (diffs & forbidden):
            break
    else:
        raise RuntimeError("no admissible site placement found")

    edge_scale = float(rng.uniform(0.18, 0.3)) * cell
    charts = []
    edges_min = np.inf
    for s in sites:
        e = edge_scale * float(rng.uniform(1.0, 1.5))
        edges_min = min(edges_min, e)
        charts.append(
            Chart(
                center=np.array([s * cell]),
                half_widths=np.array([0.75 * e + 0.1 * edge_scale]),
                tiles=(Tile(center=np.array([s * cell]), edge=e),),
            )
        )
    delta = max(c.diameter for c in charts) * 1.5
    dom = make_domain(charts, n_steps=N, theta=theta, delta=delta)

    rho = 0.2 * N * eta * edges_min / 8.0  # jump-cluster radius

    # schedule: home first, others once, one optional revisit
    home = sites[0]
    schedule = [home] + sites[1:]
    if len(sites) > 2 and rng.random() < 0.6:
        schedule.append(int(rng.choice(sites[1:])))

    def leg_between(a, b):
        step = ((b - a) * p_inv) % LATTICE
        candidates = [step + LATTICE * m for m in range(3) if step + LATTICE * m >= N + 1]
        return int(candidates[int(rng.integers(0, len(candidates)))])

    legs = [
        leg_between(schedule[i], schedule[(i + 1) % len(schedule)])
        for i in range(len(schedule))
    ]
    if ell is not None:
        stretch = 0
        while sum(legs) % ell == 0 and stretch < 4:
            legs[int(rng.integers(0, len(legs)))] += LATTICE
            stretch += 1
        assert sum(legs) % ell != 0, "lattice order must be coprime to ell"

    total_steps = sum(legs)
    drift = rho / (50.0 * total_steps)
    alpha = p / LATTICE + drift

    # re-entry offsets: free within the cluster, defects kept clearly
    # above the orbit tolerance
    m = len(schedule)
    for _ in range(200):
        w_off = [float(rng.uniform(-0.4, 0.4)) * rho for _ in range(m)]
        exits = [0.0] * m
        for i in range(m):
            exits[(i + 1) % m] = w_off[i] + legs[i] * drift
        if min(abs(exits[i] - w_off[i]) for i in range(m)) >= 0.05 * rho:
            break
    else:
        raise RuntimeError("no admissible jump-offset plan found")

    sys = _rotation_system(alpha)
    points = []
    x = home * cell + w_off[0]
    for i in range(m):
        for _ in range(legs[i]):
            x = (x + alpha) % 1.0
            points.append(x)
        nxt = (i + 1) % m
        x = schedule[nxt] * cell + w_off[nxt]
    info = {
        "seed": seed,
        "kind": "rotation",
        "alpha": alpha,
        "theta": theta,
        "eta": eta,
        "N": N,
        "schedule": tuple(schedule),
        "legs": tuple(legs),
        "length": len(points),
        "rho": rho,
    }
    po = make_pseudo_orbit(sys, dom, np.array(points)[:, None])
    return sys, dom, po, info


def random_overlap_instance(seed: int, ell: int | None = None):
    """A tiled row with many jumps and supplied connecting sequences
    whose balls overlap across abutting tiles (secondary-shortcut
    stress shape: ~10 jumps over up to ~30 tiles).

    The jump exits sit in clusters that straddle shared tile faces, so
    ball merges are forced; chains of three straddling jumps drive
    repeated merges of one ball.  The orbit length avoids multiples of
    ell when requested.

    Returns (system, domain, pseudo_orbit, sequences, info).
    """
    rng = np.random.default_rng(seed + 10_000_000)
    sys = _translation_system()
    shift = 50.0
    N = int(rng.integers(2, 4))
    theta = float(rng.uniform(0.55, 0.9))
    eta = (theta / 4.0) ** 4

    n_tiles = int(rng.integers(12, 31))
    edges = []
    e = float(rng.uniform(0.8, 1.2))
    for _ in range(n_tiles):
        edges.append(e)
        e = min(max(e * float(rng.uniform(0.7, 1.4)), 0.5), 2.0)
    # keep the row narrower than the shift so chart iterates stay apart
    scale = min(1.0, 40.0 / float(np.sum(edges)))
    edges = [w * scale for w in edges]
    lefts = np.concatenate([[0.0], np.cumsum(edges)[:-1]])
    tiles = tuple(
        Tile(center=np.array([l + w / 2]), edge=w)
        for l, w in zip(lefts, edges)
    )
    row_span = float(np.sum(edges))
    chart = Chart(
        center=np.array([row_span / 2]),
        half_widths=np.array([row_span / 2 + 2.0]),
        tiles=tiles,
    )
    dom = make_domain([chart], n_steps=N, theta=theta, delta=2 * row_span + 10.0)

    # jump groups at shared tile faces: straddling pairs force one ball
    # merge, same-side triples force repeated merges of one ball;
    # singles sit deep inside their tiles and stay untouched
    n_groups = int(rng.integers(3, 6))
    face_ids = sorted(
        int(i)
        for i in rng.choice(n_tiles - 1, size=min(n_groups, n_tiles - 1),
                            replace=False)
    )
    jump_exits = []  # (exit position, tile index)
    group_kinds = []
    for f in face_ids:
        face = lefts[f] + edges[f]
        cap = eta * min(edges[f], edges[f + 1]) / 8.0  # per-step budget
        u = rng.random()
        kind = "triple" if u < 0.3 else ("pair" if u < 0.85 else "single")
        group_kinds.append(kind)
        gap_unit = 0.2 * cap
        if kind in ("pair", "triple"):
            jump_exits.append((face - gap_unit, f))
            jump_exits.append((face + gap_unit, f + 1))
            if kind == "triple":
                jump_exits.append((face + 2.75 * gap_unit, f + 1))
        else:
            jump_exits.append(
                (face - 0.45 * edges[f] * float(rng.uniform(0.5, 1.0)), f)
            )

    # realize the pseudo-orbit: alternating jump exits and filler runs
    jump_exits.sort()
    points = []
    jump_steps = []
    sequences = {}
    filler_base = row_span + 100.0
    made = 0
    for exit_pos, t_idx in jump_exits:
        tile = tiles[t_idx]
        cap = eta * tile.edge / 8.0
        # re-entry pullback: push toward the tile center with a defect
        # in [0.5, 0.9] * cap per step (well inside the eta budget, big
        # enough that straddling balls are guaranteed to meet)
        disp = N * cap * float(rng.uniform(0.5, 0.9))
        target = exit_pos + math.copysign(disp, tile.center[0] - exit_pos)
        step_index = len(points)
        jump_steps.append(step_index)
        points.append([exit_pos])
        # connecting sequence: interpolate, push forward by the shift
        gap = target - exit_pos
        pts = np.array(
            [[exit_pos + (k / N) * gap + k * shift] for k in range(N + 1)]
        )
        defects = np.full(N, abs(gap) / N)
        radii = defects / theta
        bounds = np.full(N, tile.edge / 8.0)
        sequences[step_index] = ConnectingSequence(
            jump=step_index,
            chart=0,
            tile=t_idx,
            points=pts,
            defects=defects,
            radii=radii,
            bounds=bounds,
            merge_counts=tuple(0 for _ in range(N)),
        )
        made += 1
        # filler run between jumps, far away from the tiled row
        run = int(rng.integers(1, 4))
        base = filler_base + 500.0 * made
        for t in range(run):
            points.append([base + t * shift])

    n = len(points)
    if ell is not None and n % ell == 0:
        points.append([filler_base + 500.0 * (made + 1)])
        n += 1
    po = PseudoOrbit(
        points=np.array(points, dtype=float),
        jumps=tuple(jump_steps),
        tiles={s: (0, sequences[s].tile) for s in jump_steps},
    )
    info = {
        "seed": seed,
        "kind": "overlap",
        "theta": theta,
        "eta": eta,
        "N": N,
        "n_tiles": n_tiles,
        "groups": tuple(group_kinds),
        "length": n,
        "jumps": len(jump_steps),
    }
    return sys, dom, po, sequences, info
