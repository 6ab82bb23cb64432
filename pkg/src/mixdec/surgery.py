"""Pseudo-orbit shortcut surgery in tiled perturbation domains.

The machinery: charts tiled by cubes with bounded adjacency, periodic
pseudo-orbits whose jumps are confined to tiles, connecting sequences
splitting each jump into N small defects (constructed for maps affine
on their charts), primary shortcuts until each tile is visited at most
once, and secondary shortcuts merging intersecting balls under the
radius rule r' <= 2/theta (r1 + r2) with at most 4^d merges per ball.
A requested forbidden period ell is preserved through every branch
choice: of the two branch lengths summing to the parent length, at
least one is never a multiple of ell.

The closing pipeline turns a near-return of a non-periodic point into a
genuine periodic orbit by composing one bump-supported translation per
final ball, each moving the ball center onto the pullback of its
successor (displacement theta * radius, the elementary perturbation
contract).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    CertificateError,
    Condition3NotRequestableError,
    ConnectingBoundError,
    InconclusiveError,
    NonAffineChartError,
    SurgeryInstanceError,
    SurgeryInvariantError,
)
from .orbits import TAU_ORB, PeriodicOrbit
from .systems import MapSystem

JITTER = 1e-9
AFFINE_TOL = 1e-9
EPS_PERT_DEFAULT = 1.0


def paper_eta(theta: float, dim: int) -> float:
    """The interlocking constant eta = (theta/4)^(4^d)."""
    return (theta / 4.0) ** (4 ** dim)


# -- domain geometry ----------------------------------------------------


@dataclass(frozen=True)
class Tile:
    """A cube: barycenter plus edge length (uniform across axes)."""

    center: np.ndarray
    edge: float

    @property
    def diameter(self) -> float:
        return self.edge * math.sqrt(len(self.center))

    def contains(self, sys, point, lam: float = 1.0, strict: bool = True):
        d = np.abs(sys.wrapdiff(point, self.center)[0])
        half = lam * self.edge / 2.0
        return bool(np.all(d < half)) if strict else bool(np.all(d <= half))

    def boundary_distance(self, sys, point) -> float:
        """Distance to the closest face of the unit cube."""
        d = np.abs(sys.wrapdiff(point, self.center)[0])
        return float(np.min(self.edge / 2.0 - d))


@dataclass(frozen=True)
class Chart:
    """A chart support box (identity coordinates) with its tiles."""

    center: np.ndarray
    half_widths: np.ndarray
    tiles: tuple

    def contains(self, sys, point, margin: float = 0.0) -> bool:
        d = np.abs(sys.wrapdiff(point, self.center)[0])
        return bool(np.all(d <= self.half_widths - margin))

    @property
    def diameter(self) -> float:
        return float(2.0 * np.linalg.norm(self.half_widths))


@dataclass(frozen=True)
class PerturbationDomain:
    charts: tuple
    n_steps: int  # the connecting-sequence length N
    theta: float
    delta: float
    eta: float
    eta_overridden: bool = False

    def __post_init__(self):
        if self.n_steps < 1:
            raise SurgeryInstanceError("N must be >= 1")
        if not 0.0 < self.theta < 1.0:
            raise SurgeryInstanceError("theta must lie in (0, 1)")
        if self.delta <= 0.0:
            raise SurgeryInstanceError("delta must be positive")
        if self.eta <= 0.0:
            raise SurgeryInstanceError("eta must be positive")

    @property
    def dim(self) -> int:
        return len(self.charts[0].center)

    def tile(self, ci: int, ti: int) -> Tile:
        return self.charts[ci].tiles[ti]

    def find_tile(self, sys, point):
        """(chart, tile) whose interior holds the point, else None."""
        for ci, chart in enumerate(self.charts):
            if not chart.contains(sys, point):
                continue
            for ti, tile in enumerate(chart.tiles):
                if tile.contains(sys, point, strict=True):
                    return (ci, ti)
        return None

    def find_tiles(self, sys, points):
        """Vectorized find_tile over an (n, d) array of points."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        out = [None] * len(points)
        unresolved = np.ones(len(points), dtype=bool)
        for ci, chart in enumerate(self.charts):
            if not unresolved.any():
                break
            in_chart = np.all(
                np.abs(sys.wrapdiff(points, chart.center))
                <= chart.half_widths,
                axis=1,
            )
            for ti, tile in enumerate(chart.tiles):
                cand = unresolved & in_chart
                if not cand.any():
                    continue
                inside = np.all(
                    np.abs(sys.wrapdiff(points[cand], tile.center))
                    < tile.edge / 2.0,
                    axis=1,
                )
                hit_idx = np.flatnonzero(cand)[inside]
                for idx in hit_idx:
                    out[idx] = (ci, ti)
                unresolved[hit_idx] = False
        return out


def make_domain(
    charts,
    n_steps: int,
    theta: float,
    delta: float,
    eta_override: float | None = None,
) -> PerturbationDomain:
    dim = len(charts[0].center)
    eta = paper_eta(theta, dim) if eta_override is None else float(eta_override)
    return PerturbationDomain(
        charts=tuple(charts),
        n_steps=int(n_steps),
        theta=float(theta),
        delta=float(delta),
        eta=eta,
        eta_overridden=eta_override is not None,
    )


# -- domain validation --------------------------------------------------


@dataclass(frozen=True)
class DomainIssue:
    kind: str
    message: str


@dataclass(frozen=True)
class DomainReport:
    violations: tuple
    warnings: tuple

    @property
    def valid(self) -> bool:
        return not self.violations


def _chart_image_cloud(sys, chart, k, per_axis=17):
    axes = [
        chart.center[i]
        + np.linspace(-chart.half_widths[i], chart.half_widths[i], per_axis)
        for i in range(len(chart.center))
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    pts = sys.wrap(pts)
    for _ in range(k):
        pts = sys.evaluate_many(pts)
    return pts


def _cloud_box(sys, pts):
    """Bounding box of a cloud, unwrapped around its first point."""
    rel = sys.wrapdiff(pts, pts[0])
    lo = rel.min(axis=0)
    hi = rel.max(axis=0)
    center = pts[0] + (lo + hi) / 2.0
    return center, (hi - lo) / 2.0


def validate_domain(dom: PerturbationDomain, sys: MapSystem) -> DomainReport:
    """Check the tiled-domain axioms by sampling; always returns."""
    violations = []
    warnings = []
    dim = dom.dim
    max_adjacent = 4 ** dim

    # iterate geometry for 0 <= k < N-1: diameters < delta, disjoint;
    # for N = 1 the axiom is vacuous but V_s itself is still checked
    boxes = {}
    for s, chart in enumerate(dom.charts):
        for k in range(max(dom.n_steps - 1, 1)):
            pts = _chart_image_cloud(sys, chart, k)
            center, half = _cloud_box(sys, pts)
            diam = float(2.0 * np.linalg.norm(half))
            if diam >= dom.delta:
                violations.append(
                    DomainIssue(
                        "iterate-diameter",
                        f"f^{k}(V_{s}) has sampled diameter {diam:.6g} "
                        f">= delta = {dom.delta:.6g}",
                    )
                )
            boxes[(s, k)] = (center, half)
    keys = sorted(boxes)
    for a in range(len(keys)):
        for b in range(a + 1, len(keys)):
            (s1, k1), (s2, k2) = keys[a], keys[b]
            c1, h1 = boxes[keys[a]]
            c2, h2 = boxes[keys[b]]
            gap = np.abs(sys.wrapdiff(c1, c2)[0]) - (h1 + h2)
            if np.all(gap < 0):
                violations.append(
                    DomainIssue(
                        "iterate-overlap",
                        f"f^{k1}(V_{s1}) and f^{k2}(V_{s2}) overlap "
                        "(sampled bounding boxes)",
                    )
                )

    # tiling: interior disjointness, adjacency counts, size ratios
    all_tiles = [
        (s, t, tile)
        for s, chart in enumerate(dom.charts)
        for t, tile in enumerate(chart.tiles)
    ]
    adjacency = {(s, t): [] for s, t, _ in all_tiles}
    for a in range(len(all_tiles)):
        s1, t1, tile1 = all_tiles[a]
        for b in range(a + 1, len(all_tiles)):
            s2, t2, tile2 = all_tiles[b]
            d = np.abs(sys.wrapdiff(tile1.center, tile2.center)[0])
            half_sum = (tile1.edge + tile2.edge) / 2.0
            tol = 1e-12 * max(tile1.edge, tile2.edge)
            if np.all(d < half_sum - tol):
                violations.append(
                    DomainIssue(
                        "tile-overlap",
                        f"tiles ({s1},{t1}) and ({s2},{t2}) have "
                        "overlapping interiors",
                    )
                )
            if np.all(d <= half_sum + tol):
                adjacency[(s1, t1)].append((s2, t2))
                adjacency[(s2, t2)].append((s1, t1))
                ratio = tile1.edge / tile2.edge
                if not (0.5 - 1e-12 <= ratio <= 2.0 + 1e-12):
                    violations.append(
                        DomainIssue(
                            "tile-ratio",
                            f"adjacent tiles ({s1},{t1}) and ({s2},{t2}) "
                            f"have diameter ratio {max(ratio, 1/ratio):.3g} "
                            "outside [1/2, 2]",
                        )
                    )
    for key, neigh in sorted(adjacency.items()):
        if len(neigh) > max_adjacent:
            violations.append(
                DomainIssue(
                    "tile-adjacency",
                    f"tile {key} is adjacent to {len(neigh)} tiles "
                    f"> 4^d = {max_adjacent}",
                )
            )

    # tiles should leave room for their 3/2-cubes inside the chart
    for s, chart in enumerate(dom.charts):
        for t, tile in enumerate(chart.tiles):
            d = np.abs(sys.wrapdiff(tile.center, chart.center)[0])
            if np.any(d + 0.75 * tile.edge > chart.half_widths + 1e-12):
                warnings.append(
                    DomainIssue(
                        "tile-margin",
                        f"3/2-cube of tile ({s},{t}) exceeds its chart "
                        "support; condition-1 ball containment may fail",
                    )
                )

    # the interlocking constant
    expected = paper_eta(dom.theta, dim)
    if dom.eta_overridden:
        warnings.append(
            DomainIssue(
                "eta-override",
                f"eta overridden to {dom.eta:.6g} (paper value "
                f"(theta/4)^(4^d) = {expected:.6g})",
            )
        )
    elif dom.eta != expected:
        violations.append(
            DomainIssue(
                "eta-mismatch",
                f"eta = {dom.eta:.6g} differs from (theta/4)^(4^d) "
                f"= {expected:.6g}",
            )
        )
    return DomainReport(tuple(violations), tuple(warnings))


# -- pseudo-orbits ------------------------------------------------------


@dataclass(frozen=True)
class PseudoOrbit:
    """Periodic sequence with jumps; step i runs points[i] ->
    points[(i+1) % n].  tiles[i] is the (chart, tile) of a jump's exit
    point; base point is index 0."""

    points: np.ndarray
    jumps: tuple
    tiles: dict = field(compare=False)

    @property
    def length(self) -> int:
        return len(self.points)


def _jitter_off_boundaries(sys, dom, points):
    pts = points.copy()
    hits = dom.find_tiles(sys, pts)
    for idx in range(len(pts)):
        hit = hits[idx]
        if hit is None:
            # the point may sit exactly on a tile boundary: nudge toward
            # the center of any tile whose closure holds it
            for ci, chart in enumerate(dom.charts):
                for ti, tile in enumerate(chart.tiles):
                    if tile.contains(sys, pts[idx], strict=False):
                        step = JITTER * tile.edge
                        direction = sys.wrapdiff(tile.center, pts[idx])[0]
                        norm = np.linalg.norm(direction)
                        if norm > 0:
                            pts[idx] = sys.wrap(
                                (pts[idx] + step * direction / norm)[None, :]
                            )[0]
                        break
                else:
                    continue
                break
            continue
        ci, ti = hit
        tile = dom.tile(ci, ti)
        if tile.boundary_distance(sys, pts[idx]) < JITTER * tile.edge:
            direction = sys.wrapdiff(tile.center, pts[idx])[0]
            norm = np.linalg.norm(direction)
            if norm > 0:
                pts[idx] = sys.wrap(
                    (pts[idx] + JITTER * tile.edge * direction / norm)[None, :]
                )[0]
    return pts


def make_pseudo_orbit(
    sys: MapSystem, dom: PerturbationDomain, points, jumps=None
) -> PseudoOrbit:
    """Validate and normalize a periodic pseudo-orbit with jumps.

    Jump steps may be declared or inferred (steps where f(y_i) differs
    from y_{i+1}).  Each jump needs y_i and f^{-1}(y_{i+1}) inside one
    common tile; points are jittered off tile boundaries first.
    """
    pts = sys.wrap(np.asarray(points, dtype=float))
    if len(pts) < 1:
        raise SurgeryInstanceError("pseudo-orbit needs at least one point")
    pts = _jitter_off_boundaries(sys, dom, pts)
    n = len(pts)
    inferred = []
    for i in range(n):
        img = sys.evaluate(pts[i])
        if sys.distance(img, pts[(i + 1) % n]) >= TAU_ORB:
            inferred.append(i)
    if jumps is None:
        jumps = inferred
    else:
        jumps = sorted(int(j) for j in jumps)
        missing = [i for i in inferred if i not in jumps]
        if missing:
            raise SurgeryInstanceError(
                f"steps {missing} break f(y_i) = y_(i+1) but are not "
                "declared as jumps"
            )
    tiles = {}
    for i in jumps:
        nxt = pts[(i + 1) % n]
        pre = sys.inverse(nxt)
        hit = dom.find_tile(sys, pts[i])
        if hit is None:
            raise SurgeryInstanceError(
                f"jump point y_{i} = {pts[i]} lies in no tile"
            )
        ci, ti = hit
        if not dom.tile(ci, ti).contains(sys, pre, strict=False):
            raise SurgeryInstanceError(
                f"jump {i}: y_{i} and f^-1(y_{i+1}) are not in one tile"
            )
        tiles[i] = (ci, ti)
    return PseudoOrbit(points=pts, jumps=tuple(jumps), tiles=tiles)


# -- shortcut events ----------------------------------------------------


@dataclass(frozen=True)
class ShortcutEvent:
    kind: str  # "primary" | "secondary"
    pair: tuple  # step indices (i, j) of the shared tile / balls
    tile: tuple | None  # (chart, tile) for primary events
    k: int | None  # ball position for secondary events
    branch_kept: str  # "base" | "other"
    length_kept: int
    length_dropped: int
    base_relocated: bool
    radii_before: tuple | None = None
    radius_after: float | None = None
    merge_count: int | None = None
    condition3_lost: bool = False


def _take_branch(po: PseudoOrbit, i: int, j: int, keep_base: bool, sys, dom):
    """Split the cyclic orbit at the pair (i < j) and rebuild one branch.

    Base branch: indices 0..i and j+1..n-1 with a splice step at i.
    Other branch: indices i+1..j with a splice step at j."""
    n = po.length
    if keep_base:
        kept = list(range(0, i + 1)) + list(range(j + 1, n))
        splice_old = i
    else:
        kept = list(range(i + 1, j + 1))
        splice_old = j
        smallest = kept.index(min(kept))
        kept = kept[smallest:] + kept[:smallest]
    old_next = {}
    for pos, old in enumerate(kept):
        old_next[old] = kept[(pos + 1) % len(kept)]
    pts = po.points[kept]
    jumps = []
    tiles = {}
    for pos, old in enumerate(kept):
        nxt_old = old_next[old]
        if nxt_old == (old + 1) % n and old != splice_old:
            if old in po.jumps:
                jumps.append(pos)
                tiles[pos] = po.tiles[old]
        else:
            # splice step old -> nxt_old
            img = sys.evaluate(po.points[old])
            if sys.distance(img, po.points[nxt_old]) < TAU_ORB:
                continue  # the splice happens to be a genuine step
            jumps.append(pos)
            hit = dom.find_tile(sys, po.points[old])
            if hit is None:
                raise SurgeryInvariantError(
                    f"splice point y_{old} lost its tile"
                )
            tiles[pos] = hit
    return PseudoOrbit(points=pts, jumps=tuple(jumps), tiles=tiles)


def condition3_requestable(po: PseudoOrbit, ell: int) -> bool:
    """Period control is guaranteed only for orbits whose length is not
    already a multiple of ell (the branch-choice guarantee needs it)."""
    return po.length % ell != 0


def _choose_branch(n, i, j, ell):
    """Branch lengths and the kept side under the period-control rule.

    Returns (keep_base, len_base, len_other, condition3_lost).  The base
    branch is preferred; the other branch is taken only when forced by
    ell.  Both branches can be multiples of ell only when the parent
    length already was one (then control is best-effort and flagged);
    otherwise that situation indicates a bug."""
    len_other = j - i
    len_base = n - len_other
    if ell is None:
        return True, len_base, len_other, False
    base_ok = len_base % ell != 0
    other_ok = len_other % ell != 0
    if not base_ok and not other_ok:
        if n % ell != 0:
            raise SurgeryInvariantError(
                f"both branch lengths {len_base}, {len_other} are "
                f"multiples of {ell} although the parent length {n} "
                "is not; the length additivity is broken"
            )
        return True, len_base, len_other, True
    if base_ok:
        return True, len_base, len_other, False
    return False, len_base, len_other, False


def primary_shortcuts(
    sys: MapSystem,
    dom: PerturbationDomain,
    po: PseudoOrbit,
    ell: int | None = None,
):
    """Shortcut until the orbit meets every tile at most once.

    With ell requested, the kept branch length is never a multiple of
    ell whenever the parent length is not one; orbits whose length is
    already a multiple (condition 3 not requestable, see
    :func:`condition3_requestable`) run best-effort, with any forced
    loss flagged on the event.
    """
    trace = []
    guard = po.length + 1
    while guard > 0:
        guard -= 1
        tile_of = {}
        pair = None
        for idx in range(po.length):
            hit = dom.find_tile(sys, po.points[idx])
            if hit is None:
                continue
            if hit in tile_of:
                pair = (tile_of[hit], idx)
                break
            tile_of[hit] = idx
        if pair is None:
            break
        i, j = pair
        keep_base, len_base, len_other, lost = _choose_branch(
            po.length, i, j, ell
        )
        tile_key = dom.find_tile(sys, po.points[i])
        po = _take_branch(po, i, j, keep_base, sys, dom)
        trace.append(
            ShortcutEvent(
                kind="primary",
                pair=(i, j),
                tile=tile_key,
                k=None,
                branch_kept="base" if keep_base else "other",
                length_kept=len_base if keep_base else len_other,
                length_dropped=len_other if keep_base else len_base,
                base_relocated=not keep_base,
                condition3_lost=lost,
            )
        )
    else:
        raise SurgeryInvariantError("primary shortcuts failed to terminate")
    return po, trace


# -- connecting sequences ----------------------------------------------


@dataclass(frozen=True)
class ConnectingSequence:
    jump: int  # step index in the pseudo-orbit
    chart: int
    tile: int
    points: np.ndarray  # (N+1, d)
    defects: np.ndarray  # (N,)
    radii: np.ndarray  # (N,)
    bounds: np.ndarray  # (N,) a-priori radius bounds per ball
    merge_counts: tuple  # per ball

    @property
    def n_balls(self) -> int:
        return len(self.radii)

    def ball(self, k):
        return self.points[k], float(self.radii[k])


def _affine_model(sys: MapSystem, tile: Tile):
    """Linear part of the map on the tile's 3/2-cube; errors if the
    Jacobian is not constant there."""
    half = 0.75 * tile.edge
    dim = sys.dim
    probes = [tile.center]
    for ax in range(dim):
        for sign in (-1.0, 1.0):
            q = tile.center.copy()
            q[ax] += sign * half
            probes.append(q)
    jacs = [sys.jacobian(q) for q in probes]
    A = jacs[0]
    spread = max(float(np.max(np.abs(J - A))) for J in jacs)
    if spread > AFFINE_TOL:
        raise NonAffineChartError(
            f"map is not affine on the 3/2-cube of the tile at "
            f"{tile.center} (Jacobian spread {spread:.3g})"
        )
    return A


def _sigma_min_powers(A: np.ndarray, n: int):
    out = []
    P = np.eye(A.shape[0])
    for _ in range(n + 1):
        out.append(float(np.linalg.svd(P, compute_uv=False)[-1]))
        P = A @ P
    return out


def connect(
    sys: MapSystem, dom: PerturbationDomain, po: PseudoOrbit, jump: int
) -> ConnectingSequence:
    """Connecting sequence for one jump: interpolate between y_i and
    f^-1(y_(i+1)) inside their common tile, push forward by f^k, and
    check the displacement bound eta * dist(f^k(5/4 C), comp f^k(3/2 C))
    at every step."""
    if jump not in po.jumps:
        raise SurgeryInstanceError(f"step {jump} is not a jump")
    ci, ti = po.tiles[jump]
    tile = dom.tile(ci, ti)
    chart = dom.charts[ci]
    N = dom.n_steps
    a = po.points[jump]
    b_raw = sys.inverse(po.points[(jump + 1) % po.length])
    gap = sys.wrapdiff(b_raw, a)[0]
    if not (
        tile.contains(sys, a, strict=False)
        and tile.contains(sys, b_raw, strict=False)
    ):
        raise SurgeryInstanceError(
            f"jump {jump}: its endpoints do not lie in the recorded tile"
        )

    A = _affine_model(sys, tile)
    sigma = _sigma_min_powers(A, N)
    face_gap = tile.edge / 8.0  # dist(5/4 C, complement of 3/2 C)

    # per-step displacement |A^k (b - a)| / N must obey the eta bound
    dist_max = float(np.linalg.norm(gap))
    growth = [float(np.linalg.norm(np.linalg.matrix_power(A, k) @ gap))
              for k in range(N)]
    feasible = all(
        growth[k] / N <= dom.eta * sigma[k] * face_gap + 1e-15
        for k in range(N)
    )
    if not feasible:
        if sys.dim == 1:
            minimal = math.ceil(dist_max / (dom.eta * face_gap) - 1e-12)
        else:
            minimal = None
            for cand in range(N + 1, 100_000):
                if all(
                    growth[min(k, N - 1)] / cand
                    <= dom.eta * sigma[min(k, N - 1)] * face_gap
                    for k in range(min(cand, N))
                ):
                    minimal = cand
                    break
        raise ConnectingBoundError(
            f"jump {jump}: defect {dist_max / N:.3g} exceeds "
            f"eta * bound = {dom.eta * face_gap:.3g}; minimal N that "
            f"works: {minimal}",
            minimal_n=minimal,
        )

    pts = np.empty((N + 1, sys.dim))
    for k in range(N + 1):
        c_k = sys.wrap((a + (k / N) * gap)[None, :])[0]
        for _ in range(k):
            c_k = sys.evaluate(c_k)
        pts[k] = c_k
    defects = np.array(
        [
            sys.distance(pts[k], sys.inverse(pts[k + 1]))
            for k in range(N)
        ]
    )
    bounds = np.array([sigma[k] * face_gap for k in range(N)])
    bad = np.flatnonzero(defects > dom.eta * bounds + 1e-15)
    if bad.size:
        raise SurgeryInvariantError(
            f"jump {jump}: realized defect at k={bad[0]} exceeds the "
            "eta bound"
        )
    radii = defects / dom.theta
    over = np.flatnonzero(radii > bounds + 1e-15)
    if over.size:
        raise SurgeryInvariantError(
            f"jump {jump}: initial radius at k={over[0]} violates the "
            "a-priori bound (eta too large relative to theta?)"
        )
    seq = ConnectingSequence(
        jump=jump,
        chart=ci,
        tile=ti,
        points=pts,
        defects=defects,
        radii=radii,
        bounds=bounds,
        merge_counts=tuple(0 for _ in range(N)),
    )
    _check_condition1(sys, dom, seq)
    return seq


def _check_condition1(sys, dom, seq: ConnectingSequence):
    """Balls must sit inside the chart iterates: pull each ball back to
    the chart and test containment with its inflated radius."""
    chart = dom.charts[seq.chart]
    tile = dom.tile(seq.chart, seq.tile)
    A = _affine_model(sys, tile)
    sigma = _sigma_min_powers(A, seq.n_balls)
    for k in range(seq.n_balls):
        center = seq.points[k]
        back = center.copy()
        for _ in range(k):
            back = sys.inverse(back)
        pull_radius = seq.radii[k] / max(sigma[k], 1e-300)
        if not chart.contains(sys, back, margin=pull_radius - 1e-15):
            raise SurgeryInvariantError(
                f"jump {seq.jump}: ball k={k} is not contained in "
                f"f^k(V_{seq.chart})"
            )


def validate_sequence(
    sys: MapSystem,
    dom: PerturbationDomain,
    po: PseudoOrbit,
    seq: ConnectingSequence,
) -> None:
    """Check an externally supplied connecting sequence (for maps that
    are not affine on their charts)."""
    N = dom.n_steps
    if seq.points.shape != (N + 1, sys.dim):
        raise SurgeryInstanceError("sequence has wrong shape")
    if sys.distance(seq.points[0], po.points[seq.jump]) > 10 * TAU_ORB:
        raise SurgeryInstanceError("sequence must start at y_i")
    target = po.points[(seq.jump + 1) % po.length]
    for _ in range(N - 1):
        target = sys.evaluate(target)
    if sys.distance(seq.points[N], target) > 10 * TAU_ORB:
        raise SurgeryInstanceError(
            "sequence must end at f^(N-1)(y_(i+1))"
        )
    tile = dom.tile(seq.chart, seq.tile)
    face_gap = tile.edge / 8.0
    for k in range(N):
        defect = sys.distance(seq.points[k], sys.inverse(seq.points[k + 1]))
        if defect > dom.eta * face_gap * 1.0000001 + 1e-15:
            raise SurgeryInstanceError(
                f"supplied sequence violates the eta bound at k={k}"
            )
    _check_condition1(sys, dom, seq)


# -- secondary shortcuts -----------------------------------------------


@dataclass(frozen=True)
class SurgeryResult:
    pseudo_orbit: PseudoOrbit
    sequences: tuple
    trace: tuple
    condition1: bool
    condition2: bool
    condition3: bool | None
    ell: int | None

    @property
    def certified(self) -> bool:
        ok3 = self.condition3 is None or self.condition3
        return self.condition1 and self.condition2 and ok3


def _all_balls(sequences):
    for i in sorted(sequences):
        seq = sequences[i]
        for k in range(seq.n_balls):
            yield i, k, seq


def _find_overlap(sys, sequences):
    items = list(_all_balls(sequences))
    for a in range(len(items)):
        i, k, seq_i = items[a]
        ci, ri = seq_i.ball(k)
        for b in range(a + 1, len(items)):
            j, kk, seq_j = items[b]
            cj, rj = seq_j.ball(kk)
            if sys.distance(ci, cj) < ri + rj:
                return (i, k, j, kk)
    return None


def secondary_shortcuts(
    sys: MapSystem,
    dom: PerturbationDomain,
    po: PseudoOrbit,
    sequences: dict,
    ell: int | None = None,
    trace=(),
) -> SurgeryResult:
    """Merge intersecting balls by shortcutting the orbit and splicing
    the two connecting sequences at the shared position k.

    Each merge keeps one branch (period control preserved), replaces
    exactly one ball by a larger one obeying
    r' <= 2 theta^-1 (r_i + r_j), and counts merges per ball center;
    more than 4^d merges or an a-priori bound violation is a hard
    failure, since the construction proves they cannot happen.
    """
    trace = list(trace)
    dim = sys.dim
    max_merges = 4 ** dim
    guard = po.length + 1
    while guard > 0:
        guard -= 1
        hit = _find_overlap(sys, sequences)
        if hit is None:
            break
        i, k, j, kk = hit
        if i == j or k != kk:
            raise SurgeryInvariantError(
                f"balls ({i},{k}) and ({j},{kk}) intersect: same-chart "
                "images force i != j and k = k'; the domain is invalid",
                trace=tuple(trace),
            )
        seq_i, seq_j = sequences[i], sequences[j]
        keep_base, len_base, len_other, lost = _choose_branch(
            po.length, i, j, ell
        )
        if keep_base:
            lead, tail, splice_jump = seq_i, seq_j, i
        else:
            lead, tail, splice_jump = seq_j, seq_i, j
        new_pts = np.vstack([lead.points[: k + 1], tail.points[k + 1 :]])
        new_defect = sys.distance(new_pts[k], sys.inverse(new_pts[k + 1]))
        new_radius = new_defect / dom.theta
        r_i, r_j = float(seq_i.radii[k]), float(seq_j.radii[k])
        if new_radius > 2.0 / dom.theta * (r_i + r_j) + 1e-15:
            raise SurgeryInvariantError(
                f"merged radius {new_radius:.3g} violates "
                f"r' <= 2/theta (r_i + r_j) = "
                f"{2.0 / dom.theta * (r_i + r_j):.3g}",
                trace=tuple(trace),
            )
        if new_radius > lead.bounds[k] + 1e-15:
            raise SurgeryInvariantError(
                f"merged radius {new_radius:.3g} exceeds the a-priori "
                f"bound {lead.bounds[k]:.3g}",
                trace=tuple(trace),
            )
        count = lead.merge_counts[k] + 1
        if count > max_merges:
            raise SurgeryInvariantError(
                f"ball ({splice_jump},{k}) exceeded 4^d = {max_merges} "
                "merges",
                trace=tuple(trace),
            )
        new_defects = np.concatenate(
            [lead.defects[:k], [new_defect], tail.defects[k + 1 :]]
        )
        new_radii = np.concatenate(
            [lead.radii[:k], [new_radius], tail.radii[k + 1 :]]
        )
        new_bounds = np.concatenate(
            [lead.bounds[: k + 1], tail.bounds[k + 1 :]]
        )
        new_counts = (
            lead.merge_counts[:k] + (count,) + tail.merge_counts[k + 1 :]
        )
        merged = ConnectingSequence(
            jump=splice_jump,
            chart=lead.chart,
            tile=lead.tile,
            points=new_pts,
            defects=new_defects,
            radii=new_radii,
            bounds=new_bounds,
            merge_counts=new_counts,
        )

        old_po = po
        po = _take_branch(po, i, j, keep_base, sys, dom)
        # remap surviving sequences onto the new step indices
        n_old = old_po.length
        if keep_base:
            kept = list(range(0, i + 1)) + list(range(j + 1, n_old))
        else:
            kept = list(range(i + 1, j + 1))
            smallest = kept.index(min(kept))
            kept = kept[smallest:] + kept[:smallest]
        new_index = {old: pos for pos, old in enumerate(kept)}
        new_sequences = {}
        for old, seq in sequences.items():
            if old in (i, j):
                continue
            if old in new_index and new_index[old] in po.jumps:
                new_sequences[new_index[old]] = replace(
                    seq, jump=new_index[old]
                )
        if splice_jump in new_index and new_index[splice_jump] in po.jumps:
            new_sequences[new_index[splice_jump]] = replace(
                merged, jump=new_index[splice_jump]
            )
        sequences = new_sequences
        trace.append(
            ShortcutEvent(
                kind="secondary",
                pair=(i, j),
                tile=None,
                k=k,
                branch_kept="base" if keep_base else "other",
                length_kept=len_base if keep_base else len_other,
                length_dropped=len_other if keep_base else len_base,
                base_relocated=not keep_base,
                radii_before=(r_i, r_j),
                radius_after=float(new_radius),
                merge_count=count,
                condition3_lost=lost,
            )
        )
    else:
        raise SurgeryInvariantError(
            "secondary shortcuts failed to terminate", trace=tuple(trace)
        )

    # certificates, each checked independently of the loop logic
    cond1 = True
    for i, seq in sorted(sequences.items()):
        try:
            _check_condition1(sys, dom, seq)
        except SurgeryInvariantError:
            cond1 = False
    cond2 = _find_overlap(sys, sequences) is None
    cond3 = None if ell is None else po.length % ell != 0
    return SurgeryResult(
        pseudo_orbit=po,
        sequences=tuple(sequences[i] for i in sorted(sequences)),
        trace=tuple(trace),
        condition1=cond1,
        condition2=cond2,
        condition3=cond3,
        ell=ell,
    )


def run_surgery(
    sys: MapSystem,
    dom: PerturbationDomain,
    po: PseudoOrbit,
    ell: int | None = None,
) -> SurgeryResult:
    """Primary shortcuts, connecting sequences, secondary shortcuts."""
    po, trace = primary_shortcuts(sys, dom, po, ell=ell)
    sequences = {i: connect(sys, dom, po, i) for i in po.jumps}
    return secondary_shortcuts(
        sys, dom, po, sequences, ell=ell, trace=trace
    )


# -- elementary perturbations and closing -------------------------------


@dataclass(frozen=True)
class Bump:
    """A C^1 radial bump translation supported on one ball."""

    center: np.ndarray
    radius: float
    displacement: np.ndarray


def _bump_profile(t):
    return (1.0 - t) ** 2 * (1.0 + 2.0 * t)  # 1 at 0, C^1-flat at 1


def _bump_profile_derivative(t):
    return 6.0 * t * (t - 1.0)


class PerturbedMap:
    """Composition f o h of a base system with bump translations.

    Shares the base system's domain interface; evaluation applies the
    (at most one, by ball disjointness) bump containing the point and
    then the base map.
    """

    def __init__(self, base: MapSystem, bumps):
        self.base = base
        self.bumps = tuple(bumps)
        self.dim = base.dim
        self.lo = base.lo
        self.hi = base.hi
        self.periodic = base.periodic
        self.lipschitz = base.lipschitz
        self.name = f"{base.name}+perturbation"
        self.has_inverse = False

    # geometry delegates
    @property
    def widths(self):
        return self.base.widths

    def wrap(self, X):
        return self.base.wrap(X)

    def wrapdiff(self, A, B):
        return self.base.wrapdiff(A, B)

    def distance(self, a, b):
        return self.base.distance(a, b)

    def distance_many(self, A, B):
        return self.base.distance_many(A, B)

    def sample_grid(self, total):
        return self.base.sample_grid(total)

    def pre_map(self, X):
        """The bump composition h."""
        X = self.base.wrap(np.atleast_2d(np.asarray(X, dtype=float))).copy()
        for bump in self.bumps:
            rel = self.base.wrapdiff(X, bump.center)
            dist = np.linalg.norm(rel, axis=1)
            mask = dist < bump.radius
            if mask.any():
                t = dist[mask] / bump.radius
                X[mask] += np.outer(_bump_profile(t), bump.displacement)
        return self.base.wrap(X)

    def evaluate_many(self, X):
        return self.base.evaluate_many(self.pre_map(X))

    def evaluate(self, x):
        return self.evaluate_many(np.atleast_2d(x))[0]

    def jacobian(self, x):
        x = self.base.wrap(np.atleast_2d(x))[0]
        Dh = np.eye(self.dim)
        h_x = x.copy()
        for bump in self.bumps:
            rel = self.base.wrapdiff(x, bump.center)[0]
            dist = float(np.linalg.norm(rel))
            if dist >= bump.radius:
                continue
            t = dist / bump.radius
            if dist > 1e-300:
                grad = (
                    _bump_profile_derivative(t)
                    * rel
                    / (dist * bump.radius)
                )
                Dh = Dh + np.outer(bump.displacement, grad)
            h_x = x + bump.displacement * _bump_profile(t)
        return self.base.jacobian(self.base.wrap(h_x[None, :])[0]) @ Dh


def build_perturbation(sys: MapSystem, result: SurgeryResult) -> PerturbedMap:
    """One bump per final ball, moving the ball center a_k onto
    f^-1(a_(k+1)); the displacement is theta * radius by construction."""
    bumps = []
    for seq in result.sequences:
        for k in range(seq.n_balls):
            if seq.radii[k] <= 0.0:
                continue
            target = sys.inverse(seq.points[k + 1])
            disp = sys.wrapdiff(target, seq.points[k])[0]
            bumps.append(
                Bump(
                    center=seq.points[k].copy(),
                    radius=float(seq.radii[k]),
                    displacement=disp,
                )
            )
    return PerturbedMap(sys, bumps)


@dataclass(frozen=True)
class ClosingResult:
    system: object  # MapSystem (trivial case) or PerturbedMap
    orbit: PeriodicOrbit
    surgery: SurgeryResult | None
    anchor_shift: float
    trivial: bool
    in_region: bool | None


def _orbit_through(system, x0, period) -> PeriodicOrbit:
    pts = [np.asarray(x0, dtype=float)]
    for _ in range(period - 1):
        pts.append(system.evaluate(pts[-1]))
    pts = np.array(pts)
    imgs = np.array([system.evaluate(p) for p in pts])
    residual = float(
        np.max(system.distance_many(imgs, np.roll(pts, -1, axis=0)))
    )
    J = np.eye(system.dim)
    for p in pts:
        J = system.jacobian(p) @ J
    mult = np.linalg.eigvals(J).astype(complex)
    order = np.lexsort((mult.imag, mult.real))
    return PeriodicOrbit(
        period=period, points=pts, multipliers=mult[order], residual=residual
    )


def close_orbit(
    sys: MapSystem,
    dom: PerturbationDomain,
    x,
    ell: int,
    region=None,
    budget: int = 1000,
    return_step: int | None = None,
) -> ClosingResult:
    """Close a near-return of x into a genuine periodic orbit whose
    period is not a multiple of ell (non-periodic closing case).

    Searches the forward orbit of x for a return f^n(x) into the tile
    of x with n not a multiple of ell, builds the periodic pseudo-orbit
    (f^n(x), f(x), ..., f^(n-1)(x)) with its single jump, runs the full
    shortcut surgery, and realizes the closed orbit with one bump per
    certified ball.  If x is already periodic with period not a
    multiple of ell, the system is returned unchanged.
    """
    if ell < 1:
        raise ValueError("ell must be >= 1")
    x = sys.wrap(np.atleast_2d(x))[0]
    home = dom.find_tile(sys, x)
    if home is None:
        raise SurgeryInstanceError(f"target point {x} lies in no tile")
    tile = dom.tile(*home)

    # periodic fast path and return search share one orbit sweep
    point = x.copy()
    returns = []
    for n in range(1, budget + 1):
        point = sys.evaluate(point)
        if sys.distance(point, x) < TAU_ORB:
            if n % ell != 0:
                orbit = _orbit_through(sys, x, n)
                return ClosingResult(
                    system=sys,
                    orbit=orbit,
                    surgery=None,
                    anchor_shift=0.0,
                    trivial=True,
                    in_region=_region_ok(orbit.points, region),
                )
            raise InconclusiveError(
                f"x is periodic with period {n}, a multiple of {ell}; "
                "the non-periodic closing case does not apply"
            )
        if tile.contains(sys, point, strict=True):
            returns.append(n)
    if return_step is not None:
        candidates = [return_step] if return_step in returns else []
    else:
        candidates = [n for n in returns if n % ell != 0]
    if not candidates:
        raise InconclusiveError(
            f"no return to the tile of x with step not a multiple of "
            f"{ell} within {budget} iterates",
            detail={"returns": returns},
        )
    n = candidates[0]
    if n % ell == 0:
        raise InconclusiveError(f"supplied return step {n} is a multiple of {ell}")

    pts = [None] * n
    point = x.copy()
    for t in range(1, n + 1):
        point = sys.evaluate(point)
        pts[t % n] = point.copy()  # y_0 = f^n(x), y_t = f^t(x)
    po = make_pseudo_orbit(sys, dom, np.array(pts))
    result = run_surgery(sys, dom, po, ell=ell)
    if not result.certified:
        raise CertificateError("surgery failed to certify conditions 1-3")

    perturbed = build_perturbation(sys, result)
    base_point = result.pseudo_orbit.points[0]
    period = result.pseudo_orbit.length
    orbit = _orbit_through(perturbed, base_point, period)
    if orbit.residual >= TAU_ORB:
        raise CertificateError(
            f"closed orbit residual {orbit.residual:.3e} >= {TAU_ORB:.0e}"
        )
    for divisor in range(1, period):
        if period % divisor == 0:
            early = orbit.points[0]
            for _ in range(divisor):
                early = perturbed.evaluate(early)
            if perturbed.distance(early, orbit.points[0]) < TAU_ORB:
                raise CertificateError(
                    f"closed orbit has minimal period {divisor}, "
                    f"not the certified {period}"
                )
    if ell > 1 and period % ell == 0:
        raise CertificateError(
            f"closed orbit period {period} is a multiple of {ell}"
        )
    # orbit points other than the bump centers must sit outside the
    # perturbation support, else the splice would derail them
    centers = {
        tuple(np.round(seq.points[k], 12))
        for seq in result.sequences
        for k in range(seq.n_balls)
    }
    for p in orbit.points:
        if tuple(np.round(p, 12)) in centers:
            continue
        for bump in perturbed.bumps:
            if perturbed.distance(p, bump.center) < bump.radius:
                raise CertificateError(
                    "a closed-orbit point strayed into a perturbation ball"
                )
    return ClosingResult(
        system=perturbed,
        orbit=orbit,
        surgery=result,
        anchor_shift=float(sys.distance(base_point, x)),
        trivial=False,
        in_region=_region_ok(orbit.points, region),
    )


def _region_ok(points, region):
    if region is None:
        return None
    for p in points:
        inside = False
        for lo, hi in region:
            if np.all(p >= np.asarray(lo) - 1e-12) and np.all(
                p <= np.asarray(hi) + 1e-12
            ):
                inside = True
                break
        if not inside:
            return False
    return True


def perturbation_size(
    original,
    perturbed,
    sample_budget: int = 2000,
    seed: int = 0,
):
    """Sampled C^0 and C^1 distances between two systems on one domain."""
    rng = np.random.default_rng(seed)
    lo, hi = original.lo, original.hi
    pts = lo + rng.random((sample_budget, original.dim)) * (hi - lo)
    extra = []
    for bump in getattr(perturbed, "bumps", ()):
        extra.append(bump.center)
        for ax in range(original.dim):
            for frac in (0.35, 0.5, 0.75):
                q = bump.center.copy()
                q[ax] += frac * bump.radius
                extra.append(q)
                q2 = bump.center.copy()
                q2[ax] -= frac * bump.radius
                extra.append(q2)
    if extra:
        pts = np.vstack([pts, np.array(extra)])
    from .errors import EvaluationError, OutOfDomainError

    c0 = 0.0
    c1 = 0.0
    for p in pts:
        try:
            fa = original.evaluate(p)
            fb = perturbed.evaluate(p)
            c0 = max(c0, original.distance(fa, fb))
            Ja = original.jacobian(p)
            Jb = perturbed.jacobian(p)
            c1 = max(c1, float(np.linalg.norm(Ja - Jb, 2)))
        except (OutOfDomainError, EvaluationError):
            continue
    return c0, c1
