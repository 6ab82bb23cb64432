"""Box coverings and the over-approximating transition graph.

The domain is tiled with 2^depth boxes per axis.  An edge (B, B') is
recorded whenever the image of one of the s^d cell-centered sample
points of B, inflated by the Lipschitz covering radius
L * diam(B) / (2 s), can overlap B'.  The inflated image is treated as
an open ball and boxes as half-open cells, so exactly aligned model
maps (rigid rotations on aligned grids, the doubling map) produce their
exact transition relations while the approximation still errs on the
side of extra edges for generic maps.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import OutOfDomainError, RegionError
from .systems import MapSystem


@dataclass(frozen=True)
class BoxCovering:
    """Axis-aligned dyadic covering of the system domain."""

    depth: int
    lo: np.ndarray
    hi: np.ndarray
    per_axis: int
    box_ids: tuple  # grid multi-index per node, row-major order
    index: dict = field(repr=False)  # grid multi-index -> node id

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def n_boxes(self) -> int:
        return len(self.box_ids)

    @property
    def widths(self) -> np.ndarray:
        return (self.hi - self.lo) / self.per_axis

    def box_lo(self, i: int) -> np.ndarray:
        return self.lo + np.array(self.box_ids[i]) * self.widths

    def box_hi(self, i: int) -> np.ndarray:
        return self.box_lo(i) + self.widths

    def center(self, i: int) -> np.ndarray:
        return self.box_lo(i) + 0.5 * self.widths

    def boxes(self):
        return [(self.box_lo(i), self.box_hi(i)) for i in range(self.n_boxes)]

    @property
    def box_diameter(self) -> float:
        return float(np.linalg.norm(self.widths))

    def find_box(self, point) -> int | None:
        """Node id of the half-open box containing the point, if any."""
        t = (np.asarray(point, dtype=float) - self.lo) / self.widths
        coords = np.floor(t).astype(int)
        coords = np.minimum(coords, self.per_axis - 1)
        if np.any(coords < 0) or np.any(
            np.asarray(point) >= self.hi + 1e-12
        ):
            return None
        return self.index.get(tuple(coords))


@dataclass(frozen=True)
class Provenance:
    depth: int
    samples_per_axis: int
    lipschitz: float
    padding: float
    region: tuple | None


@dataclass(frozen=True)
class TransitionGraph:
    """Directed graph over covering boxes; adjacency lists are sorted."""

    n: int
    adj: tuple
    provenance: Provenance | None = None

    def edges(self):
        for u in range(self.n):
            for v in self.adj[u]:
                yield (u, v)

    def n_edges(self) -> int:
        return sum(len(a) for a in self.adj)

    def reverse(self) -> "TransitionGraph":
        radj = [[] for _ in range(self.n)]
        for u, v in self.edges():
            radj[v].append(u)
        return TransitionGraph(
            self.n, tuple(tuple(sorted(a)) for a in radj), self.provenance
        )

    def subgraph_adj(self, nodes) -> dict:
        """Adjacency of the induced subgraph, keyed by original ids."""
        keep = set(nodes)
        return {u: tuple(v for v in self.adj[u] if v in keep) for u in keep}


def graph_from_edges(n: int, edges) -> TransitionGraph:
    adj = [set() for _ in range(n)]
    for u, v in edges:
        if not (0 <= u < n and 0 <= v < n):
            raise ValueError(f"edge ({u}, {v}) outside node range")
        adj[u].add(v)
    return TransitionGraph(n, tuple(tuple(sorted(a)) for a in adj))


def _region_grid_ranges(covering_lo, widths, per_axis, region):
    """Grid index ranges per axis intersecting a list of region boxes."""
    selected = set()
    for rlo, rhi in region:
        ranges = []
        for ax in range(len(covering_lo)):
            w = widths[ax]
            a = int(math.floor((rlo[ax] - covering_lo[ax]) / w))
            b = int(math.ceil((rhi[ax] - covering_lo[ax]) / w))
            a = max(a, 0)
            b = min(b, per_axis)
            if a >= b:
                ranges = None
                break
            ranges.append(range(a, b))
        if ranges:
            selected.update(itertools.product(*ranges))
    return selected


def make_covering(sys: MapSystem, depth: int, region=None) -> BoxCovering:
    if depth < 1:
        raise ValueError("depth must be >= 1")
    per_axis = 2 ** depth
    widths = sys.widths / per_axis
    if region is not None:
        region = [
            (np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
            for lo, hi in region
        ]
        cells = _region_grid_ranges(sys.lo, widths, per_axis, region)
        if not cells:
            raise RegionError("region does not intersect the domain")
        ids = tuple(sorted(cells))
    else:
        ids = tuple(itertools.product(*(range(per_axis),) * sys.dim))
    index = {g: i for i, g in enumerate(ids)}
    return BoxCovering(
        depth=depth,
        lo=sys.lo.copy(),
        hi=sys.hi.copy(),
        per_axis=per_axis,
        box_ids=ids,
        index=index,
    )


def _axis_range(c, r, lo, width, per_axis, periodic):
    """Grid indices whose half-open cell meets the open interval
    (c - r, c + r).

    Balls that only touch a cell boundary to within 1e-9 of the cell
    width do not count as overlapping; this keeps exactly aligned model
    maps (rigid rotations, the doubling map) on their exact transition
    relations instead of letting one ulp of rounding leak edges across
    cell boundaries.
    """
    if periodic:
        span = width * per_axis
        if 2.0 * r >= span:
            return list(range(per_axis))
    t = c - lo
    eps = 1e-9 * width
    if r <= eps:  # degenerate ball: plain membership
        j = math.floor(t / width)
        if periodic:
            return [j % per_axis]
        return [j] if 0 <= j < per_axis else []
    a = t - r + eps
    b = t + r - eps
    j_min = math.floor(a / width)
    if not ((j_min + 1) * width > a):
        j_min += 1
    j_max = math.ceil(b / width) - 1
    if not (j_max * width < b):
        j_max -= 1
    if periodic:
        return [j % per_axis for j in range(j_min, j_max + 1)]
    return list(range(max(j_min, 0), min(j_max, per_axis - 1) + 1))


def build_graph(
    sys: MapSystem,
    depth: int,
    region=None,
    samples_per_axis: int = 3,
) -> tuple[BoxCovering, TransitionGraph]:
    """Build the covering and its over-approximating transition graph."""
    covering = make_covering(sys, depth, region)
    s = samples_per_axis
    widths = covering.widths
    pad = sys.lipschitz * covering.box_diameter / (2.0 * s)

    offsets = np.stack(
        [
            m.ravel()
            for m in np.meshgrid(
                *((np.arange(s) + 0.5) / s,) * sys.dim, indexing="ij"
            )
        ],
        axis=1,
    )
    sample_local = offsets * widths  # (s^d, d)

    adj = []
    for i in range(covering.n_boxes):
        base = covering.box_lo(i)
        pts = base + sample_local
        try:
            images = sys.evaluate_many(pts)
        except OutOfDomainError:
            # fall back to per-point evaluation, skipping escapers
            images = []
            for p in pts:
                try:
                    images.append(sys.evaluate(p))
                except OutOfDomainError:
                    continue
            images = np.array(images).reshape(-1, sys.dim)
        targets = set()
        for img in images:
            axis_hits = []
            for ax in range(sys.dim):
                hits = _axis_range(
                    img[ax],
                    pad,
                    covering.lo[ax],
                    widths[ax],
                    covering.per_axis,
                    bool(sys.periodic[ax]),
                )
                axis_hits.append(hits)
                if not hits:
                    break
            else:
                for g in itertools.product(*axis_hits):
                    j = covering.index.get(g)
                    if j is not None:
                        targets.add(j)
        adj.append(tuple(sorted(targets)))

    graph = TransitionGraph(
        n=covering.n_boxes,
        adj=tuple(adj),
        provenance=Provenance(
            depth=depth,
            samples_per_axis=s,
            lipschitz=sys.lipschitz,
            padding=pad,
            region=tuple(
                (tuple(map(float, lo)), tuple(map(float, hi)))
                for lo, hi in region
            )
            if region is not None
            else None,
        ),
    )
    return covering, graph
