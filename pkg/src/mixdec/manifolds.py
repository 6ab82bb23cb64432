"""Invariant manifolds of planar saddles and their crossings.

One-dimensional stable/unstable manifolds are grown as adaptive
polylines: a geometric fundamental segment on the local eigenvector is
pushed by the (inverse) map at the orbit period, inserting parameter
midpoints until consecutive gaps stay below h_man and turning angles
below tau_ang.  Crossing detection between polylines uses a uniform
spatial hash with minimal-image arithmetic on periodic axes; crossings
at angle below the transversality threshold are reported separately as
near-tangencies and never counted.

Absence of a crossing within an arclength budget proves nothing, so
every predicate here distinguishes "false" (manifolds complete inside
the domain, no crossing exists among them) from "inconclusive" (budget
exhausted first).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    EvaluationError,
    InverseUnavailableError,
    NoIntersectionError,
    OutOfDomainError,
    SaddleTypeError,
)
from .orbits import TAU_UNIT, PeriodicOrbit
from .systems import MapSystem

H_MAN = 1e-3
TAU_ANG_DEG = 10.0
TAU_TRANSV_DEG = 5.0
DELTA_LOC = 1e-6
MAX_CURVE_POINTS = 400_000


@dataclass(frozen=True)
class ManifoldCurve:
    anchor: np.ndarray
    stability: str  # "stable" | "unstable"
    branch: int  # +1 | -1
    points: np.ndarray  # (m, 2), wrapped into the domain
    arclength: float
    terminated: str  # "budget" | "boundary"

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class Crossing:
    point: np.ndarray
    angle_deg: float
    seg_a: int
    seg_b: int


@dataclass(frozen=True)
class CrossingSet:
    crossings: tuple
    near_tangencies: tuple

    def __bool__(self):
        return bool(self.crossings)


def _saddle_data(sys: MapSystem, orbit: PeriodicOrbit, stability: str):
    """Step map, growth ratio and eigendirection for one manifold."""
    if sys.dim != 2:
        raise SaddleTypeError("manifold growth is implemented for d=2 only")
    if not orbit.is_saddle():
        raise SaddleTypeError(
            f"orbit multipliers {orbit.multipliers} are not saddle-type"
        )
    J = np.eye(2)
    for p in orbit.points:
        J = sys.jacobian(p) @ J
    evals, evecs = np.linalg.eig(J)
    if np.max(np.abs(evals.imag)) > 1e-9:
        raise SaddleTypeError("complex multipliers on a saddle orbit")
    evals = evals.real
    pick = int(np.argmax(np.abs(evals))) if stability == "unstable" else int(
        np.argmin(np.abs(evals))
    )
    lam = float(evals[pick])
    v = np.real(evecs[:, pick])
    v = v / np.linalg.norm(v)
    nz = np.flatnonzero(np.abs(v) > 1e-12)[0]
    if v[nz] < 0:
        v = -v

    if stability == "unstable":
        def step(X):
            Y = X
            for _ in range(orbit.period):
                Y = sys.evaluate_many(Y)
            return Y

        mu = lam
    else:
        if not sys.has_inverse:
            raise InverseUnavailableError(
                "stable manifold growth needs the inverse map"
            )

        def step(X):
            Y = X
            for _ in range(orbit.period):
                Y = sys.inverse_many(Y)
            return Y

        mu = 1.0 / lam
    if mu < 0:

        base_step = step

        def step(X):  # negative multiplier flips branches; use the square
            return base_step(base_step(X))

        mu = mu * mu
    return step, mu, v


def grow_manifold(
    sys: MapSystem,
    orbit: PeriodicOrbit,
    stability: str,
    branch: int,
    arclength_budget: float,
    h_man: float = H_MAN,
    tau_ang_deg: float = TAU_ANG_DEG,
    delta_loc: float = DELTA_LOC,
) -> ManifoldCurve:
    """Grow one branch of a 1D invariant manifold as a polyline."""
    if stability not in ("stable", "unstable"):
        raise ValueError("stability must be 'stable' or 'unstable'")
    if branch not in (1, -1):
        raise ValueError("branch must be +1 or -1")
    step, mu, v = _saddle_data(sys, orbit, stability)
    anchor = orbit.anchor
    log_mu = math.log(mu)
    cos_ang = math.cos(math.radians(tau_ang_deg))

    def seed(ts):
        radii = delta_loc * np.exp(np.asarray(ts) * log_mu)
        return anchor[None, :] + branch * radii[:, None] * v[None, :]

    def compute(piece: int, ts):
        """g^piece applied to the seed at parameters ts; None rows for
        points that leave the domain."""
        ts = np.asarray(ts, dtype=float)
        pts = seed(ts)
        alive = np.ones(len(ts), dtype=bool)
        for _ in range(piece):
            if alive.any():
                try:
                    pts[alive] = step(pts[alive])
                    continue
                except (OutOfDomainError, EvaluationError):
                    pass
                # per-point fallback to find the escapers
                idx = np.flatnonzero(alive)
                for i in idx:
                    try:
                        pts[i] = step(pts[i][None, :])[0]
                    except (OutOfDomainError, EvaluationError):
                        alive[i] = False
        return pts, alive

    points = [seed([0.0])[0]]
    arclength = 0.0
    terminated = "budget"
    piece = 0
    prev_ts = [0.0, 0.5, 1.0]
    max_pieces = int(math.ceil(math.log(max(arclength_budget, delta_loc) /
                                        delta_loc) / log_mu)) + 3

    while arclength < arclength_budget and len(points) < MAX_CURVE_POINTS:
        if piece > max_pieces:
            break
        ts = sorted(set(prev_ts))
        pts, alive = compute(piece, ts)
        if not alive.all():
            # keep the connected alive prefix; the curve hit the boundary
            cut = int(np.argmin(alive))
            ts, pts = ts[:cut], pts[:cut]
            terminated = "boundary"
        cache = {t: p for t, p in zip(ts, pts)}
        # refine until gaps and turning angles are inside tolerance
        for _ in range(40):
            ts = sorted(cache)
            arr = np.array([cache[t] for t in ts])
            if len(ts) < 2:
                break
            deltas = sys.wrapdiff(arr[1:], arr[:-1])
            gaps = np.linalg.norm(deltas, axis=1)
            need = set()
            for i in np.flatnonzero(gaps > h_man):
                need.add(0.5 * (ts[i] + ts[i + 1]))
            if len(ts) > 2:
                a, b = deltas[:-1], deltas[1:]
                na = np.linalg.norm(a, axis=1)
                nb = np.linalg.norm(b, axis=1)
                ok = (na > 0) & (nb > 0)
                cosv = np.ones(len(na))
                cosv[ok] = np.einsum("ij,ij->i", a[ok], b[ok]) / (
                    na[ok] * nb[ok]
                )
                for i in np.flatnonzero(cosv < cos_ang):
                    need.add(0.5 * (ts[i] + ts[i + 1]))
                    need.add(0.5 * (ts[i + 1] + ts[i + 2]))
            need -= set(ts)
            if not need or len(cache) + len(need) > MAX_CURVE_POINTS:
                break
            new_ts = sorted(need)
            new_pts, new_alive = compute(piece, new_ts)
            for t, p, ok in zip(new_ts, new_pts, new_alive):
                if ok:
                    cache[t] = p
            if not new_alive.all():
                terminated = "boundary"
        ts = sorted(cache)
        arr = np.array([cache[t] for t in ts])
        # append in parameter order, tracking the arclength budget;
        # arr[0] duplicates the previous piece's endpoint
        if len(arr) >= 2:
            gaps = np.linalg.norm(sys.wrapdiff(arr[1:], arr[:-1]), axis=1)
            cum = arclength + np.cumsum(gaps)
            take = int(np.searchsorted(cum, arclength_budget, side="left"))
            take = min(take + 1, len(gaps))
            points.extend(arr[1 : take + 1])
            arclength = float(cum[take - 1])
        if terminated == "boundary" or arclength >= arclength_budget:
            break
        prev_ts = list(ts)
        piece += 1

    return ManifoldCurve(
        anchor=anchor.copy(),
        stability=stability,
        branch=branch,
        points=sys.wrap(np.array(points)),
        arclength=arclength,
        terminated=terminated,
    )


# -- crossing detection ------------------------------------------------


def _segments(sys: MapSystem, curve: ManifoldCurve):
    pts = curve.points
    deltas = sys.wrapdiff(pts[1:], pts[:-1])
    keep = np.linalg.norm(deltas, axis=1) > 0
    return pts[:-1][keep], deltas[keep]


def detect_crossings(
    sys: MapSystem,
    curve_a: ManifoldCurve,
    curve_b: ManifoldCurve,
    tau_transv_deg: float = TAU_TRANSV_DEG,
) -> CrossingSet:
    """All transverse polyline crossings between two manifold curves."""
    pa, da = _segments(sys, curve_a)
    pb, db = _segments(sys, curve_b)
    if len(pa) == 0 or len(pb) == 0:
        return CrossingSet((), ())

    span = sys.widths
    seg_len = max(
        float(np.max(np.linalg.norm(da, axis=1))),
        float(np.max(np.linalg.norm(db, axis=1))),
        1e-12,
    )
    cell = 2.0 * seg_len
    n_cells = np.maximum((span / cell).astype(int), 1)
    cell_w = span / n_cells

    def cells_of(p, d):
        lo = np.minimum(p, p + d)
        hi = np.maximum(p, p + d)
        i0 = np.floor((lo - sys.lo) / cell_w).astype(int)
        i1 = np.floor((hi - sys.lo) / cell_w).astype(int)
        out = []
        for ix in range(i0[0], i1[0] + 1):
            for iy in range(i0[1], i1[1] + 1):
                out.append((ix % n_cells[0], iy % n_cells[1]))
        return out

    grid = {}
    for i in range(len(pa)):
        for c in cells_of(pa[i], da[i]):
            grid.setdefault(c, []).append(i)

    crossings = []
    tangent = []
    seen = set()
    for j in range(len(pb)):
        cand = set()
        for c in cells_of(pb[j], db[j]):
            cand.update(grid.get(c, ()))
        if not cand:
            continue
        q1 = pb[j]
        s = db[j]
        for i in sorted(cand):
            p1 = pa[i]
            r = da[i]
            # shift segment b next to segment a (minimal image)
            q1s = p1 + sys.wrapdiff(q1, p1)[0]
            denom = r[0] * s[1] - r[1] * s[0]
            norm = float(np.linalg.norm(r) * np.linalg.norm(s))
            if norm == 0.0 or abs(denom) < 1e-15 * norm:
                continue
            w = q1s - p1
            t = (w[0] * s[1] - w[1] * s[0]) / denom
            u = (w[0] * r[1] - w[1] * r[0]) / denom
            if not (0.0 <= t <= 1.0 and 0.0 <= u <= 1.0):
                continue
            point = sys.wrap((p1 + t * r)[None, :])[0]
            key = tuple(np.round(point, 9))
            if key in seen:
                continue
            seen.add(key)
            angle = math.degrees(math.asin(min(1.0, abs(denom) / norm)))
            hit = Crossing(point=point, angle_deg=angle, seg_a=i, seg_b=j)
            if angle > tau_transv_deg:
                crossings.append(hit)
            else:
                tangent.append(hit)
    crossings.sort(key=lambda c: tuple(c.point))
    tangent.sort(key=lambda c: tuple(c.point))
    return CrossingSet(tuple(crossings), tuple(tangent))


# -- homoclinic machinery ----------------------------------------------


@dataclass(frozen=True)
class IntersectionTimeSet:
    base_pair: tuple  # (anchor of p, anchor of q)
    n_range: tuple  # (-n_max, n_max)
    times: tuple  # n with a detected transverse crossing
    ell: int  # gcd of times (0 when empty)
    inconclusive: tuple  # n with no crossing and budget-limited curves


@dataclass(frozen=True)
class CycleReport:
    verdict: bool | None  # True / False / None (inconclusive)
    forward_crossings: int  # W^u(O) with W^s(O')
    backward_crossings: int  # W^u(O') with W^s(O)
    period_drop_candidate: bool | None
    ell_used: int | None


class _CurveCache:
    def __init__(self, sys):
        self.sys = sys
        self.store = {}

    def get(self, orbit, stability, branch, budget, **params):
        key = (
            tuple(np.round(orbit.anchor, 12)),
            orbit.period,
            stability,
            branch,
            round(budget, 12),
        )
        if key not in self.store:
            self.store[key] = grow_manifold(
                self.sys, orbit, stability, branch, budget, **params
            )
        return self.store[key]


def _shifted_orbit(sys: MapSystem, orbit: PeriodicOrbit, n: int) -> PeriodicOrbit:
    """The same orbit re-anchored at f^n(q0)."""
    shift = n % orbit.period
    pts = np.roll(orbit.points, -shift, axis=0)
    return PeriodicOrbit(
        period=orbit.period,
        points=pts,
        multipliers=orbit.multipliers,
        residual=orbit.residual,
    )


def _pair_crossings(sys, cache, orbit_u, orbit_s, budget, tau_transv_deg):
    """Crossings between all branch pairs of W^u(orbit_u), W^s(orbit_s);
    also reports whether every involved curve was boundary-complete."""
    all_crossings = []
    complete = True
    for bu in (1, -1):
        cu = cache.get(orbit_u, "unstable", bu, budget)
        if cu.terminated != "boundary":
            complete = False
        for bs in (1, -1):
            cs = cache.get(orbit_s, "stable", bs, budget)
            if cs.terminated != "boundary":
                complete = False
            hits = detect_crossings(
                sys, cu, cs, tau_transv_deg=tau_transv_deg
            )
            all_crossings.extend(hits.crossings)
    return all_crossings, complete


def intersection_times(
    sys: MapSystem,
    p: PeriodicOrbit,
    q: PeriodicOrbit,
    n_max: int,
    budget: float = 4.0,
    tau_transv_deg: float = TAU_TRANSV_DEG,
) -> IntersectionTimeSet:
    """Detect n in [-n_max, n_max] with W^u(f^n(q)) crossing W^s(p)."""
    cache = _CurveCache(sys)
    times = []
    inconclusive = []
    for n in range(-n_max, n_max + 1):
        qn = _shifted_orbit(sys, q, n)
        hits, _complete = _pair_crossings(
            sys, cache, qn, p, budget, tau_transv_deg
        )
        if hits:
            times.append(n)
        else:
            # absence of a crossing within a budget proves nothing
            inconclusive.append(n)
    g = 0
    for n in times:
        g = math.gcd(g, abs(n))
    return IntersectionTimeSet(
        base_pair=(tuple(p.anchor), tuple(q.anchor)),
        n_range=(-n_max, n_max),
        times=tuple(times),
        ell=g,
        inconclusive=tuple(inconclusive),
    )


def pointwise_class(
    sys: MapSystem,
    p: PeriodicOrbit,
    q: PeriodicOrbit,
    budget: float = 6.0,
    tau_transv_deg: float = TAU_TRANSV_DEG,
) -> np.ndarray:
    """Finite sample of the closure of W^u(p) cross W^s(q) crossings.

    The anchor of p is part of the class (homoclinic points accumulate
    on it) and is always included.
    """
    cache = _CurveCache(sys)
    hits, complete = _pair_crossings(sys, cache, p, q, budget, tau_transv_deg)
    if not hits:
        raise NoIntersectionError(
            "no transverse intersection of W^u(p) and W^s(q) was detected"
            + ("" if complete else " within the arclength budget")
        )
    pts = [p.anchor] + [h.point for h in hits]
    arr = np.array(pts)
    _, keep = np.unique(np.round(arr, 9), axis=0, return_index=True)
    arr = arr[sorted(keep)]
    return arr[np.lexsort(arr.T[::-1])]


def detect_cycle(
    sys: MapSystem,
    orbit_a: PeriodicOrbit,
    orbit_b: PeriodicOrbit,
    budget: float = 4.0,
    ell: int | None = None,
    tau_transv_deg: float = TAU_TRANSV_DEG,
) -> CycleReport:
    """Cycle detector: crossings in both directions between two saddles.

    Returns verdict True when both directions cross, False when no
    crossing exists and every involved manifold was fully explored
    inside the domain, and None (inconclusive) when a budget ran out
    first.  With the class period of orbit_a supplied, flags the pair
    as a period-drop candidate when period(orbit_b) is not a multiple
    of it.
    """
    cache = _CurveCache(sys)
    fwd, fwd_complete = _pair_crossings(
        sys, cache, orbit_a, orbit_b, budget, tau_transv_deg
    )
    bwd, bwd_complete = _pair_crossings(
        sys, cache, orbit_b, orbit_a, budget, tau_transv_deg
    )
    if fwd and bwd:
        verdict = True
    elif (not fwd and fwd_complete) or (not bwd and bwd_complete):
        verdict = False
    else:
        verdict = None
    candidate = None
    if verdict and ell is not None and ell > 0:
        candidate = orbit_b.period % ell != 0
    return CycleReport(
        verdict=verdict,
        forward_crossings=len(fwd),
        backward_crossings=len(bwd),
        period_drop_candidate=candidate,
        ell_used=ell,
    )
