"""Periodic orbits: Newton detection, multipliers, non-resonance.

Orbits are found by Newton's method on f^r - id seeded from a
deterministic grid, deduplicated so each orbit is reported at its
minimal period only.  Multipliers are the eigenvalues of the ordered
product of Jacobians along the orbit.  Resonance classification
searches multiplicative relations among unit-modulus multipliers up to
a declared exponent bound; the underlying condition quantifies over all
positive exponents, which is not decidable numerically, so the bounded
search is reported as such.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

import numpy as np

from .errors import EvaluationError, OutOfDomainError
from .systems import MapSystem

log = logging.getLogger(__name__)

TAU_ORB = 1e-10
TAU_UNIT = 1e-6
TAU_REL = 1e-9
K_MAX = 6
NEWTON_MAX_STEPS = 50
DEDUP_FACTOR = 10.0


@dataclass(frozen=True)
class PeriodicOrbit:
    """A periodic orbit at its minimal period."""

    period: int
    points: np.ndarray  # (period, d)
    multipliers: np.ndarray  # (d,) complex
    residual: float

    @property
    def anchor(self) -> np.ndarray:
        return self.points[0]

    def is_saddle(self, tol: float = TAU_UNIT) -> bool:
        mods = np.abs(self.multipliers)
        return bool(np.sum(mods > 1 + tol) == 1 and np.sum(mods < 1 - tol) == 1)


@dataclass(frozen=True)
class ResonanceReport:
    unit_modulus: tuple  # unit-circle multipliers, with multiplicity
    simple: bool
    relation: tuple | None  # exponent tuple over the representatives
    representatives: tuple
    verdict: str  # "hyperbolic" | "non-resonant" | "resonant"
    k_max: int = K_MAX


def _orbit_jacobian(sys: MapSystem, points: np.ndarray) -> np.ndarray:
    J = np.eye(sys.dim)
    for p in points:
        J = sys.jacobian(p) @ J
    return J


def _orbit_points(sys: MapSystem, x: np.ndarray, r: int) -> np.ndarray:
    pts = [x]
    for _ in range(r - 1):
        pts.append(sys.evaluate(pts[-1]))
    return np.array(pts)


def _orbit_residual(sys: MapSystem, points: np.ndarray) -> float:
    imgs = np.array([sys.evaluate(p) for p in points])
    return float(
        np.max(sys.distance_many(imgs, np.roll(points, -1, axis=0)))
    )


def _newton_solve(sys: MapSystem, seed: np.ndarray, r: int):
    """Newton on f^r - id; returns a converged point or None."""
    x = seed.copy()
    scale = float(np.max(sys.widths))
    for _ in range(NEWTON_MAX_STEPS):
        try:
            pts = _orbit_points(sys, x, r)
            fx = sys.evaluate(pts[-1])
        except (OutOfDomainError, EvaluationError):
            return None
        F = sys.wrapdiff(fx, x)[0]
        if np.linalg.norm(F) < TAU_ORB:
            return sys.wrap(x[None, :])[0]
        J = _orbit_jacobian(sys, pts)
        A = J - np.eye(sys.dim)
        try:
            delta = np.linalg.solve(A, -F)
        except np.linalg.LinAlgError:
            log.debug("singular Jacobian of f^%d - id at seed %s", r, seed)
            return None
        if np.linalg.norm(delta) > scale:
            return None  # diverging
        try:
            x = sys.wrap((x + delta)[None, :])[0]
        except OutOfDomainError:
            return None
    return None


def _minimal_period(sys: MapSystem, x: np.ndarray, r: int) -> int:
    for r0 in range(1, r):
        if r % r0 == 0:
            pts = _orbit_points(sys, x, r0)
            if sys.distance(sys.evaluate(pts[-1]), x) < DEDUP_FACTOR * TAU_ORB:
                return r0
    return r


def _orbit_distance(sys: MapSystem, a: np.ndarray, b: np.ndarray) -> float:
    """Hausdorff-style distance between two orbit point sets."""
    d = max(
        max(min(sys.distance(p, q) for q in b) for p in a),
        max(min(sys.distance(p, q) for q in a) for p in b),
    )
    return d


def _in_region(points: np.ndarray, region) -> bool:
    if region is None:
        return True
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


def find_periodic_orbits(
    sys: MapSystem,
    max_period: int,
    region=None,
    seeds_per_axis: int = 12,
) -> list:
    """Newton search for all periodic orbits of period <= max_period.

    Seeds come from a cell-centered grid; each orbit is reported once,
    at its minimal period, with residual < TAU_ORB.
    """
    if max_period < 1:
        raise ValueError("max_period must be >= 1")
    seeds = sys.sample_grid(seeds_per_axis ** sys.dim)
    found: list[PeriodicOrbit] = []
    for r in range(1, max_period + 1):
        for seed in seeds:
            x = _newton_solve(sys, seed, r)
            if x is None:
                continue
            r0 = _minimal_period(sys, x, r)
            pts = _orbit_points(sys, x, r0)
            residual = _orbit_residual(sys, pts)
            if residual >= TAU_ORB:
                continue
            if not _in_region(pts, region):
                continue
            duplicate = False
            for other in found:
                if other.period == r0 and _orbit_distance(
                    sys, pts, other.points
                ) < DEDUP_FACTOR * TAU_ORB:
                    duplicate = True
                    break
            if duplicate:
                continue
            mult = np.linalg.eigvals(_orbit_jacobian(sys, pts)).astype(complex)
            order = np.lexsort((mult.imag, mult.real))
            found.append(
                PeriodicOrbit(
                    period=r0,
                    points=pts,
                    multipliers=mult[order],
                    residual=residual,
                )
            )
    found.sort(key=lambda o: (o.period, tuple(np.round(o.anchor, 9))))
    return found


def classify(
    orbit: PeriodicOrbit,
    tau_unit: float = TAU_UNIT,
    k_max: int = K_MAX,
    tau_rel: float = TAU_REL,
) -> ResonanceReport:
    """Hyperbolic / non-resonant / resonant verdict for an orbit.

    Resonance means a non-simple unit-modulus multiplier, or a relation
    prod lambda_i^{k_i} = 1 over one representative per conjugate pair
    of distinct unit multipliers, with 1 <= sum k_i and k_i <= k_max.
    """
    mults = np.asarray(orbit.multipliers)
    unit = mults[np.abs(np.abs(mults) - 1.0) <= tau_unit]
    if unit.size == 0:
        return ResonanceReport(
            unit_modulus=(),
            simple=True,
            relation=None,
            representatives=(),
            verdict="hyperbolic",
            k_max=k_max,
        )
    # simplicity: no two unit eigenvalues may coincide
    simple = True
    for i in range(unit.size):
        for j in range(i + 1, unit.size):
            if abs(unit[i] - unit[j]) <= tau_unit:
                simple = False
    # one representative per conjugate pair (real ones stand alone)
    reps = []
    for lam in unit:
        if lam.imag < -tau_unit:
            continue  # its conjugate (Im >= 0) represents the pair
        if not any(abs(lam - r) <= tau_unit for r in reps):
            reps.append(complex(lam))
    relation = None
    for ks in itertools.product(range(k_max + 1), repeat=len(reps)):
        if sum(ks) == 0:
            continue
        prod = complex(1.0)
        for lam, k in zip(reps, ks):
            prod *= lam ** k
        if abs(prod - 1.0) < tau_rel:
            relation = ks
            break
    if not simple or relation is not None:
        verdict = "resonant"
    else:
        verdict = "non-resonant"
    return ResonanceReport(
        unit_modulus=tuple(complex(u) for u in unit),
        simple=simple,
        relation=relation,
        representatives=tuple(reps),
        verdict=verdict,
        k_max=k_max,
    )


def k_set(
    sys: MapSystem,
    ell: int,
    region=None,
    max_period: int = 6,
    seeds_per_axis: int = 12,
) -> list:
    """Periodic orbits inside the region whose period is not a
    multiple of ell (finite stand-in for the closure K_{l,U})."""
    if ell < 1:
        raise ValueError("ell must be >= 1")
    if ell == 1:
        return []
    orbits = find_periodic_orbits(
        sys, max_period, region=region, seeds_per_axis=seeds_per_axis
    )
    return [o for o in orbits if o.period % ell != 0]
