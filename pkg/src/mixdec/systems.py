"""Map systems: smooth maps on boxes and tori with Jacobians and orbits.

A :class:`MapSystem` holds a user-defined map on a rectangular domain
whose axes may be flagged periodic (periodic axes give a torus).  Values
are immutable after construction; evaluation is pure, so systems are
safe to share across threads.
"""

from __future__ import annotations

import sys as _sys
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    ConfigError,
    InverseUnavailableError,
    OutOfDomainError,
    SystemValidationError,
)
from .expressions import Expression

if _sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

TAU_INV = 1e-8
TAU_JAC = 1e-8
H_FD = 1e-6
DOMAIN_TOL = 1e-9
LIPSCHITZ_SAFETY = 1.5


@dataclass(frozen=True, eq=False)
class MapSystem:
    """A smooth map on a box/torus with optional inverse and Jacobian."""

    dim: int
    lo: np.ndarray
    hi: np.ndarray
    periodic: np.ndarray
    map_exprs: tuple
    inverse_exprs: tuple | None
    jacobian_exprs: tuple | None
    lipschitz: float
    name: str = ""
    config: dict = field(default_factory=dict, repr=False)

    # -- geometry -----------------------------------------------------

    @property
    def widths(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def has_inverse(self) -> bool:
        return self.inverse_exprs is not None

    def wrap(self, X: np.ndarray) -> np.ndarray:
        """Wrap periodic coordinates into [lo, hi); check the others."""
        X = np.atleast_2d(np.asarray(X, dtype=float)).copy()
        per = self.periodic
        if per.any():
            X[:, per] = self.lo[per] + np.mod(
                X[:, per] - self.lo[per], self.widths[per]
            )
        non = ~per
        if non.any():
            below = X[:, non] < self.lo[non] - DOMAIN_TOL
            above = X[:, non] > self.hi[non] + DOMAIN_TOL
            if below.any() or above.any():
                bad = np.where(below.any(axis=1) | above.any(axis=1))[0][0]
                raise OutOfDomainError(
                    f"point {X[bad]} outside non-periodic domain"
                )
            X[:, non] = np.clip(X[:, non], self.lo[non], self.hi[non])
        return X

    def wrapdiff(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        """Minimal-image difference A - B, wrapped per periodic axis."""
        D = np.atleast_2d(np.asarray(A, dtype=float) - np.asarray(B, dtype=float))
        per = self.periodic
        if per.any():
            w = self.widths[per]
            D[:, per] = D[:, per] - w * np.round(D[:, per] / w)
        return D

    def distance(self, a, b) -> float:
        return float(np.linalg.norm(self.wrapdiff(a, b)[0]))

    def distance_many(self, A, B) -> np.ndarray:
        return np.linalg.norm(self.wrapdiff(A, B), axis=1)

    # -- evaluation ---------------------------------------------------

    def _apply(self, exprs, X):
        cols = [e.evaluate(X) for e in exprs]
        return np.stack(cols, axis=1)

    def evaluate_many(self, X: np.ndarray) -> np.ndarray:
        """Apply the map to an (n, d) array of in-domain points."""
        X = self.wrap(X)
        return self.wrap(self._apply(self.map_exprs, X))

    def evaluate(self, x) -> np.ndarray:
        return self.evaluate_many(np.atleast_2d(x))[0]

    def inverse_many(self, X: np.ndarray) -> np.ndarray:
        if self.inverse_exprs is None:
            raise InverseUnavailableError(
                f"system {self.name!r} has no inverse map"
            )
        X = self.wrap(X)
        return self.wrap(self._apply(self.inverse_exprs, X))

    def inverse(self, x) -> np.ndarray:
        return self.inverse_many(np.atleast_2d(x))[0]

    def jacobian(self, x) -> np.ndarray:
        """Jacobian at a point: explicit if supplied, else central FD.

        Finite differencing uses minimal-image output differences so
        that wrapping on periodic axes does not corrupt the quotients.
        """
        x = self.wrap(np.atleast_2d(x))[0]
        if self.jacobian_exprs is not None:
            vals = [e.evaluate(x[None, :])[0] for e in self.jacobian_exprs]
            return np.array(vals, dtype=float).reshape(self.dim, self.dim)
        J = np.empty((self.dim, self.dim))
        for j in range(self.dim):
            # relative step for large coordinates keeps the quotient
            # well-conditioned on wide domains
            step = H_FD * max(1.0, abs(float(x[j])))
            h = np.zeros(self.dim)
            h[j] = step
            fp = self.evaluate_many((x + h)[None, :])[0]
            fm = self.evaluate_many((x - h)[None, :])[0]
            J[:, j] = self.wrapdiff(fp, fm)[0] / (2.0 * step)
        return J

    # -- fixed sample grids -------------------------------------------

    def sample_grid(self, total: int) -> np.ndarray:
        """Deterministic cell-centered lattice of about `total` points."""
        per_axis = max(1, round(total ** (1.0 / self.dim)))
        axes = [
            self.lo[i] + (np.arange(per_axis) + 0.5) / per_axis * self.widths[i]
            for i in range(self.dim)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass(frozen=True)
class OrbitSegment:
    """A finite stretch of orbit: points[k+1] = f(points[k])."""

    base: np.ndarray
    length: int
    points: np.ndarray

    @property
    def last(self) -> np.ndarray:
        return self.points[-1]


def evaluate(sys: MapSystem, x) -> np.ndarray:
    """f(x), with periodic axes wrapped into the fundamental domain."""
    return sys.evaluate(x)


def iterate(sys: MapSystem, x, n: int) -> OrbitSegment:
    """Orbit segment of length |n|; negative n uses the inverse map."""
    x = sys.wrap(np.atleast_2d(x))[0]
    pts = [x]
    step = sys.evaluate if n >= 0 else sys.inverse
    if n < 0 and not sys.has_inverse:
        raise InverseUnavailableError(
            f"iterate with n={n} requires an inverse map"
        )
    for _ in range(abs(n)):
        pts.append(step(pts[-1]))
    return OrbitSegment(base=x, length=abs(n), points=np.array(pts))


def jacobian(sys: MapSystem, x) -> np.ndarray:
    return sys.jacobian(x)


# -- construction -----------------------------------------------------


def _estimate_lipschitz(system: MapSystem) -> float:
    grid = system.sample_grid(10 ** system.dim)
    worst = 0.0
    for p in grid:
        try:
            J = system.jacobian(p)
        except OutOfDomainError:
            continue
        worst = max(worst, float(np.linalg.norm(J, 2)))
    if worst == 0.0:
        worst = 1.0
    return worst * LIPSCHITZ_SAFETY


def _validate_inverse(system: MapSystem):
    grid = system.sample_grid(1000)
    err = 0.0
    checked = 0
    for p in grid:
        try:
            back = system.evaluate(system.inverse(p))
        except OutOfDomainError:
            continue  # round trip left a non-periodic axis; not checkable
        err = max(err, system.distance(back, p))
        checked += 1
    if checked == 0:
        raise SystemValidationError(
            "inverse consistency not checkable: every grid point escapes"
        )
    if err >= TAU_INV:
        raise SystemValidationError(
            f"map revert inverse mismatch: max |f(f^-1(x)) - x| = {err:.3e} "
            f">= {TAU_INV:.0e}"
        )


def _validate_jacobian(system: MapSystem):
    grid = system.sample_grid(1000)
    stripped = MapSystem(
        dim=system.dim,
        lo=system.lo,
        hi=system.hi,
        periodic=system.periodic,
        map_exprs=system.map_exprs,
        inverse_exprs=None,
        jacobian_exprs=None,
        lipschitz=system.lipschitz,
        name=system.name,
    )
    worst = 0.0
    for p in grid:
        try:
            fd = stripped.jacobian(p)
            analytic = system.jacobian(p)
        except OutOfDomainError:
            continue
        worst = max(worst, float(np.max(np.abs(fd - analytic))))
    if worst >= TAU_JAC:
        raise SystemValidationError(
            f"supplied Jacobian disagrees with central differences: "
            f"max entry error {worst:.3e} >= {TAU_JAC:.0e}"
        )


def system_from_config(cfg: dict, name: str = "", validate: bool = True) -> MapSystem:
    """Build a MapSystem from a parsed configuration mapping.

    Keys: `dimension`, `domain` = [[lo, hi], ...], `periodic` =
    [bool, ...], `map` = [expr, ...]; optional `inverse`, `jacobian`
    (d*d expressions, row-major), `lipschitz`.
    """
    try:
        dim = int(cfg["dimension"])
        domain = cfg["domain"]
        periodic = cfg["periodic"]
        map_src = cfg["map"]
    except KeyError as exc:
        raise ConfigError(f"missing configuration key {exc.args[0]!r}") from exc
    if dim < 1:
        raise ConfigError("dimension must be a positive integer")
    if len(domain) != dim or any(len(b) != 2 for b in domain):
        raise ConfigError("domain must list [lo, hi] bounds for each axis")
    if len(periodic) != dim:
        raise ConfigError("periodic must list one flag per axis")
    if len(map_src) != dim:
        raise ConfigError("map must list one expression per axis")
    lo = np.array([float(b[0]) for b in domain])
    hi = np.array([float(b[1]) for b in domain])
    if np.any(hi <= lo):
        raise ConfigError("each domain axis needs lo < hi")

    def build(srcs):
        return tuple(Expression(s, dim) for s in srcs)

    inverse_src = cfg.get("inverse")
    jac_src = cfg.get("jacobian")
    if jac_src is not None and len(jac_src) != dim * dim:
        raise ConfigError(
            f"jacobian must list {dim * dim} expressions (row-major)"
        )
    system = MapSystem(
        dim=dim,
        lo=lo,
        hi=hi,
        periodic=np.array([bool(p) for p in periodic]),
        map_exprs=build(map_src),
        inverse_exprs=build(inverse_src) if inverse_src is not None else None,
        jacobian_exprs=build(jac_src) if jac_src is not None else None,
        lipschitz=float(cfg.get("lipschitz", 0.0)),
        name=name or cfg.get("name", ""),
        config=dict(cfg),
    )
    if system.lipschitz <= 0.0:
        system = replace(system, lipschitz=_estimate_lipschitz(system))
    if validate:
        if system.inverse_exprs is not None:
            _validate_inverse(system)
        if system.jacobian_exprs is not None:
            _validate_jacobian(system)
    return system


def system_from_text(text: str, name: str = "", validate: bool = True) -> MapSystem:
    try:
        cfg = _toml.loads(text)
    except _toml.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}") from exc
    return system_from_config(cfg, name=name, validate=validate)


def system_from_file(path, validate: bool = True) -> MapSystem:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = _toml.loads(data.decode("utf-8"))
    except _toml.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: parse error: {exc}") from exc
    return system_from_config(cfg, name=str(path), validate=validate)
