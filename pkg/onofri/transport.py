"""Radial Brenier maps, the Monge-Ampere residual and the displacement inequality.

For radial densities on B_R the optimal map for quadratic cost is the monotone
rearrangement T = F1^-1 o F0 of the cumulative radial masses. Each density is
interpolated by a Legendre series through the Gauss nodes, so the cumulative
mass at R reproduces the grid quadrature exactly and T can be evaluated off
the grid. Near the origin F(t) ~ t^n, so T is found by matching the roots
F^(1/n), which keep full relative accuracy down to t = 0.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np
from numpy.polynomial import Legendre
from scipy import optimize, special

from .constants import DENSITY_FLOOR
from .errors import ConstraintError, DomainError, GridError
from .functionals import DensityFunction
from .geometry import RadialGrid, sphere_area

MASS_TOL = 1e-10
MAX_ORACLE_POINTS = 8
NEWTON_TOL = 1e-14
BRENTQ_RTOL = 4.0 * np.finfo(float).eps


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Polynomial interpolant of a radial density and of its cumulative mass."""

    n: int
    R: float
    density: Legendre
    cdf: Legendre
    mass_density: Legendre
    scaled_nodes: np.ndarray
    scaled_weights: np.ndarray

    @property
    def mass(self) -> float:
        return float(self.cdf(self.R))

    def mean_mass(self, t) -> np.ndarray:
        """F(t) / t^n as a Gauss rule for the density over (0, t), exact for the interpolant."""
        t = np.asarray(t, dtype=float)
        return self.density(t[..., None] * self.scaled_nodes) @ self.scaled_weights

    def root_mass(self, t) -> np.ndarray:
        """F(t)^(1/n), increasing and close to linear at the origin."""
        t = np.asarray(t, dtype=float)
        return t * self.mean_mass(t) ** (1.0 / self.n)

    def root_mass_derivative(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        q = self.mean_mass(t)
        return sphere_area(self.n) * self.density(t) * q ** (1.0 / self.n - 1.0) / self.n


def radial_profile(values: np.ndarray, grid: RadialGrid) -> RadialProfile:
    nodes = grid.nodes
    density = Legendre.fit(nodes, values[: grid.size], deg=grid.size - 1, domain=[0.0, grid.R])
    power = Legendre.fromroots([0.0] * (grid.n - 1), domain=[0.0, grid.R])
    mass_density = sphere_area(grid.n) * density * power
    # density has degree size - 1, the weight s^(n-1) adds n - 1 more
    x, w = special.roots_legendre((grid.size + grid.n) // 2 + 1)
    sigma = 0.5 * (x + 1.0)
    return RadialProfile(
        n=grid.n,
        R=grid.R,
        density=density,
        cdf=mass_density.integ(lbnd=0.0),
        mass_density=mass_density,
        scaled_nodes=sigma,
        scaled_weights=0.5 * w * sphere_area(grid.n) * sigma ** (grid.n - 1),
    )


def _invert(profile: RadialProfile, levels: np.ndarray, guess: np.ndarray) -> np.ndarray:
    """Solve root_mass(t) = level for every level, starting Newton from guess."""
    R = profile.R
    top = float(profile.root_mass(R))
    levels = np.clip(np.atleast_1d(np.asarray(levels, dtype=float)), 0.0, top)
    guess = np.clip(np.atleast_1d(np.asarray(guess, dtype=float)), 0.0, R)
    if levels.size < 2:
        # scipy's vectorised Newton only kicks in for arrays
        roots = guess.copy()
        retry = np.ones(levels.shape, dtype=bool)
    else:
        with np.errstate(all="ignore"):
            roots, converged, _ = optimize.newton(
                lambda t: profile.root_mass(t) - levels,
                guess.copy(),
                fprime=profile.root_mass_derivative,
                tol=NEWTON_TOL * R,
                maxiter=50,
                full_output=True,
            )
        roots = np.asarray(roots, dtype=float)
        retry = ~np.asarray(converged) | ~np.isfinite(roots) | (roots < 0.0) | (roots > R)
    for index in np.flatnonzero(retry):
        level = levels[index]
        roots[index] = optimize.brentq(
            lambda t: float(profile.root_mass(t)) - level, 0.0, R, xtol=1e-16 * R, rtol=BRENTQ_RTOL
        )
    return np.clip(roots, 0.0, R)


@dataclass(frozen=True, eq=False)
class MonotoneRadialMap:
    grid: RadialGrid
    radii: np.ndarray
    values: np.ndarray
    source: RadialProfile
    target: RadialProfile
    pushforward_error: float
    warnings: List[str] = field(default_factory=list)

    def __call__(self, r) -> np.ndarray:
        r = np.atleast_1d(np.asarray(r, dtype=float))
        if np.any(r < 0.0) or np.any(r > self.grid.R):
            raise DomainError(f"Radii must lie in [0, {self.grid.R}]")
        return _invert(self.target, self.source.root_mass(r), r)

    def inverse(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t < 0.0) or np.any(t > self.grid.R):
            raise DomainError(f"Radii must lie in [0, {self.grid.R}]")
        return _invert(self.source, self.target.root_mass(t), t)

    @property
    def derivative(self) -> np.ndarray:
        return self.grid.derivative_matrix @ self.values

    @property
    def divergence(self) -> np.ndarray:
        return self.derivative + (self.grid.n - 1) * self.values / self.radii

    @property
    def is_monotone(self) -> bool:
        return bool(np.all(np.diff(self.values) >= 0.0))

    def to_rows(self) -> List[Tuple[float, float]]:
        return [(float(r), float(t)) for r, t in zip(self.radii, self.values)]


def _floored(rho: DensityFunction, label: str, warnings: List[str]) -> np.ndarray:
    values = np.asarray(rho.values)
    low = np.flatnonzero(values[:-1] < DENSITY_FLOOR)
    if low.size:
        warnings.append(
            f"{label} is below {DENSITY_FLOOR:g} at nodes {low.tolist()}; "
            "floored before inversion, the map is ill-conditioned there"
        )
    return np.maximum(values, DENSITY_FLOOR)


def radial_brenier(rho0: DensityFunction, rho1: DensityFunction, grid: RadialGrid) -> MonotoneRadialMap:
    for rho in (rho0, rho1):
        if rho.grid is not grid and rho.grid.to_json() != grid.to_json():
            raise GridError("Densities must live on the transport grid")
    scale = max(1.0, abs(rho0.mass))
    if abs(rho0.mass - rho1.mass) > MASS_TOL * scale:
        raise ConstraintError(
            f"Densities must have equal mass: {rho0.mass:.12g} vs {rho1.mass:.12g}"
        )
    warnings: List[str] = []
    source = radial_profile(_floored(rho0, "rho0", warnings), grid)
    target = radial_profile(_floored(rho1, "rho1", warnings), grid)
    radii = grid.radius
    values = _invert(target, source.root_mass(radii), radii)
    values[-1] = grid.R
    pushforward = float(np.max(np.abs(target.cdf(values) - source.cdf(radii))))
    if np.any(np.diff(values) < 0.0):
        warnings.append("Computed map is not monotone; the density interpolants change sign")
    return MonotoneRadialMap(
        grid=grid,
        radii=radii,
        values=values,
        source=source,
        target=target,
        pushforward_error=pushforward,
        warnings=warnings,
    )


def monge_ampere_residual(
    transport: MonotoneRadialMap,
    rho0: DensityFunction | None = None,
    rho1: DensityFunction | None = None,
    grid: RadialGrid | None = None,
) -> float:
    """sup |rho0(r) - rho1(T) T'(r) (T/r)^(n-1)| over the nodes."""
    grid = grid or transport.grid
    r = transport.radii
    T = transport.values
    source = transport.source if rho0 is None else radial_profile(rho0.values, grid)
    target = transport.target if rho1 is None else radial_profile(rho1.values, grid)
    jacobian = transport.derivative * (T / r) ** (grid.n - 1)
    return float(np.max(np.abs(source.density(r) - target.density(T) * jacobian)))


@dataclass(frozen=True)
class Lemma1Report:
    n: int
    R: float
    lhs: float
    rhs: float
    slack: float
    monge_ampere: float
    pushforward_error: float
    warnings: List[str] = field(default_factory=list)


def lemma1_check(
    rho0: DensityFunction, rho1: DensityFunction, grid: RadialGrid, n: int | None = None
) -> Lemma1Report:
    n = grid.n if n is None else n
    if n != grid.n:
        raise GridError(f"Dimension {n} does not match the radial grid (n={grid.n})")
    transport = radial_brenier(rho0, rho1, grid)
    power = 1.0 - 1.0 / n
    lhs = grid.integrate(rho1.values**power)
    rhs = grid.integrate(rho0.values**power * transport.divergence) / n
    return Lemma1Report(
        n=n,
        R=grid.R,
        lhs=lhs,
        rhs=rhs,
        slack=rhs - lhs,
        monge_ampere=monge_ampere_residual(transport),
        pushforward_error=transport.pushforward_error,
        warnings=list(transport.warnings),
    )


def push_points(transport: MonotoneRadialMap, points: np.ndarray) -> np.ndarray:
    """Images x -> T(|x|) x/|x| of Cartesian points inside the ball."""
    points = np.asarray(points, dtype=float)
    r = np.linalg.norm(points, axis=-1)
    if np.any(r == 0.0):
        raise DomainError("The radial map is not defined pointwise at the origin")
    return points * (transport(r) / r)[:, None]


@dataclass(frozen=True)
class DiscretePairing:
    permutation: Tuple[int, ...]
    cost: float
    cyclically_monotone: bool


def _as_cloud(points: Sequence) -> np.ndarray:
    cloud = np.asarray(points, dtype=float)
    if cloud.ndim == 1:
        cloud = cloud[:, None]
    return cloud


def pairing_cost(points0, points1, permutation: Sequence[int]) -> float:
    x, y = _as_cloud(points0), _as_cloud(points1)
    displacement = x - y[list(permutation)]
    return float(0.5 * np.sum(displacement**2) / len(x))


def is_cyclically_monotone(points0, points1, permutation: Sequence[int], tol: float = 1e-12) -> bool:
    x, y = _as_cloud(points0), _as_cloud(points1)
    inner = x @ y[list(permutation)].T
    size = len(x)
    for length in range(2, size + 1):
        cycles = np.array(list(itertools.permutations(range(size), length)))
        kept = np.sum(inner[cycles, cycles], axis=1)
        moved = np.sum(inner[cycles, np.roll(cycles, -1, axis=1)], axis=1)
        if np.any(moved > kept + tol * max(1.0, float(np.max(np.abs(kept))))):
            return False
    return True


def discrete_ot_oracle(points0, points1, weights0=None, weights1=None) -> DiscretePairing:
    """Brute-force optimal pairing for quadratic cost between two small uniform clouds."""
    x, y = _as_cloud(points0), _as_cloud(points1)
    if len(x) > MAX_ORACLE_POINTS or len(y) > MAX_ORACLE_POINTS:
        raise DomainError(
            f"The permutation oracle handles at most {MAX_ORACLE_POINTS} points, "
            f"got {len(x)} and {len(y)}"
        )
    if len(x) != len(y) or x.shape[1] != y.shape[1]:
        raise ConstraintError("Point clouds must have the same size and dimension")
    for weights in (weights0, weights1):
        if weights is not None:
            weights = np.asarray(weights, dtype=float)
            if weights.shape != (len(x),) or np.ptp(weights) > 1e-12:
                raise ConstraintError("The permutation oracle needs uniform weights")
    if weights0 is not None and weights1 is not None:
        if abs(float(np.sum(weights0)) - float(np.sum(weights1))) > MASS_TOL:
            raise ConstraintError("Point clouds must carry the same total weight")
    size = len(x)
    costs = 0.5 * np.sum((x[:, None, :] - y[None, :, :]) ** 2, axis=-1) / size
    permutations = np.array(list(itertools.permutations(range(size))))
    totals = np.sum(costs[np.arange(size), permutations], axis=1)
    best = int(np.argmin(totals))
    permutation = tuple(int(i) for i in permutations[best])
    return DiscretePairing(
        permutation=permutation,
        cost=float(totals[best]),
        cyclically_monotone=is_cyclically_monotone(x, y, permutation),
    )
