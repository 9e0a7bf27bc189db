from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, Protocol, Union

import numpy as np
from scipy import optimize

from .constants import EXP_LIMIT, MAX_FIELD_AMPLITUDE, SCALE_BRACKET, ZERO_TRACE_TOL
from .densities import ModelDensity, theta
from .errors import ConstraintError, DegenerateError, DomainError, GridError, RangeError
from .geometry import DiskGrid, RadialGrid, SphereGrid, radial_grid

Grid = Union[RadialGrid, DiskGrid]

SCALE_TOL = 1e-10


def _frozen(values) -> np.ndarray:
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: Grid
    values: np.ndarray
    zero_trace: bool = field(init=False)

    def __post_init__(self) -> None:
        values = _frozen(self.values)
        if values.shape != self.grid.shape:
            raise GridError(f"Field has shape {values.shape}, grid expects {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise DomainError("Field has non-finite values")
        object.__setattr__(self, "values", values)
        trace = np.abs(values[self.grid.boundary])
        object.__setattr__(self, "zero_trace", bool(trace.max() < ZERO_TRACE_TOL))

    def scaled(self, factor: float) -> "GridFunction":
        return GridFunction(self.grid, factor * self.values)


@dataclass(frozen=True, eq=False)
class DensityFunction:
    grid: Grid
    values: np.ndarray
    mass: float = field(init=False)

    def __post_init__(self) -> None:
        values = _frozen(self.values)
        if values.shape != self.grid.shape:
            raise GridError(f"Density has shape {values.shape}, grid expects {self.grid.shape}")
        negative = np.flatnonzero(~(values >= 0.0))
        if negative.size:
            index = int(negative[0])
            raise DomainError(
                f"Density is negative or undefined at node {index}: {values.flat[index]}"
            )
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mass", self.grid.integrate(values))

    def rescaled(self, mass: float) -> "DensityFunction":
        if self.mass <= 0:
            raise DegenerateError("Cannot rescale a density with zero mass")
        return DensityFunction(self.grid, self.values * (mass / self.mass))


@dataclass(frozen=True)
class DeficitReport:
    dirichlet: float
    linear: float
    log: float
    total: float

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


@dataclass(frozen=True)
class CorollaryReport:
    lhs: float
    rhs: float
    slack: float
    sharp_lhs: float
    sharp_rhs: float
    sharp_slack: float
    exp_residual: float

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def sample_disk(grid: DiskGrid, f: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> GridFunction:
    return GridFunction(grid, np.broadcast_to(f(grid.x, grid.y), grid.shape))


def sample_radial(grid: RadialGrid, f: Callable[[np.ndarray], np.ndarray]) -> GridFunction:
    return GridFunction(grid, np.broadcast_to(f(grid.radius), grid.shape))


def model_density(grid: Grid, d: ModelDensity) -> DensityFunction:
    return DensityFunction(grid, d.profile(grid.radius))


def _check_grid(grid: Grid, R: float, d: ModelDensity | None = None) -> None:
    if abs(grid.R - R) > 1e-12 * max(1.0, R):
        raise GridError(f"Grid radius {grid.R} does not match R={R}")
    if d is not None and grid.n != d.n:
        raise GridError(f"Grid dimension {grid.n} does not match density dimension {d.n}")


def _require_zero_trace(u: GridFunction, label: str) -> None:
    if not u.zero_trace:
        trace = float(np.abs(u.values[u.grid.boundary]).max())
        raise ConstraintError(f"{label} must vanish on the boundary ring (max |trace| = {trace:.3e})")


def _mu_weights(grid: Grid, d: ModelDensity) -> np.ndarray:
    return grid.field_weights * d.profile(grid.radius)


def _log_mu_gradient(grid: Grid, d: ModelDensity) -> np.ndarray:
    slope = d.dlog(grid.radius)
    if isinstance(grid, DiskGrid):
        return np.stack([slope, np.zeros_like(slope)], axis=-1)
    return slope[:, None]


def _check_exponent(values: np.ndarray) -> None:
    peak = float(np.max(values))
    if peak > EXP_LIMIT:
        raise RangeError(
            f"exp(u) overflows: max u = {peak:.3g} exceeds {EXP_LIMIT:g}; "
            f"rescale the field amplitude below {MAX_FIELD_AMPLITUDE:g}"
        )


def h_n_pointwise(g_u, g_m, n: int) -> np.ndarray:
    """Bregman gap of |z|^n between g_m and g_m + g_u."""
    if n < 2:
        raise DomainError(f"Dimension must be >= 2, got {n}")
    g_u = np.asarray(g_u, dtype=float)
    g_m = np.asarray(g_m, dtype=float)
    norm_m = np.linalg.norm(g_m, axis=-1)
    shifted = np.linalg.norm(g_u + g_m, axis=-1)
    return shifted**n - norm_m**n - n * norm_m ** (n - 2) * np.sum(g_m * g_u, axis=-1)


def dirichlet_integral(u: GridFunction) -> float:
    gradient = u.grid.gradient(u.values)
    return u.grid.integrate(np.sum(gradient**2, axis=-1))


def gradient_power_integral(u: GridFunction, n: int) -> float:
    gradient = u.grid.gradient(u.values)
    return u.grid.integrate(np.sum(gradient**2, axis=-1) ** (n / 2.0))


def h_n_integral(u: GridFunction, d: ModelDensity) -> float:
    values = h_n_pointwise(u.grid.gradient(u.values), _log_mu_gradient(u.grid, d), d.n)
    return u.grid.integrate(values)


def onofri_energy_2d(u: GridFunction, R: float) -> float:
    d = ModelDensity(2)
    _check_grid(u.grid, R, d)
    _require_zero_trace(u, "u")
    linear = float(np.sum(_mu_weights(u.grid, d) * u.values))
    return dirichlet_integral(u) / (16.0 * np.pi) + linear


def onofri_energy_nd(u: GridFunction, R: float, d: ModelDensity) -> float:
    _check_grid(u.grid, R, d)
    _require_zero_trace(u, "u")
    linear = float(np.sum(_mu_weights(u.grid, d) * u.values))
    return h_n_integral(u, d) / d.beta + linear


def free_energy_2d(rho: DensityFunction, R: float) -> float:
    _check_grid(rho.grid, R)
    grid = rho.grid
    root = grid.integrate(np.sqrt(rho.values))
    moment = grid.integrate(grid.radius**2 * rho.values)
    return 2.0 / np.sqrt(np.pi) * root - moment


def free_energy_nd(rho: DensityFunction, R: float, d: ModelDensity) -> float:
    _check_grid(rho.grid, R, d)
    grid = rho.grid
    root = grid.integrate(rho.values ** (1.0 / d.m))
    moment = grid.integrate(grid.radius**d.m * rho.values)
    return d.alpha * root - moment


def _whole_space_deficit(u: GridFunction, d: ModelDensity, dirichlet: float) -> DeficitReport:
    _check_exponent(u.values)
    weights = _mu_weights(u.grid, d)
    linear = float(np.sum(weights * u.values))
    # u vanishes outside the ball and mu_n has total mass one
    log_term = float(np.log1p(np.sum(weights * np.expm1(u.values))))
    return DeficitReport(
        dirichlet=dirichlet,
        linear=linear,
        log=log_term,
        total=dirichlet + linear - log_term,
    )


def onofri_deficit_2d(u: GridFunction) -> DeficitReport:
    if u.grid.n != 2:
        raise GridError("The two-dimensional deficit needs a planar grid")
    _require_zero_trace(u, "u")
    return _whole_space_deficit(u, ModelDensity(2), dirichlet_integral(u) / (16.0 * np.pi))


def onofri_deficit_nd(u: GridFunction, d: ModelDensity) -> DeficitReport:
    if u.grid.n != d.n:
        raise GridError(f"Grid dimension {u.grid.n} does not match density dimension {d.n}")
    _require_zero_trace(u, "u")
    return _whole_space_deficit(u, d, h_n_integral(u, d) / d.beta)


def scale_factor(w: GridFunction, R: float, d: ModelDensity) -> float:
    """Nonzero s with integral of exp(s w) d mu_n equal to the discrete mass of mu_n on B_R."""
    _check_grid(w.grid, R, d)
    _require_zero_trace(w, "w")
    weights = _mu_weights(w.grid, d)
    values = w.values
    slope = float(np.sum(weights * values))
    if abs(slope) < SCALE_TOL:
        raise DegenerateError(
            f"Integral of w against mu_n is {slope:.3e}; the only scaling root is s = 0"
        )

    # f(s) = int (e^{sw} - 1) dmu is convex with f(0) = 0, so f(s)/s is increasing
    def secant(s: float) -> float:
        if s == 0.0:
            return slope
        with np.errstate(over="ignore"):
            return float(np.sum(weights * np.expm1(s * values))) / s

    direction = -1.0 if slope > 0 else 1.0
    near, far = 0.0, direction * 0.5
    while True:
        value = secant(far)
        if not np.isfinite(value):
            far = 0.5 * (near + far)
            continue
        if value * slope < 0:
            break
        if abs(far) >= SCALE_BRACKET:
            raise RangeError(f"Scaling root lies outside [-{SCALE_BRACKET}, {SCALE_BRACKET}]")
        near, far = far, direction * min(2.0 * abs(far), SCALE_BRACKET)
    return float(optimize.brentq(secant, min(near, far), max(near, far), xtol=1e-14, rtol=1e-14))


def constraint_scale(w: GridFunction, R: float, d: ModelDensity) -> GridFunction:
    return w.scaled(scale_factor(w, R, d))


def exp_constraint_residual(u: GridFunction, R: float, d: ModelDensity) -> float:
    """|int_{B_R} e^u d mu_n - theta_R| against the closed-form mass."""
    _check_exponent(u.values)
    weights = _mu_weights(u.grid, d)
    return abs(float(np.sum(weights * np.exp(u.values))) - theta(R, d))


def corollary_candidate(u: GridFunction, d: ModelDensity) -> GridFunction:
    """v = u + log mu_n - log mu_n on the sphere of radius R."""
    grid = u.grid
    shift = np.log(d.profile(grid.radius)) - np.log(d.boundary_value(grid.R))
    return GridFunction(grid, u.values + shift)


def _mu_peak_value(grid: Grid, d: ModelDensity) -> float:
    # G_mu(eps_max) = A^n / (n (m B)^(n-1)) with A, B evaluated at mu_n
    profile = d.profile(grid.radius)
    mass = grid.integrate(profile)
    root = grid.integrate(profile ** (1.0 / d.m))
    moment = grid.integrate(grid.radius**d.m * profile)
    a = d.n**2 * d.m * root - d.n ** (1.0 + 1.0 / d.m) * d.m * d.omega ** (1.0 / d.n) * mass
    b = d.n / d.m * moment
    return a**d.n / (d.n * (d.m * b) ** (d.n - 1))


def stated_corollary_sides(v: GridFunction, R: float, d: ModelDensity) -> CorollaryReport:
    """Both sides of the corollary inequality as printed, without admissibility checks."""
    _check_grid(v.grid, R, d)
    _check_exponent(v.values)
    exp_mass = v.grid.integrate(np.exp(v.values))
    return _corollary_report(v.grid, R, d, exp_mass, gradient_power_integral(v, d.n))


def corollary_extremal(R: float, d: ModelDensity, resolution: int = 128) -> CorollaryReport:
    """Corollary sides at v = log mu_n - log mu_n(R) with the exact gradient of log mu_n."""
    grid = radial_grid(d.n, R, resolution)
    r = grid.radius
    exp_mass = grid.integrate(d.profile(r) / d.boundary_value(R))
    power = grid.integrate(np.abs(d.dlog(r)) ** d.n)
    return _corollary_report(grid, R, d, exp_mass, power)


def _corollary_report(
    grid: Grid, R: float, d: ModelDensity, exp_mass: float, power: float
) -> CorollaryReport:
    lhs = (d.n / d.omega) ** (1.0 / d.m) / (1.0 + R**d.m) ** d.n * exp_mass + (
        (d.n - 1) / d.n**2
    ) * power
    rhs = grid.integrate(d.profile(grid.radius) ** (1.0 / d.m))
    sharp_rhs = _mu_peak_value(grid, d)
    target = grid.integrate(d.profile(grid.radius))
    return CorollaryReport(
        lhs=lhs,
        rhs=rhs,
        slack=lhs - rhs,
        sharp_lhs=power,
        sharp_rhs=sharp_rhs,
        sharp_slack=power - sharp_rhs,
        exp_residual=abs(d.boundary_value(R) * exp_mass - target) / target,
    )


def corollary_check(v: GridFunction, R: float, d: ModelDensity) -> CorollaryReport:
    _require_zero_trace(v, "v")
    report = stated_corollary_sides(v, R, d)
    if report.exp_residual > 1e-8:
        raise ConstraintError(
            "v must satisfy mu_n(R) * int e^v dx = theta_R "
            f"(relative residual {report.exp_residual:.3e}); build it with corollary_candidate"
        )
    return report


class SphereModel(Protocol):
    def values(self, points: np.ndarray) -> np.ndarray: ...

    def gradient(self, points: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True, eq=False)
class SphereField:
    grid: SphereGrid
    values: np.ndarray
    gradient: np.ndarray

    def __post_init__(self) -> None:
        values = _frozen(self.values)
        gradient = _frozen(self.gradient)
        if values.shape != self.grid.shape or gradient.shape != self.grid.shape + (3,):
            raise GridError("Sphere field does not match its grid")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "gradient", gradient)

    @classmethod
    def from_model(cls, grid: SphereGrid, model: SphereModel) -> "SphereField":
        points = grid.points
        return cls(grid, model.values(points), tangential(model.gradient(points), points))

    def shifted(self, constant: float) -> "SphereField":
        return SphereField(self.grid, self.values + constant, self.gradient)


def tangential(gradient: np.ndarray, points: np.ndarray) -> np.ndarray:
    normal = np.sum(gradient * points, axis=-1, keepdims=True)
    return gradient - normal * points


def sphere_onofri(u: SphereField) -> float:
    """1/4 int |grad u|^2 + int u - log int e^u against the normalised measure.

    The mean enters with a plus sign; with the minus sign as sometimes printed the
    functional would shift by -2c under u -> u + c.
    """
    _check_exponent(u.values)
    grid = u.grid
    dirichlet = grid.integrate(np.sum(u.gradient**2, axis=-1))
    mean = grid.integrate(u.values)
    log_term = float(np.log1p(grid.integrate(np.expm1(u.values))))
    return 0.25 * dirichlet + mean - log_term


def inverse_stereographic(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Plane to unit sphere, origin to the south pole, infinity to the north pole."""
    r2 = x**2 + y**2
    return np.stack([2.0 * x, 2.0 * y, r2 - 1.0], axis=-1) / (r2 + 1.0)[..., None]


def stereographic_deficit(model: SphereModel, grid: DiskGrid) -> DeficitReport:
    """Planar Onofri deficit of the pullback of a sphere field, normalised to vanish at infinity."""
    points = inverse_stereographic(grid.x, grid.y)
    north = np.array([0.0, 0.0, 1.0])
    values = model.values(points) - float(model.values(north))
    _check_exponent(values)
    slope = tangential(model.gradient(points), points)
    conformal = (2.0 / (1.0 + grid.radius**2)) ** 2
    dirichlet = grid.integrate(np.sum(slope**2, axis=-1) * conformal) / (16.0 * np.pi)
    weights = _mu_weights(grid, ModelDensity(2))
    linear = float(np.sum(weights * values))
    log_term = float(np.log1p(np.sum(weights * np.expm1(values))))
    return DeficitReport(dirichlet, linear, log_term, dirichlet + linear - log_term)
