"""Quadrature grids on balls and on the unit sphere, plus discrete operators.

Radial integrals use Gauss-Legendre nodes mapped to (0, R) with the volume
factor omega_n r^(n-1) folded into the weights. Disk grids add a uniform
(trapezoid) angular rule. Both carry an evaluation ring at r = R with zero
weight so that boundary traces and one-sided stencils have a node to use.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, List

import numpy as np
from scipy import linalg, special

from .errors import EvaluationError, GridError

MIN_NODES = 4


def sphere_area(n: int) -> float:
    """Area of the unit sphere in R^n."""
    return float(2.0 * np.pi ** (n / 2.0) / special.gamma(n / 2.0))


def _frozen(values) -> np.ndarray:
    array = np.array(values, dtype=float)
    array.setflags(write=False)
    return array


def radial_derivative_matrix(radii: np.ndarray) -> np.ndarray:
    """Centred differences on a nonuniform grid, second-order one-sided at the ends."""
    radii = np.asarray(radii, dtype=float)
    if radii.size < 3:
        raise GridError(f"Need at least 3 radial nodes for differences, got {radii.size}")
    return np.gradient(np.eye(radii.size), radii, axis=0, edge_order=2)


def _check_shape(values: np.ndarray, shape: tuple, label: str) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape != shape:
        raise GridError(f"{label} has shape {values.shape}, grid expects {shape}")
    return values


@dataclass(frozen=True, eq=False)
class RadialGrid:
    n: int
    R: float
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < 2:
            raise GridError(f"Dimension must be an integer >= 2, got {self.n}")
        if not self.R > 0:
            raise GridError(f"Radius must be positive, got {self.R}")
        nodes = _frozen(self.nodes)
        weights = _frozen(self.weights)
        if nodes.ndim != 1 or nodes.shape != weights.shape:
            raise GridError("Radial nodes and weights must be matching 1-D arrays")
        if nodes.size < MIN_NODES:
            raise GridError(f"Radial grid too small: {nodes.size} nodes (need {MIN_NODES})")
        if np.any(np.diff(nodes) <= 0) or nodes[0] <= 0 or nodes[-1] >= self.R:
            raise GridError("Radial nodes must increase strictly inside (0, R)")
        if np.any(weights <= 0):
            raise GridError("Radial weights must be strictly positive")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "R", float(self.R))
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def size(self) -> int:
        return int(self.nodes.size)

    @property
    def shape(self) -> tuple:
        return (self.size + 1,)

    @cached_property
    def radius(self) -> np.ndarray:
        return _frozen(np.append(self.nodes, self.R))

    @cached_property
    def field_weights(self) -> np.ndarray:
        return _frozen(np.append(self.weights, 0.0))

    @cached_property
    def boundary(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        mask[-1] = True
        mask.setflags(write=False)
        return mask

    @cached_property
    def derivative_matrix(self) -> np.ndarray:
        return radial_derivative_matrix(self.radius)

    @property
    def volume(self) -> float:
        return sphere_area(self.n) * self.R**self.n / self.n

    def integrate(self, values: np.ndarray) -> float:
        values = _check_shape(values, self.shape, "Field")
        return float(np.dot(self.field_weights, values))

    def gradient(self, values: np.ndarray) -> np.ndarray:
        """Radial derivative as a one-component vector field, shape (N+1, 1)."""
        values = _check_shape(values, self.shape, "Field")
        derivative = self.derivative_matrix @ (values - values[0])
        return derivative[:, None]

    def to_json(self) -> str:
        return json.dumps(
            {
                "n": self.n,
                "R": self.R,
                "nodes": self.nodes.tolist(),
                "weights": self.weights.tolist(),
            },
            sort_keys=True,
        )


@dataclass(frozen=True, eq=False)
class DiskGrid:
    R: float
    nodes: np.ndarray
    radial_weights: np.ndarray
    angles: np.ndarray

    def __post_init__(self) -> None:
        if not self.R > 0:
            raise GridError(f"Radius must be positive, got {self.R}")
        nodes = _frozen(self.nodes)
        radial_weights = _frozen(self.radial_weights)
        angles = _frozen(self.angles)
        if nodes.size < MIN_NODES or angles.size < MIN_NODES:
            raise GridError(
                f"Disk grid too small: {nodes.size} radial x {angles.size} angular nodes "
                f"(need {MIN_NODES} of each)"
            )
        if nodes.shape != radial_weights.shape:
            raise GridError("Radial nodes and weights must have matching shapes")
        if np.any(np.diff(nodes) <= 0) or nodes[0] <= 0 or nodes[-1] >= self.R:
            raise GridError("Radial nodes must increase strictly inside (0, R)")
        spacing = 2.0 * np.pi / angles.size
        expected = np.arange(angles.size) * spacing
        if not np.allclose(angles, expected, rtol=0.0, atol=1e-14):
            raise GridError("Angular nodes must be equally spaced on [0, 2pi)")
        object.__setattr__(self, "R", float(self.R))
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "radial_weights", radial_weights)
        object.__setattr__(self, "angles", angles)

    @property
    def n(self) -> int:
        return 2

    @property
    def shape(self) -> tuple:
        return (self.nodes.size + 1, self.angles.size)

    @cached_property
    def ring(self) -> np.ndarray:
        return _frozen(np.append(self.nodes, self.R))

    @cached_property
    def radius(self) -> np.ndarray:
        return _frozen(np.broadcast_to(self.ring[:, None], self.shape))

    @cached_property
    def angle(self) -> np.ndarray:
        return _frozen(np.broadcast_to(self.angles[None, :], self.shape))

    @cached_property
    def x(self) -> np.ndarray:
        return _frozen(self.radius * np.cos(self.angle))

    @cached_property
    def y(self) -> np.ndarray:
        return _frozen(self.radius * np.sin(self.angle))

    @cached_property
    def field_weights(self) -> np.ndarray:
        angular = np.full(self.angles.size, 2.0 * np.pi / self.angles.size)
        return _frozen(np.outer(np.append(self.radial_weights, 0.0), angular))

    @cached_property
    def boundary(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        mask[-1, :] = True
        mask.setflags(write=False)
        return mask

    @cached_property
    def derivative_matrix(self) -> np.ndarray:
        return radial_derivative_matrix(self.ring)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        return _frozen(np.fft.rfftfreq(self.angles.size, d=1.0 / self.angles.size))

    @cached_property
    def _radial_laplacian(self) -> np.ndarray:
        D = self.derivative_matrix
        return D @ D + D / self.ring[:, None]

    @cached_property
    def _poisson_factors(self) -> List[tuple]:
        factors = []
        for k in self.wavenumbers:
            operator = self._radial_laplacian - np.diag(k**2 / self.ring**2)
            operator[-1, :] = 0.0
            operator[-1, -1] = 1.0
            factors.append(linalg.lu_factor(operator))
        return factors

    def integrate(self, values: np.ndarray) -> float:
        values = _check_shape(values, self.shape, "Field")
        return float(np.sum(self.field_weights * values))

    def angular_derivative(self, values: np.ndarray) -> np.ndarray:
        values = _check_shape(values, self.shape, "Field")
        spectrum = np.fft.rfft(values - values[0, 0], axis=1)
        spectrum *= 1j * self.wavenumbers[None, :]
        if self.angles.size % 2 == 0:
            spectrum[:, -1] = 0.0
        return np.fft.irfft(spectrum, n=self.angles.size, axis=1)

    def gradient(self, values: np.ndarray) -> np.ndarray:
        """(d/dr, r^-1 d/dtheta) at every node, shape (N+1, M, 2)."""
        values = _check_shape(values, self.shape, "Field")
        radial = self.derivative_matrix @ (values - values[0, 0])
        angular = self.angular_derivative(values) / self.radius
        return np.stack([radial, angular], axis=-1)

    def laplacian(self, values: np.ndarray) -> np.ndarray:
        values = _check_shape(values, self.shape, "Field")
        spectrum = np.fft.rfft(values - values[0, 0], axis=1)
        result = self._radial_laplacian @ spectrum
        result -= (self.wavenumbers[None, :] ** 2) * spectrum / self.ring[:, None] ** 2
        return np.fft.irfft(result, n=self.angles.size, axis=1)

    def solve_poisson(self, rhs: np.ndarray) -> np.ndarray:
        """Solve laplacian(u) = rhs off the ring with u = 0 on the ring."""
        rhs = _check_shape(rhs, self.shape, "Right-hand side")
        spectrum = np.fft.rfft(rhs, axis=1)
        spectrum[-1, :] = 0.0
        solution = np.empty_like(spectrum)
        for column, factor in enumerate(self._poisson_factors):
            solution[:, column] = linalg.lu_solve(factor, spectrum[:, column])
        values = np.fft.irfft(solution, n=self.angles.size, axis=1)
        values[-1, :] = 0.0
        return values

    def to_json(self) -> str:
        return json.dumps(
            {
                "n": 2,
                "R": self.R,
                "nodes": self.nodes.tolist(),
                "weights": self.radial_weights.tolist(),
                "angles": self.angles.tolist(),
            },
            sort_keys=True,
        )


@dataclass(frozen=True, eq=False)
class SphereGrid:
    cos_polar: np.ndarray
    polar_weights: np.ndarray
    azimuth: np.ndarray

    def __post_init__(self) -> None:
        cos_polar = _frozen(self.cos_polar)
        polar_weights = _frozen(self.polar_weights)
        azimuth = _frozen(self.azimuth)
        if cos_polar.size < MIN_NODES or azimuth.size < MIN_NODES:
            raise GridError("Sphere grid too small")
        object.__setattr__(self, "cos_polar", cos_polar)
        object.__setattr__(self, "polar_weights", polar_weights)
        object.__setattr__(self, "azimuth", azimuth)

    @property
    def shape(self) -> tuple:
        return (self.cos_polar.size, self.azimuth.size)

    @cached_property
    def points(self) -> np.ndarray:
        """Unit vectors of the nodes, shape (N, M, 3)."""
        t = self.cos_polar[:, None]
        s = np.sqrt(1.0 - t**2)
        phi = self.azimuth[None, :]
        points = np.stack(
            np.broadcast_arrays(s * np.cos(phi), s * np.sin(phi), t), axis=-1
        )
        return _frozen(points)

    @cached_property
    def weights(self) -> np.ndarray:
        angular = np.full(self.azimuth.size, 1.0 / self.azimuth.size)
        return _frozen(np.outer(self.polar_weights, angular))

    def integrate(self, values: np.ndarray) -> float:
        values = _check_shape(values, self.shape, "Sphere field")
        return float(np.sum(self.weights * values))

    def to_json(self) -> str:
        return json.dumps(
            {
                "n": 3,
                "R": 1.0,
                "nodes": self.points.reshape(-1, 3).tolist(),
                "weights": self.weights.ravel().tolist(),
            },
            sort_keys=True,
        )


def radial_grid(n: int, R: float, resolution: int = 128) -> RadialGrid:
    if resolution < MIN_NODES:
        raise GridError(f"Radial grid too small: {resolution} nodes (need {MIN_NODES})")
    x, w = special.roots_legendre(resolution)
    nodes = 0.5 * R * (x + 1.0)
    weights = 0.5 * R * w * sphere_area(n) * nodes ** (n - 1)
    return RadialGrid(n=n, R=R, nodes=nodes, weights=weights)


def disk_grid(R: float, resolution: int = 128, angular_resolution: int | None = None) -> DiskGrid:
    angular_resolution = resolution if angular_resolution is None else angular_resolution
    if resolution < MIN_NODES or angular_resolution < MIN_NODES:
        raise GridError(
            f"Disk grid too small: {resolution} x {angular_resolution} (need {MIN_NODES} of each)"
        )
    x, w = special.roots_legendre(resolution)
    nodes = 0.5 * R * (x + 1.0)
    radial_weights = 0.5 * R * w * nodes
    angles = 2.0 * np.pi * np.arange(angular_resolution) / angular_resolution
    return DiskGrid(R=R, nodes=nodes, radial_weights=radial_weights, angles=angles)


def stereographic_disk_grid(
    R: float, resolution: int = 128, angular_resolution: int | None = None
) -> DiskGrid:
    """Disk grid with Gauss nodes in the polar angle t = 2 arctan(r) of the projected sphere.

    Resolves mu_2 on very large disks; meant for integration with analytic
    gradients (the radial stencil on these nodes is not used).
    """
    angular_resolution = resolution if angular_resolution is None else angular_resolution
    if resolution < MIN_NODES or angular_resolution < MIN_NODES:
        raise GridError(
            f"Disk grid too small: {resolution} x {angular_resolution} (need {MIN_NODES} of each)"
        )
    x, w = special.roots_legendre(resolution)
    top = 2.0 * np.arctan(R)
    t = 0.5 * top * (x + 1.0)
    nodes = np.tan(0.5 * t)
    radial_weights = 0.5 * top * w * nodes * (1.0 + nodes**2) / 2.0
    angles = 2.0 * np.pi * np.arange(angular_resolution) / angular_resolution
    return DiskGrid(R=R, nodes=nodes, radial_weights=radial_weights, angles=angles)


def sphere_grid(polar: int = 48, azimuth: int = 96) -> SphereGrid:
    t, w = special.roots_legendre(polar)
    phi = 2.0 * np.pi * np.arange(azimuth) / azimuth
    return SphereGrid(cos_polar=t, polar_weights=0.5 * w, azimuth=phi)


def integrate_radial(f: Callable[[np.ndarray], np.ndarray], grid: RadialGrid) -> float:
    values = np.broadcast_to(np.asarray(f(grid.nodes), dtype=float), grid.nodes.shape)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        index = int(bad[0])
        raise EvaluationError(
            f"Integrand is not finite at node {index} (r={grid.nodes[index]:.6g}): {values[index]}"
        )
    return float(np.dot(grid.weights, values))


def integrate_disk(f: np.ndarray, grid: DiskGrid) -> float:
    return grid.integrate(f)


def gradient_disk(u, grid: DiskGrid) -> np.ndarray:
    return grid.gradient(getattr(u, "values", u))


def laplacian_disk(u, grid: DiskGrid) -> np.ndarray:
    return grid.laplacian(getattr(u, "values", u))


def solve_poisson_disk(rhs: np.ndarray, grid: DiskGrid) -> np.ndarray:
    return grid.solve_poisson(rhs)
