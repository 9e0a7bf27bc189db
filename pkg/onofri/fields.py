"""Seeded random test fields.

Planar and radial fields are sums of at most five Gaussian bumps multiplied by
the cutoff (1 - |x|^2/R^2)_+^2, so they vanish on the boundary ring exactly.
Densities are bump mixtures on a positive floor. Sphere fields are sums of
von Mises-Fisher bumps with an analytic gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import MAX_FIELD_AMPLITUDE
from .densities import ModelDensity
from .errors import DegenerateError, RangeError
from .functionals import DensityFunction, GridFunction, constraint_scale
from .geometry import DiskGrid, RadialGrid

MAX_BUMPS = 5
MAX_REDRAWS = 20


def experiment_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(index)])


def cutoff(r: np.ndarray, R: float) -> np.ndarray:
    return np.clip(1.0 - (r / R) ** 2, 0.0, None) ** 2


def _clamp(values: np.ndarray) -> np.ndarray:
    peak = float(np.max(np.abs(values)))
    if peak > MAX_FIELD_AMPLITUDE:
        values = values * (MAX_FIELD_AMPLITUDE / peak)
    return values


def _bump_parameters(rng: np.random.Generator, R: float, count: int | None, amplitude: float):
    count = int(rng.integers(2, MAX_BUMPS + 1)) if count is None else count
    amplitudes = rng.uniform(0.2 * amplitude, amplitude, count) * rng.choice([-1.0, 1.0], count)
    # one bump of each sign, so the field changes sign and admits a constraint scaling
    if count >= 2:
        amplitudes[0], amplitudes[1] = abs(amplitudes[0]), -abs(amplitudes[1])
    widths = R * rng.uniform(0.15, 0.4, count)
    return count, amplitudes, widths


def bump_field(
    grid: DiskGrid,
    rng: np.random.Generator,
    count: int | None = None,
    amplitude: float = 2.0,
) -> GridFunction:
    count, amplitudes, widths = _bump_parameters(rng, grid.R, count, amplitude)
    radii = 0.6 * grid.R * np.sqrt(rng.uniform(0.0, 1.0, count))
    angles = rng.uniform(0.0, 2.0 * np.pi, count)
    values = np.zeros(grid.shape)
    for a, s, rc, ac in zip(amplitudes, widths, radii, angles):
        distance2 = (grid.x - rc * np.cos(ac)) ** 2 + (grid.y - rc * np.sin(ac)) ** 2
        values += a * np.exp(-distance2 / (2.0 * s**2))
    return GridFunction(grid, _clamp(values * cutoff(grid.radius, grid.R)))


def radial_bump_field(
    grid: RadialGrid,
    rng: np.random.Generator,
    count: int | None = None,
    amplitude: float = 2.0,
) -> GridFunction:
    count, amplitudes, widths = _bump_parameters(rng, grid.R, count, amplitude)
    centres = 0.6 * grid.R * rng.uniform(0.0, 1.0, count)
    r = grid.radius
    values = np.zeros(grid.shape)
    for a, s, c in zip(amplitudes, widths, centres):
        values += a * np.exp(-((r - c) ** 2) / (2.0 * s**2))
    return GridFunction(grid, _clamp(values * cutoff(r, grid.R)))


def random_field(grid, rng: np.random.Generator, **kwargs) -> GridFunction:
    if isinstance(grid, DiskGrid):
        return bump_field(grid, rng, **kwargs)
    return radial_bump_field(grid, rng, **kwargs)


def admissible_field(grid, rng: np.random.Generator, d: ModelDensity, **kwargs) -> GridFunction:
    """A random field scaled onto int_{B_R} e^u d mu_n = theta_R, redrawing when no scaling exists."""
    last: Exception | None = None
    for _ in range(MAX_REDRAWS):
        try:
            u = constraint_scale(random_field(grid, rng, **kwargs), grid.R, d)
        except (DegenerateError, RangeError) as exc:
            last = exc
            continue
        peak = float(np.max(np.abs(u.values)))
        if peak <= MAX_FIELD_AMPLITUDE:
            return u
        last = RangeError(f"scaled amplitude {peak:.3g} exceeds {MAX_FIELD_AMPLITUDE:g}")
    raise RangeError(f"No admissible field after {MAX_REDRAWS} draws: {last}")


def random_density(grid, rng: np.random.Generator, floor: float = 0.05) -> DensityFunction:
    count = int(rng.integers(1, MAX_BUMPS + 1))
    weights = rng.uniform(0.2, 1.0, count)
    widths = grid.R * rng.uniform(0.1, 0.5, count)
    values = np.full(grid.shape, floor)
    if isinstance(grid, DiskGrid):
        radii = 0.8 * grid.R * np.sqrt(rng.uniform(0.0, 1.0, count))
        angles = rng.uniform(0.0, 2.0 * np.pi, count)
        for w, s, rc, ac in zip(weights, widths, radii, angles):
            distance2 = (grid.x - rc * np.cos(ac)) ** 2 + (grid.y - rc * np.sin(ac)) ** 2
            values += w * np.exp(-distance2 / (2.0 * s**2))
    else:
        centres = grid.R * rng.uniform(0.0, 1.0, count)
        for w, s, c in zip(weights, widths, centres):
            values += w * np.exp(-((grid.radius - c) ** 2) / (2.0 * s**2))
    return DensityFunction(grid, values)


@dataclass(frozen=True, eq=False)
class SphereBumps:
    """u(p) = sum_i a_i exp(kappa_i (p . c_i - 1)) on the unit sphere."""

    amplitudes: np.ndarray
    kappas: np.ndarray
    centres: np.ndarray

    def _terms(self, points: np.ndarray) -> np.ndarray:
        return self.amplitudes * np.exp(self.kappas * (points @ self.centres.T - 1.0))

    def values(self, points: np.ndarray) -> np.ndarray:
        return np.sum(self._terms(np.asarray(points, dtype=float)), axis=-1)

    def gradient(self, points: np.ndarray) -> np.ndarray:
        terms = self._terms(np.asarray(points, dtype=float)) * self.kappas
        return terms @ self.centres


@dataclass(frozen=True, eq=False)
class SphereLinear:
    """u(p) = v . p, a first-degree spherical harmonic."""

    vector: np.ndarray

    def values(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.vector

    def gradient(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return np.broadcast_to(self.vector, points.shape).copy()


def random_sphere_bumps(
    rng: np.random.Generator, count: int | None = None, amplitude: float = 1.5
) -> SphereBumps:
    count = int(rng.integers(1, MAX_BUMPS + 1)) if count is None else count
    centres = rng.normal(size=(count, 3))
    centres /= np.linalg.norm(centres, axis=1, keepdims=True)
    return SphereBumps(
        amplitudes=rng.uniform(-amplitude, amplitude, count),
        kappas=rng.uniform(0.5, 3.0, count),
        centres=centres,
    )
