"""The reference densities mu_n and the closed-form identities around them.

    mu_n(y) = n / (omega_n (1 + |y|^m)^n),    m = n / (n - 1)

For v = log mu_n as a function of r = |y|:

    v'(r)  = -n m r^(m-1) / (1 + r^m)
    v''(r) = -n m r^(m-2) (m - 1 - r^m) / (1 + r^m)^2
    v'' + v'/r = -n m^2 r^(m-2) / (1 + r^m)^2

and since (m - 1)(n - 1) = 1 the radial n-Laplacian
(n - 1)|v'|^(n-2)(v'' + v'/r) collapses to -n (n m)^(n-1) / (1 + r^m)^n,
which is -(n m)^(n-1) omega_n mu_n. The constant matches the one used in
the n-dimensional duality argument.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np

from .errors import DomainError, GridError
from .geometry import DiskGrid, RadialGrid, integrate_radial, radial_grid, sphere_area

MIN_IDENTITY_RESOLUTION = 32


@dataclass(frozen=True)
class ModelDensity:
    n: int
    m: float = field(init=False)
    omega: float = field(init=False)
    alpha: float = field(init=False)
    beta: float = field(init=False)

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < 2:
            raise DomainError(f"Dimension must be an integer >= 2, got {self.n}")
        n = int(self.n)
        m = n / (n - 1)
        omega = sphere_area(n)
        alpha = m * (n / omega) ** (1.0 / n)
        beta = m ** (n - 1) * n**n * omega
        # beta recomputed through the peak of the epsilon objective
        eps_max = (n ** (1.0 / m) * m * omega ** (1.0 / n)) ** (n - 1)
        if abs(n**2 * m * eps_max / alpha - beta) > 1e-12 * beta:
            raise DomainError(f"Inconsistent constants for n={n}: alpha={alpha}, beta={beta}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    def profile(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return self.n / (self.omega * (1.0 + r**self.m) ** self.n)

    def dlog(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return -self.n * self.m * r ** (self.m - 1.0) / (1.0 + r**self.m)

    def d2log(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        rm = r**self.m
        return -self.n * self.m * r ** (self.m - 2.0) * (self.m - 1.0 - rm) / (1.0 + rm) ** 2

    def boundary_value(self, R: float) -> float:
        return float(self.profile(R))


def mu(x, d: ModelDensity) -> np.ndarray:
    """Density at points x with the coordinates on the last axis."""
    x = np.asarray(x, dtype=float)
    return d.profile(np.linalg.norm(x, axis=-1))


def theta(R: float, d: ModelDensity) -> float:
    """Mass of mu_n on the ball of radius R."""
    if not R > 0:
        raise DomainError(f"Radius must be positive, got {R}")
    return float(R**d.n / (1.0 + R**d.m) ** (d.n - 1))


def grad_log_mu(x, d: ModelDensity) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1, keepdims=True)
    safe = np.where(r > 0, r, 1.0)
    scale = np.where(r > 0, d.dlog(safe) / safe, 0.0)
    return scale * x


@dataclass(frozen=True)
class IdentityResidual:
    name: str
    n: int
    R: float
    method: str
    residual: float
    nodes: int


@dataclass(frozen=True)
class IdentityRow:
    identity: str
    n: int
    R: float
    lhs: float
    rhs: float

    @property
    def abs_error(self) -> float:
        return abs(self.lhs - self.rhs)


def identity_laplacian_2d(grid: DiskGrid, method: str = "stencil") -> IdentityResidual:
    """Sup over interior nodes of |laplacian(log mu_2) + 8 pi mu_2|."""
    if min(grid.shape[0] - 1, grid.shape[1]) < MIN_IDENTITY_RESOLUTION:
        raise GridError(
            f"Identity check needs at least {MIN_IDENTITY_RESOLUTION}x{MIN_IDENTITY_RESOLUTION} nodes"
        )
    d = ModelDensity(2)
    r = grid.radius
    if method == "stencil":
        laplacian = grid.laplacian(np.log(d.profile(r)))
    elif method == "analytic":
        laplacian = d.d2log(r) + d.dlog(r) / r
    else:
        raise ValueError(f"Unknown method: {method}")
    residual = np.abs(laplacian + 8.0 * np.pi * d.profile(r))[:-1]
    return IdentityResidual(
        name="laplacian_log_mu_2d",
        n=2,
        R=grid.R,
        method=method,
        residual=float(residual.max()),
        nodes=int(grid.shape[0] - 1),
    )


def identity_nlaplacian(
    d: ModelDensity, grid: RadialGrid, method: str = "analytic"
) -> IdentityResidual:
    r = grid.nodes
    target = -((d.n * d.m) ** (d.n - 1)) * d.omega * d.profile(r)
    if method == "analytic":
        slope = d.dlog(r)
        value = (d.n - 1) * np.abs(slope) ** (d.n - 2) * (d.d2log(r) + slope / r)
    elif method == "stencil":
        ring = grid.radius
        slope = d.dlog(ring)
        flux = ring ** (d.n - 1) * np.abs(slope) ** (d.n - 2) * slope
        value = (grid.derivative_matrix @ flux)[:-1] / r ** (d.n - 1)
    else:
        raise ValueError(f"Unknown method: {method}")
    return IdentityResidual(
        name="n_laplacian_log_mu",
        n=d.n,
        R=grid.R,
        method=method,
        residual=float(np.max(np.abs(value - target))),
        nodes=grid.size,
    )


def moment_integrals(R: float, d: ModelDensity, resolution: int = 128) -> dict:
    """Quadrature values of the integrals that appear in the identities."""
    grid = radial_grid(d.n, R, resolution)
    return {
        "mass": integrate_radial(d.profile, grid),
        "root": integrate_radial(lambda r: d.profile(r) ** (1.0 / d.m), grid),
        "moment": integrate_radial(lambda r: r**d.m * d.profile(r), grid),
        "gradient_power": integrate_radial(lambda r: np.abs(d.dlog(r)) ** d.n, grid),
    }


def free_energy_mu(R: float, d: ModelDensity) -> float:
    """J_R(mu_n) in closed form for n = 2, through the moment relation otherwise."""
    if d.n == 2:
        return float(np.log1p(R**2) + R**2 / (1.0 + R**2))
    integrals = moment_integrals(R, d)
    scale = d.m**d.n * d.n**d.n * d.omega
    return (integrals["gradient_power"] + scale * theta(R, d)) / d.beta


def closed_form_suite(R: float, d: ModelDensity, resolution: int = 128) -> List[IdentityRow]:
    if not R > 0:
        raise DomainError(f"Radius must be positive, got {R}")
    n, m, omega = d.n, d.m, d.omega
    th = theta(R, d)
    q = moment_integrals(R, d, resolution)
    rows = [
        IdentityRow("theta_mass", n, R, q["mass"], th),
        IdentityRow(
            "moment_relation",
            n,
            R,
            q["moment"],
            (n / omega) ** (1.0 / n) * q["root"] - th,
        ),
        IdentityRow(
            "gradient_power",
            n,
            R,
            q["gradient_power"],
            n ** (n - 1) * m**n * omega * q["moment"],
        ),
        IdentityRow(
            "free_energy_mu",
            n,
            R,
            d.alpha * q["root"] - q["moment"],
            free_energy_mu(R, d),
        ),
    ]
    if n == 2:
        rows.append(
            IdentityRow("sqrt_mu_integral", n, R, q["root"], np.sqrt(np.pi) * np.log1p(R**2))
        )
        rows.append(
            IdentityRow(
                "gradient_square_2d",
                n,
                R,
                q["gradient_power"],
                16.0 * np.sqrt(np.pi) * q["root"] - 16.0 * np.pi * th,
            )
        )
    return rows
