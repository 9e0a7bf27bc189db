from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List

import numpy as np
from scipy import optimize

from .densities import IdentityRow, ModelDensity, moment_integrals, theta
from .errors import ConstraintError, DegenerateError, DomainError
from .functionals import (
    DensityFunction,
    GridFunction,
    exp_constraint_residual,
    free_energy_nd,
    model_density,
    onofri_energy_2d,
    onofri_energy_nd,
    scale_factor,
)
from .geometry import radial_grid

MASS_RTOL = 1e-8
SWEEP_POINTS = 1000


@dataclass(frozen=True)
class DualityReport:
    n: int
    R: float
    I_value: float
    J_value: float
    J_mu: float
    gap: float
    exp_residual: float
    mass_residual: float
    scale: float

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def duality_gap(
    u_raw: GridFunction, rho_raw: DensityFunction, R: float, d: ModelDensity
) -> DualityReport:
    """I_R(u) - (J_R(rho) - J_R(mu_n)) after projecting both arguments onto their constraints."""
    grid = u_raw.grid
    if rho_raw.grid is not grid:
        raise ConstraintError("u and rho must be sampled on the same grid")
    if rho_raw.mass <= 0:
        raise DegenerateError("rho vanishes identically")
    mu = model_density(grid, d)
    if np.any(u_raw.values != 0.0):
        scale = scale_factor(u_raw, R, d)
        u = u_raw.scaled(scale)
    else:
        u, scale = u_raw, 1.0
    rho = rho_raw.rescaled(mu.mass)
    if d.n == 2:
        I_value = onofri_energy_2d(u, R)
    else:
        I_value = onofri_energy_nd(u, R, d)
    J_value = free_energy_nd(rho, R, d)
    J_mu = free_energy_nd(mu, R, d)
    target = theta(R, d)
    return DualityReport(
        n=d.n,
        R=R,
        I_value=I_value,
        J_value=J_value,
        J_mu=J_mu,
        gap=I_value - (J_value - J_mu),
        exp_residual=exp_constraint_residual(u, R, d),
        mass_residual=abs(rho.mass - target),
        scale=scale,
    )


def _check_mass(rho: DensityFunction, R: float, d: ModelDensity) -> None:
    target = theta(R, d)
    if abs(rho.mass - target) > MASS_RTOL * target:
        raise ConstraintError(
            f"rho must have mass theta_R = {target:.12g}, got {rho.mass:.12g}; rescale it first"
        )


def objective_coefficients(rho: DensityFunction, R: float, d: ModelDensity) -> tuple[float, float]:
    """The linear and power coefficients of G_rho(eps) = eps A - eps^m B."""
    n, m = d.n, d.m
    grid = rho.grid
    root = grid.integrate(rho.values ** (1.0 / m))
    moment = grid.integrate(grid.radius**m * rho.values)
    A = n**2 * m * root - n ** (1.0 + 1.0 / m) * m * d.omega ** (1.0 / n) * theta(R, d)
    B = n / m * moment
    return float(A), float(B)


def epsilon_objective(rho: DensityFunction, eps: float, R: float, d: ModelDensity) -> float:
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")
    _check_mass(rho, R, d)
    A, B = objective_coefficients(rho, R, d)
    return float(eps * A - eps**d.m * B)


def _stationary_point(A: float, B: float, m: float) -> float:
    if B <= 0:
        raise DegenerateError("B_rho vanishes: rho is concentrated at the origin")
    if A <= 0:
        return 0.0
    return float((A / (m * B)) ** (1.0 / (m - 1.0)))


def epsilon_max(rho: DensityFunction, R: float, d: ModelDensity) -> float:
    """Stationary point of G_rho; 0.0 when A_rho <= 0 and the supremum sits at eps -> 0."""
    _check_mass(rho, R, d)
    A, B = objective_coefficients(rho, R, d)
    return _stationary_point(A, B, d.m)


def epsilon_max_mu(d: ModelDensity) -> float:
    return float((d.n ** (1.0 / d.m) * d.m * d.omega ** (1.0 / d.n)) ** (d.n - 1))


@dataclass(frozen=True)
class EpsilonSweep:
    label: str
    n: int
    R: float
    A: float
    B: float
    epsilons: np.ndarray
    values: np.ndarray
    eps_max: float
    eps_argmax: float
    peak: float
    stationarity: float
    warnings: List[str] = field(default_factory=list)

    @property
    def peak_dominates(self) -> bool:
        return bool(np.all(self.values <= self.peak + 1e-10 * max(1.0, abs(self.peak))))

    @property
    def relative_argmax_error(self) -> float:
        if self.eps_max == 0.0:
            return 0.0
        return abs(self.eps_argmax - self.eps_max) / self.eps_max

    def to_dict(self) -> Dict[str, Any]:
        return {
            "label": self.label,
            "n": self.n,
            "R": self.R,
            "A": self.A,
            "B": self.B,
            "eps_max": self.eps_max,
            "eps_argmax": self.eps_argmax,
            "peak": self.peak,
            "stationarity": self.stationarity,
            "warnings": list(self.warnings),
        }


def epsilon_sweep(
    rho: DensityFunction,
    R: float,
    d: ModelDensity,
    label: str = "rho",
    points: int = SWEEP_POINTS,
) -> EpsilonSweep:
    _check_mass(rho, R, d)
    A, B = objective_coefficients(rho, R, d)
    m = d.m
    eps_max = _stationary_point(A, B, m)

    def objective(eps):
        return eps * A - np.power(eps, m) * B

    warnings: List[str] = []
    if eps_max == 0.0:
        warnings.append(
            f"A_rho = {A:.6g} <= 0: G_rho has no positive interior maximum; its supremum is 0 at eps -> 0"
        )
        upper = 1.0
    else:
        upper = 3.0 * eps_max
    epsilons = np.linspace(upper / points, upper, points)
    values = objective(epsilons)
    if eps_max == 0.0:
        return EpsilonSweep(label, d.n, R, A, B, epsilons, values, 0.0, 0.0, 0.0, A, warnings)

    best = int(np.argmax(values))
    lower = epsilons[max(best - 1, 0)] if best > 0 else 0.0
    bracket_upper = epsilons[min(best + 1, points - 1)]
    found = optimize.minimize_scalar(
        lambda eps: -objective(eps),
        bounds=(lower, bracket_upper),
        method="bounded",
        options={"xatol": 1e-10 * eps_max},
    )
    step = 1e-4 * eps_max
    slope = (objective(eps_max + step) - objective(eps_max - step)) / (2.0 * step)
    return EpsilonSweep(
        label=label,
        n=d.n,
        R=R,
        A=A,
        B=B,
        epsilons=epsilons,
        values=values,
        eps_max=eps_max,
        eps_argmax=float(found.x),
        peak=float(objective(eps_max)),
        stationarity=float(slope),
        warnings=warnings,
    )


def peak_value(rho: DensityFunction, R: float, d: ModelDensity) -> tuple[float, float]:
    """G_rho(eps_max) evaluated directly and through A^n / (n (m B)^(n-1))."""
    eps = epsilon_max(rho, R, d)
    A, B = objective_coefficients(rho, R, d)
    direct = eps * A - eps**d.m * B
    closed = A**d.n / (d.n * (d.m * B) ** (d.n - 1)) if A > 0 else 0.0
    return float(direct), float(closed)


def peak_value_audit(d: ModelDensity, R: float, grid=None) -> List[IdentityRow]:
    """Rows auditing G_mu(eps_max); the printed simplification is reported, not enforced."""
    grid = grid or radial_grid(d.n, R)
    mu = model_density(grid, d)
    direct, closed = peak_value(mu, R, d)
    n, m, omega = d.n, d.m, d.omega
    power = grid.integrate(np.abs(d.dlog(grid.radius)) ** n)
    root = grid.integrate(mu.values ** (1.0 / m))
    printed = m * n * (root - (omega / n) ** (1.0 / n) * theta(R, d))
    return [
        IdentityRow("peak_closed_form", n, R, direct, closed),
        IdentityRow("peak_gradient_power", n, R, direct, float(power)),
        IdentityRow("peak_printed_simplification", n, R, direct, float(printed)),
    ]


def basic_identity_suite(d: ModelDensity, R: float, resolution: int = 128) -> List[IdentityRow]:
    if not R > 0:
        raise DomainError(f"Radius must be positive, got {R}")
    n, m, omega = d.n, d.m, d.omega
    eps = epsilon_max_mu(d)
    q = moment_integrals(R, d, resolution)
    return [
        IdentityRow("eps_alpha", n, R, n**2 * m * eps / d.beta, d.alpha),
        IdentityRow("eps_power_beta", n, R, n * eps**m / (m * d.beta), 1.0),
        IdentityRow(
            "eps_constant",
            n,
            R,
            n ** (1.0 + 1.0 / m) * m * omega ** (1.0 / n) * eps,
            m**n * n**n * omega,
        ),
        IdentityRow(
            "gradient_moment",
            n,
            R,
            q["gradient_power"],
            n ** (n - 1) * m**n * omega * q["moment"],
        ),
        IdentityRow(
            "theta_moment",
            n,
            R,
            theta(R, d),
            (n / omega) ** (1.0 / n) * q["root"] - q["moment"],
        ),
    ]


CONSTANT_IDENTITIES = ("eps_alpha", "eps_power_beta", "eps_constant")
