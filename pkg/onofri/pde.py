"""Rescaled fast diffusion on B_R and constrained minimisation of I_R in the plane.

The flow d_t rho = (1/(2 sqrt(pi))) lap(sqrt(rho)) + div(x rho) is written as
d_t rho = div(rho grad psi) with psi = r^2/2 - 1/(2 sqrt(pi) sqrt(rho)) and
discretised by finite volumes on uniform radial cells. Interface fluxes use an
upwind mobility and the difference of psi, and both boundary fluxes are zero,
so mass is conserved by telescoping and any state with constant psi (the
profile 1/(pi (lambda + r^2)^2)) is exactly stationary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, List, Union

import numpy as np
from scipy import linalg, optimize, special

from .constants import DENSITY_FLOOR
from .densities import ModelDensity, theta
from .errors import ConstraintError, ConvergenceError, DomainError, GridError, StabilityError
from .functionals import DensityFunction, GridFunction, constraint_scale, onofri_energy_2d
from .geometry import DiskGrid, RadialGrid
from .transport import radial_profile

DIFFUSION = 1.0 / (2.0 * math.sqrt(math.pi))
CFL_SAFETY = 0.45
EXPLICIT_STEP_BUDGET = 100_000
MASS_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class FVCells:
    R: float
    count: int

    def __post_init__(self) -> None:
        if not self.R > 0:
            raise DomainError(f"Radius must be positive, got {self.R}")
        if self.count < 4:
            raise GridError(f"Need at least 4 cells, got {self.count}")

    @property
    def width(self) -> float:
        return self.R / self.count

    @cached_property
    def edges(self) -> np.ndarray:
        return np.linspace(0.0, self.R, self.count + 1)

    @cached_property
    def centres(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @cached_property
    def volumes(self) -> np.ndarray:
        return np.pi * np.diff(self.edges**2)

    @cached_property
    def areas(self) -> np.ndarray:
        """Interface areas between neighbouring cells, excluding r = 0 and r = R."""
        return 2.0 * np.pi * self.edges[1:-1]

    def mass(self, values: np.ndarray) -> float:
        return float(np.dot(self.volumes, values))


def fv_cells(R: float, count: int = 128) -> FVCells:
    return FVCells(R=float(R), count=int(count))


@dataclass(frozen=True, eq=False)
class EvolutionState:
    cells: FVCells
    values: np.ndarray
    t: float
    initial_mass: float

    @property
    def mass(self) -> float:
        return self.cells.mass(self.values)


def initial_state(cells: FVCells, values: np.ndarray) -> EvolutionState:
    values = np.asarray(values, dtype=float)
    if values.shape != (cells.count,):
        raise GridError(f"Expected {cells.count} cell values, got shape {values.shape}")
    if np.any(~(values >= 0.0)):
        raise DomainError("Initial density must be nonnegative")
    return EvolutionState(cells, values.copy(), 0.0, cells.mass(values))


def potential(cells: FVCells, values: np.ndarray, diffusion: bool = True) -> np.ndarray:
    psi = 0.5 * cells.centres**2
    if diffusion:
        psi = psi - DIFFUSION / np.sqrt(np.maximum(values, DENSITY_FLOOR))
    return psi


def free_energy_cells(cells: FVCells, values: np.ndarray) -> float:
    """J_R of a cell density: (2/sqrt(pi)) int sqrt(rho) - int r^2 rho."""
    root = np.dot(cells.volumes, np.sqrt(values))
    moment = np.dot(cells.volumes, cells.centres**2 * values)
    return float(2.0 / math.sqrt(math.pi) * root - moment)


def _transmissibility(cells: FVCells, values: np.ndarray, psi: np.ndarray) -> np.ndarray:
    # mass moves from higher to lower psi; take the mobility from the upwind cell
    drop = np.diff(psi)
    upwind = np.where(drop < 0.0, values[:-1], values[1:])
    return cells.areas * upwind / cells.width


def _explicit_rate(cells: FVCells, values: np.ndarray, diffusion: bool) -> np.ndarray:
    psi = potential(cells, values, diffusion)
    flux = -_transmissibility(cells, values, psi) * np.diff(psi)
    inflow = np.concatenate(([0.0], flux))
    outflow = np.concatenate((flux, [0.0]))
    return (inflow - outflow) / cells.volumes


def stable_dt(state: EvolutionState, diffusion: bool = True) -> float:
    """CFL bound of the explicit scheme from the drift speed and max 1/sqrt(rho)."""
    h = state.cells.width
    bound = h / state.cells.R
    if diffusion:
        low = max(float(np.min(state.values)), DENSITY_FLOOR)
        bound = min(bound, h**2 * 2.0 * math.sqrt(math.pi) * math.sqrt(low))
    return CFL_SAFETY * bound


def _semi_implicit_increment(
    cells: FVCells, values: np.ndarray, dt: float, diffusion: bool
) -> np.ndarray:
    psi = potential(cells, values, diffusion)
    coupling = _transmissibility(cells, values, psi)
    if diffusion:
        slope = 0.5 * DIFFUSION / np.maximum(values, DENSITY_FLOOR) ** 1.5
    else:
        slope = np.zeros_like(values)
    flux = coupling * np.diff(psi)
    rhs = np.concatenate((flux, [0.0])) - np.concatenate(([0.0], flux))
    left = np.concatenate(([0.0], coupling))
    right = np.concatenate((coupling, [0.0]))
    banded = np.zeros((3, cells.count))
    banded[1] = cells.volumes / dt + (left + right) * slope
    banded[0, 1:] = -coupling * slope[1:]
    banded[2, :-1] = -coupling * slope[:-1]
    return linalg.solve_banded((1, 1), banded, rhs)


def fd_step(
    state: EvolutionState,
    dt: float,
    scheme: str = "semi-implicit",
    diffusion: bool = True,
) -> EvolutionState:
    """One no-flux finite-volume step of the rescaled fast diffusion equation."""
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt}")
    cells = state.cells
    if scheme == "explicit":
        updated = state.values + dt * _explicit_rate(cells, state.values, diffusion)
    elif scheme == "semi-implicit":
        updated = state.values + _semi_implicit_increment(cells, state.values, dt, diffusion)
    else:
        raise ValueError(f"Unknown scheme: {scheme}")
    if np.any(~(updated >= 0.0)):
        suggested = stable_dt(state, diffusion) if scheme == "explicit" else 0.5 * dt
        raise StabilityError(
            f"Step of size {dt:g} produced a negative density at cells "
            f"{np.flatnonzero(~(updated >= 0.0)).tolist()[:10]}",
            suggested_dt=min(suggested, 0.5 * dt),
        )
    return replace(state, values=updated, t=state.t + dt)


def discrete_equilibrium(cells: FVCells, mass: float) -> np.ndarray:
    """Cell values 1/(pi (lambda + r^2)^2) with lambda fixed by the discrete mass."""
    if not mass > 0:
        raise DomainError(f"Mass must be positive, got {mass}")
    r2 = cells.centres**2

    def excess(lam: float) -> float:
        return cells.mass(1.0 / (np.pi * (lam + r2) ** 2)) - mass

    high = 1.0
    while excess(high) > 0.0:
        high *= 2.0
    low = 1.0
    while excess(low) < 0.0:
        low *= 0.5
        if low < 1e-300:
            raise ConstraintError(f"No equilibrium of mass {mass} on a ball of radius {cells.R}")
    lam = optimize.brentq(excess, low, high, xtol=1e-15, rtol=1e-15)
    return 1.0 / (np.pi * (lam + r2) ** 2)


def sampled_mu(cells: FVCells) -> np.ndarray:
    """mu_2 at the cell centres; psi is constant on it, so it is exactly stationary."""
    return ModelDensity(2).profile(cells.centres)


def discrete_theta(cells: FVCells) -> float:
    """Cell mass of sampled_mu, the discrete counterpart of theta_R."""
    return cells.mass(sampled_mu(cells))


def l1_distance(cells: FVCells, a: np.ndarray, b: np.ndarray) -> float:
    return float(np.dot(cells.volumes, np.abs(a - b)))


@dataclass(frozen=True, eq=False)
class TrajectorySummary:
    times: np.ndarray
    l1_equilibrium: np.ndarray
    l1_mu: np.ndarray
    free_energy: np.ndarray
    mass: np.ndarray
    final: EvolutionState
    steps: int
    scheme: str
    max_mass_drift: float
    max_energy_decrease: float
    timed_out: bool = False
    warnings: List[str] = field(default_factory=list)

    @property
    def final_distance(self) -> float:
        return float(self.l1_mu[-1])

    def to_rows(self) -> List[dict]:
        return [
            {"t": float(t), "L1_distance": float(d), "J_value": float(j), "mass": float(m)}
            for t, d, j, m in zip(self.times, self.l1_mu, self.free_energy, self.mass)
        ]


Initial = Union[EvolutionState, DensityFunction, np.ndarray, Callable[[np.ndarray], np.ndarray]]


def _initial_values(initial: Initial, cells: FVCells) -> np.ndarray:
    if isinstance(initial, EvolutionState):
        return np.asarray(initial.values, dtype=float)
    if isinstance(initial, DensityFunction):
        grid = initial.grid
        if not isinstance(grid, RadialGrid) or grid.n != 2:
            raise GridError("fd_evolve needs a planar radial density")
        if abs(grid.R - cells.R) > 1e-12 * cells.R:
            raise GridError(f"Density lives on radius {grid.R}, cells on {cells.R}")
        values = radial_profile(initial.values, grid).density(cells.centres)
        return np.maximum(values, 0.0)
    if callable(initial):
        return np.broadcast_to(np.asarray(initial(cells.centres), dtype=float), cells.centres.shape)
    return np.asarray(initial, dtype=float)


def fd_evolve(
    initial: Initial,
    R: float,
    t_final: float = 20.0,
    dt: float = 0.01,
    cells: int | FVCells = 128,
    scheme: str = "auto",
    record_every: int = 10,
    diffusion: bool = True,
    max_steps: int | None = None,
) -> TrajectorySummary:
    if not t_final > 0:
        raise DomainError(f"t_final must be positive, got {t_final}")
    grid = cells if isinstance(cells, FVCells) else fv_cells(R, cells)
    warnings: List[str] = []
    values = _initial_values(initial, grid)
    state = initial_state(grid, values)
    target = discrete_theta(grid)
    if abs(state.mass - target) > MASS_RTOL * target:
        if state.mass <= 0:
            raise DomainError("Initial density has zero mass")
        warnings.append(
            f"Initial mass {state.mass:.12g} differs from the cell mass of mu_2 = {target:.12g} "
            f"(theta_R = {theta(R, ModelDensity(2)):.12g}); rescaled"
        )
        state = initial_state(grid, state.values * (target / state.mass))

    if scheme == "auto":
        explicit_steps = t_final / min(dt, stable_dt(state, diffusion))
        scheme = "explicit" if explicit_steps <= EXPLICIT_STEP_BUDGET else "semi-implicit"
    equilibrium = discrete_equilibrium(grid, state.mass) if diffusion else None
    mu_cells = sampled_mu(grid)

    times, eq_dist, mu_dist, energy, masses = [], [], [], [], []

    def record(current: EvolutionState) -> None:
        times.append(current.t)
        eq_dist.append(
            l1_distance(grid, current.values, equilibrium) if equilibrium is not None else np.nan
        )
        mu_dist.append(l1_distance(grid, current.values, mu_cells))
        energy.append(free_energy_cells(grid, current.values))
        masses.append(current.mass)

    record(state)
    steps = 0
    drift = 0.0
    worst_decrease = 0.0
    timed_out = False
    previous_energy = energy[-1]
    while state.t < t_final * (1.0 - 1e-14):
        if max_steps is not None and steps >= max_steps:
            timed_out = True
            warnings.append(
                f"Step budget of {max_steps} exhausted at t={state.t:.6g}; "
                f"final L1 distance {mu_dist[-1]:.3e}"
            )
            break
        step = min(dt, t_final - state.t)
        if scheme == "explicit":
            step = min(step, stable_dt(state, diffusion))
        state = fd_step(state, step, scheme=scheme, diffusion=diffusion)
        steps += 1
        drift = max(drift, abs(state.mass - state.initial_mass))
        current_energy = free_energy_cells(grid, state.values)
        worst_decrease = max(worst_decrease, previous_energy - current_energy)
        previous_energy = current_energy
        if steps % record_every == 0:
            record(state)
    if times[-1] != state.t:
        record(state)

    return TrajectorySummary(
        times=np.array(times),
        l1_equilibrium=np.array(eq_dist),
        l1_mu=np.array(mu_dist),
        free_energy=np.array(energy),
        mass=np.array(masses),
        final=state,
        steps=steps,
        scheme=scheme,
        max_mass_drift=drift,
        max_energy_decrease=worst_decrease,
        timed_out=timed_out,
        warnings=warnings,
    )


@dataclass(frozen=True, eq=False)
class MinimizerState:
    u: GridFunction
    lam: float
    objective: float
    residual: float
    iterations: int
    converged: bool
    history: List[float] = field(default_factory=list)

    @property
    def norm(self) -> float:
        return float(np.max(np.abs(self.u.values)))

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "final_norm": self.norm,
            "lambda": self.lam,
            "residual": self.residual,
            "objective": self.objective,
            "converged": self.converged,
        }


@dataclass(frozen=True)
class MinimizerOptions:
    max_iterations: int = 500
    damping: float = 0.5
    min_damping: float = 1e-4
    tolerance: float = 1e-12


def multiplier_estimate(u: GridFunction) -> float:
    """Least-squares lambda for (1/8pi) lap u + lambda mu e^u = mu off the ring."""
    grid = u.grid
    mu = ModelDensity(2).profile(grid.radius)
    source = mu * np.exp(u.values)
    target = mu - grid.laplacian(u.values) / (8.0 * np.pi)
    weights = grid.field_weights
    return float(np.sum(weights * source * target) / np.sum(weights * source * source))


def euler_lagrange_residual(u: GridFunction, lam: float, R: float | None = None) -> float:
    grid = u.grid
    if not isinstance(grid, DiskGrid):
        raise GridError("The Euler-Lagrange residual is defined on planar disk grids")
    if R is not None and abs(grid.R - R) > 1e-12 * max(1.0, R):
        raise GridError(f"Grid radius {grid.R} does not match R={R}")
    if not u.zero_trace:
        raise ConstraintError("u must vanish on the boundary ring")
    mu = ModelDensity(2).profile(grid.radius)
    laplacian = grid.laplacian(u.values)
    residual = laplacian / (8.0 * np.pi) + lam * mu * np.exp(u.values) - mu
    # the origin is not a node: ring means of u and lap u are even in r, mu(0) = 1/pi
    u0 = _origin_limit(grid, u.values)
    lap0 = _origin_limit(grid, laplacian)
    origin = lap0 / (8.0 * np.pi) + (lam * np.exp(u0) - 1.0) / np.pi
    return max(float(np.max(np.abs(residual[:-1]))), abs(origin))


def _origin_limit(grid: DiskGrid, values: np.ndarray) -> float:
    """Value at r = 0 from the two innermost ring means, linear in r^2."""
    inner, outer = np.mean(values[0]), np.mean(values[1])
    s0, s1 = grid.nodes[0] ** 2, grid.nodes[1] ** 2
    return float((s1 * inner - s0 * outer) / (s1 - s0))


def _log_exp_mass(values: np.ndarray, weights: np.ndarray) -> float:
    return float(special.logsumexp(values, b=weights))


def minimize_onofri(
    R: float,
    d: ModelDensity,
    init: GridFunction,
    opts: MinimizerOptions | None = None,
) -> MinimizerState:
    """Damped multiplier iteration for min I_R(u) subject to int e^u d mu_2 = theta_R."""
    opts = opts or MinimizerOptions()
    if d.n != 2:
        raise DomainError("Minimisation is implemented for n = 2 only")
    grid = init.grid
    if not isinstance(grid, DiskGrid):
        raise GridError("minimize_onofri needs a disk grid")
    if not init.zero_trace:
        raise ConstraintError("init must vanish on the boundary ring")

    mu = d.profile(grid.radius)
    weights = grid.field_weights * mu
    log_target = math.log(float(np.sum(weights)))
    u = constraint_scale(init, R, d) if np.any(init.values != 0.0) else init
    objective = onofri_energy_2d(u, R)
    history = [objective]

    lam = multiplier_estimate(u)
    residual = euler_lagrange_residual(u, lam)
    if residual < opts.tolerance:
        return MinimizerState(u, lam, objective, residual, 0, True, history)

    base = grid.solve_poisson(8.0 * np.pi * mu)
    converged = False
    iterations = 0
    for iterations in range(1, opts.max_iterations + 1):
        response = grid.solve_poisson(8.0 * np.pi * mu * np.exp(u.values))
        tau = opts.damping
        accepted = None
        while tau >= opts.min_damping:
            anchor = (1.0 - tau) * u.values + tau * base

            def excess(level: float) -> float:
                return _log_exp_mass(anchor - tau * level * response, weights) - log_target

            low, high = 0.0, 2.0
            while excess(low) > 0.0:
                low -= 2.0
            while excess(high) < 0.0:
                high *= 2.0
            level = optimize.brentq(excess, low, high, xtol=1e-15, rtol=1e-15)
            candidate = GridFunction(grid, anchor - tau * level * response)
            value = onofri_energy_2d(candidate, R)
            if value <= objective + 1e-14 * max(1.0, abs(objective)):
                accepted = candidate
                break
            tau *= 0.5
        if accepted is None:
            if abs(objective) < 1e-10:
                converged = True
                break
            state = MinimizerState(
                u, multiplier_estimate(u), objective, euler_lagrange_residual(u, lam), iterations, False, history
            )
            raise ConvergenceError(
                f"Line search failed at iteration {iterations} (I_R = {objective:.6g})", state=state
            )
        decrease = objective - value
        u, objective = accepted, value
        history.append(objective)
        if decrease < opts.tolerance:
            converged = True
            break

    lam = multiplier_estimate(u)
    return MinimizerState(
        u=u,
        lam=lam,
        objective=objective,
        residual=euler_lagrange_residual(u, lam),
        iterations=iterations,
        converged=converged,
        history=history,
    )
