"""One suite per subcommand: run the checks, then hand everything to a ReportWriter."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Sequence, Tuple

import numpy as np

from . import excel, plots
from .config import ExperimentConfig
from .densities import (
    ModelDensity,
    closed_form_suite,
    free_energy_mu,
    identity_laplacian_2d,
    identity_nlaplacian,
    theta,
)
from .duality import (
    CONSTANT_IDENTITIES,
    EpsilonSweep,
    basic_identity_suite,
    duality_gap,
    epsilon_max_mu,
    epsilon_sweep,
    peak_value_audit,
)
from .errors import ConvergenceError
from .fields import (
    admissible_field,
    experiment_rng,
    random_density,
    random_field,
    random_sphere_bumps,
)
from .functionals import (
    DensityFunction,
    GridFunction,
    SphereField,
    corollary_candidate,
    corollary_check,
    corollary_extremal,
    model_density,
    onofri_deficit_2d,
    onofri_deficit_nd,
    sphere_onofri,
    stated_corollary_sides,
    stereographic_deficit,
)
from .geometry import disk_grid, radial_grid, sphere_grid, stereographic_disk_grid
from .pde import (
    TrajectorySummary,
    discrete_theta,
    fd_evolve,
    fv_cells,
    l1_distance,
    minimize_onofri,
    sampled_mu,
)
from .report import CheckRow, ReportWriter, equality, failed, inequality
from .transport import lemma1_check, monge_ampere_residual, radial_brenier
from .validate import ValidationError, ValidationResult, validate_experiment

FREE_ENERGY_PROBE_RADIUS = 100.0
FREE_ENERGY_PROBE_FLOOR = 9.0
STATIONARY_DISTANCE = 1e-6
ENERGY_SLACK = 1e-6
SHIFT_TOL = 1e-10
DEFICIT_AGREEMENT = 1e-10
ZERO_DEFICIT = 1e-12
EQUALITY_SLACK = 1e-8
TRAJECTORY_FIELDS = ["t", "L1_distance", "J_value", "mass"]
DEFICIT_FIELDS = ["seed", "trial", "n", "R", "deficit"]


@dataclass
class SuiteResult:
    command: str
    rows: List[CheckRow] = field(default_factory=list)
    records: List[Dict[str, Any]] = field(default_factory=list)
    tables: Dict[str, Tuple[List[str], List[Dict[str, Any]]]] = field(default_factory=dict)
    sweeps: List[EpsilonSweep] = field(default_factory=list)
    trajectories: List[Tuple[float, TrajectorySummary]] = field(default_factory=list)
    deficits: List[float] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    @property
    def failures(self) -> List[CheckRow]:
        return failed(self.rows)


def _grid(config: ExperimentConfig, R: float):
    if config.n == 2:
        return disk_grid(R, config.resolution, config.angular_resolution)
    return radial_grid(config.n, R, config.resolution)


def identities_suite(config: ExperimentConfig) -> SuiteResult:
    result = SuiteResult("identities")
    d = ModelDensity(config.n)
    n, seed = d.n, config.seed
    tol = config.tolerance("identity")
    for R in config.R:
        for item in closed_form_suite(R, d, config.resolution):
            result.rows.append(equality(item.identity, n, R, item.lhs, item.rhs, tol, seed, relative=True))
        for item in basic_identity_suite(d, R, config.resolution):
            key = "constant" if item.identity in CONSTANT_IDENTITIES else "identity"
            result.rows.append(
                equality(item.identity, n, R, item.lhs, item.rhs, config.tolerance(key), seed, relative=True)
            )

        grid = radial_grid(n, R, config.resolution)
        analytic = identity_nlaplacian(d, grid, "analytic")
        result.rows.append(equality("n_laplacian_log_mu", n, R, analytic.residual, 0.0, tol, seed))
        stencil = identity_nlaplacian(d, grid, "stencil")
        result.records.append({"check": stencil.name, "method": "stencil", "n": n, "R": R, "residual": stencil.residual})
        if n == 2:
            disk = disk_grid(R, config.resolution, config.angular_resolution)
            exact = identity_laplacian_2d(disk, "analytic")
            result.rows.append(equality("laplacian_log_mu_2d", n, R, exact.residual, 0.0, tol, seed))
            discrete = identity_laplacian_2d(disk, "stencil")
            result.records.append(
                {"check": discrete.name, "method": "stencil", "n": n, "R": R, "residual": discrete.residual}
            )

        for item in peak_value_audit(d, R, grid):
            if item.identity == "peak_printed_simplification":
                # documented mismatch, reported only
                result.records.append(
                    {"check": item.identity, "n": n, "R": R, "lhs": item.lhs, "rhs": item.rhs, "enforced": False}
                )
                continue
            result.rows.append(equality(item.identity, n, R, item.lhs, item.rhs, tol, seed, relative=True))

    result.records.append(
        {"check": "theta_limit", "n": n, "R": config.large_radius, "theta": theta(config.large_radius, d)}
    )
    if n == 2:
        result.rows.append(
            inequality(
                "free_energy_divergence",
                n,
                FREE_ENERGY_PROBE_RADIUS,
                free_energy_mu(FREE_ENERGY_PROBE_RADIUS, d),
                FREE_ENERGY_PROBE_FLOOR,
                0.0,
                seed,
            )
        )
    return result


def duality_suite(config: ExperimentConfig) -> SuiteResult:
    result = SuiteResult("duality")
    d = ModelDensity(config.n)
    n, seed = d.n, config.seed
    tol = config.tolerance("gap")
    for R in config.R:
        grid = _grid(config, R)
        extremal = duality_gap(GridFunction(grid, np.zeros(grid.shape)), model_density(grid, d), R, d)
        result.rows.append(equality("duality_gap_extremal", n, R, extremal.gap, 0.0, tol, seed))
        for trial in range(config.trials):
            rng = experiment_rng(seed, trial)
            u = admissible_field(grid, rng, d)
            rho = random_density(grid, rng)
            report = duality_gap(u, rho, R, d)
            result.rows.append(inequality("duality_gap", n, R, report.gap, 0.0, tol, seed))
            result.rows.append(
                equality("exp_constraint", n, R, report.exp_residual, 0.0, config.tolerance("identity"), seed)
            )
            result.rows.append(
                equality("mass_constraint", n, R, report.mass_residual, 0.0, config.tolerance("identity"), seed)
            )
            result.records.append({"seed": seed, "trial": trial, **report.to_dict()})
    return result


def deficit_suite(config: ExperimentConfig) -> SuiteResult:
    result = SuiteResult("deficit")
    d = ModelDensity(config.n)
    n, seed = d.n, config.seed
    table: List[Dict[str, Any]] = []
    for R in config.R:
        grid = _grid(config, R)
        zero = onofri_deficit_nd(GridFunction(grid, np.zeros(grid.shape)), d)
        result.rows.append(equality("deficit_zero", n, R, zero.total, 0.0, ZERO_DEFICIT, seed))
        for trial in range(config.trials):
            u = random_field(grid, experiment_rng(seed, trial))
            report = onofri_deficit_nd(u, d)
            result.rows.append(
                inequality("onofri_deficit", n, R, report.total, 0.0, config.tolerance("deficit"), seed)
            )
            if n == 2:
                planar = onofri_deficit_2d(u)
                result.rows.append(
                    equality("deficit_2d_vs_nd", n, R, planar.total, report.total, DEFICIT_AGREEMENT, seed)
                )
            result.deficits.append(report.total)
            table.append({"seed": seed, "trial": trial, "n": n, "R": R, "deficit": report.total})
            result.records.append({"seed": seed, "trial": trial, "n": n, "R": R, **report.to_dict()})
    result.tables["deficits.csv"] = (DEFICIT_FIELDS, table)
    return result


def _uniform(grid, mass: float) -> DensityFunction:
    return DensityFunction(grid, np.ones(grid.shape)).rescaled(mass)


def lemma1_suite(config: ExperimentConfig) -> SuiteResult:
    result = SuiteResult("lemma1")
    d = ModelDensity(config.n)
    n, seed = d.n, config.seed
    for R in config.R:
        grid = radial_grid(n, R, config.resolution)
        for trial in range(config.trials):
            rng = experiment_rng(seed, trial)
            rho0 = random_density(grid, rng)
            rho1 = random_density(grid, rng).rescaled(rho0.mass)
            report = lemma1_check(rho0, rho1, grid)
            result.rows.append(inequality("lemma1", n, R, report.rhs, report.lhs, config.tolerance("lemma1"), seed))
            result.warnings.extend(report.warnings)
            result.records.append(
                {
                    "seed": seed,
                    "trial": trial,
                    "n": n,
                    "R": R,
                    "lhs": report.lhs,
                    "rhs": report.rhs,
                    "slack": report.slack,
                    "monge_ampere": report.monge_ampere,
                    "pushforward_error": report.pushforward_error,
                }
            )

        same = random_density(grid, experiment_rng(seed, config.trials))
        identity = lemma1_check(same, same, grid)
        result.rows.append(equality("lemma1_equality_case", n, R, identity.slack, 0.0, EQUALITY_SLACK, seed))

        residuals = []
        for resolution in (config.resolution, 2 * config.resolution):
            fine = radial_grid(n, R, resolution)
            target = model_density(fine, d)
            transport = radial_brenier(_uniform(fine, target.mass), target, fine)
            residuals.append(monge_ampere_residual(transport))
        # second-order stencil: doubling the nodes should at least halve the residual
        result.rows.append(inequality("monge_ampere_refinement", n, R, residuals[0], 2.0 * residuals[1], 0.0, seed))
        result.records.append(
            {"check": "monge_ampere_refinement", "n": n, "R": R, "coarse": residuals[0], "fine": residuals[1]}
        )
    return result


def epsilon_suite(config: ExperimentConfig) -> SuiteResult:
    result = SuiteResult("epsilon")
    d = ModelDensity(config.n)
    n, seed = d.n, config.seed
    tol = config.tolerance("epsilon")
    closed = epsilon_max_mu(d)
    if n == 2:
        result.rows.append(
            equality("eps_max_four_root_pi", n, config.R[0], closed, 4.0 * math.sqrt(math.pi), 1e-10, seed)
        )
    for R in config.R:
        grid = radial_grid(n, R, config.resolution)
        mu = model_density(grid, d)
        sweep = epsilon_sweep(mu, R, d, label=f"mu_{n}")
        result.sweeps.append(sweep)
        result.rows.append(equality("eps_max_closed_form", n, R, sweep.eps_max, closed, tol, seed, relative=True))
        result.rows.extend(_sweep_rows(sweep, tol, seed))
        result.records.append({"seed": seed, **sweep.to_dict()})

        for trial in range(config.trials):
            rho = random_density(grid, experiment_rng(seed, trial)).rescaled(mu.mass)
            random_sweep = epsilon_sweep(rho, R, d, label=f"rho_{trial}")
            result.rows.extend(_sweep_rows(random_sweep, tol, seed))
            result.warnings.extend(random_sweep.warnings)
            result.records.append({"seed": seed, "trial": trial, **random_sweep.to_dict()})
    return result


def _sweep_rows(sweep: EpsilonSweep, tol: float, seed: int) -> List[CheckRow]:
    n, R = sweep.n, sweep.R
    peak = sweep.peak
    rows = [
        inequality("eps_peak_dominates", n, R, peak, float(np.max(sweep.values)), 1e-10 * max(1.0, abs(peak)), seed)
    ]
    if sweep.eps_max > 0:
        rows.append(equality("eps_argmax", n, R, sweep.eps_argmax, sweep.eps_max, tol, seed, relative=True))
        slope = sweep.stationarity / max(1.0, abs(sweep.A))
        rows.append(equality("eps_stationarity", n, R, slope, 0.0, tol, seed))
    return rows


def fd_evolve_suite(config: ExperimentConfig) -> SuiteResult:
    result = SuiteResult("fd-evolve")
    seed = config.seed
    for R in config.R:
        cells = fv_cells(R, config.resolution)
        mass = discrete_theta(cells)
        run = dict(R=R, t_final=config.t_final, dt=config.dt, cells=cells)

        uniform = fd_evolve(np.full(cells.count, mass / (math.pi * R**2)), **run)
        result.trajectories.append((R, uniform))
        result.warnings.extend(uniform.warnings)
        result.rows.append(
            inequality("fd_distance_to_mu", 2, R, config.tolerance("distance"), uniform.final_distance, 0.0, seed)
        )
        result.rows.append(equality("fd_mass_drift", 2, R, uniform.max_mass_drift, 0.0, config.tolerance("mass"), seed))
        result.rows.append(
            inequality("fd_free_energy_nondecreasing", 2, R, 0.0, uniform.max_energy_decrease, ENERGY_SLACK, seed)
        )
        result.tables[f"trajectory_R{R:g}.csv"] = (TRAJECTORY_FIELDS, uniform.to_rows())

        extremal = fd_evolve(sampled_mu(cells), **run)
        result.warnings.extend(extremal.warnings)
        worst = float(np.max(extremal.l1_mu))
        result.rows.append(inequality("fd_mu_stationary", 2, R, STATIONARY_DISTANCE, worst, 0.0, seed))

        ramp_values = 1.0 + cells.centres / R
        ramp = fd_evolve(ramp_values * (mass / cells.mass(ramp_values)), **run)
        result.warnings.extend(ramp.warnings)
        spread = l1_distance(cells, uniform.final.values, ramp.final.values)
        result.rows.append(equality("fd_unique_limit", 2, R, spread, 0.0, config.tolerance("distance"), seed))

        for label, summary in (("uniform", uniform), ("mu", extremal), ("ramp", ramp)):
            result.records.append(
                {
                    "seed": seed,
                    "R": R,
                    "initial": label,
                    "scheme": summary.scheme,
                    "steps": summary.steps,
                    "final_L1_mu": summary.final_distance,
                    "final_L1_equilibrium": float(summary.l1_equilibrium[-1]),
                    "max_mass_drift": summary.max_mass_drift,
                    "max_energy_decrease": summary.max_energy_decrease,
                }
            )
    return result


def minimize_suite(config: ExperimentConfig) -> SuiteResult:
    result = SuiteResult("minimize")
    d = ModelDensity(2)
    seed = config.seed
    for R in config.R:
        grid = disk_grid(R, config.resolution, config.angular_resolution)
        start = minimize_onofri(R, d, GridFunction(grid, np.zeros(grid.shape)))
        result.rows.append(equality("minimizer_zero_start", 2, R, start.iterations, 0.0, 0.0, seed))
        for trial in range(config.trials):
            init = admissible_field(grid, experiment_rng(seed, trial), d)
            try:
                state = minimize_onofri(R, d, init)
            except ConvergenceError as exc:
                result.warnings.append(f"trial {trial}, R={R:g}: {exc}")
                state = exc.state
            result.rows.extend(
                [
                    inequality("minimizer_norm", 2, R, config.tolerance("minimizer_norm"), state.norm, 0.0, seed),
                    inequality("minimizer_energy_floor", 2, R, state.objective, 0.0, config.tolerance("gap"), seed),
                    inequality("minimizer_energy_ceiling", 2, R, 1e-6, state.objective, 0.0, seed),
                    equality("minimizer_multiplier", 2, R, state.lam, 1.0, config.tolerance("multiplier"), seed),
                    inequality(
                        "minimizer_euler_lagrange", 2, R, config.tolerance("euler_lagrange"), state.residual, 0.0, seed
                    ),
                ]
            )
            result.records.append({"seed": seed, "trial": trial, "R": R, **state.to_dict()})
    return result


def corollary_suite(config: ExperimentConfig) -> SuiteResult:
    result = SuiteResult("corollary")
    d = ModelDensity(config.n)
    n, seed = d.n, config.seed
    tol = config.tolerance("corollary")
    for R in config.R:
        grid = _grid(config, R)
        for trial in range(config.trials):
            u = admissible_field(grid, experiment_rng(seed, trial), d)
            report = corollary_check(corollary_candidate(u, d), R, d)
            result.rows.append(inequality("corollary_stated", n, R, report.lhs, report.rhs, tol, seed))
            result.records.append({"seed": seed, "trial": trial, "n": n, "R": R, **report.to_dict()})

        extremal = corollary_extremal(R, d, config.resolution)
        result.rows.append(inequality("corollary_stated_extremal", n, R, extremal.lhs, extremal.rhs, tol, seed))
        result.rows.append(
            equality(
                "corollary_sharp_extremal",
                n,
                R,
                extremal.sharp_lhs,
                extremal.sharp_rhs,
                config.tolerance("sharp_corollary"),
                seed,
                relative=True,
            )
        )
        result.records.append({"check": "extremal", "n": n, "R": R, **extremal.to_dict()})
        unconstrained = stated_corollary_sides(GridFunction(grid, np.zeros(grid.shape)), R, d)
        result.records.append({"check": "unconstrained_zero", "n": n, "R": R, **unconstrained.to_dict()})
    return result


def sphere_suite(config: ExperimentConfig) -> SuiteResult:
    result = SuiteResult("sphere")
    seed = config.seed
    tol = config.tolerance("sphere")
    grid = sphere_grid(max(config.resolution // 2, 16), config.resolution)
    plane = stereographic_disk_grid(config.large_radius, config.resolution, config.angular_resolution)
    zero = SphereField(grid, np.zeros(grid.shape), np.zeros(grid.shape + (3,)))
    result.rows.append(equality("sphere_zero", 2, 1.0, sphere_onofri(zero), 0.0, 0.0, seed))
    for trial in range(config.trials):
        rng = experiment_rng(seed, trial)
        model = random_sphere_bumps(rng)
        u = SphereField.from_model(grid, model)
        value = sphere_onofri(u)
        shift = float(rng.uniform(-3.0, 3.0))
        shifted = sphere_onofri(u.shifted(shift))
        planar = stereographic_deficit(model, plane)
        result.rows.extend(
            [
                inequality("sphere_onofri", 2, 1.0, value, 0.0, tol, seed),
                equality("sphere_shift_invariance", 2, 1.0, shifted, value, SHIFT_TOL, seed),
                equality("sphere_stereographic", 2, config.large_radius, planar.total, value, tol, seed),
            ]
        )
        result.records.append(
            {"seed": seed, "trial": trial, "J": value, "shift": shift, "J_shifted": shifted, "planar": planar.total}
        )
    return result


SUITES: Dict[str, Callable[[ExperimentConfig], SuiteResult]] = {
    "identities": identities_suite,
    "duality": duality_suite,
    "deficit": deficit_suite,
    "lemma1": lemma1_suite,
    "epsilon": epsilon_suite,
    "fd-evolve": fd_evolve_suite,
    "minimize": minimize_suite,
    "corollary": corollary_suite,
    "sphere": sphere_suite,
}


def run_suite(config: ExperimentConfig) -> SuiteResult:
    return SUITES[config.command](config)


def write_outputs(result: SuiteResult, config: ExperimentConfig) -> List[Path]:
    header = config.to_dict()
    writer = ReportWriter(config.output_dir, header)
    stem = config.command.replace("-", "_")
    writer.write_rows(f"{stem}.csv", result.rows)
    if result.records:
        writer.write_records(f"{stem}.jsonl", result.records)
    for name, (fieldnames, records) in result.tables.items():
        writer.write_table(name, fieldnames, records)
    if config.plot:
        for sweep in result.sweeps:
            plots.plot_epsilon_sweep(sweep, writer.path_for(f"epsilon_{sweep.label}_R{sweep.R:g}.svg"))
        for R, summary in result.trajectories:
            plots.plot_trajectory(summary, writer.path_for(f"trajectory_R{R:g}.svg"))
        if result.deficits:
            plots.plot_deficits(result.deficits, writer.path_for("deficits.svg"), label="Onofri deficit")
    if config.xlsx:
        excel.build_workbook(header, result.rows).save(writer.path_for(f"{stem}.xlsx"))
    return writer.written


def run_experiment(
    command: str,
    config_path: Path | None = None,
    overrides: Mapping[str, Any] | None = None,
) -> Tuple[List[Path], SuiteResult, ValidationResult]:
    validation, config = validate_experiment(command, config_path, overrides)
    if validation.errors:
        raise ValidationError(validation)
    result = run_suite(config)
    return write_outputs(result, config), result, validation


def summarize(rows: Sequence[CheckRow]) -> str:
    bad = len(failed(rows))
    return f"Check summary: {len(rows) - bad} passed, {bad} failed, {len(rows)} total."
