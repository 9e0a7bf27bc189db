import math
import unittest

import numpy as np

from onofri.densities import ModelDensity, theta
from onofri.duality import (
    duality_gap,
    epsilon_max,
    epsilon_max_mu,
    epsilon_objective,
    epsilon_sweep,
    objective_coefficients,
    peak_value,
    peak_value_audit,
)
from onofri.errors import ConstraintError, DomainError
from onofri.fields import admissible_field, experiment_rng, random_density
from onofri.functionals import DensityFunction, GridFunction, model_density
from onofri.geometry import disk_grid, radial_grid


class EpsilonTests(unittest.TestCase):
    def test_planar_optimum(self) -> None:
        self.assertAlmostEqual(epsilon_max_mu(ModelDensity(2)), 4.0 * math.sqrt(math.pi), places=12)

    def test_extremal_optimum_matches_closed_form(self) -> None:
        for n in (2, 3, 4, 5):
            d = ModelDensity(n)
            for R in (1.0, 2.0):
                mu = model_density(radial_grid(n, R, 128), d)
                with self.subTest(n=n, R=R):
                    ratio = epsilon_max(mu, R, d) / epsilon_max_mu(d)
                    self.assertAlmostEqual(ratio, 1.0, delta=1e-6)

    def test_objective_arguments(self) -> None:
        d = ModelDensity(2)
        grid = radial_grid(2, 1.0, 64)
        mu = model_density(grid, d)
        with self.assertRaises(DomainError):
            epsilon_objective(mu, 0.0, 1.0, d)
        with self.assertRaises(ConstraintError):
            epsilon_objective(mu.rescaled(2.0 * mu.mass), 1.0, 1.0, d)
        A, B = objective_coefficients(mu, 1.0, d)
        eps = epsilon_max(mu, 1.0, d)
        self.assertAlmostEqual(epsilon_objective(mu, eps, 1.0, d), eps * A - eps**2 * B, places=10)

    def test_sweeps_locate_the_maximum(self) -> None:
        for n in (2, 3):
            d = ModelDensity(n)
            grid = radial_grid(n, 1.0, 128)
            mu = model_density(grid, d)
            for index in range(5):
                rho = random_density(grid, experiment_rng(13, index)).rescaled(mu.mass)
                sweep = epsilon_sweep(rho, 1.0, d)
                with self.subTest(n=n, index=index):
                    self.assertTrue(sweep.peak_dominates)
                    self.assertLess(sweep.relative_argmax_error, 1e-6)
                    self.assertLess(abs(sweep.stationarity) / max(1.0, abs(sweep.A)), 1e-6)

    def test_concentrated_density_has_no_interior_maximum(self) -> None:
        d = ModelDensity(2)
        grid = radial_grid(2, 1.0, 128)
        rho = DensityFunction(grid, np.exp(-((grid.radius / 0.05) ** 2))).rescaled(theta(1.0, d))
        sweep = epsilon_sweep(rho, 1.0, d)
        self.assertLess(sweep.A, 0.0)
        self.assertEqual(sweep.eps_max, 0.0)
        self.assertEqual(len(sweep.warnings), 1)
        self.assertTrue(sweep.peak_dominates)
        self.assertEqual(peak_value(rho, 1.0, d)[1], 0.0)

    def test_peak_audit(self) -> None:
        d = ModelDensity(2)
        rows = {row.identity: row for row in peak_value_audit(d, 1.0, radial_grid(2, 1.0, 128))}
        self.assertLess(rows["peak_closed_form"].abs_error, 1e-10)
        self.assertLess(rows["peak_gradient_power"].abs_error, 1e-6)
        # the simplified expression does not reproduce the peak value
        self.assertGreater(rows["peak_printed_simplification"].abs_error, 1e-3)


class DualityGapTests(unittest.TestCase):
    def test_gap_vanishes_at_the_extremal_pair(self) -> None:
        for n, grid in ((2, disk_grid(1.0, 64, 64)), (3, radial_grid(3, 1.0, 64))):
            d = ModelDensity(n)
            report = duality_gap(GridFunction(grid, np.zeros(grid.shape)), model_density(grid, d), 1.0, d)
            with self.subTest(n=n):
                self.assertLess(abs(report.gap), 1e-8)
                self.assertEqual(report.scale, 1.0)

    def test_random_gaps_are_nonnegative(self) -> None:
        for n, grid in ((2, disk_grid(2.0, 64, 64)), (3, radial_grid(3, 2.0, 64))):
            d = ModelDensity(n)
            for index in range(10):
                rng = experiment_rng(17, index)
                report = duality_gap(admissible_field(grid, rng, d), random_density(grid, rng), 2.0, d)
                with self.subTest(n=n, index=index):
                    self.assertGreaterEqual(report.gap, -1e-8)
                    self.assertLess(report.exp_residual, 1e-8)
                    self.assertLess(report.mass_residual, 1e-8)
                    self.assertAlmostEqual(report.scale, 1.0, places=8)

    def test_arguments_on_different_grids(self) -> None:
        d = ModelDensity(2)
        first, second = disk_grid(1.0, 32, 32), disk_grid(1.0, 32, 32)
        with self.assertRaises(ConstraintError):
            duality_gap(GridFunction(first, np.zeros(first.shape)), model_density(second, d), 1.0, d)


if __name__ == "__main__":
    unittest.main()
