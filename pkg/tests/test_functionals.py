import math
import unittest

import numpy as np

from onofri.constants import EXP_LIMIT, MAX_FIELD_AMPLITUDE
from onofri.densities import ModelDensity, free_energy_mu
from onofri.errors import ConstraintError, DegenerateError, GridError, RangeError
from onofri.fields import (
    SphereLinear,
    admissible_field,
    cutoff,
    experiment_rng,
    random_density,
    random_field,
    random_sphere_bumps,
)
from onofri.functionals import (
    GridFunction,
    SphereField,
    corollary_candidate,
    corollary_check,
    corollary_extremal,
    exp_constraint_residual,
    free_energy_2d,
    free_energy_nd,
    h_n_pointwise,
    model_density,
    onofri_deficit_2d,
    onofri_deficit_nd,
    onofri_energy_2d,
    sample_radial,
    scale_factor,
    sphere_onofri,
    stated_corollary_sides,
    stereographic_deficit,
)
from onofri.geometry import disk_grid, radial_grid, sphere_grid, stereographic_disk_grid


class FieldTests(unittest.TestCase):
    def test_seeded_fields_repeat(self) -> None:
        grid = disk_grid(1.0, 32, 32)
        first = random_field(grid, experiment_rng(7, 3)).values
        second = random_field(grid, experiment_rng(7, 3)).values
        other = random_field(grid, experiment_rng(7, 4)).values
        np.testing.assert_array_equal(first, second)
        self.assertFalse(np.array_equal(first, other))

    def test_random_fields_vanish_on_the_ring(self) -> None:
        for grid in (disk_grid(2.0, 32, 32), radial_grid(3, 2.0, 32)):
            for index in range(5):
                with self.subTest(grid=type(grid).__name__, index=index):
                    field = random_field(grid, experiment_rng(0, index))
                    self.assertTrue(field.zero_trace)
                    self.assertLessEqual(float(np.max(np.abs(field.values))), 30.0)

    def test_random_density_is_positive(self) -> None:
        rho = random_density(radial_grid(2, 1.0, 32), experiment_rng(1, 0))
        self.assertGreater(float(rho.values.min()), 0.0)
        self.assertAlmostEqual(rho.rescaled(0.5).mass, 0.5, places=14)


class DeficitTests(unittest.TestCase):
    def test_zero_field_has_zero_deficit(self) -> None:
        d = ModelDensity(2)
        grid = disk_grid(1.0, 32, 32)
        zero = GridFunction(grid, np.zeros(grid.shape))
        self.assertEqual(onofri_deficit_2d(zero).total, 0.0)
        self.assertEqual(onofri_deficit_nd(zero, d).total, 0.0)
        radial = radial_grid(3, 1.0, 32)
        self.assertEqual(onofri_deficit_nd(GridFunction(radial, np.zeros(radial.shape)), ModelDensity(3)).total, 0.0)

    def test_random_deficits_are_nonnegative(self) -> None:
        for n, grid in ((2, disk_grid(1.0, 64, 64)), (3, radial_grid(3, 1.0, 64))):
            d = ModelDensity(n)
            for index in range(20):
                with self.subTest(n=n, index=index):
                    u = random_field(grid, experiment_rng(11, index))
                    self.assertGreaterEqual(onofri_deficit_nd(u, d).total, -1e-8)

    def test_planar_and_general_deficits_agree(self) -> None:
        grid = disk_grid(1.0, 64, 64)
        d = ModelDensity(2)
        for index in range(5):
            u = random_field(grid, experiment_rng(2, index))
            with self.subTest(index=index):
                self.assertAlmostEqual(onofri_deficit_2d(u).total, onofri_deficit_nd(u, d).total, delta=1e-10)

    def test_nonzero_trace_rejected(self) -> None:
        grid = disk_grid(1.0, 32, 32)
        with self.assertRaises(ConstraintError):
            onofri_deficit_2d(GridFunction(grid, np.ones(grid.shape)))

    def test_convexity_gap_is_nonnegative(self) -> None:
        rng = np.random.default_rng(5)
        g_u = rng.normal(size=(1000, 3))
        g_m = rng.normal(size=(1000, 3))
        values = h_n_pointwise(g_u, g_m, 3)
        self.assertGreaterEqual(float(values.min()), -1e-14)
        np.testing.assert_allclose(h_n_pointwise(np.zeros((4, 3)), g_m[:4], 3), 0.0, atol=1e-14)


class ConstraintTests(unittest.TestCase):
    def test_scale_factor_meets_the_constraint(self) -> None:
        d = ModelDensity(2)
        grid = disk_grid(1.0, 64, 64)
        weights = grid.field_weights * d.profile(grid.radius)
        for index in range(5):
            w = random_field(grid, experiment_rng(3, index))
            slope = float(np.sum(weights * w.values))
            try:
                s = scale_factor(w, 1.0, d)
            except (DegenerateError, RangeError):
                continue
            with self.subTest(index=index):
                self.assertLess(s * slope, 0.0)
                self.assertLess(exp_constraint_residual(w.scaled(s), 1.0, d), 1e-10)

    def test_admissible_field(self) -> None:
        d = ModelDensity(3)
        grid = radial_grid(3, 2.0, 64)
        u = admissible_field(grid, experiment_rng(4, 0), d)
        self.assertLess(exp_constraint_residual(u, 2.0, d), 1e-10)

    def test_admissible_fields_respect_the_amplitude_limit(self) -> None:
        cases = ((ModelDensity(2), disk_grid(1.0, 48, 32)), (ModelDensity(3), radial_grid(3, 2.0, 64)))
        for d, grid in cases:
            for index in range(10):
                u = admissible_field(grid, experiment_rng(8, index), d)
                with self.subTest(n=d.n, index=index):
                    self.assertLessEqual(float(np.max(np.abs(u.values))), MAX_FIELD_AMPLITUDE)

    def test_overflow_guard_names_the_amplitude_limit(self) -> None:
        grid = disk_grid(1.0, 32, 32)
        u = GridFunction(grid, (EXP_LIMIT + 1.0) * cutoff(grid.radius, 1.0))
        with self.assertRaises(RangeError) as ctx:
            exp_constraint_residual(u, 1.0, ModelDensity(2))
        self.assertIn(f"below {MAX_FIELD_AMPLITUDE:g}", str(ctx.exception))

    def test_nonnegative_field_has_no_scaling(self) -> None:
        grid = disk_grid(1.0, 32, 32)
        with self.assertRaises(RangeError):
            scale_factor(GridFunction(grid, cutoff(grid.radius, 1.0)), 1.0, ModelDensity(2))

    def test_odd_field_is_degenerate(self) -> None:
        grid = disk_grid(1.0, 32, 32)
        w = GridFunction(grid, grid.x * cutoff(grid.radius, 1.0))
        with self.assertRaises(DegenerateError):
            scale_factor(w, 1.0, ModelDensity(2))

    def test_radius_mismatch(self) -> None:
        grid = disk_grid(1.0, 32, 32)
        with self.assertRaises(GridError):
            scale_factor(GridFunction(grid, np.zeros(grid.shape)), 2.0, ModelDensity(2))

    def test_free_energy_of_the_extremal(self) -> None:
        d = ModelDensity(2)
        mu = model_density(disk_grid(1.0, 64, 32), d)
        self.assertAlmostEqual(free_energy_2d(mu, 1.0), free_energy_mu(1.0, d), places=10)
        self.assertAlmostEqual(free_energy_2d(mu, 1.0), free_energy_nd(mu, 1.0, d), places=12)
        radial = sample_radial(radial_grid(3, 1.0, 64), lambda r: 0.2 * (1.0 - r**2))
        self.assertTrue(radial.zero_trace)

    def test_onofri_energy_of_zero(self) -> None:
        grid = disk_grid(1.0, 32, 32)
        self.assertEqual(onofri_energy_2d(GridFunction(grid, np.zeros(grid.shape)), 1.0), 0.0)


class CorollaryTests(unittest.TestCase):
    def test_unconstrained_zero_violates_the_printed_form(self) -> None:
        grid = disk_grid(1.0, 64, 64)
        report = stated_corollary_sides(GridFunction(grid, np.zeros(grid.shape)), 1.0, ModelDensity(2))
        self.assertAlmostEqual(report.lhs, math.sqrt(math.pi) / 4.0, places=8)
        self.assertAlmostEqual(report.rhs, math.sqrt(math.pi) * math.log(2.0), places=8)
        self.assertLess(report.lhs, report.rhs)
        with self.assertRaises(ConstraintError):
            corollary_check(GridFunction(grid, np.zeros(grid.shape)), 1.0, ModelDensity(2))

    def test_admissible_candidates_satisfy_the_inequality(self) -> None:
        for n, grid in ((2, disk_grid(1.0, 64, 64)), (3, radial_grid(3, 1.0, 64))):
            d = ModelDensity(n)
            for index in range(5):
                u = admissible_field(grid, experiment_rng(6, index), d)
                report = corollary_check(corollary_candidate(u, d), 1.0, d)
                with self.subTest(n=n, index=index):
                    self.assertGreaterEqual(report.slack, -1e-8)
                    self.assertLess(report.exp_residual, 1e-10)

    def test_extremal_is_sharp(self) -> None:
        for n in (2, 3):
            for R in (1.0, 2.0):
                report = corollary_extremal(R, ModelDensity(n))
                with self.subTest(n=n, R=R):
                    self.assertLess(abs(report.sharp_slack), 1e-6 * max(1.0, report.sharp_rhs))
                    self.assertGreaterEqual(report.slack, -1e-8)


class SphereTests(unittest.TestCase):
    def setUp(self) -> None:
        self.grid = sphere_grid(32, 64)

    def test_zero_field(self) -> None:
        zero = SphereField(self.grid, np.zeros(self.grid.shape), np.zeros(self.grid.shape + (3,)))
        self.assertEqual(sphere_onofri(zero), 0.0)

    def test_bounded_below_and_shift_invariant(self) -> None:
        for index in range(10):
            model = random_sphere_bumps(experiment_rng(8, index))
            u = SphereField.from_model(self.grid, model)
            value = sphere_onofri(u)
            with self.subTest(index=index):
                self.assertGreaterEqual(value, -1e-6)
                self.assertAlmostEqual(sphere_onofri(u.shifted(2.5)), value, delta=1e-10)

    def test_first_harmonic(self) -> None:
        model = SphereLinear(np.array([0.0, 0.0, 0.5]))
        u = SphereField.from_model(self.grid, model)
        # 1/4 * (2/3)|v|^2 - log(sinh|v| / |v|)
        expected = 0.25 * (2.0 / 3.0) * 0.25 - math.log(math.sinh(0.5) / 0.5)
        self.assertAlmostEqual(sphere_onofri(u), expected, places=10)

    def test_stereographic_pullback_matches(self) -> None:
        plane = stereographic_disk_grid(1.0e6, 64, 64)
        for index in range(3):
            model = random_sphere_bumps(experiment_rng(9, index))
            expected = sphere_onofri(SphereField.from_model(self.grid, model))
            with self.subTest(index=index):
                self.assertAlmostEqual(stereographic_deficit(model, plane).total, expected, delta=1e-6)


if __name__ == "__main__":
    unittest.main()
