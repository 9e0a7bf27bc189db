import unittest

import numpy as np

from onofri.densities import ModelDensity
from onofri.errors import ConstraintError, DomainError
from onofri.fields import experiment_rng, random_density
from onofri.functionals import DensityFunction, model_density
from onofri.geometry import integrate_radial, radial_grid
from onofri.transport import (
    discrete_ot_oracle,
    is_cyclically_monotone,
    lemma1_check,
    monge_ampere_residual,
    pairing_cost,
    push_points,
    radial_brenier,
)


def uniform_to_mu(n: int, resolution: int):
    grid = radial_grid(n, 1.0, resolution)
    target = model_density(grid, ModelDensity(n))
    source = DensityFunction(grid, np.ones(grid.shape)).rescaled(target.mass)
    return grid, source, target


class BrenierTests(unittest.TestCase):
    def test_identity_map(self) -> None:
        grid = radial_grid(2, 1.0, 64)
        rho = random_density(grid, experiment_rng(0, 0))
        transport = radial_brenier(rho, rho, grid)
        np.testing.assert_allclose(transport.values, grid.radius, atol=1e-12)
        self.assertTrue(transport.is_monotone)
        self.assertLess(monge_ampere_residual(transport), 1e-8)

    def test_uniform_to_extremal(self) -> None:
        for n in (2, 3):
            with self.subTest(n=n):
                grid, source, target = uniform_to_mu(n, 64)
                transport = radial_brenier(source, target, grid)
                self.assertTrue(transport.is_monotone)
                self.assertEqual(transport.values[-1], 1.0)
                self.assertLess(transport.pushforward_error, 1e-10)
                # mu_n is peaked at the origin, so mass is pulled inwards
                self.assertTrue(np.all(transport.values[:-1] <= grid.nodes + 1e-12))

    def test_off_grid_evaluation_and_inverse(self) -> None:
        grid, source, target = uniform_to_mu(2, 64)
        transport = radial_brenier(source, target, grid)
        r = np.array([0.1, 0.4, 0.8])
        t = transport(r)
        np.testing.assert_allclose(transport.inverse(t), r, atol=1e-10)
        self.assertEqual(transport.to_rows()[-1], (1.0, 1.0))
        with self.assertRaises(DomainError):
            transport(np.array([1.5]))

    def test_monge_ampere_refines_at_second_order(self) -> None:
        for n in (2, 3, 4):
            residuals = []
            for resolution in (128, 256):
                grid, source, target = uniform_to_mu(n, resolution)
                residuals.append(monge_ampere_residual(radial_brenier(source, target, grid)))
            with self.subTest(n=n):
                self.assertGreater(residuals[0], 2.0 * residuals[1])

    def test_fine_grid_stays_monotone_near_the_origin(self) -> None:
        grid, source, target = uniform_to_mu(4, 512)
        transport = radial_brenier(source, target, grid)
        self.assertTrue(transport.is_monotone)
        self.assertEqual(transport.warnings, [])
        self.assertLess(monge_ampere_residual(transport), 1e-4)
        # T(r) ~ r (rho0(0) / rho1(0))^(1/n) at the innermost node
        slope = (source.values[0] / target.values[0]) ** 0.25
        self.assertAlmostEqual(transport.values[0] / grid.nodes[0], slope, places=6)

    def test_composition_matches_the_direct_map(self) -> None:
        grid = radial_grid(2, 1.0, 128)
        rng = experiment_rng(31, 0)
        rho0 = random_density(grid, rng)
        rho1 = random_density(grid, rng).rescaled(rho0.mass)
        rho2 = random_density(grid, rng).rescaled(rho0.mass)
        first = radial_brenier(rho0, rho1, grid)
        second = radial_brenier(rho1, rho2, grid)
        direct = radial_brenier(rho0, rho2, grid)
        r = grid.nodes
        np.testing.assert_allclose(second(first(r)), direct(r), atol=1e-6)

    def test_reverse_map_is_the_inverse(self) -> None:
        grid, source, target = uniform_to_mu(2, 128)
        forward = radial_brenier(source, target, grid)
        backward = radial_brenier(target, source, grid)
        r = grid.nodes
        np.testing.assert_allclose(backward(forward(r)), r, atol=1e-6)
        np.testing.assert_allclose(backward.values[:-1], forward.inverse(r), atol=1e-6)

    def test_pushforward_mass_at_random_thresholds(self) -> None:
        for n in (2, 3):
            grid = radial_grid(n, 1.0, 128)
            rng = experiment_rng(32, n)
            rho0 = random_density(grid, rng)
            rho1 = random_density(grid, rng).rescaled(rho0.mass)
            transport = radial_brenier(rho0, rho1, grid)
            thresholds = rng.uniform(0.05, 0.95, 20)
            preimages = transport.inverse(thresholds)
            for s, r in zip(thresholds, preimages):
                # Gauss rules with 256 nodes integrate the interpolants exactly
                moved = integrate_radial(transport.target.density, radial_grid(n, s, 256))
                held = integrate_radial(transport.source.density, radial_grid(n, r, 256))
                with self.subTest(n=n, s=s):
                    self.assertAlmostEqual(moved, held, delta=1e-10 * rho0.mass)

    def test_unequal_masses(self) -> None:
        grid = radial_grid(2, 1.0, 32)
        rho0 = DensityFunction(grid, np.ones(grid.shape))
        rho1 = rho0.rescaled(2.0 * rho0.mass)
        with self.assertRaises(ConstraintError):
            radial_brenier(rho0, rho1, grid)

    def test_push_points(self) -> None:
        grid, source, target = uniform_to_mu(2, 64)
        transport = radial_brenier(source, target, grid)
        points = np.array([[0.3, 0.4], [0.0, 0.5]])
        images = push_points(transport, points)
        np.testing.assert_allclose(np.linalg.norm(images, axis=1), transport(np.array([0.5, 0.5])))
        with self.assertRaises(DomainError):
            push_points(transport, np.array([[0.0, 0.0]]))


class DisplacementInequalityTests(unittest.TestCase):
    def test_random_pairs(self) -> None:
        for n in (2, 3):
            grid = radial_grid(n, 1.0, 128)
            for index in range(5):
                rng = experiment_rng(21, index)
                rho0 = random_density(grid, rng)
                rho1 = random_density(grid, rng).rescaled(rho0.mass)
                report = lemma1_check(rho0, rho1, grid)
                with self.subTest(n=n, index=index):
                    self.assertGreaterEqual(report.slack, -1e-6)

    def test_equality_case(self) -> None:
        grid = radial_grid(3, 2.0, 64)
        rho = random_density(grid, experiment_rng(22, 0))
        self.assertLess(abs(lemma1_check(rho, rho, grid).slack), 1e-8)


class DiscreteOracleTests(unittest.TestCase):
    def test_one_dimensional_pairing_is_monotone(self) -> None:
        x = [0.0, 1.0, 2.0, 3.0]
        y = [3.1, 0.2, 2.2, 1.1]
        pairing = discrete_ot_oracle(x, y)
        self.assertEqual(pairing.permutation, (1, 3, 2, 0))
        self.assertTrue(pairing.cyclically_monotone)
        self.assertAlmostEqual(pairing.cost, pairing_cost(x, y, pairing.permutation), places=14)
        self.assertFalse(is_cyclically_monotone(x, y, (0, 1, 2, 3)))

    def test_planar_oracle_beats_every_other_pairing(self) -> None:
        rng = np.random.default_rng(3)
        x = rng.normal(size=(5, 2))
        y = rng.normal(size=(5, 2))
        pairing = discrete_ot_oracle(x, y)
        self.assertLessEqual(pairing.cost, pairing_cost(x, y, range(5)) + 1e-14)
        self.assertTrue(pairing.cyclically_monotone)

    def test_oracle_recovers_the_radial_map_on_small_clouds(self) -> None:
        grid, source, target = uniform_to_mu(2, 128)
        transport = radial_brenier(source, target, grid)
        rng = np.random.default_rng(11)
        radii = np.sqrt(rng.uniform(0.01, 0.81, 6))
        angles = rng.uniform(0.0, 2.0 * np.pi, 6)
        x = np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])
        images = push_points(transport, x)
        shuffle = rng.permutation(6)
        pairing = discrete_ot_oracle(x, images[shuffle])
        brenier_cost = pairing_cost(x, images, range(6))
        self.assertLessEqual(abs(pairing.cost - brenier_cost), 0.05 * brenier_cost)
        self.assertEqual(shuffle[list(pairing.permutation)].tolist(), list(range(6)))

    def test_limits(self) -> None:
        with self.assertRaises(DomainError):
            discrete_ot_oracle(np.zeros(9), np.zeros(9))
        with self.assertRaises(ConstraintError):
            discrete_ot_oracle([0.0, 1.0], [0.0, 1.0, 2.0])
        with self.assertRaises(ConstraintError):
            discrete_ot_oracle([0.0, 1.0], [0.0, 1.0], weights0=[0.2, 0.8])


if __name__ == "__main__":
    unittest.main()
