from __future__ import annotations

import math
import unittest

import numpy as np

from factorcopula.errors import ConfigError
from factorcopula.copulas import make_copula
from factorcopula.quadrature import composite, gauss_legendre, latent_rule


class GaussLegendreTests(unittest.TestCase):
    def test_weights_sum_to_one(self) -> None:
        rule = gauss_legendre(25)
        self.assertEqual(rule.size, 25)
        self.assertAlmostEqual(float(rule.weights.sum()), 1.0, places=14)
        self.assertTrue(np.all(rule.weights > 0))
        self.assertTrue(np.all(np.diff(rule.nodes) > 0))

    def test_exact_for_polynomials(self) -> None:
        rule = gauss_legendre(10)
        for k in range(0, 20):
            self.assertAlmostEqual(rule.integrate(lambda x, k=k: x**k), 1.0 / (k + 1), places=12)

    def test_symmetric_about_half(self) -> None:
        rule = gauss_legendre(15)
        np.testing.assert_allclose(rule.nodes, 1.0 - rule.nodes[::-1], atol=1e-15)
        np.testing.assert_allclose(rule.weights, rule.weights[::-1], atol=1e-15)

    def test_rejects_small_rules(self) -> None:
        with self.assertRaises(ConfigError) as ctx:
            gauss_legendre(1)
        self.assertIn("quadrature size", str(ctx.exception))

    def test_tensor_rule(self) -> None:
        rule = gauss_legendre(5)
        x1, x2, w = rule.tensor()
        self.assertEqual(x1.shape, (25,))
        self.assertAlmostEqual(float(w.sum()), 1.0, places=13)
        self.assertAlmostEqual(float(np.dot(w, x1 * x2)), 0.25, places=13)


class LatentRuleTests(unittest.TestCase):
    def test_grading_one_is_plain_rule(self) -> None:
        plain = gauss_legendre(12)
        rule = latent_rule(12, grading=1)
        np.testing.assert_array_equal(rule.nodes, plain.nodes)
        np.testing.assert_array_equal(rule.weights, plain.weights)

    def test_graded_rule_shape(self) -> None:
        rule = latent_rule(25)
        self.assertEqual(rule.size, 25)
        self.assertAlmostEqual(float(rule.weights.sum()), 1.0, places=14)
        self.assertTrue(np.all(rule.weights > 0))
        self.assertTrue(np.all(np.diff(rule.nodes) > 0))
        np.testing.assert_allclose(rule.nodes, 1.0 - rule.nodes[::-1], atol=1e-15)
        self.assertLess(rule.nodes[0], gauss_legendre(25).nodes[0] ** 2)

    def test_smooth_integrand_stays_accurate(self) -> None:
        rule = latent_rule(25)
        self.assertAlmostEqual(rule.integrate(lambda x: x**3), 0.25, places=9)
        self.assertAlmostEqual(rule.integrate(np.exp), math.e - 1.0, places=9)

    def test_resolves_tail_peak(self) -> None:
        copula = make_copula("joe", tau=0.6)
        graded = abs(latent_rule(25).integrate(lambda x: copula.density(x, 0.99)) - 1.0)
        plain = abs(gauss_legendre(25).integrate(lambda x: copula.density(x, 0.99)) - 1.0)
        self.assertLess(graded, 1e-2)
        self.assertLess(graded, 0.1 * plain)

    def test_rejects_bad_grading(self) -> None:
        with self.assertRaises(ConfigError):
            latent_rule(10, grading=0)


class CompositeTests(unittest.TestCase):
    def test_integrates_smooth_function(self) -> None:
        rule = composite(0.0, 2.0, panels=4, n_q=8)
        self.assertEqual(rule.size, 32)
        self.assertAlmostEqual(rule.integrate(np.exp), math.exp(2.0) - 1.0, places=12)

    def test_gaussian_tail_mass(self) -> None:
        rule = composite(0.0, 8.3, panels=16, n_q=12)
        value = rule.integrate(lambda z: np.exp(-0.5 * z**2) / math.sqrt(2 * math.pi))
        self.assertAlmostEqual(value, 0.5, places=10)

    def test_rejects_empty_interval(self) -> None:
        with self.assertRaises(ConfigError):
            composite(1.0, 1.0, panels=2, n_q=4)


if __name__ == "__main__":
    unittest.main()
