from __future__ import annotations

import math
import unittest
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from factorcopula.copulas import (
    LinkingCopula,
    Variant,
    available_families,
    create_family,
    independence_copula,
    make_copula,
    params_to_tau,
    parse_copula_name,
)
from factorcopula.copulas.archimedean import Frank
from factorcopula.copulas.base import _numeric_tau
from factorcopula.copulas.bb import BB7
from factorcopula.errors import ConfigError, NumericalError, ParameterDomainError, TauRangeError
from factorcopula.quadrature import composite, gauss_legendre

GRID = np.array([0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99])
FAMILIES = ("bvn", "t5", "frank", "gumbel", "joe", "bb1", "bb7", "bb8", "bb10")
SUFFIXES = ("", "_s", "_r1", "_r2")


def _every_link() -> list[LinkingCopula]:
    links = []
    for family in FAMILIES:
        for suffix in SUFFIXES:
            tau = -0.5 if suffix in ("_r1", "_r2") else 0.5
            links.append(make_copula(family + suffix, tau=tau))
    return links


def _frank_log_density(theta: float, u: float, v: float) -> float:
    # denominator as a sum that stays positive for theta > 0
    d = math.exp(-theta * u) + math.exp(-theta * v) - math.exp(-theta * (u + v)) - math.exp(-theta)
    return math.log(theta) + math.log1p(-math.exp(-theta)) - theta * (u + v) - 2.0 * math.log(d)


class _UndefinedConditional(Frank):
    tag = "frank_undefined"

    def hfunc(self, v, u, params):
        return np.full(np.broadcast(u, v).shape, np.nan)


class _UndefinedTau(BB7):
    tag = "bb7_undefined"

    def hfunc(self, v, u, params):
        return np.full(np.broadcast(u, v).shape, np.inf)


class CalibrationTests(unittest.TestCase):
    def test_one_parameter_values(self) -> None:
        cases = {
            "gumbel": (1.43, 2.00, 3.33),
            "joe": (1.77, 2.86, 5.46),
            "frank": (2.92, 5.74, 11.41),
            "t3": (0.45, 0.71, 0.89),
        }
        for name, expected in cases.items():
            for tau, value in zip((0.3, 0.5, 0.7), expected, strict=True):
                with self.subTest(name=name, tau=tau):
                    copula = make_copula(name, tau=tau)
                    self.assertAlmostEqual(copula.params[0], value, delta=0.01)

    def test_tau_round_trip(self) -> None:
        names = ["bvn", "t5", "frank", "gumbel", "gumbel_s", "joe", "joe_s", "bb1", "bb7", "bb8", "bb10"]
        for name in names:
            for tau in (0.1, 0.3, 0.5):
                with self.subTest(name=name, tau=tau):
                    copula = make_copula(name, tau=tau)
                    self.assertAlmostEqual(params_to_tau(copula), tau, delta=1e-6)

    def test_two_parameter_tau_round_trip(self) -> None:
        for name in ("bb1", "bb7", "bb8", "bb10"):
            for tau in (0.05, 0.1, 0.3, 0.5, 0.7, 0.9):
                with self.subTest(name=name, tau=tau):
                    copula = make_copula(name, tau=tau)
                    self.assertAlmostEqual(params_to_tau(copula), tau, delta=1e-6)

    def test_section_end_points_have_finite_tau(self) -> None:
        for name in ("bb7", "bb8", "bb10"):
            with self.subTest(name=name):
                family = create_family(name)
                lo, hi = family.canonical_range()
                self.assertLess(abs(family.tau(family.canonical_params(lo))), 1e-3)
                tau_hi = family.tau(family.canonical_params(hi))
                self.assertTrue(math.isfinite(tau_hi))
                self.assertGreater(tau_hi, 0.9)

    def test_bb10_unit_delta_is_clayton(self) -> None:
        theta = 2.5
        copula = make_copula("bb10", (theta, 1.0))
        u, v = np.meshgrid(GRID, GRID)
        clayton = (u**-theta + v**-theta - 1.0) ** (-1.0 / theta)
        np.testing.assert_allclose(copula.cdf(u, v), clayton, rtol=1e-11)
        self.assertAlmostEqual(copula.tau(), theta / (theta + 2.0), places=12)
        self.assertAlmostEqual(copula.tail_dependence().lower, 2.0 ** (-1.0 / theta), places=12)
        self.assertEqual(copula.tail_order(), (1.0, 2.0))

    def test_tau_is_cached_per_params(self) -> None:
        family = create_family("bb8")
        params = (2.5, 0.7)
        first = family.tau(params)
        hits = _numeric_tau.cache_info().hits
        with ThreadPoolExecutor(max_workers=4) as pool:
            values = list(pool.map(lambda _: family.tau(params), range(8)))
        self.assertEqual(values, [first] * 8)
        self.assertGreaterEqual(_numeric_tau.cache_info().hits, hits + 8)

    def test_non_finite_tau_raises(self) -> None:
        with self.assertRaises(NumericalError) as ctx:
            _UndefinedTau().tau((2.0, 1.0))
        self.assertIn("bb7_undefined", str(ctx.exception))

    def test_reflections_negate_tau(self) -> None:
        for name in ("gumbel_r1", "gumbel_r2", "joe_r1", "joe_r2"):
            copula = make_copula(name, tau=-0.4)
            self.assertAlmostEqual(copula.tau(), -0.4, delta=1e-6)
            self.assertTrue(copula.variant.negates_tau)

    def test_tail_dependence(self) -> None:
        self.assertAlmostEqual(make_copula("joe", tau=0.5).tail_dependence().upper, 0.73, delta=0.01)
        self.assertAlmostEqual(make_copula("gumbel", tau=0.7).tail_dependence().upper, 0.77, delta=0.01)
        self.assertAlmostEqual(make_copula("gumbel", tau=0.3).tail_dependence().upper, 0.38, delta=0.01)
        t3 = make_copula("t3", tau=0.3).tail_dependence()
        self.assertAlmostEqual(t3.lower, 0.29, delta=0.01)
        self.assertAlmostEqual(t3.upper, 0.29, delta=0.01)
        self.assertEqual(make_copula("frank", tau=0.5).tail_dependence().as_tuple(), (0.0, 0.0))

    def test_survival_swaps_tails(self) -> None:
        base = make_copula("gumbel", tau=0.5).tail_dependence()
        survival = make_copula("gumbel_s", tau=0.5).tail_dependence()
        self.assertEqual((survival.lower, survival.upper), (base.upper, base.lower))
        reflected = make_copula("joe_r1", tau=-0.5).tail_dependence()
        self.assertTrue(reflected.discordant)

    def test_gumbel_cdf_closed_form(self) -> None:
        copula = make_copula("gumbel", (2.0,))
        expected = math.exp(-math.sqrt(2.0 * math.log(2.0) ** 2))
        self.assertAlmostEqual(float(copula.cdf(0.5, 0.5)), expected, places=10)

    def test_tail_order(self) -> None:
        self.assertEqual(make_copula("frank", tau=0.5).tail_order(), (2.0, 2.0))
        lower, upper = make_copula("gumbel", tau=0.5).tail_order()
        self.assertAlmostEqual(lower, 2.0 ** 0.5)
        self.assertEqual(upper, 1.0)
        bvn = make_copula("bvn", (0.5,))
        self.assertAlmostEqual(bvn.tail_order()[0], 2.0 / 1.5)


class FrankTests(unittest.TestCase):
    POINTS = ((0.5, 0.5), (0.2, 0.3), (0.9, 0.95), (0.05, 0.9), (0.99, 0.01))

    def test_density_at_large_theta(self) -> None:
        for theta in (60.0, 99.0):
            copula = make_copula("frank", (theta,))
            for u, v in self.POINTS:
                with self.subTest(theta=theta, u=u, v=v):
                    got = float(copula.log_density(u, v))
                    self.assertAlmostEqual(got, _frank_log_density(theta, u, v), places=9)
        self.assertAlmostEqual(float(make_copula("frank", (99.0,)).log_density(0.5, 0.5)), 3.2088, delta=1e-4)

    def test_density_is_bounded(self) -> None:
        u, v = np.meshgrid(np.linspace(0.0, 1.0, 21), np.linspace(0.0, 1.0, 21))
        for theta in (60.0, 99.0, -99.0):
            log_c = make_copula("frank", (theta,)).log_density(u, v)
            self.assertTrue(np.all(np.isfinite(log_c)), theta)
            self.assertTrue(np.all(log_c <= math.log(2.0 * abs(theta))), theta)

    def test_negative_theta_mirrors_positive(self) -> None:
        u, v = np.meshgrid(GRID, GRID)
        positive = make_copula("frank", (99.0,))
        negative = make_copula("frank", (-99.0,))
        np.testing.assert_allclose(negative.log_density(u, v), positive.log_density(1 - u, v), atol=1e-12)
        np.testing.assert_allclose(negative.cdf(u, v), v - positive.cdf(1 - u, v), atol=1e-12)
        np.testing.assert_allclose(negative.conditional(v, u), positive.conditional(v, 1 - u), atol=1e-12)

    def test_conditional_at_large_theta(self) -> None:
        copula = make_copula("frank", (99.0,))
        self.assertAlmostEqual(float(copula.conditional(0.5, 0.5)), 0.5, places=9)
        u, w = np.meshgrid(GRID, GRID)
        v = copula.conditional_inverse(w, u)
        np.testing.assert_allclose(copula.conditional(v, u), w, atol=1e-9)


class NamingTests(unittest.TestCase):
    def test_parse_names(self) -> None:
        family, variant = parse_copula_name("joe_r2")
        self.assertEqual(family.tag, "joe")
        self.assertIs(variant, Variant.REFLECT_SECOND)
        self.assertEqual(make_copula("gumbel_s", tau=0.4).name, "gumbel_s")
        self.assertEqual(create_family("t7").tag, "t7")
        self.assertIs(create_family("frank"), create_family("FRANK"))
        self.assertIn("bb10", available_families())

    def test_unknown_family(self) -> None:
        with self.assertRaises(ConfigError) as ctx:
            make_copula("clayton_x", tau=0.3)
        self.assertIn("clayton_x", str(ctx.exception))
        with self.assertRaises(ConfigError) as ctx:
            make_copula("nope", tau=0.3)
        self.assertIn("Unsupported copula family", str(ctx.exception))

    def test_tags_are_normalized(self) -> None:
        self.assertIs(create_family(" Gumbel "), create_family("gumbel"))
        self.assertIs(create_family("T5"), create_family("t5"))
        with self.assertRaises(ConfigError) as ctx:
            create_family("Nope")
        self.assertIn("'Nope'", str(ctx.exception))

    def test_unreachable_tau(self) -> None:
        with self.assertRaises(TauRangeError):
            make_copula("gumbel", tau=-0.3)
        with self.assertRaises(TauRangeError):
            make_copula("joe_r1", tau=0.3)

    def test_params_outside_domain(self) -> None:
        with self.assertRaises(ParameterDomainError):
            make_copula("gumbel", (0.5,))

    def test_needs_params_or_tau(self) -> None:
        with self.assertRaises(ConfigError):
            make_copula("frank")


class ConditionalTests(unittest.TestCase):
    NAMES = ("bvn", "t3", "frank", "gumbel", "gumbel_s", "gumbel_r1", "gumbel_r2", "joe", "joe_r2", "bb1", "bb8")

    def _copula(self, name: str):
        tau = -0.5 if name.endswith(("_r1", "_r2")) else 0.5
        return make_copula(name, tau=tau)

    def test_boundaries_are_exact(self) -> None:
        for name in self.NAMES:
            copula = self._copula(name)
            self.assertTrue(np.all(copula.conditional(np.zeros_like(GRID), GRID) == 0.0), name)
            self.assertTrue(np.all(copula.conditional(np.ones_like(GRID), GRID) == 1.0), name)

    def test_inverse_round_trip(self) -> None:
        u, w = np.meshgrid(GRID, GRID)
        for name in self.NAMES:
            with self.subTest(name=name):
                copula = self._copula(name)
                v = copula.conditional_inverse(w, u)
                np.testing.assert_allclose(copula.conditional(v, u), w, atol=1e-9)

    def test_undefined_conditional_raises(self) -> None:
        copula = LinkingCopula(_UndefinedConditional(), Variant.NONE, (2.0,))
        with self.assertRaises(NumericalError) as ctx:
            copula.conditional(np.array([0.0, 0.4, 1.0]), 0.3)
        self.assertIn("frank_undefined", str(ctx.exception))
        with self.assertRaises(NumericalError):
            copula.conditional_given_second(np.array([0.4]), 0.3)
        np.testing.assert_array_equal(copula.conditional(np.array([0.0, 1.0]), 0.3), [0.0, 1.0])

    def test_conditional_matches_cdf_derivative(self) -> None:
        h = 1e-6
        u, v = np.meshgrid(GRID[1:-1], GRID[1:-1])
        for name in ("gumbel_r2", "joe_s", "frank", "bb8"):
            with self.subTest(name=name):
                copula = self._copula(name)
                numeric_u = (copula.cdf(u + h, v) - copula.cdf(u - h, v)) / (2 * h)
                np.testing.assert_allclose(copula.conditional(v, u), numeric_u, atol=1e-4)
                numeric_v = (copula.cdf(u, v + h) - copula.cdf(u, v - h)) / (2 * h)
                np.testing.assert_allclose(copula.conditional_given_second(u, v), numeric_v, atol=1e-4)

    def test_reflection_identities(self) -> None:
        u, v = np.meshgrid(GRID, GRID)
        base = make_copula("joe", tau=0.4)
        r1 = make_copula("joe_r1", base.params)
        r2 = make_copula("joe_r2", base.params)
        surv = make_copula("joe_s", base.params)
        np.testing.assert_allclose(r1.cdf(u, v), v - base.cdf(1 - u, v), atol=1e-12)
        np.testing.assert_allclose(r2.cdf(u, v), u - base.cdf(u, 1 - v), atol=1e-12)
        np.testing.assert_allclose(surv.cdf(u, v), u + v - 1 + base.cdf(1 - u, 1 - v), atol=1e-12)
        np.testing.assert_allclose(surv.log_density(u, v), base.log_density(1 - u, 1 - v), atol=1e-12)

    def test_cdf_uniform_margins(self) -> None:
        for name in ("bvn", "frank", "gumbel_s", "joe_r1", "bb10"):
            copula = self._copula(name) if name != "bb10" else make_copula("bb10", tau=0.4)
            np.testing.assert_allclose(copula.cdf(GRID, np.ones_like(GRID)), GRID, atol=1e-6)
            np.testing.assert_allclose(copula.cdf(np.ones_like(GRID), GRID), GRID, atol=1e-6)

    def test_density_integrates_to_one(self) -> None:
        x1, x2, w = gauss_legendre(40).tensor()
        for name in ("frank",):
            copula = make_copula(name, tau=0.3)
            self.assertAlmostEqual(float(np.dot(w, copula.density(x1, x2))), 1.0, delta=1e-3)

    def test_independence(self) -> None:
        copula = independence_copula()
        self.assertTrue(copula.is_independence())
        self.assertEqual(copula.tau(), 0.0)
        np.testing.assert_allclose(copula.conditional(GRID, GRID[::-1]), np.clip(GRID, 1e-10, 1 - 1e-10))
        self.assertTrue(math.isclose(float(copula.cdf(0.3, 0.6)), 0.18))


class CopulaPropertyTests(unittest.TestCase):
    """Checks run over every family and variant at |tau| = 0.5."""

    links: list[LinkingCopula]

    @classmethod
    def setUpClass(cls) -> None:
        cls.links = _every_link()

    def test_frechet_bounds_and_rectangles(self) -> None:
        grid = np.linspace(0.0, 1.0, 21)
        u, v = np.meshgrid(grid, grid, indexing="ij")
        for copula in self.links:
            with self.subTest(name=copula.name):
                c = copula.cdf(u, v)
                self.assertTrue(np.all(c >= np.maximum(u + v - 1.0, 0.0) - 1e-12))
                self.assertTrue(np.all(c <= np.minimum(u, v) + 1e-12))
                masses = np.diff(np.diff(c, axis=0), axis=1)
                self.assertGreaterEqual(float(masses.min()), -1e-12)

    def test_density_mass_matches_cdf_rectangle(self) -> None:
        a, b = 0.05, 0.95
        x1, x2, w = composite(a, b, panels=6, n_q=12).tensor()
        for copula in self.links:
            with self.subTest(name=copula.name):
                mass = float(np.dot(w, copula.density(x1, x2)))
                rect = float(copula.cdf(b, b) - copula.cdf(a, b) - copula.cdf(b, a) + copula.cdf(a, a))
                self.assertAlmostEqual(mass, rect, delta=1e-5)

    def test_mixed_difference_matches_density(self) -> None:
        h = 1e-4
        u, v = np.meshgrid([0.2, 0.4, 0.6, 0.8], [0.15, 0.5, 0.85], indexing="ij")
        for copula in self.links:
            with self.subTest(name=copula.name):
                numeric = (
                    copula.cdf(u + h, v + h) - copula.cdf(u + h, v - h)
                    - copula.cdf(u - h, v + h) + copula.cdf(u - h, v - h)
                ) / (4.0 * h * h)
                np.testing.assert_allclose(numeric, copula.density(u, v), rtol=1e-4, atol=1e-4)

    def test_survival_is_an_involution(self) -> None:
        u, v = np.meshgrid(GRID, GRID)
        for family in FAMILIES:
            with self.subTest(name=family):
                base = make_copula(family, tau=0.5)
                survival = make_copula(f"{family}_s", base.params)
                np.testing.assert_allclose(u + v - 1.0 + survival.cdf(1 - u, 1 - v), base.cdf(u, v), atol=1e-12)

    def test_radially_symmetric_families(self) -> None:
        u, v = np.meshgrid(GRID, GRID)
        for family in ("bvn", "frank", "t5"):
            with self.subTest(name=family):
                base = make_copula(family, tau=0.5)
                survival = make_copula(f"{family}_s", base.params)
                np.testing.assert_allclose(base.density(u, v), base.density(1 - u, 1 - v), rtol=1e-9)
                np.testing.assert_allclose(survival.cdf(u, v), base.cdf(u, v), atol=1e-10)


if __name__ == "__main__":
    unittest.main()
