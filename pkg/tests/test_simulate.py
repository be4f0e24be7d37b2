from __future__ import annotations

import unittest

import numpy as np

from factorcopula.copulas import independence_copula, make_copula
from factorcopula.errors import ConfigError
from factorcopula.factor_model import FactorCopulaModel, FitOptions
from factorcopula.margins import EmpiricalMargin, NegBinMargin
from factorcopula.registry import CandidateSets, load_presets
from factorcopula.schemas import PresetMargin
from factorcopula.simulate import (
    ReplicateResult,
    SimulationScenario,
    model_from_preset,
    preset_margin,
    run_study,
    sample,
    sample_1factor,
    sample_2factor,
    sample_uniform,
    scenario_from_preset,
    summarize,
)

QUICK = FitOptions(n_q=10, compute_se=False)


def _small_model() -> FactorCopulaModel:
    margins = (
        EmpiricalMargin.uniform(),
        preset_margin(PresetMargin(kind="ordinal", probabilities=[0.3, 0.4, 0.3])),
        NegBinMargin(2.0, 0.3),
    )
    links = (make_copula("gumbel", tau=0.5), make_copula("frank", tau=0.4), make_copula("joe_s", tau=0.4))
    return FactorCopulaModel(margins, links, names=("z", "o", "c"))


class SamplingTests(unittest.TestCase):
    def test_same_seed_same_rows(self) -> None:
        model = _small_model()
        first = sample(model, 50, seed=3)
        second = sample(model, 50, seed=3)
        np.testing.assert_array_equal(first.values, second.values)
        self.assertEqual(first.kinds, ("continuous", "ordinal", "count"))
        self.assertEqual(first.names, ("z", "o", "c"))

    def test_independence_links(self) -> None:
        margins = tuple(EmpiricalMargin.uniform() for _ in range(3))
        model = FactorCopulaModel(margins, (independence_copula(),) * 3)
        u = sample_uniform(model, 4000, seed=0)
        corr = np.corrcoef(u, rowvar=False)
        self.assertLess(np.abs(corr[np.triu_indices(3, 1)]).max(), 0.06)
        self.assertTrue(np.all((u > 0) & (u < 1)))

    def test_margins_reproduced(self) -> None:
        data = sample(_small_model(), 6000, seed=1)
        freqs = np.bincount(data.column(1).astype(int), minlength=4)[1:] / data.n
        np.testing.assert_allclose(freqs, [0.3, 0.4, 0.3], atol=0.025)
        self.assertAlmostEqual(float(data.column(2).mean()), 2.0, delta=0.1)
        self.assertAlmostEqual(float(data.column(0).mean()), 0.5, delta=0.02)

    def test_dependence_direction(self) -> None:
        margins = tuple(EmpiricalMargin.uniform() for _ in range(2))
        model = FactorCopulaModel(margins, (make_copula("joe_r1", tau=-0.6), make_copula("gumbel", tau=0.6)))
        u = sample_uniform(model, 2000, seed=2)
        self.assertLess(np.corrcoef(u, rowvar=False)[0, 1], -0.2)

    def test_two_factor(self) -> None:
        preset = load_presets().get("swiss-2f")
        model = model_from_preset(preset)
        assert model.links_f2 is not None
        self.assertEqual(model.links_f1[0].name, "bb10")
        self.assertAlmostEqual(model.links_f1[0].tau(), 0.38, delta=1e-6)
        self.assertAlmostEqual(model.links_f2[2].tau(), 0.30, delta=1e-6)
        data = sample_2factor(model, 200, seed=4)
        self.assertEqual(data.d, 7)
        self.assertEqual(data.kinds[-1], "count")
        with self.assertRaises(ConfigError):
            sample_1factor(model, 10)

    def test_rejects_bad_probabilities(self) -> None:
        with self.assertRaises(ConfigError):
            preset_margin(PresetMargin(kind="ordinal", probabilities=[0.5, 0.6]))
        with self.assertRaises(ConfigError):
            preset_margin(PresetMargin(kind="count"))


class ScenarioTests(unittest.TestCase):
    def test_validation(self) -> None:
        with self.assertRaises(ConfigError):
            SimulationScenario(_small_model(), n=5, reps=2)
        with self.assertRaises(ConfigError):
            SimulationScenario(_small_model(), n=50, reps=0)
        with self.assertRaises(ConfigError):
            SimulationScenario(_small_model(), n=50, reps=2, fit=False, gof=True)

    def test_from_preset(self) -> None:
        scenario = scenario_from_preset(load_presets().get("gss-1f"), n=80, reps=2, seed=9)
        self.assertEqual((scenario.n, scenario.reps, scenario.seed), (80, 2, 9))
        self.assertTrue(scenario.reconstructed)
        self.assertEqual(scenario.model.d, 7)

    def test_failures_are_counted(self) -> None:
        scenario = SimulationScenario(_small_model(), n=50, reps=3)
        results = [
            ReplicateResult(0, taus=(0.5, 0.4, 0.4)),
            ReplicateResult(1, error="fit failed"),
            ReplicateResult(2, taus=(0.7, 0.4, 0.2)),
        ]
        report = summarize(scenario, results)
        self.assertEqual((report.completed, report.failures), (2, 1))
        self.assertEqual(report.failure_messages, ("fit failed",))
        first = report.parameters[0]
        self.assertAlmostEqual(first.mean, 0.6, places=12)
        self.assertAlmostEqual(first.n_bias, 50 * 0.1, delta=1e-4)
        self.assertEqual(report.parameters[2].variable, "c")


class StudyTests(unittest.TestCase):
    def test_thread_count_does_not_change_results(self) -> None:
        scenario = SimulationScenario(_small_model(), n=60, reps=3, seed=11, fit_options=QUICK)
        serial = run_study(scenario, workers=1)
        threaded = run_study(scenario, workers=3)
        self.assertEqual(serial.to_payload(), threaded.to_payload())
        self.assertEqual(serial.completed + serial.failures, 3)

    def test_full_study(self) -> None:
        scenario = SimulationScenario(
            _small_model(),
            n=80,
            reps=2,
            seed=5,
            gof=True,
            select=True,
            discrepancy=True,
            fit_options=QUICK,
            candidates=CandidateSets(positive=("frank", "gumbel"), negative=("frank",)),
        )
        report = run_study(scenario, workers=2)
        self.assertEqual(report.completed, 2)
        assert report.m2_rejection is not None and report.selection_frequencies is not None
        self.assertEqual(list(report.m2_rejection), ["0.20", "0.10", "0.05", "0.01"])
        self.assertIn("z/f1", report.selection_frequencies)
        self.assertAlmostEqual(sum(report.selection_frequencies["o/f1"].values()), 1.0)
        assert report.discrepancy is not None
        self.assertEqual(len(report.discrepancy), 2)
        self.assertIn("M2 rejection", report.to_text())

    def test_misspecified_links(self) -> None:
        scenario = SimulationScenario(_small_model(), n=60, reps=2, seed=1, misspecify_bvn=True, fit_options=QUICK)
        report = run_study(scenario)
        self.assertTrue(all(p.link == "bvn" for p in report.parameters))


if __name__ == "__main__":
    unittest.main()
