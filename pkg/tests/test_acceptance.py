"""Long-running Monte Carlo and dataset reproduction checks.

Skipped unless FACTORCOPULA_SLOW=1; the dataset check additionally needs
FACTORCOPULA_PERISK_CSV pointing at the political-economic risk data with
columns BM, GDP, IJ, XPR, CRP.
"""

from __future__ import annotations

import math
import os
import unittest

import numpy as np

from factorcopula.cli import ingest
from factorcopula.copulas import independence_copula
from factorcopula.factor_model import FactorCopulaModel, FitOptions, build_model, fit, loglik
from factorcopula.gof import m2, vuong
from factorcopula.margins import EmpiricalMargin, fit_margins, to_uniform
from factorcopula.registry import CandidateSets, load_presets
from factorcopula.schemas import DiscretizeSpec, RunConfig
from factorcopula.selection import select_1factor
from factorcopula.simulate import model_from_preset, run_study, sample, scenario_from_preset

SLOW = os.getenv("FACTORCOPULA_SLOW") == "1"
PERISK_CSV = os.getenv("FACTORCOPULA_PERISK_CSV")
WORKERS = int(os.getenv("FC_WORKERS", "4"))


@unittest.skipUnless(SLOW, "set FACTORCOPULA_SLOW=1 to run Monte Carlo checks")
class MonteCarloTests(unittest.TestCase):
    def test_quadrature_size(self) -> None:
        preset = load_presets().get("political-1f")
        truth = model_from_preset(preset)
        for seed in range(10):
            data = sample(truth, 300, seed=seed)
            margins = fit_margins(data)
            model = truth.with_margins(margins)
            scores = to_uniform(margins, data)
            gap = abs(loglik(model, scores, n_q=25) - loglik(model, scores, n_q=100))
            self.assertLess(gap / data.n, 1e-4)

    def test_estimation_recovery(self) -> None:
        scenario = scenario_from_preset(
            load_presets().get("political-1f"), n=500, reps=200, seed=2024,
            fit_options=FitOptions(compute_se=False),
        )
        report = run_study(scenario, workers=WORKERS)
        self.assertGreaterEqual(report.completed, 190)
        for row in report.parameters:
            mc_se = row.n_sd / math.sqrt(report.completed)
            self.assertLess(abs(row.n_bias), 3 * mc_se + 5.0, row.variable)
            self.assertLess(row.n_sd / scenario.n, 0.05, row.variable)

    def test_m2_null_calibration(self) -> None:
        scenario = scenario_from_preset(
            load_presets().get("political-1f"), n=300, reps=500, seed=7, gof=True,
            fit_options=FitOptions(compute_se=False),
            discretize=DiscretizeSpec(continuous_categories=3),
        )
        report = run_study(scenario, workers=WORKERS)
        assert report.m2_rejection is not None and report.m2_mean is not None and report.m2_df is not None
        self.assertTrue(0.04 <= report.m2_rejection["0.05"] <= 0.11)
        self.assertLess(abs(report.m2_mean - report.m2_df) / report.m2_df, 0.05)

    def test_selection_reliability(self) -> None:
        scenario = scenario_from_preset(
            load_presets().get("political-1f"), n=500, reps=50, seed=11, fit=False, select=True,
            fit_options=FitOptions(compute_se=False),
        )
        report = run_study(scenario, workers=WORKERS)
        assert report.selection_frequencies is not None
        self.assertGreaterEqual(report.selection_frequencies["GDP/f1"].get("joe", 0.0), 0.9)

    def test_independence_recovery(self) -> None:
        margins = tuple(EmpiricalMargin.uniform() for _ in range(4))
        truth = FactorCopulaModel(margins, (independence_copula(),) * 4)
        data = sample(truth, 1000, seed=0)
        fitted = fit_margins(data)
        result = fit(build_model(fitted, ["frank"] * 4), to_uniform(fitted, data), FitOptions(compute_se=False))
        self.assertTrue(np.all(np.abs(result.taus) < 0.05))


@unittest.skipUnless(SLOW and PERISK_CSV, "set FACTORCOPULA_SLOW=1 and FACTORCOPULA_PERISK_CSV")
class PoliticalRiskDatasetTests(unittest.TestCase):
    @classmethod
    def setUpClass(cls) -> None:
        config = RunConfig.model_validate(
            {
                "variables": [
                    {"name": "BM", "kind": "continuous", "reorient": True},
                    {"name": "GDP", "kind": "continuous"},
                    {"name": "IJ", "kind": "ordinal"},
                    {"name": "XPR", "kind": "ordinal"},
                    {"name": "CRP", "kind": "ordinal"},
                ]
            }
        )
        cls.data = ingest(str(PERISK_CSV), config)
        cls.margins = fit_margins(cls.data)
        cls.scores = to_uniform(cls.margins, cls.data)
        model = build_model(cls.margins, ["bvn"] * 5, names=cls.data.names)
        cls.bvn = fit(model, cls.scores)

    def test_bvn_fit(self) -> None:
        self.assertAlmostEqual(self.bvn.loglik, -165.15, delta=0.5)

    def test_selected_model(self) -> None:
        candidates = CandidateSets(
            positive=("bvn", "frank", "gumbel", "gumbel_s", "joe", "joe_s", "t3", "t5", "t7", "t9"),
            negative=("bvn", "frank", "gumbel_r1", "gumbel_r2", "joe_r1", "joe_r2"),
        )
        selected = select_1factor(self.data, self.margins, self.scores, candidates)
        report = m2(selected.fit, self.data, DiscretizeSpec(continuous_categories=5))
        self.assertEqual(report.df, 134)
        self.assertAlmostEqual(report.statistic, 129.2, delta=2.0)
        comparison = vuong(self.bvn, selected.fit, self.data)
        self.assertGreater(comparison.mean, 0.0)


if __name__ == "__main__":
    unittest.main()
