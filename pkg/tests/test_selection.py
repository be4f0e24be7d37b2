from __future__ import annotations

import unittest

from factorcopula.copulas import make_copula
from factorcopula.factor_model import FactorCopulaModel, FitOptions
from factorcopula.margins import EmpiricalMargin, fit_margins, to_uniform
from factorcopula.registry import CandidateSets
from factorcopula.selection import SelectionOptions, aic_gap, select, select_1factor, select_2factor
from factorcopula.simulate import sample

QUICK = SelectionOptions(fit=FitOptions(n_q=12, compute_se=False))


def _data(names: list[str], taus: list[float], n: int, seed: int, f2: list[float] | None = None):
    margins = tuple(EmpiricalMargin.uniform() for _ in names)
    links = tuple(make_copula(name, tau=tau) for name, tau in zip(names, taus, strict=True))
    second = tuple(make_copula("frank", tau=t) for t in f2) if f2 is not None else None
    data = sample(FactorCopulaModel(margins, links, second), n, seed=seed)
    fitted = fit_margins(data)
    return data, fitted, to_uniform(fitted, data)


class SelectionTests(unittest.TestCase):
    @classmethod
    def setUpClass(cls) -> None:
        cls.data, cls.margins, cls.scores = _data(
            ["gumbel", "gumbel", "gumbel", "joe_r1"], [0.6, 0.6, 0.5, -0.5], 300, 17
        )
        cls.candidates = CandidateSets(
            positive=("frank", "gumbel", "gumbel_s"), negative=("frank", "joe_r1", "joe_r2")
        )
        cls.result = select_1factor(cls.data, cls.margins, cls.scores, cls.candidates, QUICK)

    def test_each_step_keeps_lowest_aic(self) -> None:
        self.assertEqual(len(self.result.trace.steps), 4)
        for step in self.result.trace.steps:
            scored = [c for c in step.candidates if c.aic is not None]
            best = min(scored, key=lambda c: c.aic)  # type: ignore[arg-type, return-value]
            self.assertEqual(step.chosen, best.name)

    def test_not_worse_than_all_frank(self) -> None:
        self.assertLessEqual(self.result.fit.aic, self.result.frank_fit.aic + 1e-6)
        self.assertEqual(self.result.trace.notes, ())

    def test_routes_by_frank_sign(self) -> None:
        negative_step = self.result.trace.steps[3]
        self.assertEqual([c.name for c in negative_step.candidates], ["frank", "joe_r1", "joe_r2"])
        chosen, _ = self.result.model.copula_names()
        self.assertIn(chosen[3], self.candidates.negative)
        self.assertGreaterEqual(chosen[:3].count("gumbel"), 2)

    def test_aic_gap(self) -> None:
        gaps = aic_gap(self.result.trace)
        self.assertEqual(len(gaps), 4)
        self.assertTrue(all(gap >= 0 for gap in gaps))

    def test_trace_payload(self) -> None:
        payload = self.result.trace.to_payload()
        self.assertEqual(payload["steps"][0]["factor"], 1)  # type: ignore[index]
        self.assertEqual(len(payload["steps"][0]["candidates"]), 3)  # type: ignore[index]


class FrankOnlyTests(unittest.TestCase):
    def test_frank_only_candidates_keep_frank_model(self) -> None:
        data, margins, scores = _data(["bvn", "frank", "gumbel"], [0.4, 0.5, 0.4], 150, 2)
        frank_only = CandidateSets(positive=("frank",), negative=("frank",))
        result = select(data, margins, scores, 1, frank_only, QUICK)
        self.assertEqual(result.model.copula_names()[0], ["frank"] * 3)
        self.assertAlmostEqual(result.fit.aic, result.frank_fit.aic, places=9)

    def test_workers_do_not_change_choice(self) -> None:
        data, margins, scores = _data(["gumbel", "frank", "joe_s"], [0.5, 0.5, 0.4], 150, 3)
        candidates = CandidateSets(positive=("frank", "gumbel", "joe_s"), negative=("frank",))
        serial = select_1factor(data, margins, scores, candidates, QUICK)
        threaded = select_1factor(
            data, margins, scores, candidates, SelectionOptions(fit=QUICK.fit, workers=3)
        )
        self.assertEqual(serial.model.copula_names(), threaded.model.copula_names())
        self.assertEqual(serial.trace.to_payload(), threaded.trace.to_payload())


class TwoFactorSelectionTests(unittest.TestCase):
    def test_factor_order(self) -> None:
        data, margins, scores = _data(
            ["gumbel", "gumbel", "frank", "frank"], [0.5, 0.5, 0.4, 0.4], 120, 6, f2=[0.3, 0.2, 0.4, 0.3]
        )
        candidates = CandidateSets(positive=("frank", "gumbel"), negative=("frank",))
        options = SelectionOptions(fit=FitOptions(n_q=8, compute_se=False))
        result = select_2factor(data, margins, scores, candidates, options)
        factors = [step.factor for step in result.trace.steps]
        self.assertEqual(factors, [1, 1, 1, 1, 2, 2, 2, 2])
        self.assertEqual(result.model.factors, 2)
        self.assertLessEqual(result.fit.aic, result.frank_fit.aic + 1e-6)


if __name__ == "__main__":
    unittest.main()
