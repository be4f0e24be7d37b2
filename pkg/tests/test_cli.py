from __future__ import annotations

import contextlib
import io
import json
import os
import tempfile
import unittest
from unittest import mock

import numpy as np

from factorcopula.cli import (
    EXIT_CONFIG,
    EXIT_DATA,
    EXIT_NUMERICAL,
    EXIT_OK,
    config_hash,
    ingest,
    main,
)
from factorcopula.copulas import make_copula
from factorcopula.errors import ConfigError, DataError
from factorcopula.factor_model import FactorCopulaModel
from factorcopula.margins import EmpiricalMargin
from factorcopula.schemas import RunConfig
from factorcopula.simulate import sample


def _write(path: str, text: str) -> str:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(text)
    return path


def _config(**fields: object) -> RunConfig:
    return RunConfig.model_validate(fields)


class IngestTests(unittest.TestCase):
    def setUp(self) -> None:
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = self._tmp.name

    def tearDown(self) -> None:
        self._tmp.cleanup()

    def test_undeclared_columns_are_continuous(self) -> None:
        path = _write(os.path.join(self.tmp, "d.csv"), "a,b\n1.5,2\n2.5,3\n")
        data = ingest(path, RunConfig())
        self.assertEqual(data.names, ("a", "b"))
        self.assertEqual(data.kinds, ("continuous", "continuous"))

    def test_declared_order_and_kinds(self) -> None:
        path = _write(os.path.join(self.tmp, "d.csv"), "a,b,c\n1.5,2,0\n2.5,3,4\n")
        config = _config(variables=[{"name": "c", "kind": "count"}, {"name": "a", "kind": "continuous"}])
        data = ingest(path, config)
        self.assertEqual(data.names, ("c", "a"))
        np.testing.assert_array_equal(data.column(0), [0.0, 4.0])

    def test_missing_column(self) -> None:
        path = _write(os.path.join(self.tmp, "d.csv"), "a,b\n1,2\n")
        with self.assertRaises(ConfigError) as ctx:
            ingest(path, _config(variables=[{"name": "z", "kind": "ordinal"}]))
        self.assertIn("'z'", str(ctx.exception))

    def test_missing_value(self) -> None:
        path = _write(os.path.join(self.tmp, "d.csv"), "a,b\n1,2\n3,NA\n")
        with self.assertRaises(DataError) as ctx:
            ingest(path, RunConfig())
        self.assertIn("Row 3", str(ctx.exception))
        self.assertIn("'b'", str(ctx.exception))

    def test_unparsable_value(self) -> None:
        path = _write(os.path.join(self.tmp, "d.csv"), "a,b\n1,x\n")
        with self.assertRaises(DataError) as ctx:
            ingest(path, RunConfig())
        self.assertIn("cannot parse 'x'", str(ctx.exception))

    def test_ordinal_reindexed(self) -> None:
        path = _write(os.path.join(self.tmp, "d.csv"), "o\n0\n2\n1\n0\n")
        data = ingest(path, _config(variables=[{"name": "o", "kind": "ordinal"}]))
        np.testing.assert_array_equal(data.column(0), [1.0, 3.0, 2.0, 1.0])
        self.assertTrue(any("re-indexed" in note for note in data.notes))

    def test_reorientation(self) -> None:
        path = _write(os.path.join(self.tmp, "d.csv"), "x,o\n1.5,1\n-2,3\n")
        config = _config(
            variables=[
                {"name": "x", "kind": "continuous", "reorient": True},
                {"name": "o", "kind": "ordinal", "reorient": True},
            ]
        )
        data = ingest(path, config)
        np.testing.assert_array_equal(data.column(0), [-1.5, 2.0])
        np.testing.assert_array_equal(data.column(1), [3.0, 1.0])

    def test_count_cannot_be_reoriented(self) -> None:
        path = _write(os.path.join(self.tmp, "d.csv"), "c\n1\n2\n")
        with self.assertRaises(ConfigError):
            ingest(path, _config(variables=[{"name": "c", "kind": "count", "reorient": True}]))

    def test_config_hash(self) -> None:
        self.assertEqual(config_hash(_config(seed=1)), config_hash(_config(seed=1)))
        self.assertNotEqual(config_hash(_config(seed=1)), config_hash(_config(seed=2)))
        self.assertEqual(len(config_hash(RunConfig())), 64)


class MainTests(unittest.TestCase):
    @classmethod
    def setUpClass(cls) -> None:
        cls._tmp = tempfile.TemporaryDirectory()
        cls.tmp = cls._tmp.name
        margins = tuple(EmpiricalMargin.uniform() for _ in range(3))
        links = tuple(make_copula(name, tau=0.5) for name in ("gumbel", "frank", "bvn"))
        data = sample(FactorCopulaModel(margins, links, names=("a", "b", "c")), 80, seed=1)
        lines = ["a,b,c"] + [",".join(f"{v:.6f}" for v in row) for row in data.values]
        cls.data_path = _write(os.path.join(cls.tmp, "data.csv"), "\n".join(lines) + "\n")

    @classmethod
    def tearDownClass(cls) -> None:
        cls._tmp.cleanup()

    def _run(self, *argv: str) -> int:
        with contextlib.redirect_stdout(io.StringIO()):
            return main([*argv, "--log-level", "ERROR"])

    def _read(self, out: str, command: str) -> dict[str, object]:
        with open(os.path.join(out, f"{command}.json"), encoding="utf-8") as handle:
            return json.load(handle)

    def test_diagnose_writes_reports(self) -> None:
        out = os.path.join(self.tmp, "diagnose")
        self.assertEqual(self._run("diagnose", "--data", self.data_path, "--out", out), EXIT_OK)
        document = self._read(out, "diagnose")
        self.assertEqual(document["command"], "diagnose")
        self.assertEqual(len(document["config_sha256"]), 64)  # type: ignore[arg-type]
        self.assertEqual(document["names"], ["a", "b", "c"])
        self.assertTrue(os.path.exists(os.path.join(out, "diagnose.txt")))
        self.assertTrue(os.path.exists(os.path.join(out, "normal_scores.csv")))

    def test_fit_then_gof_from_report(self) -> None:
        config_path = _write(
            os.path.join(self.tmp, "run.json"),
            json.dumps(
                {
                    "data": self.data_path,
                    "variables": [
                        {"name": "a", "kind": "continuous", "f1": "gumbel"},
                        {"name": "b", "kind": "continuous", "f1": "frank"},
                        {"name": "c", "kind": "continuous", "f1": "bvn"},
                    ],
                }
            ),
        )
        out = os.path.join(self.tmp, "fit")
        code = self._run("fit", "--config", config_path, "--nq", "10", "--out", out)
        self.assertIn(code, (EXIT_OK, EXIT_NUMERICAL))
        report = self._read(out, "fit")
        links = [v["f1"]["copula"] for v in report["fit"]["variables"]]  # type: ignore[index]
        self.assertEqual(links, ["gumbel", "frank", "bvn"])

        gof_out = os.path.join(self.tmp, "gof")
        code = self._run(
            "gof", "--config", config_path, "--nq", "10", "--discretize", "3",
            "--model", os.path.join(out, "fit.json"), "--out", gof_out,
        )
        self.assertEqual(code, EXIT_OK)
        gof = self._read(gof_out, "gof")
        self.assertEqual(gof["m2"]["df"], 6 + 12 - 3)  # type: ignore[index]
        self.assertAlmostEqual(gof["fit"]["loglik"], report["fit"]["loglik"], places=6)  # type: ignore[index]

    def test_gof_reports_unconverged_fit(self) -> None:
        config_path = _write(
            os.path.join(self.tmp, "run_capped.json"),
            json.dumps(
                {
                    "data": self.data_path,
                    "variables": [{"name": name, "kind": "continuous", "f1": "gumbel"} for name in "abc"],
                }
            ),
        )
        out = os.path.join(self.tmp, "gof_capped")
        with mock.patch.dict(os.environ, {"FC_MAX_ITER": "1"}):
            code = self._run("gof", "--config", config_path, "--nq", "8", "--discretize", "3", "--out", out)
        self.assertEqual(code, EXIT_NUMERICAL)
        gof = self._read(out, "gof")
        self.assertFalse(gof["fit"]["converged"])  # type: ignore[index]
        self.assertIn("not_converged", gof["fit"]["flags"])  # type: ignore[index]

    def test_simulate(self) -> None:
        out = os.path.join(self.tmp, "simulate")
        code = self._run(
            "simulate", "--preset", "political-1f", "--n", "60", "--reps", "2", "--nq", "8",
            "--seed", "3", "--out", out,
        )
        self.assertEqual(code, EXIT_OK)
        study = self._read(out, "simulate")["study"]
        self.assertEqual(study["reps"], 2)  # type: ignore[index]
        self.assertEqual(study["seed"], 3)  # type: ignore[index]

    def test_missing_data_file(self) -> None:
        self.assertEqual(self._run("fit", "--data", os.path.join(self.tmp, "none.csv")), EXIT_DATA)

    def test_missing_data_argument(self) -> None:
        self.assertEqual(self._run("fit"), EXIT_CONFIG)

    def test_unknown_preset(self) -> None:
        self.assertEqual(self._run("simulate", "--preset", "nope"), EXIT_CONFIG)

    def test_invalid_config_file(self) -> None:
        path = _write(os.path.join(self.tmp, "bad.json"), json.dumps({"factors": 3}))
        self.assertEqual(self._run("fit", "--config", path), EXIT_CONFIG)

    def test_bad_data_value(self) -> None:
        path = _write(os.path.join(self.tmp, "bad.csv"), "a,b\n1,2\n3,oops\n")
        self.assertEqual(self._run("diagnose", "--data", path), EXIT_DATA)


if __name__ == "__main__":
    unittest.main()
