from __future__ import annotations

import os
import unittest
from unittest import mock

from factorcopula.config import DEFAULT_NQ, load_config
from factorcopula.factor_model import FitOptions


class ConfigTests(unittest.TestCase):
    def test_defaults(self) -> None:
        with mock.patch.dict(os.environ, {}, clear=True):
            config = load_config()
        self.assertEqual(config.nq, DEFAULT_NQ)
        self.assertEqual(config.workers, 1)
        self.assertEqual(config.log_level, "INFO")
        self.assertIsNone(config.candidates_path)

    def test_overrides(self) -> None:
        env = {"FC_NQ": "40", "FC_WORKERS": "4", "FC_LOG_LEVEL": "debug", "FC_PRESETS_JSON": " p.json "}
        with mock.patch.dict(os.environ, env, clear=True):
            config = load_config()
        self.assertEqual((config.nq, config.workers, config.log_level), (40, 4, "DEBUG"))
        self.assertEqual(config.presets_path, "p.json")
        options = FitOptions.from_config(config, compute_se=False)
        self.assertEqual(options.n_q, 40)
        self.assertFalse(options.compute_se)

    def test_invalid_integer(self) -> None:
        with mock.patch.dict(os.environ, {"FC_MAX_ITER": "many"}, clear=True):
            with self.assertRaises(RuntimeError) as ctx:
                load_config()
        self.assertIn("FC_MAX_ITER", str(ctx.exception))

    def test_nq_too_small(self) -> None:
        with mock.patch.dict(os.environ, {"FC_NQ": "1"}, clear=True):
            with self.assertRaises(RuntimeError) as ctx:
                load_config()
        self.assertIn("FC_NQ", str(ctx.exception))

    def test_invalid_log_level(self) -> None:
        with mock.patch.dict(os.environ, {"FC_LOG_LEVEL": "chatty"}, clear=True):
            with self.assertRaises(RuntimeError):
                load_config()


if __name__ == "__main__":
    unittest.main()
