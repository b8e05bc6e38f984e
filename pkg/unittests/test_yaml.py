"""Unit tests for completing and validating pipeline configs against the defaults"""
import copy
import os
import tempfile
import unittest

import yaml

from src.commons import constants as const
from src.commons.exception import ConfigError
from src.commons.yaml_parser import (
    apply_default_config,
    apply_overrides,
    load_pipeline_config,
    read_sweep,
)
from src.libs.pipeline import PipelineSettings


class TestDefaultConfig(unittest.TestCase):
    """Test default pipeline configuration"""

    @classmethod
    def setUpClass(cls):
        cls.default_config = {}
        with open(const.PIPELINE_CFG_PATH, "r", encoding="utf-8") as default_config:
            cls.default_config = yaml.safe_load(default_config)

    def test_wrong_parameter(self):
        """Unknown key scenario"""
        user_yaml = """
        normals:
          k_neighbours: 8
        """
        user_cfg = yaml.safe_load(user_yaml)
        with self.assertRaises(ConfigError) as context:
            apply_default_config(user_cfg, self.default_config)
        self.assertIn("Wrong parameter k_neighbours in config.normals", str(context.exception))

    def test_wrong_top_level_parameter(self):
        """Unknown section scenario"""
        with self.assertRaises(ConfigError) as context:
            apply_default_config({"optimizer": {"lr": 0.1}}, self.default_config)
        self.assertIn("Wrong parameter optimizer in config", str(context.exception))

    def test_no_parameter(self):
        """Empty user config scenario"""
        out = apply_default_config(None, self.default_config)
        self.assertEqual(out, self.default_config)
        self.assertNotEqual(id(out["matching"]), id(self.default_config["matching"]))

    def test_partial_section(self):
        """Missing keys of a section come from the defaults"""
        user_yaml = """
        normals:
          adaptive_k: true
        ransac:
          max_iterations: 50
        """
        user_cfg = yaml.safe_load(user_yaml)
        out = apply_default_config(copy.deepcopy(user_cfg), self.default_config)
        expected = copy.deepcopy(self.default_config)
        expected["normals"]["adaptive_k"] = True
        expected["ransac"]["max_iterations"] = 50
        self.assertEqual(out, expected)

    def test_section_not_mapping(self):
        """A scalar in place of a section is rejected"""
        with self.assertRaises(ConfigError):
            apply_default_config({"normals": 8}, self.default_config)

    def test_overrides(self):
        """Dotted overrides replace leaves and skip None"""
        cfg = apply_overrides(
            copy.deepcopy(self.default_config),
            {"graph.k_neighbors": 4, "seed": 11, "corruption.mask_ratio": None},
        )
        self.assertEqual(cfg["graph"]["k_neighbors"], 4)
        self.assertEqual(cfg["seed"], 11)
        self.assertEqual(cfg["corruption"]["mask_ratio"], self.default_config["corruption"]["mask_ratio"])
        with self.assertRaises(ConfigError):
            apply_overrides(copy.deepcopy(self.default_config), {"graph.k": 4})

    def test_load_from_file(self):
        """Defaults <- file <- overrides"""
        with tempfile.TemporaryDirectory() as tmp:
            fpath = os.path.join(tmp, "user.yaml")
            with open(fpath, "w", encoding="utf-8") as obj:
                obj.write("seed: 3\nmatching:\n  top_k_coarse: 5\n")
            cfg = load_pipeline_config(fpath, {"seed": 9})
        self.assertEqual(cfg.seed, 9)
        self.assertEqual(cfg.matching.top_k_coarse, 5)
        self.assertEqual(cfg.matching.voxel_size, self.default_config["matching"]["voxel_size"])

    def test_missing_file(self):
        """Missing user config is a config error"""
        with self.assertRaises(ConfigError):
            load_pipeline_config("/nonexistent/i2preg.yaml")

    def test_typed_settings(self):
        """Defaults build every typed view with the documented values"""
        settings = PipelineSettings.from_config(load_pipeline_config())
        self.assertEqual(settings.normals.k_neighbors, 8)
        self.assertEqual(settings.graph.k_neighbors, 8)
        self.assertEqual((settings.weights.lambda1, settings.weights.lambda2, settings.weights.lambda3), (1.0, 1.0, 0.5))
        self.assertEqual(str(settings.warmup), "10 W 20 C")
        self.assertEqual((settings.thresholds.tau1, settings.thresholds.tau2, settings.thresholds.tau3), (0.05, 0.1, 0.1))
        self.assertEqual(settings.ransac.seed, settings.seed)
        self.assertEqual(len(settings.scene.primitives), 3)

    def test_invalid_value(self):
        """Constituent invariants are checked on load"""
        cfg = load_pipeline_config(overrides={"losses.delta_p": 2.0})
        with self.assertRaises(ConfigError):
            PipelineSettings.from_config(cfg)
        cfg = load_pipeline_config(overrides={"normals.k_neighbors": 2})
        with self.assertRaises(ConfigError):
            PipelineSettings.from_config(cfg)

    def test_sweeps(self):
        """Every sweep has default values"""
        for sweep in const.SWEEPS:
            self.assertTrue(read_sweep(sweep), sweep)
        self.assertEqual(read_sweep("k"), [2, 4, 8, 16])
        with self.assertRaises(ConfigError):
            read_sweep("learning_rate")


if __name__ == "__main__":
    unittest.main()
