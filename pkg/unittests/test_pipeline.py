"""Unit tests for single scene registration under depth corruption and graph size changes"""
import unittest

import numpy as np

from src.commons.yaml_parser import load_pipeline_config
from src.libs.pipeline import PipelineSettings, evaluate_registration, register_scene
from src.libs.synth import generate_scene


def settings_with(**overrides):
    """Default pipeline settings with dotted-key overrides ('graph__k_neighbors' style)."""
    dotted = {key.replace("__", "."): value for key, value in overrides.items()}
    return PipelineSettings.from_config(load_pipeline_config(None, dotted))


class TestRegisterScene(unittest.TestCase):
    """Corruption and graph settings reach the selected correspondences"""

    @classmethod
    def setUpClass(cls):
        cls.settings = settings_with()
        cls.scene = generate_scene(cls.settings.scene, cls.settings.seed)
        cls.clean = register_scene(cls.scene, cls.settings, "clean")

    def evaluate(self, settings):
        """Register the shared scene with other settings and score it."""
        result = register_scene(self.scene, settings, "variant")
        return result, evaluate_registration(self.scene, result, settings.thresholds)

    def test_clean_scene(self):
        """Uncorrupted depth registers with almost only inliers"""
        evaluation = evaluate_registration(self.scene, self.clean, self.settings.thresholds)
        self.assertTrue(self.clean.registered)
        self.assertGreater(evaluation.inlier_ratio, 0.9)

    def test_depth_noise_lowers_inliers(self):
        """Pixels lifted with noisy depth pick wrong points, the inlier ratio drops"""
        clean = evaluate_registration(self.scene, self.clean, self.settings.thresholds)
        _, noisy = self.evaluate(settings_with(corruption__gaussian_sigma_m=0.2))
        self.assertLess(noisy.inlier_ratio, clean.inlier_ratio)
        self.assertLessEqual(noisy.rr_flag, clean.rr_flag)

    def test_depth_mask_drops_correspondences(self):
        """Masked pixels lose their shared features and their correspondences"""
        masked, _ = self.evaluate(settings_with(corruption__mask_ratio=0.5))
        self.assertLess(len(masked.correspondences), len(self.clean.correspondences))

    def test_graph_size_changes_scores(self):
        """Refined correspondence scores depend on the k-NN graph size"""
        small, _ = self.evaluate(settings_with(graph__k_neighbors=2))
        large, _ = self.evaluate(settings_with(graph__k_neighbors=16))
        self.assertEqual(len(small.correspondences), len(large.correspondences))
        self.assertFalse(np.allclose(small.correspondences.scores, large.correspondences.scores))

    def test_score_floor_filters(self):
        """Raising the refined score floor keeps a subset of the correspondences"""
        floor = float(np.median(self.clean.correspondences.scores))
        strict, _ = self.evaluate(settings_with(matching__gdc_min_score=floor))
        self.assertLess(len(strict.correspondences), len(self.clean.correspondences))
        self.assertTrue(np.all(strict.correspondences.scores >= floor))


if __name__ == "__main__":
    unittest.main()
