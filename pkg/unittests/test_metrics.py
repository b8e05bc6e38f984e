"""Unit tests for IR, FMR, RMSE, RR, PIR, RRE and RTE"""
import unittest

import numpy as np
from scipy.spatial.transform import Rotation

from src.commons.exception import EmptyCorrespondences, EmptyInput, InvalidRotation
from src.libs.geometry import RigidTransform
from src.libs.matching import CorrespondenceSet, PatchPair
from src.libs.metrics import (
    MetricThresholds,
    evaluate_scene,
    feature_matching_recall,
    inlier_ratio,
    patch_inlier_ratio,
    registration_recall,
    registration_rmse,
    relative_rotation_error,
    relative_translation_error,
)
from src.libs.synth import SceneSpec, generate_scene


class TestMetrics(unittest.TestCase):
    """Scene level metrics on a small synthetic pair"""

    @classmethod
    def setUpClass(cls):
        spec = SceneSpec(
            image_width=40,
            image_height=30,
            fx=40.0,
            fy=40.0,
            point_count=300,
            primitives=({"type": "plane", "center": [0.0, 0.0, 2.0], "normal": [0.0, 0.0, 1.0], "half_size": 1.5},),
        )
        cls.scene = generate_scene(spec, 3)
        cls.gt = CorrespondenceSet(
            cls.scene.gt_pixels, cls.scene.gt_point_indices, np.ones(len(cls.scene.gt_point_indices))
        )

    def test_inlier_ratio(self):
        """Ground truth is all inliers; a shuffled half drops the ratio"""
        scene = self.scene
        args = (scene.depth, scene.intrinsics, scene.cloud, scene.gt_transform)
        self.assertEqual(inlier_ratio(self.gt, *args), 1.0)
        count = len(self.gt)
        half = count // 2
        indices = self.gt.point_indices.copy()
        # partners half the image away, far beyond tau1
        indices[:half] = self.gt.point_indices[half: 2 * half]
        mixed = CorrespondenceSet(self.gt.pixels, indices, self.gt.scores)
        self.assertAlmostEqual(inlier_ratio(mixed, *args), (count - half) / count)
        with self.assertRaises(EmptyCorrespondences):
            inlier_ratio(CorrespondenceSet(), *args)

    def test_invalid_depth_outlier(self):
        """Pixels without depth count as outliers"""
        scene = self.scene
        corrs = CorrespondenceSet(
            np.vstack([self.gt.pixels[:1], [[-3.0, -3.0]]]), self.gt.point_indices[:2], np.ones(2)
        )
        self.assertEqual(inlier_ratio(corrs, scene.depth, scene.intrinsics, scene.cloud, scene.gt_transform), 0.5)

    def test_recalls(self):
        """Strict thresholds"""
        self.assertEqual(feature_matching_recall([0.05, 0.1, 0.2, 0.5]), 0.5)
        self.assertAlmostEqual(registration_recall([0.05, 0.1, 0.2]), 1 / 3)
        with self.assertRaises(EmptyInput):
            feature_matching_recall([])
        with self.assertRaises(EmptyInput):
            registration_recall([])

    def test_rmse(self):
        """Zero for the true transform, the offset for a translated one"""
        truth = self.scene.gt_transform
        self.assertEqual(registration_rmse(self.scene.cloud, truth, truth), 0.0)
        shifted = RigidTransform(truth.rotation, truth.translation + [0.03, 0.0, 0.04])
        self.assertAlmostEqual(registration_rmse(self.scene.cloud, shifted, truth), 0.05)

    def test_patch_inlier_ratio(self):
        """Bilateral overlap strictly above the threshold"""
        pairs = [PatchPair(0, 0, 0.5, 0.4), PatchPair(0, 1, 0.9, 0.3), PatchPair(1, 1, 0.2, 0.9)]
        self.assertAlmostEqual(patch_inlier_ratio(pairs), 1 / 3)
        with self.assertRaises(EmptyInput):
            patch_inlier_ratio([])

    def test_rotation_errors(self):
        """Identity gives zero; single axis rotation gives its angle"""
        rotation = Rotation.random(random_state=3).as_matrix()
        self.assertAlmostEqual(relative_rotation_error(rotation, rotation), 0.0, places=6)
        tilted = rotation @ Rotation.from_euler("Z", 12.0, degrees=True).as_matrix()
        self.assertAlmostEqual(relative_rotation_error(rotation, tilted), 12.0, places=6)
        with self.assertRaises(InvalidRotation):
            relative_rotation_error(np.eye(3), 2 * np.eye(3))
        self.assertAlmostEqual(relative_translation_error([0, 0, 0], [3, 4, 0]), 5.0)

    def test_rotation_error_convention(self):
        """RRE sums the absolute intrinsic X-Y-Z Euler angles, not the geodesic angle"""
        est = Rotation.from_euler("XYZ", [10.0, -20.0, 5.0], degrees=True).as_matrix()
        self.assertAlmostEqual(relative_rotation_error(np.eye(3), est), 35.0, places=6)
        self.assertLess(np.degrees(Rotation.from_matrix(est).magnitude()), 35.0)
        gt = Rotation.from_euler("z", 40.0, degrees=True).as_matrix()
        self.assertAlmostEqual(relative_rotation_error(gt, gt @ est), 35.0, places=6)

    def test_evaluate_scene(self):
        """Failed registration has infinite RMSE and no pose errors"""
        scene = self.scene
        args = (self.gt, scene.depth, scene.intrinsics, scene.cloud, scene.gt_transform)
        good = evaluate_scene("s0", *args, scene.gt_transform, [PatchPair(0, 0, 0.5, 0.5)])
        self.assertTrue(good.fmr_flag and good.rr_flag)
        self.assertAlmostEqual(good.rre_deg, 0.0, places=6)
        self.assertEqual((good.rte_m, good.pir), (0.0, 1.0))
        failed = evaluate_scene("s1", *args, None, thresholds=MetricThresholds(tau2=1.0))
        self.assertFalse(failed.fmr_flag or failed.rr_flag)
        self.assertIsNone(failed.pir)
        self.assertIsNone(failed.to_dict()["rmse_m"])
        self.assertEqual(failed.to_dict()["correspondences"], len(self.gt))


if __name__ == "__main__":
    unittest.main()
