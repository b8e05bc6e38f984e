"""Unit tests for PnP, P3P and RANSAC pose estimation"""
import unittest

import numpy as np
from scipy.spatial.transform import Rotation

from src.commons.exception import (
    ConfigError,
    DegenerateConfiguration,
    InsufficientPoints,
    NoConsensus,
)
from src.libs.geometry import CameraIntrinsics, RigidTransform, project_points
from src.libs.pose import (
    RansacConfig,
    nearest_rotation,
    p3p_candidates,
    pnp_ransac,
    pnp_solve,
    reprojection_errors,
)


def rotation_gap(first, second):
    """Geodesic angle between two rotations in degrees."""
    return np.degrees(Rotation.from_matrix(first.T @ second).magnitude())


class TestPnp(unittest.TestCase):
    """Pose from noiseless and contaminated correspondences"""

    @classmethod
    def setUpClass(cls):
        cls.intrinsics = CameraIntrinsics(500.0, 500.0, 320.0, 240.0, 640, 480)
        cls.truth = RigidTransform(
            Rotation.from_euler("xyz", [10.0, -20.0, 5.0], degrees=True).as_matrix(), [0.1, -0.2, 0.3]
        )
        rng = np.random.default_rng(17)
        camera = np.column_stack([rng.uniform(-1, 1, (60, 2)), rng.uniform(3, 6, 60)])
        cls.object_points = cls.truth.inverse().apply(camera)
        cls.image_points = project_points(cls.intrinsics, camera)

    def test_exact_recovery(self):
        """Noiseless correspondences give the ground-truth pose"""
        pose = pnp_solve(self.object_points, self.image_points, self.intrinsics)
        self.assertLess(rotation_gap(pose.rotation, self.truth.rotation), 1e-6)
        np.testing.assert_allclose(pose.translation, self.truth.translation, atol=1e-6)

    def test_p3p_contains_truth(self):
        """One of the P3P candidates is the true pose"""
        candidates = p3p_candidates(self.object_points[:3], self.image_points[:3], self.intrinsics)
        self.assertTrue(1 <= len(candidates) <= 4)
        gaps = [rotation_gap(rotation, self.truth.rotation) for rotation, _ in candidates]
        best = int(np.argmin(gaps))
        self.assertLess(gaps[best], 1e-4)
        np.testing.assert_allclose(candidates[best][1], self.truth.translation, atol=1e-5)

    def test_insufficient_and_degenerate(self):
        """Fewer than six points or coplanar points are rejected"""
        with self.assertRaises(InsufficientPoints):
            pnp_solve(self.object_points[:5], self.image_points[:5], self.intrinsics)
        flat = self.object_points.copy()
        flat[:, 2] = 0.0
        camera = self.truth.apply(flat)
        with self.assertRaises(DegenerateConfiguration):
            pnp_solve(flat, project_points(self.intrinsics, camera), self.intrinsics)

    def test_ransac_with_outliers(self):
        """30% of pixels pushed at least 50 px away are rejected"""
        image_points = self.image_points.copy()
        rng = np.random.default_rng(2)
        outliers = rng.choice(60, size=18, replace=False)
        image_points[outliers] += rng.uniform(50, 100, size=(18, 2)) * rng.choice([-1, 1], size=(18, 2))
        cfg = RansacConfig(max_iterations=300, seed=4)
        estimate = pnp_ransac(self.object_points, image_points, self.intrinsics, cfg)
        expected = np.ones(60, bool)
        expected[outliers] = False
        np.testing.assert_array_equal(estimate.inlier_mask, expected)
        self.assertLess(rotation_gap(estimate.transform.rotation, self.truth.rotation), 1e-6)
        self.assertLess(estimate.mean_reprojection_error, 1e-6)
        again = pnp_ransac(self.object_points, image_points, self.intrinsics, cfg)
        np.testing.assert_array_equal(again.transform.rotation, estimate.transform.rotation)
        self.assertEqual(estimate.to_dict()["inliers"], 42)

    def test_no_consensus(self):
        """Too few correspondences cannot reach consensus"""
        with self.assertRaises(NoConsensus):
            pnp_ransac(self.object_points[:5], self.image_points[:5], self.intrinsics)

    def test_pure_outliers(self):
        """Pixels unrelated to their points leave no hypothesis with enough support"""
        rng = np.random.default_rng(23)
        pixels = rng.uniform([0.0, 0.0], [640.0, 480.0], size=(12, 2))
        cfg = RansacConfig(max_iterations=200, inlier_threshold_px=2.0, seed=5)
        with self.assertRaises(NoConsensus):
            pnp_ransac(self.object_points[:12], pixels, self.intrinsics, cfg)

    def test_config_validation(self):
        """Minimal sample of four and a confidence inside (0, 1)"""
        with self.assertRaises(ConfigError):
            RansacConfig(min_sample=3)
        with self.assertRaises(ConfigError):
            RansacConfig(confidence=1.0)
        with self.assertRaises(ConfigError):
            RansacConfig(inlier_threshold_px=0.0)

    def test_helpers(self):
        """Reprojection errors and rotation projection"""
        errors = reprojection_errors(
            self.truth.rotation, self.truth.translation, self.object_points, self.image_points, self.intrinsics
        )
        self.assertLess(errors.max(), 1e-9)
        behind = reprojection_errors(np.eye(3), np.zeros(3), np.array([[0.0, 0.0, -1.0]]), np.zeros((1, 2)), self.intrinsics)
        self.assertTrue(np.isinf(behind[0]))
        noisy = self.truth.rotation + 1e-3 * np.random.default_rng(0).normal(size=(3, 3))
        fixed = nearest_rotation(noisy)
        np.testing.assert_allclose(fixed @ fixed.T, np.eye(3), atol=1e-12)
        self.assertAlmostEqual(np.linalg.det(fixed), 1.0)


if __name__ == "__main__":
    unittest.main()
