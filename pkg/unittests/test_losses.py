"""Unit tests for the normal, matching, GDC and distribution losses"""
import unittest

import numpy as np
from scipy.spatial.transform import Rotation

from src.commons.exception import (
    ChannelMismatch,
    ConfigError,
    EmptyOverlap,
    EmptySample,
    NotNormalized,
    ShapeMismatch,
)
from src.libs.features import FeatureField, normalize_rows
from src.libs.geometry import NormalField
from src.libs.losses import (
    CircleLossConfig,
    LossWeights,
    WarmupSchedule,
    circle_loss,
    gdc_loss,
    gradient_check,
    matching_loss,
    mmd,
    normal_consistency_loss,
    self_similarity,
    total_loss,
    warmup_weight,
)


def unit_rows(rng, rows, cols):
    """Random unit-norm rows."""
    return normalize_rows(rng.normal(size=(rows, cols)))


class TestNormalLoss(unittest.TestCase):
    """Normal consistency"""

    @classmethod
    def setUpClass(cls):
        cls.rng = np.random.default_rng(8)

    def test_identical_and_opposite(self):
        """0 for equal fields, 2 for opposite fields"""
        normals = unit_rows(self.rng, 10, 3)
        mask = np.ones(10, bool)
        loss, _ = normal_consistency_loss(NormalField(normals, mask), NormalField(normals, mask))
        self.assertAlmostEqual(loss, 0.0, places=12)
        loss, _ = normal_consistency_loss(NormalField(normals, mask), NormalField(-normals, mask))
        self.assertAlmostEqual(loss, 2.0, places=12)

    def test_joint_mask(self):
        """Only jointly valid entries count"""
        normals = np.tile([0.0, 0.0, 1.0], (3, 1))
        other = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0]])
        loss, grad = normal_consistency_loss(
            NormalField(normals, np.array([True, False, True])), NormalField(other, np.ones(3, bool))
        )
        self.assertAlmostEqual(loss, 0.5)
        np.testing.assert_array_equal(grad[1], np.zeros(3))
        with self.assertRaises(EmptyOverlap):
            normal_consistency_loss(
                NormalField(normals, np.array([True, False, False])),
                NormalField(other, np.array([False, True, True])),
            )
        with self.assertRaises(ShapeMismatch):
            normal_consistency_loss(NormalField(normals, np.ones(3, bool)), NormalField(other[:2], np.ones(2, bool)))

    def test_gradient(self):
        """Analytic gradient agrees with central differences"""
        target = NormalField(unit_rows(self.rng, 12, 3), np.ones(12, bool))
        point = unit_rows(self.rng, 12, 3)
        _, grad = normal_consistency_loss(NormalField(point, np.ones(12, bool)), target)

        def func(values):
            return 1.0 - np.mean(np.sum(values * target.normals, axis=1))

        self.assertLess(gradient_check(func, point, grad, self.rng), 1e-4)


class TestGdcLoss(unittest.TestCase):
    """Self-similarity consistency"""

    @classmethod
    def setUpClass(cls):
        cls.rng = np.random.default_rng(12)

    def test_self_similarity(self):
        """Symmetric with unit diagonal; raw rows are rejected"""
        features = FeatureField(unit_rows(self.rng, 7, 5))
        sim = self_similarity(features)
        np.testing.assert_allclose(sim, sim.T)
        np.testing.assert_allclose(np.diag(sim), np.ones(7))
        with self.assertRaises(NotNormalized):
            self_similarity(FeatureField(self.rng.normal(size=(3, 5)) * 3))

    def test_rotation_invariance(self):
        """Features related by an orthogonal channel map have zero loss"""
        img = unit_rows(self.rng, 9, 3)
        rotated = img @ Rotation.random(random_state=2).as_matrix().T
        loss, _, _ = gdc_loss(FeatureField(img), FeatureField(rotated))
        self.assertAlmostEqual(loss, 0.0, places=10)
        loss, _, _ = gdc_loss(FeatureField(img), FeatureField(unit_rows(self.rng, 9, 3)))
        self.assertGreater(loss, 0.0)

    def test_shape_mismatch(self):
        """Both inputs must be M x C"""
        with self.assertRaises(ShapeMismatch):
            gdc_loss(FeatureField(unit_rows(self.rng, 4, 3)), FeatureField(unit_rows(self.rng, 5, 3)))

    def test_gradients(self):
        """Both gradients pass a tangent-space finite-difference check"""
        img = unit_rows(self.rng, 16, 8)
        cloud = unit_rows(self.rng, 16, 8)
        _, grad_img, grad_cloud = gdc_loss(FeatureField(img), FeatureField(cloud))
        worst_img = gradient_check(
            lambda x: gdc_loss(FeatureField(x), FeatureField(cloud))[0], img, grad_img, self.rng, tangent=True
        )
        worst_cloud = gradient_check(
            lambda y: gdc_loss(FeatureField(img), FeatureField(y))[0], cloud, grad_cloud, self.rng, tangent=True
        )
        self.assertLess(worst_img, 1e-4)
        self.assertLess(worst_cloud, 1e-4)


class TestCircleLoss(unittest.TestCase):
    """Circle and matching losses"""

    @classmethod
    def setUpClass(cls):
        cls.cfg = CircleLossConfig()

    def test_config_validation(self):
        """Margins must be ordered and gamma positive"""
        with self.assertRaises(ConfigError):
            CircleLossConfig(delta_p=2.0)
        with self.assertRaises(ConfigError):
            CircleLossConfig(gamma=0.0)

    def test_empty_sets(self):
        """No positives or no negatives gives zero"""
        self.assertEqual(circle_loss([], [1.0], self.cfg), 0.0)
        self.assertEqual(circle_loss([0.5], [], self.cfg), 0.0)

    def test_separated_floor(self):
        """Inside both margins every weight is clamped to zero"""
        loss = circle_loss([0.05], [1.5], self.cfg)
        self.assertAlmostEqual(loss, np.log(2.0) / self.cfg.gamma)

    def test_weight_clamp(self):
        """Pairs inside their margin contribute a zero logit, the rest are weighted by their gap"""
        cfg = CircleLossConfig(gamma=10.0)
        loss = circle_loss([0.05, 0.5], [1.6, 1.0], cfg)
        self.assertAlmostEqual(loss, np.log(1.0 + (1.0 + np.exp(1.6)) ** 2) / 10.0)
        self.assertAlmostEqual(circle_loss([0.0, 0.5], [2.0, 1.0], cfg), loss)

    def test_monotonic(self):
        """Loss grows with positive distance and shrinks with negative distance"""
        losses_pos = [circle_loss([d], [1.0], self.cfg) for d in (0.2, 0.5, 0.9, 1.3)]
        losses_neg = [circle_loss([0.5], [d], self.cfg) for d in (0.2, 0.6, 1.0, 1.3)]
        self.assertTrue(all(a < b for a, b in zip(losses_pos, losses_pos[1:])))
        self.assertTrue(all(a > b for a, b in zip(losses_neg, losses_neg[1:])))
        self.assertTrue(all(value >= 0 for value in losses_pos + losses_neg))

    def test_large_distances_finite(self):
        """Log-sum-exp keeps hard cases finite"""
        loss = circle_loss(np.full(50, 2.0), np.zeros(50), CircleLossConfig(gamma=512.0))
        self.assertTrue(np.isfinite(loss))

    def test_matching_loss(self):
        """Averages both directions; no anchors gives zero"""
        distances = np.array([[0.2, 1.2], [1.1, 0.3]])
        positive = np.eye(2, dtype=bool)
        negative = ~positive
        loss = matching_loss(distances, positive, negative, self.cfg)
        rows = np.mean([circle_loss([0.2], [1.2], self.cfg), circle_loss([0.3], [1.1], self.cfg)])
        cols = np.mean([circle_loss([0.2], [1.1], self.cfg), circle_loss([0.3], [1.2], self.cfg)])
        self.assertAlmostEqual(loss, 0.5 * (rows + cols))
        self.assertEqual(matching_loss(distances, positive, np.zeros((2, 2), bool), self.cfg), 0.0)
        with self.assertRaises(ShapeMismatch):
            matching_loss(distances, positive[:1], negative, self.cfg)

    def test_total_loss(self):
        """Weighted sum with default weights"""
        self.assertAlmostEqual(total_loss(1.0, 2.0, 4.0, LossWeights()), 5.0)
        with self.assertRaises(ConfigError):
            LossWeights(lambda3=-1.0)


class TestWarmup(unittest.TestCase):
    """GDC warm-up schedule"""

    def test_ramp(self):
        """0 before start, linear ramp, 1 from end"""
        schedule = WarmupSchedule(10, 20)
        self.assertEqual([warmup_weight(e, schedule) for e in (0, 9, 10, 15, 20, 30)], [0.0, 0.0, 0.0, 0.5, 1.0, 1.0])
        step = WarmupSchedule(5, 5)
        self.assertEqual((warmup_weight(4, step), warmup_weight(5, step)), (0.0, 1.0))
        self.assertEqual(warmup_weight(0, WarmupSchedule(0, 0)), 1.0)
        with self.assertRaises(ValueError):
            warmup_weight(-1, schedule)

    def test_parse(self):
        """'<start> W <end> C' notation"""
        self.assertEqual(WarmupSchedule.parse("5 W 15 C"), WarmupSchedule(5, 15))
        self.assertEqual(str(WarmupSchedule.parse(" 20w30c ")), "20 W 30 C")
        with self.assertRaises(ConfigError):
            WarmupSchedule.parse("20 C 10 W")
        with self.assertRaises(ConfigError):
            WarmupSchedule.parse("20 W 10 C")

    def test_parse_malformed(self):
        """Anything but two non-negative integers tagged W and C is rejected"""
        for text in ("", "10 W", "ten W 20 C", "10 W -5 C", "10 X 20 C", "10 W 20 C 30", "1.5 W 2 C"):
            with self.assertRaises(ConfigError, msg=text):
                WarmupSchedule.parse(text)


class TestMmd(unittest.TestCase):
    """Maximum mean discrepancy"""

    @classmethod
    def setUpClass(cls):
        cls.rng = np.random.default_rng(30)
        cls.sample = FeatureField(cls.rng.normal(size=(60, 4)))

    def test_identical(self):
        """Same sample gives zero"""
        self.assertAlmostEqual(mmd(self.sample, self.sample), 0.0, places=12)

    def test_shift(self):
        """Larger shifts give larger discrepancy at a fixed bandwidth"""
        near = FeatureField(self.sample.vectors + 0.5)
        far = FeatureField(self.sample.vectors + 2.0)
        self.assertLess(mmd(self.sample, near, 1.0), mmd(self.sample, far, 1.0))

    def test_invalid(self):
        """Empty samples, channel mismatch, bad bandwidth"""
        with self.assertRaises(EmptySample):
            mmd(FeatureField(np.empty((0, 4))), self.sample)
        with self.assertRaises(ChannelMismatch):
            mmd(self.sample, FeatureField(np.ones((3, 2))))
        with self.assertRaises(ValueError):
            mmd(self.sample, self.sample, 0.0)


if __name__ == "__main__":
    unittest.main()
