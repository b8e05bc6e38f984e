"""Unit tests for feature fields and local geometry enhancement"""
import unittest

import numpy as np

from src.commons.exception import ChannelMismatch, DimensionMismatch, NotNormalized
from src.libs.features import (
    CLOUD,
    IMAGE,
    FeatureField,
    add_positional_embedding,
    check_normalized,
    enhance_with_normals,
    normalize_rows,
)
from src.libs.geometry import NormalField, fourier_embed


class TestFeatureField(unittest.TestCase):
    """Feature field invariants"""

    def test_shape_and_values(self):
        """Fields are finite M x C matrices with a known carrier"""
        field = FeatureField(np.ones((4, 3)), CLOUD)
        self.assertEqual((field.count, field.channels), (4, 3))
        with self.assertRaises(ValueError):
            FeatureField(np.ones(3))
        with self.assertRaises(ValueError):
            FeatureField(np.array([[np.inf, 0.0]]))
        with self.assertRaises(ValueError):
            FeatureField(np.ones((2, 2)), "lidar")

    def test_rows(self):
        """Row selection keeps the carrier"""
        field = FeatureField(np.arange(12.0).reshape(4, 3), CLOUD)
        sub = field.rows([3, 1])
        np.testing.assert_array_equal(sub.vectors, [[9.0, 10.0, 11.0], [3.0, 4.0, 5.0]])
        self.assertEqual(sub.carrier, CLOUD)

    def test_normalize(self):
        """Unit rows, zero rows untouched"""
        rows = normalize_rows(np.array([[3.0, 4.0], [0.0, 0.0]]))
        np.testing.assert_allclose(rows, [[0.6, 0.8], [0.0, 0.0]])
        check_normalized(FeatureField(np.array([[0.6, 0.8]])))
        with self.assertRaises(NotNormalized):
            check_normalized(FeatureField(np.array([[3.0, 4.0]])))
        with self.assertRaises(NotNormalized):
            check_normalized(FeatureField(rows))


class TestEnhancement(unittest.TestCase):
    """Positional and normal enhancement"""

    @classmethod
    def setUpClass(cls):
        cls.rng = np.random.default_rng(21)

    def test_positional_embedding(self):
        """f_pos = f + embed(x) when channels agree"""
        positions = self.rng.normal(size=(5, 2))
        field = FeatureField(self.rng.normal(size=(5, 10)), IMAGE)
        out = add_positional_embedding(field, positions, 2)
        np.testing.assert_allclose(out.vectors, field.vectors + fourier_embed(positions, 2))
        with self.assertRaises(ChannelMismatch):
            add_positional_embedding(field, positions, 3)
        with self.assertRaises(DimensionMismatch):
            add_positional_embedding(field, positions[:4], 2)

    def test_enhanced_shape(self):
        """M x (C + 3(2L+1)) unit rows"""
        normals = self.rng.normal(size=(6, 3))
        normals /= np.linalg.norm(normals, axis=1, keepdims=True)
        field = FeatureField(self.rng.normal(size=(6, 16)))
        out = enhance_with_normals(field, NormalField(normals, np.ones(6, bool)), 0.3, 4)
        self.assertEqual(out.vectors.shape, (6, 16 + 27))
        check_normalized(out)

    def test_cosine_composition(self):
        """Enhanced cosine is (cos_f + w^2 cos_e) / (1 + w^2)"""
        normals = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
        base = normalize_rows(self.rng.normal(size=(3, 8)))
        weight = 0.5
        out = enhance_with_normals(
            FeatureField(base), NormalField(normals, np.ones(3, bool)), weight, 2
        ).vectors
        embedded = normalize_rows(fourier_embed(normals, 2))
        for first, second in ((0, 1), (0, 2)):
            expected = (base[first] @ base[second] + weight**2 * embedded[first] @ embedded[second]) / (1 + weight**2)
            self.assertAlmostEqual(out[first] @ out[second], expected, places=12)
        # same normal never pushes rows apart
        self.assertGreaterEqual(out[0] @ out[1], base[0] @ base[1])

    def test_invalid_normal_block(self):
        """Invalid normals contribute zeros; zero weight keeps the base features"""
        normals = NormalField(np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]), np.array([True, False]))
        base = self.rng.normal(size=(2, 5))
        out = enhance_with_normals(FeatureField(base), normals, 1.0, 1).vectors
        np.testing.assert_array_equal(out[1, 5:], np.zeros(9))
        plain = enhance_with_normals(FeatureField(base), normals, 0.0, 1).vectors
        np.testing.assert_allclose(plain[:, :5], normalize_rows(base))
        with self.assertRaises(ValueError):
            enhance_with_normals(FeatureField(base), normals, -1.0, 1)
        with self.assertRaises(DimensionMismatch):
            enhance_with_normals(FeatureField(base[:1]), normals, 1.0, 1)


if __name__ == "__main__":
    unittest.main()
