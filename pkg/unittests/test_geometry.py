"""Unit tests for transforms, projection, normal estimation and positional embedding"""
import unittest

import numpy as np
from scipy.spatial.transform import Rotation

from src.commons.exception import (
    DegenerateNeighborhood,
    EmptyCloud,
    InvalidTransform,
    NonPositiveDepth,
)
from src.libs.geometry import (
    CameraIntrinsics,
    DepthMap,
    NormalField,
    PointCloud,
    RigidTransform,
    adaptive_neighborhood_sizes,
    apply_transform,
    backproject_pixel,
    depth_to_normals,
    estimate_point_normals,
    fourier_embed,
    knn_indices,
    neighborhood_normal,
    project_point,
    project_points,
)


def angular_error(first, second):
    """Angle between unoriented normals in radians."""
    cosine = np.abs(np.sum(first * second, axis=-1))
    return np.arccos(np.clip(cosine, -1.0, 1.0))


class TestRigidTransform(unittest.TestCase):
    """Rigid transform and projection"""

    @classmethod
    def setUpClass(cls):
        cls.rng = np.random.default_rng(3)
        cls.intrinsics = CameraIntrinsics(500.0, 500.0, 320.0, 240.0, 640, 480)

    def test_identity(self):
        """Identity maps a point to itself"""
        point = np.array([1.0, 2.0, 3.0])
        np.testing.assert_array_equal(apply_transform(RigidTransform.identity(), point), point)

    def test_translation_only(self):
        """Pure translation adds t"""
        transform = RigidTransform(np.eye(3), [1.0, 0.0, 0.0])
        np.testing.assert_allclose(apply_transform(transform, [0.0, 0.0, 0.0]), [1.0, 0.0, 0.0])

    def test_inverse_and_compose(self):
        """T^-1(T(p)) == p and compose matches sequential application"""
        first = RigidTransform(Rotation.random(random_state=1).as_matrix(), self.rng.normal(size=3))
        second = RigidTransform(Rotation.random(random_state=2).as_matrix(), self.rng.normal(size=3))
        points = self.rng.normal(size=(20, 3))
        np.testing.assert_allclose(first.inverse().apply(first.apply(points)), points, atol=1e-12)
        np.testing.assert_allclose(
            first.compose(second).apply(points), first.apply(second.apply(points)), atol=1e-12
        )
        np.testing.assert_allclose(
            RigidTransform.from_matrix(first.as_matrix()).rotation, first.rotation
        )

    def test_invalid_rotation(self):
        """Reflections and scaled matrices are rejected"""
        with self.assertRaises(InvalidTransform):
            RigidTransform(np.diag([1.0, 1.0, -1.0]), np.zeros(3))
        with self.assertRaises(InvalidTransform):
            RigidTransform(2.0 * np.eye(3), np.zeros(3))
        with self.assertRaises(ValueError):
            RigidTransform(np.eye(3), [np.nan, 0.0, 0.0])

    def test_dict_round_trip(self):
        """to_dict / from_dict keep every bit"""
        transform = RigidTransform(Rotation.random(random_state=5).as_matrix(), [0.1, -0.2, 0.3])
        again = RigidTransform.from_dict(transform.to_dict())
        np.testing.assert_array_equal(again.rotation, transform.rotation)
        np.testing.assert_array_equal(again.translation, transform.translation)

    def test_project_principal_point(self):
        """Point on the optical axis projects to the principal point"""
        self.assertEqual(project_point(self.intrinsics, [0.0, 0.0, 2.0]), (320.0, 240.0))

    def test_project_behind_camera(self):
        """Non-positive depth cannot be projected"""
        with self.assertRaises(NonPositiveDepth):
            project_point(self.intrinsics, [0.0, 0.0, -1.0])
        with self.assertRaises(NonPositiveDepth):
            project_point(self.intrinsics, [0.0, 0.0, 0.0])
        uv = project_points(self.intrinsics, [[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]])
        self.assertTrue(np.all(np.isfinite(uv[0])))
        self.assertTrue(np.all(np.isnan(uv[1])))

    def test_backproject_inverse(self):
        """Projection undoes back-projection"""
        for _ in range(50):
            u, v = self.rng.uniform(0, 639), self.rng.uniform(0, 479)
            depth = self.rng.uniform(0.1, 10.0)
            point = backproject_pixel(self.intrinsics, u, v, depth)
            np.testing.assert_allclose(project_point(self.intrinsics, point), (u, v), atol=1e-9)
        with self.assertRaises(NonPositiveDepth):
            backproject_pixel(self.intrinsics, 10.0, 10.0, 0.0)

    def test_intrinsics_validation(self):
        """Principal point must be inside the image"""
        with self.assertRaises(ValueError):
            CameraIntrinsics(500.0, 500.0, 700.0, 240.0, 640, 480)
        with self.assertRaises(ValueError):
            CameraIntrinsics(0.0, 500.0, 320.0, 240.0, 640, 480)

    def test_empty_cloud(self):
        """A cloud needs at least one point"""
        with self.assertRaises(EmptyCloud):
            PointCloud(np.empty((0, 3)))

    def test_depth_lookup(self):
        """Lookup rounds to the pixel grid and returns NaN on invalid or outside pixels"""
        values = np.array([[1.0, 2.0], [np.nan, 4.0]])
        depth = DepthMap.from_array(values)
        found = depth.lookup([[0.2, 0.1], [1.4, 0.6], [0.0, 1.0], [5.0, 5.0]])
        self.assertEqual(found[0], 1.0)
        self.assertEqual(found[1], 4.0)
        self.assertTrue(np.isnan(found[2]))
        self.assertTrue(np.isnan(found[3]))


class TestKnn(unittest.TestCase):
    """Exact k nearest neighbours"""

    def test_brute_force_oracle(self):
        """kd-tree neighbours equal a (distance, index) sorted brute force"""
        rng = np.random.default_rng(11)
        for _ in range(20):
            count = int(rng.integers(5, 200))
            points = np.round(rng.uniform(0, 5, size=(count, 3)))
            k = int(rng.integers(1, 10))
            found = knn_indices(points, k)
            for i in range(count):
                dist = np.linalg.norm(points - points[i], axis=1)
                order = [j for j in np.lexsort((np.arange(count), dist)) if j != i][:k]
                self.assertEqual(list(found[i]), order)

    def test_equal_distance_ties(self):
        """Equidistant neighbours are ordered by index"""
        points = np.array([[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [5.0, 5.0]])
        self.assertEqual(knn_indices(points, 2)[0].tolist(), [1, 2])
        self.assertEqual(knn_indices(points, 3)[0].tolist(), [1, 2, 3])
        self.assertEqual(knn_indices(points, 2)[1].tolist(), [0, 3])

    def test_saturates(self):
        """k larger than N-1 returns every other point"""
        found = knn_indices(np.arange(12, dtype=float).reshape(4, 3), 10)
        self.assertEqual(found.shape, (4, 3))


class TestNormals(unittest.TestCase):
    """Point and depth normals"""

    @classmethod
    def setUpClass(cls):
        cls.rng = np.random.default_rng(5)

    def test_plane_normals(self):
        """Points on z = 2 give normals (0, 0, -1) facing the origin"""
        points = np.column_stack([self.rng.uniform(-1, 1, (300, 2)), np.full(300, 2.0)])
        normals = estimate_point_normals(PointCloud(points), 8)
        self.assertTrue(normals.valid_mask.all())
        np.testing.assert_allclose(normals.normals, np.tile([0.0, 0.0, -1.0], (300, 1)), atol=1e-6)

    def test_sphere_normals(self):
        """Noiseless 2000 point unit sphere with k = 8: median angular error within 1.5 degrees"""
        directions = self.rng.normal(size=(2000, 3))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        center = np.array([0.0, 0.0, 5.0])
        normals = estimate_point_normals(PointCloud(center + directions), 8)
        errors = angular_error(normals.normals[normals.valid_mask], directions[normals.valid_mask])
        self.assertGreater(normals.valid_mask.mean(), 0.99)
        self.assertLess(np.degrees(np.median(errors)), 1.5)

    def test_invariance(self):
        """Normals follow rotation and are unchanged by translation and scale, up to sign"""
        planar = self.rng.uniform(-1, 1, size=(200, 2))
        height = 4.0 + 0.3 * planar[:, 0] ** 2 + 0.1 * planar[:, 1] ** 2
        points = np.column_stack([planar, height])
        base = estimate_point_normals(PointCloud(points), 8)
        rotation = Rotation.random(random_state=9).as_matrix()
        moved = estimate_point_normals(PointCloud(points @ rotation.T + [1.0, -2.0, 0.5]), 8)
        scaled = estimate_point_normals(PointCloud(points * 3.0), 8)
        mask = base.valid_mask & moved.valid_mask & scaled.valid_mask
        self.assertLess(angular_error(moved.normals[mask], base.normals[mask] @ rotation.T).max(), 1e-6)
        self.assertLess(angular_error(scaled.normals[mask], base.normals[mask]).max(), 1e-6)

    def test_collinear_degenerate(self):
        """Collinear neighbourhood has no normal"""
        line = np.column_stack([np.arange(9.0), np.zeros(9), np.zeros(9)])
        with self.assertRaises(DegenerateNeighborhood):
            neighborhood_normal(line)
        normals = estimate_point_normals(PointCloud(line + [0.0, 0.0, 1.0]), 3)
        self.assertFalse(normals.valid_mask.any())

    def test_k_validation(self):
        """k must be at least 3 and the cloud larger than k"""
        cloud = PointCloud(self.rng.normal(size=(5, 3)))
        with self.assertRaises(ValueError):
            estimate_point_normals(cloud, 2)
        with self.assertRaises(ValueError):
            estimate_point_normals(cloud, 8)

    def test_adaptive_sizes(self):
        """Sparse points get the larger neighbourhood"""
        dense = self.rng.uniform(0, 0.1, size=(200, 3))
        sparse = self.rng.uniform(5, 10, size=(50, 3))
        sizes = adaptive_neighborhood_sizes(PointCloud(np.vstack([dense, sparse])), 8, 12)
        self.assertTrue(np.all(sizes[:200] == 8))
        self.assertTrue(np.all(sizes[200:] == 12))
        uniform = adaptive_neighborhood_sizes(PointCloud(np.arange(60.0).reshape(20, 3)), 2, 4)
        self.assertTrue(set(np.unique(uniform)) <= {2, 4})

    def test_constant_depth(self):
        """Constant depth gives (0, 0, 1) inside the rim"""
        normals = depth_to_normals(DepthMap.from_array(np.full((6, 7), 2.0)))
        self.assertFalse(normals.valid_mask[0].any() or normals.valid_mask[:, 0].any())
        self.assertTrue(normals.valid_mask[1:-1, 1:-1].all())
        np.testing.assert_allclose(normals.normals[1:-1, 1:-1], np.tile([0.0, 0.0, 1.0], (4, 5, 1)), atol=1e-12)

    def test_linear_ramp(self):
        """D = a·u + b·v + c gives (-2a, -2b, 1) normalised, independent of c"""
        rows, cols = np.mgrid[0:8, 0:9]
        slope_u, slope_v = 0.05, -0.02
        expected = np.array([-2 * slope_u, -2 * slope_v, 1.0])
        expected /= np.linalg.norm(expected)
        for offset in (1.0, 3.0):
            depth = DepthMap.from_array(slope_u * cols + slope_v * rows + offset)
            normals = depth_to_normals(depth)
            np.testing.assert_allclose(normals.normals[1:-1, 1:-1], np.broadcast_to(expected, (6, 7, 3)), atol=1e-9)

    def test_invalid_neighbour(self):
        """An invalid pixel invalidates its 4-neighbours"""
        values = np.full((5, 5), 1.0)
        values[2, 2] = np.nan
        normals = depth_to_normals(DepthMap.from_array(values))
        for row, col in ((2, 2), (1, 2), (3, 2), (2, 1), (2, 3)):
            self.assertFalse(normals.valid_mask[row, col])
        self.assertTrue(normals.valid_mask[1, 1])

    def test_rim_and_mask_adjacent(self):
        """Whole rim plus a masked pixel's cross are invalid, diagonal neighbours stay valid"""
        values = np.full((6, 7), 2.0)
        values[3, 3] = 0.0
        normals = depth_to_normals(DepthMap.from_array(values))
        valid = normals.valid_mask
        self.assertFalse(valid[0].any() or valid[-1].any() or valid[:, 0].any() or valid[:, -1].any())
        for row, col in ((3, 3), (2, 3), (4, 3), (3, 2), (3, 4)):
            self.assertFalse(valid[row, col])
        for row, col in ((2, 2), (2, 4), (4, 2), (4, 4)):
            self.assertTrue(valid[row, col])
        self.assertEqual(int(valid.sum()), 4 * 5 - 5)
        np.testing.assert_array_equal(normals.normals[~valid], 0.0)

    def test_normal_field_validation(self):
        """Valid normals must be unit length; invalid entries are zeroed"""
        with self.assertRaises(ValueError):
            NormalField(np.array([[0.0, 0.0, 2.0]]), np.array([True]))
        field = NormalField(np.array([[0.0, 0.0, 2.0]]), np.array([False]))
        np.testing.assert_array_equal(field.normals, [[0.0, 0.0, 0.0]])


class TestFourierEmbed(unittest.TestCase):
    """Positional embedding"""

    def test_zero(self):
        """embed(0) = [0, 0, 1, 0, 1, ...]"""
        np.testing.assert_allclose(fourier_embed(0.0, 3), [0, 0, 1, 0, 1, 0, 1])

    def test_length_zero(self):
        """L = 0 keeps the raw value"""
        np.testing.assert_allclose(fourier_embed(1.5, 0), [1.5])

    def test_half_pi(self):
        """embed(pi/2) with L = 1"""
        np.testing.assert_allclose(fourier_embed(np.pi / 2, 1), [np.pi / 2, 1.0, 0.0], atol=1e-15)

    def test_vector_shape(self):
        """(N, D) positions give (N, D·(2L+1)) embeddings"""
        positions = np.random.default_rng(0).normal(size=(4, 3))
        embedded = fourier_embed(positions, 2)
        self.assertEqual(embedded.shape, (4, 15))
        np.testing.assert_allclose(embedded[1, 5:10], fourier_embed(positions[1, 1], 2))


if __name__ == "__main__":
    unittest.main()
