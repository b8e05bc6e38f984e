#!/usr/bin/python
# -*- coding: utf-8 -*-
#
# Copyright (c) 2022 Seagate Technology LLC and/or its Affiliates
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU Affero General Public License as published
# by the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the
# GNU Affero General Public License for more details.
# You should have received a copy of the GNU Affero General Public License
# along with this program. If not, see <https://www.gnu.org/licenses/>.
#
# For any questions about this software or licensing,
# please email opensource@seagate.com or cortx-questions@seagate.com.
#
#

"""Geometry library: camera model, rigid transforms, surface normals and Fourier embedding."""

import logging
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from scipy.spatial import cKDTree

from src.commons import constants as const
from src.commons.exception import (
    DegenerateNeighborhood,
    EmptyCloud,
    InvalidTransform,
    NonPositiveDepth,
)

LOGGER = logging.getLogger(const.ROOT)


def is_rotation(matrix: np.ndarray, tol: float = const.ROTATION_TOL) -> bool:
    """Check RᵀR = I and det(R) = +1 within tol."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.shape != (3, 3) or not np.all(np.isfinite(matrix)):
        return False
    if np.max(np.abs(matrix.T @ matrix - np.eye(3))) > tol:
        return False
    return abs(np.linalg.det(matrix) - 1.0) <= tol


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Rotation in SO(3) plus translation in meters, x -> R·x + t."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rotation = np.array(self.rotation, dtype=float).reshape(3, 3)
        translation = np.array(self.translation, dtype=float).reshape(3)
        if not np.all(np.isfinite(translation)):
            raise InvalidTransform(f"Translation is not finite: {translation}")
        if not is_rotation(rotation):
            raise InvalidTransform(f"Rotation is not in SO(3): {rotation.tolist()}")
        rotation.setflags(write=False)
        translation.setflags(write=False)
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "translation", translation)

    @classmethod
    def identity(cls) -> "RigidTransform":
        """Identity transform."""
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "RigidTransform":
        """Build from a 4x4 homogeneous matrix."""
        matrix = np.asarray(matrix, dtype=float)
        return cls(matrix[:3, :3], matrix[:3, 3])

    def as_matrix(self) -> np.ndarray:
        """4x4 homogeneous matrix."""
        matrix = np.eye(4)
        matrix[:3, :3] = self.rotation
        matrix[:3, 3] = self.translation
        return matrix

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform a single point (3,) or an array of points (N, 3)."""
        points = np.asarray(points, dtype=float)
        return points @ self.rotation.T + self.translation

    def inverse(self) -> "RigidTransform":
        """Inverse transform."""
        return RigidTransform(self.rotation.T, -self.rotation.T @ self.translation)

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """Transform x -> self(other(x))."""
        return RigidTransform(
            self.rotation @ other.rotation, self.rotation @ other.translation + self.translation
        )

    def to_dict(self) -> dict:
        """Row-major rotation and translation lists."""
        return {
            "rotation": [float(x) for x in self.rotation.reshape(-1)],
            "translation": [float(x) for x in self.translation],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RigidTransform":
        """Inverse of to_dict."""
        return cls(np.asarray(data["rotation"], dtype=float).reshape(3, 3), data["translation"])


def apply_transform(transform: RigidTransform, point: np.ndarray) -> np.ndarray:
    """
    Apply a rigid transform to a point.

    :param transform: Valid rigid transform.
    :param point: Vec3 (or (N, 3) array).
    :return: R·p + t.
    """
    return transform.apply(point)


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"Focal lengths must be positive: fx={self.fx}, fy={self.fy}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError(
                f"Principal point ({self.cx}, {self.cy}) outside image {self.width}x{self.height}"
            )

    @property
    def matrix(self) -> np.ndarray:
        """3x3 camera matrix K."""
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    def contains(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """True where (u, v) lies on the pixel grid [0, width-1] x [0, height-1]."""
        u, v = np.asarray(u), np.asarray(v)
        return (u >= 0) & (u <= self.width - 1) & (v >= 0) & (v <= self.height - 1)

    def to_dict(self) -> dict:
        """Plain dict for json."""
        return {
            "fx": float(self.fx),
            "fy": float(self.fy),
            "cx": float(self.cx),
            "cy": float(self.cy),
            "width": int(self.width),
            "height": int(self.height),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CameraIntrinsics":
        """Inverse of to_dict."""
        return cls(
            float(data["fx"]),
            float(data["fy"]),
            float(data["cx"]),
            float(data["cy"]),
            int(data["width"]),
            int(data["height"]),
        )


def project_point(intrinsics: CameraIntrinsics, point: np.ndarray) -> Tuple[float, float]:
    """
    Project a camera-frame point to pixel coordinates.

    :param intrinsics: Camera intrinsics.
    :param point: Vec3 with z > 0.
    :return: (u, v) in pixels.
    """
    x, y, z = (float(c) for c in np.asarray(point, dtype=float).reshape(3))
    if not z > 0:
        raise NonPositiveDepth(f"Cannot project point with depth {z}")
    return intrinsics.fx * x / z + intrinsics.cx, intrinsics.fy * y / z + intrinsics.cy


def project_points(intrinsics: CameraIntrinsics, points: np.ndarray) -> np.ndarray:
    """Vectorised projection of (N, 3) points; rows with z <= 0 come back as NaN."""
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    uv = np.full((points.shape[0], 2), np.nan)
    front = points[:, 2] > 0
    z = points[front, 2]
    uv[front, 0] = intrinsics.fx * points[front, 0] / z + intrinsics.cx
    uv[front, 1] = intrinsics.fy * points[front, 1] / z + intrinsics.cy
    return uv


def backproject_pixel(intrinsics: CameraIntrinsics, u: float, v: float, depth: float) -> np.ndarray:
    """
    Lift a pixel with known depth to a camera-frame point.

    :param intrinsics: Camera intrinsics.
    :param u: Column in pixels.
    :param v: Row in pixels.
    :param depth: Depth in meters, > 0.
    :return: ((u-cx)·d/fx, (v-cy)·d/fy, d).
    """
    if not (np.isfinite(depth) and depth > 0):
        raise NonPositiveDepth(f"Cannot back-project pixel ({u}, {v}) with depth {depth}")
    return np.array(
        [
            (u - intrinsics.cx) * depth / intrinsics.fx,
            (v - intrinsics.cy) * depth / intrinsics.fy,
            float(depth),
        ]
    )


def backproject_pixels(intrinsics: CameraIntrinsics, uv: np.ndarray, depths: np.ndarray) -> np.ndarray:
    """Vectorised back-projection of (N, 2) pixels with (N,) positive depths."""
    uv = np.asarray(uv, dtype=float).reshape(-1, 2)
    depths = np.asarray(depths, dtype=float).reshape(-1)
    if not np.all(np.isfinite(depths) & (depths > 0)):
        raise NonPositiveDepth("Cannot back-project pixels with non-positive depth.")
    return np.stack(
        [
            (uv[:, 0] - intrinsics.cx) * depths / intrinsics.fx,
            (uv[:, 1] - intrinsics.cy) * depths / intrinsics.fy,
            depths,
        ],
        axis=1,
    )


@dataclass(frozen=True, eq=False)
class PointCloud:
    """N >= 1 finite points in meters."""

    points: np.ndarray

    def __post_init__(self):
        points = np.array(self.points, dtype=float).reshape(-1, 3)
        if points.shape[0] < 1:
            raise EmptyCloud("Point cloud has no points.")
        if not np.all(np.isfinite(points)):
            raise ValueError("Point cloud has non-finite coordinates.")
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    def __len__(self) -> int:
        return self.points.shape[0]

    def transformed(self, transform: RigidTransform) -> "PointCloud":
        """Cloud mapped through transform."""
        return PointCloud(transform.apply(self.points))


@dataclass(frozen=True, eq=False)
class DepthMap:
    """H x W depth in meters with a validity mask."""

    values: np.ndarray
    valid_mask: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        mask = np.array(self.valid_mask, dtype=bool)
        if values.ndim != 2 or values.shape != mask.shape:
            raise ValueError(f"Depth {values.shape} and mask {mask.shape} must be equal 2D shapes")
        if np.any(mask & ~(np.isfinite(values) & (values > 0))):
            raise ValueError("Valid depth entries must be finite and positive.")
        values.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "valid_mask", mask)

    @classmethod
    def from_array(cls, values: np.ndarray) -> "DepthMap":
        """Mask derived from the values: NaN, inf and non-positive entries are invalid."""
        values = np.asarray(values, dtype=float)
        with np.errstate(invalid="ignore"):
            mask = np.isfinite(values) & (values > 0)
        return cls(values, mask)

    @property
    def height(self) -> int:
        """Rows."""
        return self.values.shape[0]

    @property
    def width(self) -> int:
        """Columns."""
        return self.values.shape[1]

    def lookup(self, uv: np.ndarray) -> np.ndarray:
        """Depth at rounded (N, 2) pixel positions, NaN where invalid or outside."""
        uv = np.asarray(uv, dtype=float).reshape(-1, 2)
        out = np.full(uv.shape[0], np.nan)
        finite = np.all(np.isfinite(uv), axis=1)
        cols = np.zeros(uv.shape[0], dtype=np.int64)
        rows = np.zeros(uv.shape[0], dtype=np.int64)
        cols[finite] = np.rint(uv[finite, 0]).astype(np.int64)
        rows[finite] = np.rint(uv[finite, 1]).astype(np.int64)
        inside = finite & (cols >= 0) & (cols < self.width) & (rows >= 0) & (rows < self.height)
        hit = inside.copy()
        hit[inside] = self.valid_mask[rows[inside], cols[inside]]
        out[hit] = self.values[rows[hit], cols[hit]]
        return out


@dataclass(frozen=True, eq=False)
class NormalField:
    """Per-point (N, 3) or per-pixel (H, W, 3) unit normals with an aligned validity mask."""

    normals: np.ndarray
    valid_mask: np.ndarray

    def __post_init__(self):
        normals = np.array(self.normals, dtype=float)
        mask = np.array(self.valid_mask, dtype=bool)
        if normals.shape[-1] != 3 or normals.shape[:-1] != mask.shape:
            raise ValueError(f"Normals {normals.shape} do not align with mask {mask.shape}")
        normals[~mask] = 0.0
        if mask.any():
            norms = np.linalg.norm(normals[mask], axis=-1)
            if np.max(np.abs(norms - 1.0)) > const.UNIT_NORM_TOL:
                raise ValueError("Valid normals must have unit length.")
        normals.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "normals", normals)
        object.__setattr__(self, "valid_mask", mask)

    def flat(self) -> Tuple[np.ndarray, np.ndarray]:
        """(M, 3) normals and (M,) mask regardless of carrier."""
        return self.normals.reshape(-1, 3), self.valid_mask.reshape(-1)


def knn_indices(positions: np.ndarray, k: int, exclude_self: bool = True) -> np.ndarray:
    """
    Exact k nearest neighbours of every position, ties broken by smaller index.

    A kd-tree gives the k-th distance, a ball query at that radius collects every tied
    candidate, and candidates are ordered by (distance, index).

    :param positions: (N, D) coordinates.
    :param k: Neighbour count, clipped to N-1 (N when self is kept).
    :param exclude_self: Drop the query index from its own list.
    :return: (N, min(k, N-1)) int array.
    """
    pts = np.asarray(positions, dtype=float)
    if pts.ndim != 2:
        raise ValueError(f"Positions must be (N, D), got {pts.shape}")
    count = pts.shape[0]
    k_eff = min(int(k), count - 1 if exclude_self else count)
    if k_eff <= 0:
        return np.empty((count, 0), dtype=np.int64)
    tree = cKDTree(pts)
    query_k = k_eff + 1 if exclude_self else k_eff
    dist, _ = tree.query(pts, k=query_k)
    radius = np.asarray(dist, dtype=float).reshape(count, -1)[:, -1]
    out = np.empty((count, k_eff), dtype=np.int64)
    for i in range(count):
        cand = np.asarray(tree.query_ball_point(pts[i], radius[i] * (1.0 + 1e-9) + 1e-15))
        if exclude_self:
            cand = cand[cand != i]
        cand_dist = np.linalg.norm(pts[cand] - pts[i], axis=1)
        order = np.lexsort((cand, cand_dist))
        out[i] = cand[order[:k_eff]]
    LOGGER.debug("k-NN over %s positions with k=%s", count, k_eff)
    return out


def _neighbourhood_eigen(neighbourhoods: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and eigenvectors of the centred covariance of each (m, k, 3) set."""
    centred = neighbourhoods - neighbourhoods.mean(axis=1, keepdims=True)
    covariances = np.einsum("mki,mkj->mij", centred, centred) / neighbourhoods.shape[1]
    return np.linalg.eigh(covariances)


def _is_degenerate(eigenvalues: np.ndarray) -> np.ndarray:
    gap = eigenvalues[..., 1] - eigenvalues[..., 0]
    return gap <= const.EIGEN_GAP_TOL * np.maximum(eigenvalues[..., 2], 1.0)


def orient_towards_origin(points: np.ndarray, normals: np.ndarray) -> np.ndarray:
    """
    Flip normals to face the camera origin; ties fall back to a positive leading component.

    :param points: (N, 3) positions.
    :param normals: (N, 3) unit normals.
    :return: Oriented copy of normals.
    """
    normals = np.array(normals, dtype=float)
    facing = -np.einsum("ij,ij->i", normals, points)
    scale = np.linalg.norm(points, axis=1)
    tie = np.abs(facing) <= 1e-12 * np.maximum(scale, 1.0)
    flip = (facing < 0) & ~tie
    # Deterministic sign for normals perpendicular to the viewing ray.
    lead = np.argmax(np.abs(normals) > 1e-12, axis=1)
    flip |= tie & (normals[np.arange(len(normals)), lead] < 0)
    normals[flip] *= -1.0
    return normals


def neighborhood_normal(neighbourhood: np.ndarray) -> np.ndarray:
    """
    Unit normal of a single neighbourhood (smallest-eigenvalue eigenvector, unoriented).

    :param neighbourhood: (k, 3) points.
    :return: Vec3 normal.
    """
    evals, evecs = _neighbourhood_eigen(np.asarray(neighbourhood, dtype=float)[None])
    if _is_degenerate(evals)[0]:
        raise DegenerateNeighborhood(
            f"Smallest eigenvalues {evals[0, 0]:.3e}, {evals[0, 1]:.3e} are not separable."
        )
    normal = evecs[0, :, 0]
    return normal / np.linalg.norm(normal)


def estimate_point_normals(cloud: PointCloud, k: Union[int, np.ndarray] = 8) -> NormalField:
    """
    Estimate per-point normals from the covariance of each local neighbourhood.

    The neighbourhood of a point is the point itself plus its k nearest neighbours.
    Degenerate neighbourhoods (two smallest eigenvalues inseparable) are marked invalid.

    :param cloud: Input cloud.
    :param k: Neighbour count, or an (N,) array of per-point counts.
    :return: Per-point NormalField oriented towards the origin.
    """
    pts = cloud.points
    count = len(cloud)
    sizes = np.full(count, int(k), dtype=np.int64) if np.isscalar(k) else np.asarray(k, np.int64)
    if sizes.shape != (count,):
        raise ValueError(f"Per-point k must have shape ({count},), got {sizes.shape}")
    if sizes.min() < 3:
        raise ValueError(f"k must be >= 3, got {sizes.min()}")
    if count < sizes.max() + 1:
        raise ValueError(f"Cloud of {count} points is too small for k={sizes.max()}")
    neighbours = knn_indices(pts, int(sizes.max()))
    normals = np.zeros((count, 3))
    valid = np.ones(count, dtype=bool)
    for size in np.unique(sizes):
        rows = np.flatnonzero(sizes == size)
        hood = np.concatenate([rows[:, None], neighbours[rows, :size]], axis=1)
        evals, evecs = _neighbourhood_eigen(pts[hood])
        normals[rows] = evecs[:, :, 0]
        valid[rows] = ~_is_degenerate(evals)
    normals[valid] /= np.linalg.norm(normals[valid], axis=1, keepdims=True)
    normals[valid] = orient_towards_origin(pts[valid], normals[valid])
    if not valid.all():
        LOGGER.debug("%s of %s neighbourhoods are degenerate", int((~valid).sum()), count)
    return NormalField(normals, valid)


def adaptive_neighborhood_sizes(cloud: PointCloud, k0: int = 8, k_sparse: int = 12) -> np.ndarray:
    """
    Density-aware neighbour counts: k_sparse where the local scale exceeds the mean, else k0.

    The local scale of a point is its mean distance to its k0 nearest neighbours.

    :param cloud: Input cloud with more than k0 points.
    :param k0: Initial neighbour count.
    :param k_sparse: Neighbour count used in sparse regions.
    :return: (N,) int array.
    """
    if k0 < 1:
        raise ValueError(f"k0 must be >= 1, got {k0}")
    pts = cloud.points
    neighbours = knn_indices(pts, k0)
    scale = np.linalg.norm(pts[neighbours] - pts[:, None, :], axis=2).mean(axis=1)
    mean_scale = scale.mean()
    sparse = (scale > mean_scale) & ~np.isclose(scale, mean_scale, rtol=1e-9, atol=0.0)
    LOGGER.debug("Adaptive k: %s of %s points in sparse regions", int(sparse.sum()), len(pts))
    return np.where(sparse, k_sparse, k0).astype(np.int64)


def depth_to_normals(depth: DepthMap) -> NormalField:
    """
    Per-pixel normals from central depth differences in pixel units.

    g_u = D(u+1, v) - D(u-1, v), g_v = D(u, v+1) - D(u, v-1), n = (-g_u, -g_v, 1)/|.|.
    The one pixel rim and every pixel with an invalid centre or 4-neighbour is invalid.

    :param depth: Depth map.
    :return: (H, W, 3) NormalField.
    """
    height, width = depth.values.shape
    normals = np.zeros((height, width, 3))
    valid = np.zeros((height, width), dtype=bool)
    if height < 3 or width < 3:
        return NormalField(normals, valid)
    values = np.where(depth.valid_mask, depth.values, 0.0)
    mask = depth.valid_mask
    inner = (
        mask[1:-1, 1:-1] & mask[1:-1, 2:] & mask[1:-1, :-2] & mask[2:, 1:-1] & mask[:-2, 1:-1]
    )
    grad_u = values[1:-1, 2:] - values[1:-1, :-2]
    grad_v = values[2:, 1:-1] - values[:-2, 1:-1]
    vec = np.stack([-grad_u, -grad_v, np.ones_like(grad_u)], axis=-1)
    vec /= np.linalg.norm(vec, axis=-1, keepdims=True)
    normals[1:-1, 1:-1] = vec
    valid[1:-1, 1:-1] = inner
    return NormalField(normals, valid)


def fourier_embed(x: Union[float, np.ndarray], length: int) -> np.ndarray:
    """
    Positional Fourier embedding [x, sin(2^0 x), cos(2^0 x), ..., sin(2^(L-1) x), cos(2^(L-1) x)].

    A scalar gives 2L+1 values; a position (..., D) gives the per-component embeddings
    concatenated, shape (..., D·(2L+1)).

    :param x: Scalar or array of positions.
    :param length: Embedding length L >= 0.
    :return: Embedding array.
    """
    if length < 0:
        raise ValueError(f"Embedding length must be >= 0, got {length}")
    values = np.asarray(x, dtype=float)
    scalar = values.ndim == 0
    if scalar:
        values = values.reshape(1)
    angles = values[..., None] * (2.0 ** np.arange(length))
    waves = np.stack([np.sin(angles), np.cos(angles)], axis=-1).reshape(*values.shape, 2 * length)
    embedded = np.concatenate([values[..., None], waves], axis=-1)
    return embedded.reshape(-1) if scalar else embedded.reshape(*values.shape[:-1], -1)
