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

"""
Synthetic scenes standing in for RGB-D pairs.

Depth is ray cast from planes, boxes and spheres placed in the camera frame. The cloud
mixes back-projected depth samples with surface samples hidden from the view, and is
expressed in its own frame through a random ground-truth pose. Features are constructed
rather than learned: both ends of a ground-truth pair share a random unit vector.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.transform import Rotation

from src.commons import constants as const
from src.commons.exception import ConfigError, EmptyVisibleSet
from src.libs.features import CLOUD, IMAGE, FeatureField, normalize_rows
from src.libs.geometry import (
    CameraIntrinsics,
    DepthMap,
    NormalField,
    PointCloud,
    RigidTransform,
    backproject_pixels,
    project_points,
)

LOGGER = logging.getLogger(const.ROOT)

DEPTH_MATCH_TOL = 1e-6


def _perpendicular_axes(normal: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    helper = np.eye(3)[np.argmin(np.abs(normal))]
    first = np.cross(normal, helper)
    first /= np.linalg.norm(first)
    return first, np.cross(normal, first)


@dataclass(frozen=True, eq=False)
class Plane:
    """Square patch of a plane: center, unit normal and half edge length."""

    center: np.ndarray
    normal: np.ndarray
    half_size: float

    def __post_init__(self):
        normal = np.asarray(self.normal, dtype=float)
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        object.__setattr__(self, "normal", normal / np.linalg.norm(normal))
        if not self.half_size > 0:
            raise ConfigError(f"Plane half_size must be > 0, got {self.half_size}")

    @property
    def area(self) -> float:
        """Surface area."""
        return 4.0 * self.half_size ** 2

    def intersect(self, rays: np.ndarray) -> np.ndarray:
        """Ray parameter of the first hit for rays from the origin, inf on a miss."""
        first, second = _perpendicular_axes(self.normal)
        facing = rays @ self.normal
        with np.errstate(divide="ignore", invalid="ignore"):
            hit = (self.center @ self.normal) / facing
        hit[~np.isfinite(hit) | (hit <= 0)] = np.inf
        offset = rays * np.where(np.isfinite(hit), hit, 0.0)[:, None] - self.center
        inside = (np.abs(offset @ first) <= self.half_size) & (np.abs(offset @ second) <= self.half_size)
        hit[~inside] = np.inf
        return hit

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Uniform surface samples."""
        first, second = _perpendicular_axes(self.normal)
        coords = rng.uniform(-self.half_size, self.half_size, size=(count, 2))
        return self.center + coords[:, :1] * first + coords[:, 1:] * second


@dataclass(frozen=True, eq=False)
class Box:
    """Box with half extents, rotated by yaw about the camera y axis."""

    center: np.ndarray
    half_extents: np.ndarray
    yaw_deg: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        object.__setattr__(self, "half_extents", np.asarray(self.half_extents, dtype=float))
        if np.any(self.half_extents <= 0):
            raise ConfigError(f"Box half_extents must be > 0, got {self.half_extents}")

    @property
    def rotation(self) -> np.ndarray:
        """Box-to-camera rotation."""
        return Rotation.from_euler("y", self.yaw_deg, degrees=True).as_matrix()

    @property
    def area(self) -> float:
        """Surface area."""
        x, y, z = self.half_extents
        return 8.0 * (x * y + y * z + x * z)

    def intersect(self, rays: np.ndarray) -> np.ndarray:
        """Slab test in the box frame; rays start at the origin, outside the box."""
        origin = self.rotation.T @ -self.center
        local = rays @ self.rotation
        with np.errstate(divide="ignore", invalid="ignore"):
            near = (-self.half_extents - origin) / local
            far = (self.half_extents - origin) / local
        t_min = np.nanmax(np.minimum(near, far), axis=1)
        t_max = np.nanmin(np.maximum(near, far), axis=1)
        hit = np.where((t_max >= t_min) & (t_min > 0), t_min, np.inf)
        return hit

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Area-weighted samples over the six faces."""
        x, y, z = self.half_extents
        face_areas = np.array([y * z, y * z, x * z, x * z, x * y, x * y])
        faces = rng.choice(6, size=count, p=face_areas / face_areas.sum())
        local = rng.uniform(-1.0, 1.0, size=(count, 3)) * self.half_extents
        axis = faces // 2
        sign = np.where(faces % 2 == 0, 1.0, -1.0)
        local[np.arange(count), axis] = sign * self.half_extents[axis]
        return local @ self.rotation.T + self.center


@dataclass(frozen=True, eq=False)
class Sphere:
    """Sphere by center and radius."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if not self.radius > 0:
            raise ConfigError(f"Sphere radius must be > 0, got {self.radius}")

    @property
    def area(self) -> float:
        """Surface area."""
        return 4.0 * np.pi * self.radius ** 2

    def intersect(self, rays: np.ndarray) -> np.ndarray:
        """Nearest positive root of |t·d - c| = r."""
        quad = np.einsum("ij,ij->i", rays, rays)
        half = rays @ self.center
        disc = half ** 2 - quad * (self.center @ self.center - self.radius ** 2)
        hit = np.full(rays.shape[0], np.inf)
        touch = disc >= 0
        root = (half[touch] - np.sqrt(disc[touch])) / quad[touch]
        hit[touch] = np.where(root > 0, root, np.inf)
        return hit

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Uniform surface samples."""
        directions = normalize_rows(rng.normal(size=(count, 3)))
        return self.center + self.radius * directions


PRIMITIVES = {"plane": Plane, "box": Box, "sphere": Sphere}


def build_primitive(spec: dict):
    """Primitive from a config mapping with a 'type' key."""
    spec = dict(spec)
    kind = spec.pop("type", None)
    if kind not in PRIMITIVES:
        raise ConfigError(f"Unknown primitive type {kind}, expected one of {sorted(PRIMITIVES)}")
    try:
        return PRIMITIVES[kind](**spec)
    except TypeError as error:
        raise ConfigError(f"Bad {kind} parameters {spec}: {error}") from error


@dataclass(frozen=True)
class SceneSpec:
    """Scene geometry, image size, cloud size and pose range."""

    image_width: int = 160
    image_height: int = 120
    fx: float = 150.0
    fy: float = 150.0
    point_count: int = 2500
    hidden_fraction: float = 0.15
    max_rotation_deg: float = 30.0
    max_translation_m: float = 0.5
    primitives: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.point_count < 100:
            raise ConfigError(f"point_count must be >= 100, got {self.point_count}")
        if not self.primitives:
            raise ConfigError("A scene needs at least one primitive.")
        if not 0.0 <= self.hidden_fraction < 1.0:
            raise ConfigError(f"hidden_fraction must be in [0, 1), got {self.hidden_fraction}")
        if self.max_rotation_deg < 0 or self.max_translation_m < 0:
            raise ConfigError("Pose ranges must be >= 0.")
        object.__setattr__(
            self,
            "primitives",
            tuple(p if not isinstance(p, dict) else build_primitive(p) for p in self.primitives),
        )

    @property
    def intrinsics(self) -> CameraIntrinsics:
        """Camera with the principal point at the image center."""
        return CameraIntrinsics(
            self.fx,
            self.fy,
            (self.image_width - 1) / 2.0,
            (self.image_height - 1) / 2.0,
            self.image_width,
            self.image_height,
        )


@dataclass(frozen=True)
class CorruptionConfig:
    """Depth and feature degradation knobs."""

    gaussian_sigma_m: float = 0.0
    mask_ratio: float = 0.0
    feature_noise_sigma: float = 0.0
    outlier_fraction: float = 0.0
    seed: int = 7

    def __post_init__(self):
        if self.gaussian_sigma_m < 0 or self.feature_noise_sigma < 0:
            raise ConfigError(f"Noise levels must be >= 0: {self}")
        if not (0.0 <= self.mask_ratio <= 1.0 and 0.0 <= self.outlier_fraction <= 1.0):
            raise ConfigError(f"Ratios must be in [0, 1]: {self}")


@dataclass(frozen=True, eq=False)
class SyntheticScene:
    """Cloud, depth and ground truth of one synthetic pair."""

    cloud: PointCloud
    depth: DepthMap
    intrinsics: CameraIntrinsics
    gt_transform: RigidTransform
    gt_pixels: np.ndarray
    gt_point_indices: np.ndarray
    seed: int = 0

    @property
    def gt_correspondences(self) -> List[Tuple[Tuple[int, int], int]]:
        """((u, v), point_index) pairs."""
        return [
            ((int(u), int(v)), int(i)) for (u, v), i in zip(self.gt_pixels, self.gt_point_indices)
        ]


def pixel_grid(width: int, height: int) -> np.ndarray:
    """(H·W, 2) pixel coordinates (u, v) in row-major order."""
    rows, cols = np.mgrid[0:height, 0:width]
    return np.column_stack([cols.reshape(-1), rows.reshape(-1)]).astype(float)


def render_depth(primitives: Sequence, intrinsics: CameraIntrinsics) -> DepthMap:
    """
    Ray cast every pixel center; the nearest hit wins, ties to the earlier primitive.

    :param primitives: Primitives in the camera frame.
    :param intrinsics: Camera intrinsics.
    :return: DepthMap, invalid where no primitive is hit.
    """
    pixels = pixel_grid(intrinsics.width, intrinsics.height)
    rays = np.column_stack(
        [
            (pixels[:, 0] - intrinsics.cx) / intrinsics.fx,
            (pixels[:, 1] - intrinsics.cy) / intrinsics.fy,
            np.ones(len(pixels)),
        ]
    )
    hits = np.stack([primitive.intersect(rays) for primitive in primitives], axis=1)
    nearest = hits[np.arange(len(rays)), np.argmin(hits, axis=1)]
    values = np.where(np.isfinite(nearest), nearest, np.nan)
    return DepthMap.from_array(values.reshape(intrinsics.height, intrinsics.width))


def random_transform(rng: np.random.Generator, max_rotation_deg: float, max_translation_m: float) -> RigidTransform:
    """Rotation about a random axis up to max_rotation_deg, translation up to max_translation_m."""
    axis = normalize_rows(rng.normal(size=(1, 3)))[0]
    angle = np.deg2rad(rng.uniform(0.0, max_rotation_deg))
    direction = normalize_rows(rng.normal(size=(1, 3)))[0]
    shift = rng.uniform(0.0, max_translation_m)
    return RigidTransform(Rotation.from_rotvec(axis * angle).as_matrix(), direction * shift)


def find_correspondences(
    cloud: PointCloud, depth: DepthMap, intrinsics: CameraIntrinsics, gt_transform: RigidTransform
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Points that are the visible surface at the pixel they project to.

    A point qualifies when its rounded projection is inside the image and its depth
    agrees with the depth map within 1e-6 m. One point per pixel, the lowest index.

    :return: (M, 2) integer pixels in row-major order and (M,) point indices.
    """
    camera = gt_transform.apply(cloud.points)
    projected = project_points(intrinsics, camera)
    depth_there = depth.lookup(projected)
    visible = np.isfinite(depth_there) & (np.abs(camera[:, 2] - depth_there) <= DEPTH_MATCH_TOL)
    indices = np.flatnonzero(visible)
    pixels = np.rint(projected[indices]).astype(np.int64)
    flat = pixels[:, 1] * intrinsics.width + pixels[:, 0]
    _, first = np.unique(flat, return_index=True)
    return pixels[first], indices[first]


def generate_scene(spec: SceneSpec, seed: int) -> SyntheticScene:
    """
    Synthesize one cloud/depth pair with ground truth.

    :param spec: Scene specification.
    :param seed: Generator seed; equal seeds give identical scenes.
    :return: SyntheticScene.
    """
    rng = np.random.default_rng(seed)
    intrinsics = spec.intrinsics
    depth = render_depth(spec.primitives, intrinsics)
    valid = np.flatnonzero(depth.valid_mask.reshape(-1))
    if valid.size == 0:
        raise EmptyVisibleSet("No primitive is visible from the camera.")

    hidden_count = int(round(spec.point_count * spec.hidden_fraction))
    visible_count = min(spec.point_count - hidden_count, valid.size)
    chosen = np.sort(rng.choice(valid, size=visible_count, replace=False))
    pixels = pixel_grid(intrinsics.width, intrinsics.height)[chosen]
    visible = backproject_pixels(intrinsics, pixels, depth.values.reshape(-1)[chosen])

    areas = np.array([primitive.area for primitive in spec.primitives])
    counts = rng.multinomial(spec.point_count - visible_count, areas / areas.sum())
    hidden = [p.sample(rng, n) for p, n in zip(spec.primitives, counts) if n > 0]
    camera_points = np.concatenate([visible] + hidden, axis=0)
    camera_points = camera_points[rng.permutation(len(camera_points))]

    gt_transform = random_transform(rng, spec.max_rotation_deg, spec.max_translation_m)
    cloud = PointCloud(gt_transform.inverse().apply(camera_points))
    gt_pixels, gt_indices = find_correspondences(cloud, depth, intrinsics, gt_transform)
    if len(gt_indices) == 0:
        raise EmptyVisibleSet("No cloud point projects into the image.")
    LOGGER.info(
        "Scene seed %s: %s points, %s ground-truth correspondences", seed, len(cloud), len(gt_indices)
    )
    return SyntheticScene(cloud, depth, intrinsics, gt_transform, gt_pixels, gt_indices, seed)


def anchor_points(scene: SyntheticScene, depth: DepthMap) -> Tuple[np.ndarray, np.ndarray]:
    """
    Cloud point each ground-truth pixel lands on when lifted with an observed depth.

    Pixels whose observed depth equals the clean render keep their ground-truth point;
    perturbed pixels take the cloud point nearest to their back-projection.

    :param scene: Synthetic scene.
    :param depth: Observed depth of the image.
    :return: (G,) anchor point indices and (G,) mask of pixels that still have depth.
    """
    observed = depth.lookup(scene.gt_pixels)
    anchors = np.array(scene.gt_point_indices, dtype=np.int64)
    seen = np.isfinite(observed)
    moved = seen & (observed != scene.depth.lookup(scene.gt_pixels))
    if moved.any():
        lifted = backproject_pixels(scene.intrinsics, scene.gt_pixels[moved], observed[moved])
        _, nearest = cKDTree(scene.gt_transform.apply(scene.cloud.points)).query(lifted, k=1)
        anchors[moved] = nearest
    LOGGER.debug(
        "Scene %s: %s of %s ground-truth pixels lost depth, %s re-anchored",
        scene.seed, int((~seen).sum()), len(seen), int(moved.sum()),
    )
    return anchors, seen


def synthesize_features(
    scene: SyntheticScene,
    channels: int,
    noise: CorruptionConfig = CorruptionConfig(),
    depth: Optional[DepthMap] = None,
) -> Tuple[FeatureField, FeatureField]:
    """
    Constructed cross-modal features of a scene.

    Every point gets a random unit vector and every ground-truth pixel copies the vector
    of its point; other pixels get independent vectors. With an observed depth, pixels
    copy the vector of their anchor point instead and pixels without depth keep an
    independent vector (see anchor_points). Feature noise has standard deviation
    feature_noise_sigma/sqrt(C) per channel, so the expected noise norm is
    feature_noise_sigma whatever C is; rows are then re-normalised, and an
    outlier_fraction of image rows is redrawn.

    :param scene: Synthetic scene.
    :param channels: Channel count C >= 4.
    :param noise: Corruption settings (feature_noise_sigma, outlier_fraction, seed).
    :param depth: Observed depth, defaults to the clean render.
    :return: (image features over all pixels in row-major order, cloud features).
    """
    if channels < 4:
        raise ConfigError(f"channels must be >= 4, got {channels}")
    rng = np.random.default_rng([scene.seed, noise.seed])
    width, height = scene.intrinsics.width, scene.intrinsics.height
    cloud_vecs = normalize_rows(rng.normal(size=(len(scene.cloud), channels)))
    image_vecs = normalize_rows(rng.normal(size=(width * height, channels)))
    flat = scene.gt_pixels[:, 1] * width + scene.gt_pixels[:, 0]
    if depth is None:
        image_vecs[flat] = cloud_vecs[scene.gt_point_indices]
    else:
        anchors, seen = anchor_points(scene, depth)
        image_vecs[flat[seen]] = cloud_vecs[anchors[seen]]
    if noise.feature_noise_sigma > 0:
        scale = noise.feature_noise_sigma / np.sqrt(channels)
        image_vecs = normalize_rows(image_vecs + rng.normal(scale=scale, size=image_vecs.shape))
        cloud_vecs = normalize_rows(cloud_vecs + rng.normal(scale=scale, size=cloud_vecs.shape))
    outliers = int(round(noise.outlier_fraction * width * height))
    if outliers:
        rows = rng.choice(width * height, size=outliers, replace=False)
        image_vecs[rows] = normalize_rows(rng.normal(size=(outliers, channels)))
    return FeatureField(image_vecs, IMAGE), FeatureField(cloud_vecs, CLOUD)


def corrupt_depth(depth: DepthMap, cfg: CorruptionConfig) -> DepthMap:
    """
    Gaussian depth noise on valid pixels, then a random mask of round(ratio·H·W) pixels.

    Pixels pushed to non-positive depth become invalid.

    :param depth: Clean depth.
    :param cfg: Corruption settings (gaussian_sigma_m, mask_ratio, seed).
    :return: Corrupted DepthMap.
    """
    rng = np.random.default_rng(cfg.seed)
    values = np.array(depth.values, dtype=float)
    mask = np.array(depth.valid_mask)
    if cfg.gaussian_sigma_m > 0:
        values[mask] += rng.normal(0.0, cfg.gaussian_sigma_m, size=int(mask.sum()))
        mask &= values > 0
    masked = int(round(cfg.mask_ratio * values.size))
    if masked:
        hidden = rng.choice(values.size, size=masked, replace=False)
        mask.reshape(-1)[hidden] = False
    values[~mask] = np.nan
    return DepthMap(values, mask)


def camera_frame_normals(normals: NormalField, transform: RigidTransform) -> NormalField:
    """
    Cloud normals expressed like depth-derived normals: rotated into the camera frame, z >= 0.

    Constructed cloud features use this so both modalities embed normals in one frame,
    as a trained cross-modal matcher would.

    :param normals: Per-point normals in the cloud frame.
    :param transform: Cloud-to-camera transform.
    :return: Per-point NormalField in the camera frame.
    """
    rotated = normals.normals @ transform.rotation.T
    flip = np.where(rotated[:, 2] < 0, -1.0, 1.0)
    return NormalField(rotated * flip[:, None], normals.valid_mask)
