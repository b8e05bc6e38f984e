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

"""Coarse patch-level and fine point-level cross-modal matching, plus supervision labels."""

import logging
from dataclasses import dataclass, field
from typing import Iterator, List, NamedTuple, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from src.commons import constants as const
from src.commons.exception import ChannelMismatch, ConfigError, EmptyPatch
from src.libs.features import FeatureField, normalize_rows
from src.libs.geometry import (
    CameraIntrinsics,
    DepthMap,
    PointCloud,
    RigidTransform,
    backproject_pixel,
    backproject_pixels,
    project_points,
)

LOGGER = logging.getLogger(const.ROOT)


@dataclass(frozen=True)
class MatchingConfig:
    """Patch layout, selection rules and supervision radii."""

    patch_grid: Tuple[int, int] = (6, 8)
    voxel_size: float = 0.25
    top_k_coarse: int = 3
    min_fine_score: float = 0.6
    gdc_min_score: float = 0.0
    positive_radius_3d: float = 0.0375
    positive_radius_2d: float = 8.0
    negative_radius_3d: float = 0.10
    negative_radius_2d: float = 12.0
    patch_positive_overlap: float = 0.3
    patch_negative_overlap: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, "patch_grid", tuple(int(g) for g in self.patch_grid))
        if len(self.patch_grid) != 2 or min(self.patch_grid) < 1:
            raise ConfigError(f"patch_grid must be two positive ints, got {self.patch_grid}")
        if not self.voxel_size > 0:
            raise ConfigError(f"voxel_size must be > 0, got {self.voxel_size}")
        if self.top_k_coarse < 1:
            raise ConfigError(f"top_k_coarse must be >= 1, got {self.top_k_coarse}")
        if not (
            self.positive_radius_3d < self.negative_radius_3d
            and self.positive_radius_2d < self.negative_radius_2d
        ):
            raise ConfigError("Positive radii must be smaller than negative radii.")
        if not self.patch_negative_overlap <= self.patch_positive_overlap:
            raise ConfigError("Patch negative overlap must not exceed positive overlap.")


@dataclass(frozen=True, eq=False)
class ScoreMap:
    """M_img x M_cloud cosine similarities."""

    scores: np.ndarray


class CoarseMatch(NamedTuple):
    """Selected patch pair."""

    img_patch: int
    cloud_patch: int
    score: float


@dataclass(frozen=True)
class Correspondence:
    """Putative pixel-point correspondence."""

    pixel: Tuple[float, float]
    point_index: int
    score: float


@dataclass(frozen=True, eq=False)
class CorrespondenceSet:
    """Column-oriented correspondences: (M, 2) pixels, (M,) point indices and scores."""

    pixels: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))
    point_indices: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    scores: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        pixels = np.asarray(self.pixels, dtype=float).reshape(-1, 2)
        indices = np.asarray(self.point_indices, dtype=np.int64).reshape(-1)
        scores = np.asarray(self.scores, dtype=float).reshape(-1)
        if not pixels.shape[0] == indices.shape[0] == scores.shape[0]:
            raise ValueError("Correspondence columns must have equal length.")
        object.__setattr__(self, "pixels", pixels)
        object.__setattr__(self, "point_indices", indices)
        object.__setattr__(self, "scores", scores)

    def __len__(self) -> int:
        return self.point_indices.shape[0]

    def __iter__(self) -> Iterator[Correspondence]:
        for pixel, index, score in zip(self.pixels, self.point_indices, self.scores):
            yield Correspondence((float(pixel[0]), float(pixel[1])), int(index), float(score))

    def subset(self, selector: np.ndarray) -> "CorrespondenceSet":
        """Rows picked by a boolean mask or index array."""
        return CorrespondenceSet(
            self.pixels[selector], self.point_indices[selector], self.scores[selector]
        )

    def with_scores(self, scores: np.ndarray) -> "CorrespondenceSet":
        """Same pairs, new scores."""
        return CorrespondenceSet(self.pixels, self.point_indices, scores)

    @classmethod
    def concatenate(cls, sets: Sequence["CorrespondenceSet"]) -> "CorrespondenceSet":
        """Stack several sets."""
        if not sets:
            return cls()
        return cls(
            np.concatenate([s.pixels for s in sets]),
            np.concatenate([s.point_indices for s in sets]),
            np.concatenate([s.scores for s in sets]),
        )


@dataclass(frozen=True)
class PatchPair:
    """Coarse patch pair with its bilateral overlap."""

    img_patch_id: int
    cloud_patch_id: int
    overlap_2d: float
    overlap_3d: float

    def __post_init__(self):
        for ratio in (self.overlap_2d, self.overlap_3d):
            if not 0.0 <= ratio <= 1.0:
                raise ValueError(f"Overlap ratio {ratio} outside [0, 1]")

    @property
    def overlap(self) -> float:
        """Bilateral overlap: the smaller side."""
        return min(self.overlap_2d, self.overlap_3d)


def cosine_score_map(f_img: FeatureField, f_cloud: FeatureField) -> ScoreMap:
    """
    Cosine similarity of every image row with every cloud row.

    :param f_img: M_img x C features.
    :param f_cloud: M_cloud x C features.
    :return: ScoreMap; rows or columns of zero norm score 0.
    """
    if f_img.channels != f_cloud.channels:
        raise ChannelMismatch(f"Channel counts differ: {f_img.channels} vs {f_cloud.channels}")
    scores = normalize_rows(f_img.vectors) @ normalize_rows(f_cloud.vectors).T
    return ScoreMap(np.clip(scores, -1.0, 1.0))


def _top_k_columns(scores: np.ndarray, top_k: int) -> np.ndarray:
    """Boolean mask of each row's top_k columns, ties to the smaller column index."""
    cols = scores.shape[1]
    order = np.lexsort((np.broadcast_to(np.arange(cols), scores.shape), -scores), axis=1)
    mask = np.zeros(scores.shape, dtype=bool)
    np.put_along_axis(mask, order[:, : min(top_k, cols)], True, axis=1)
    return mask


def coarse_match(scores: ScoreMap, top_k: int) -> List[CoarseMatch]:
    """
    Mutual top-k selection over a score map.

    :param scores: Patch-level score map.
    :param top_k: Per-row and per-column budget, >= 1.
    :return: Pairs sorted by descending score, ties by (i, j).
    """
    if top_k < 1:
        raise ValueError(f"top_k must be >= 1, got {top_k}")
    matrix = scores.scores
    if matrix.size == 0:
        return []
    mutual = _top_k_columns(matrix, top_k) & _top_k_columns(matrix.T, top_k).T
    rows, cols = np.nonzero(mutual)
    order = np.lexsort((cols, rows, -matrix[rows, cols]))
    pairs = [CoarseMatch(int(rows[o]), int(cols[o]), float(matrix[rows[o], cols[o]])) for o in order]
    LOGGER.debug("Coarse matching kept %s mutual top-%s pairs", len(pairs), top_k)
    return pairs


def fine_match(
    f_img_patch: FeatureField,
    f_cloud_patch: FeatureField,
    pixel_coords: np.ndarray,
    point_indices: np.ndarray,
    min_score: float = 0.0,
) -> CorrespondenceSet:
    """
    Mutual-argmax matching inside a patch pair.

    :param f_img_patch: Pixel features of the image patch.
    :param f_cloud_patch: Point features of the cloud patch.
    :param pixel_coords: (P, 2) pixel coordinates aligned with f_img_patch rows.
    :param point_indices: (Q,) cloud indices aligned with f_cloud_patch rows.
    :param min_score: Score floor.
    :return: One correspondence per surviving pixel, in pixel-row order.
    """
    pixel_coords = np.asarray(pixel_coords, dtype=float).reshape(-1, 2)
    point_indices = np.asarray(point_indices, dtype=np.int64).reshape(-1)
    if pixel_coords.shape[0] != f_img_patch.count or point_indices.shape[0] != f_cloud_patch.count:
        raise ValueError("Coordinates must align with feature rows.")
    if f_img_patch.count == 0 or f_cloud_patch.count == 0:
        return CorrespondenceSet()
    scores = cosine_score_map(f_img_patch, f_cloud_patch).scores
    best_col = np.argmax(scores, axis=1)
    best_row = np.argmax(scores, axis=0)
    rows = np.arange(scores.shape[0])
    best = scores[rows, best_col]
    keep = (best_row[best_col] == rows) & (best >= min_score)
    return CorrespondenceSet(pixel_coords[keep], point_indices[best_col[keep]], best[keep])


def _pair_distances(
    pixels: np.ndarray,
    depths: np.ndarray,
    intrinsics: CameraIntrinsics,
    points: np.ndarray,
    gt_transform: RigidTransform,
) -> Tuple[np.ndarray, np.ndarray]:
    """3D and 2D residuals of pairs; points behind the camera get an infinite 2D residual."""
    in_camera = gt_transform.apply(points)
    lifted = backproject_pixels(intrinsics, pixels, depths)
    dist_3d = np.linalg.norm(in_camera - lifted, axis=1)
    projected = project_points(intrinsics, in_camera)
    dist_2d = np.linalg.norm(projected - pixels, axis=1)
    return dist_3d, np.where(np.isnan(dist_2d), np.inf, dist_2d)


def _classify(dist_3d: np.ndarray, dist_2d: np.ndarray, cfg: MatchingConfig) -> np.ndarray:
    labels = np.full(dist_3d.shape, const.IGNORED, dtype=object)
    negative = (dist_3d > cfg.negative_radius_3d) | (dist_2d > cfg.negative_radius_2d)
    positive = (dist_3d < cfg.positive_radius_3d) & (dist_2d < cfg.positive_radius_2d)
    labels[negative] = const.NEGATIVE
    labels[positive] = const.POSITIVE
    return labels


def label_fine_pairs(
    corr: Correspondence,
    depth_at_pixel: float,
    intrinsics: CameraIntrinsics,
    cloud: PointCloud,
    gt_transform: RigidTransform,
    cfg: MatchingConfig = MatchingConfig(),
) -> str:
    """
    Label a correspondence positive, negative or ignored from its 3D and 2D residuals.

    :param corr: Correspondence to label.
    :param depth_at_pixel: Depth at the pixel, > 0.
    :param intrinsics: Camera intrinsics.
    :param cloud: Point cloud the index refers to.
    :param gt_transform: Ground-truth cloud-to-camera transform.
    :param cfg: Radii.
    :return: One of constants POSITIVE, NEGATIVE, IGNORED.
    """
    backproject_pixel(intrinsics, corr.pixel[0], corr.pixel[1], depth_at_pixel)
    dist_3d, dist_2d = _pair_distances(
        np.asarray([corr.pixel], dtype=float),
        np.asarray([depth_at_pixel], dtype=float),
        intrinsics,
        cloud.points[[corr.point_index]],
        gt_transform,
    )
    return str(_classify(dist_3d, dist_2d, cfg)[0])


def label_correspondences(
    corrs: CorrespondenceSet,
    depth: DepthMap,
    intrinsics: CameraIntrinsics,
    cloud: PointCloud,
    gt_transform: RigidTransform,
    cfg: MatchingConfig = MatchingConfig(),
) -> np.ndarray:
    """Vectorised labels of a correspondence set; pixels without valid depth are ignored."""
    labels = np.full(len(corrs), const.IGNORED, dtype=object)
    depths = depth.lookup(corrs.pixels)
    known = np.isfinite(depths)
    if known.any():
        dist_3d, dist_2d = _pair_distances(
            corrs.pixels[known],
            depths[known],
            intrinsics,
            cloud.points[corrs.point_indices[known]],
            gt_transform,
        )
        labels[known] = _classify(dist_3d, dist_2d, cfg)
    return labels


def _close_pairs(
    pixels: np.ndarray,
    lifted: np.ndarray,
    moved: np.ndarray,
    intrinsics: CameraIntrinsics,
    radius: float,
    pixel_radius: float,
) -> Tuple[np.ndarray, np.ndarray]:
    """(pixel row, point row) pairs within radius in 3D and within pixel_radius in the image."""
    close = cKDTree(lifted).sparse_distance_matrix(cKDTree(moved), radius, output_type="ndarray")
    close = close[close["v"] < radius]
    rows, cols = close["i"].astype(np.int64), close["j"].astype(np.int64)
    gap = np.linalg.norm(project_points(intrinsics, moved[cols]) - pixels[rows], axis=1)
    near = np.where(np.isnan(gap), np.inf, gap) < pixel_radius
    return rows[near], cols[near]


def patch_overlap(
    img_patch_pixels: np.ndarray,
    cloud_patch_points: np.ndarray,
    depth: DepthMap,
    intrinsics: CameraIntrinsics,
    gt_transform: RigidTransform,
    radius: float = 0.0375,
    img_patch_id: int = 0,
    cloud_patch_id: int = 0,
    pixel_radius: float = 8.0,
) -> PatchPair:
    """
    Bilateral overlap of an image patch and a cloud patch.

    A pixel overlaps when a patch point, moved into the camera frame, lies within radius of
    the pixel's back-projection and projects within pixel_radius of the pixel; a point
    overlaps when such a pixel exists. Pixels without valid depth never overlap.

    :param img_patch_pixels: (P, 2) pixel coordinates.
    :param cloud_patch_points: (Q, 3) cloud-frame points.
    :param depth: Depth map of the image.
    :param intrinsics: Camera intrinsics.
    :param gt_transform: Ground-truth cloud-to-camera transform.
    :param radius: Overlap radius in meters.
    :param pixel_radius: Overlap radius in pixels.
    :return: PatchPair with both ratios.
    """
    pixels = np.asarray(img_patch_pixels, dtype=float).reshape(-1, 2)
    points = np.asarray(cloud_patch_points, dtype=float).reshape(-1, 3)
    if pixels.shape[0] == 0 or points.shape[0] == 0:
        raise EmptyPatch(f"Empty patch: {pixels.shape[0]} pixels, {points.shape[0]} points")
    depths = depth.lookup(pixels)
    known = np.flatnonzero(np.isfinite(depths))
    pixel_hit = np.zeros(pixels.shape[0], dtype=bool)
    point_hit = np.zeros(points.shape[0], dtype=bool)
    if known.size:
        lifted = backproject_pixels(intrinsics, pixels[known], depths[known])
        rows, cols = _close_pairs(
            pixels[known], lifted, gt_transform.apply(points), intrinsics, radius, pixel_radius
        )
        pixel_hit[known[rows]] = True
        point_hit[cols] = True
    return PatchPair(img_patch_id, cloud_patch_id, float(pixel_hit.mean()), float(point_hit.mean()))


def label_patch_pair(pair: PatchPair, cfg: MatchingConfig = MatchingConfig()) -> str:
    """Positive when both overlaps reach the positive ratio, negative when both fall below the negative one."""
    if min(pair.overlap_2d, pair.overlap_3d) >= cfg.patch_positive_overlap:
        return const.POSITIVE
    if max(pair.overlap_2d, pair.overlap_3d) < cfg.patch_negative_overlap:
        return const.NEGATIVE
    return const.IGNORED


def image_tiles(width: int, height: int, grid: Tuple[int, int]) -> List[np.ndarray]:
    """
    Split the pixel grid into rows x cols tiles.

    :param width: Image width.
    :param height: Image height.
    :param grid: (rows, cols) tile counts.
    :return: Row-major flat pixel indices (v·width + u) per tile, tiles in row-major order.
    """
    rows, cols = grid
    if rows > height or cols > width:
        raise ValueError(f"Tile grid {grid} exceeds image {width}x{height}")
    row_edges = np.linspace(0, height, rows + 1).round().astype(int)
    col_edges = np.linspace(0, width, cols + 1).round().astype(int)
    flat = np.arange(width * height).reshape(height, width)
    return [
        flat[row_edges[r]: row_edges[r + 1], col_edges[c]: col_edges[c + 1]].reshape(-1)
        for r in range(rows)
        for c in range(cols)
    ]


def voxel_cells(points: np.ndarray, voxel_size: float) -> List[np.ndarray]:
    """
    Group points into cubic voxels.

    :param points: (N, 3) coordinates.
    :param voxel_size: Edge length in meters.
    :return: Point indices per occupied voxel, voxels in lexicographic key order.
    """
    keys = np.floor(np.asarray(points, dtype=float) / voxel_size).astype(np.int64)
    _, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    order = np.argsort(inverse, kind="stable")
    bounds = np.flatnonzero(np.diff(inverse[order])) + 1
    return np.split(order, bounds)


def patch_features(features: FeatureField, groups: Sequence[np.ndarray]) -> FeatureField:
    """Normalised mean feature of every group of rows."""
    means = np.stack([features.vectors[group].mean(axis=0) for group in groups])
    return FeatureField(normalize_rows(means), features.carrier)


def deduplicate(corrs: CorrespondenceSet) -> CorrespondenceSet:
    """
    Enforce one correspondence per pixel and per point, greedily by descending score.

    Ties go to the smaller point index, then the smaller pixel (v, u). The result is
    ordered by pixel (v, u).
    """
    if len(corrs) == 0:
        return corrs
    pixel_u, pixel_v = corrs.pixels[:, 0], corrs.pixels[:, 1]
    order = np.lexsort((pixel_u, pixel_v, corrs.point_indices, -corrs.scores))
    used_pixels, used_points, keep = set(), set(), []
    for row in order:
        pixel = (pixel_u[row], pixel_v[row])
        point = int(corrs.point_indices[row])
        if pixel in used_pixels or point in used_points:
            continue
        used_pixels.add(pixel)
        used_points.add(point)
        keep.append(row)
    kept = np.asarray(keep, dtype=np.int64)
    kept = kept[np.lexsort((pixel_u[kept], pixel_v[kept]))]
    return corrs.subset(kept)


def overlap_matrices(
    tiles: Sequence[np.ndarray],
    voxels: Sequence[np.ndarray],
    depth: DepthMap,
    intrinsics: CameraIntrinsics,
    cloud: PointCloud,
    gt_transform: RigidTransform,
    radius: float = 0.0375,
    pixel_radius: float = 8.0,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Overlap ratios of every tile/voxel pair at once, same semantics as patch_overlap.

    :param tiles: Flat pixel indices per image tile (see image_tiles).
    :param voxels: Point indices per voxel (see voxel_cells).
    :param depth: Depth map of the image.
    :param intrinsics: Camera intrinsics.
    :param cloud: Point cloud.
    :param gt_transform: Ground-truth cloud-to-camera transform.
    :param radius: Overlap radius in meters.
    :param pixel_radius: Overlap radius in pixels.
    :return: (T, V) pixel-side ratios and (T, V) point-side ratios.
    """
    width = intrinsics.width
    tile_of = np.full(depth.values.size, -1, dtype=np.int64)
    for tile_id, members in enumerate(tiles):
        tile_of[members] = tile_id
    voxel_of = np.full(len(cloud), -1, dtype=np.int64)
    for voxel_id, members in enumerate(voxels):
        voxel_of[members] = voxel_id
    pixel_hits = np.zeros((len(tiles), len(voxels)))
    point_hits = np.zeros((len(tiles), len(voxels)))

    flat = np.flatnonzero(depth.valid_mask.reshape(-1))
    if flat.size:
        uv = np.column_stack([flat % width, flat // width]).astype(float)
        lifted = backproject_pixels(intrinsics, uv, depth.values.reshape(-1)[flat])
        moved = gt_transform.apply(cloud.points)
        rows, points = _close_pairs(uv, lifted, moved, intrinsics, radius, pixel_radius)
        if rows.size:
            pixels = flat[rows]
            by_pixel = np.unique(np.column_stack([pixels, voxel_of[points]]), axis=0)
            np.add.at(pixel_hits, (tile_of[by_pixel[:, 0]], by_pixel[:, 1]), 1.0)
            by_point = np.unique(np.column_stack([tile_of[pixels], points]), axis=0)
            np.add.at(point_hits, (by_point[:, 0], voxel_of[by_point[:, 1]]), 1.0)

    tile_sizes = np.array([len(members) for members in tiles], dtype=float)
    voxel_sizes = np.array([len(members) for members in voxels], dtype=float)
    return pixel_hits / tile_sizes[:, None], point_hits / voxel_sizes[None, :]


def label_matrices(
    pixels: np.ndarray,
    point_indices: np.ndarray,
    depth: DepthMap,
    intrinsics: CameraIntrinsics,
    cloud: PointCloud,
    gt_transform: RigidTransform,
    cfg: MatchingConfig = MatchingConfig(),
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Positive and negative masks of every (pixel i, point j) combination.

    Rows of pixels without valid depth are neither positive nor negative.

    :param pixels: (M, 2) pixel coordinates.
    :param point_indices: (N,) cloud indices.
    :return: (M, N) positive mask and (M, N) negative mask.
    """
    pixels = np.asarray(pixels, dtype=float).reshape(-1, 2)
    point_indices = np.asarray(point_indices, dtype=np.int64).reshape(-1)
    moved = gt_transform.apply(cloud.points[point_indices])
    depths = depth.lookup(pixels)
    known = np.isfinite(depths)
    dist_3d = np.full((len(pixels), len(point_indices)), np.inf)
    if known.any():
        lifted = backproject_pixels(intrinsics, pixels[known], depths[known])
        dist_3d[known] = cdist(lifted, moved)
    dist_2d = cdist(pixels, project_points(intrinsics, moved))
    dist_2d = np.where(np.isnan(dist_2d), np.inf, dist_2d)
    positive = (dist_3d < cfg.positive_radius_3d) & (dist_2d < cfg.positive_radius_2d)
    negative = (dist_3d > cfg.negative_radius_3d) | (dist_2d > cfg.negative_radius_2d)
    return positive & known[:, None], negative & known[:, None] & ~positive
