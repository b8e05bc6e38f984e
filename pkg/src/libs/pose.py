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

"""Rigid pose from 2D-3D correspondences: DLT, P3P, Gauss-Newton refinement and RANSAC."""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from numpy.polynomial import Polynomial
from scipy.spatial.transform import Rotation

from src.commons import constants as const
from src.commons.exception import (
    ConfigError,
    DegenerateConfiguration,
    InsufficientPoints,
    NoConsensus,
)
from src.libs.geometry import CameraIntrinsics, RigidTransform

LOGGER = logging.getLogger(const.ROOT)

MIN_DLT_POINTS = 6
MAX_GN_ITERATIONS = 50
GN_STEP_TOL = 1e-10
MAX_REFITS = 3


@dataclass(frozen=True)
class RansacConfig:
    """Hypothesize-and-verify settings."""

    max_iterations: int = 500
    inlier_threshold_px: float = 8.0
    min_sample: int = 4
    confidence: float = 0.999
    seed: int = 7

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ConfigError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if not self.inlier_threshold_px > 0:
            raise ConfigError(f"inlier_threshold_px must be > 0, got {self.inlier_threshold_px}")
        if self.min_sample < 4:
            raise ConfigError(f"min_sample must be >= 4, got {self.min_sample}")
        if not 0 < self.confidence < 1:
            raise ConfigError(f"confidence must be in (0, 1), got {self.confidence}")


@dataclass(frozen=True, eq=False)
class PoseEstimate:
    """Recovered transform with its inlier mask."""

    transform: RigidTransform
    inlier_mask: np.ndarray
    mean_reprojection_error: float
    iterations: int = 0

    @property
    def inlier_count(self) -> int:
        """Number of inliers."""
        return int(np.count_nonzero(self.inlier_mask))

    def to_dict(self) -> dict:
        """Pose JSON payload."""
        payload = self.transform.to_dict()
        payload["inliers"] = self.inlier_count
        payload["mean_reproj_px"] = float(self.mean_reprojection_error)
        return payload


def reprojection_errors(
    rotation: np.ndarray,
    translation: np.ndarray,
    object_points: np.ndarray,
    image_points: np.ndarray,
    intrinsics: CameraIntrinsics,
) -> np.ndarray:
    """Pixel reprojection error per correspondence; points behind the camera give inf."""
    camera = object_points @ rotation.T + translation
    errors = np.full(camera.shape[0], np.inf)
    front = camera[:, 2] > 0
    z = camera[front, 2]
    du = intrinsics.fx * camera[front, 0] / z + intrinsics.cx - image_points[front, 0]
    dv = intrinsics.fy * camera[front, 1] / z + intrinsics.cy - image_points[front, 1]
    errors[front] = np.hypot(du, dv)
    return errors


def _cost(rotation, translation, object_points, image_points, intrinsics) -> float:
    errors = reprojection_errors(rotation, translation, object_points, image_points, intrinsics)
    return float(np.sum(errors ** 2))


def _jacobian(
    rotation: np.ndarray,
    translation: np.ndarray,
    object_points: np.ndarray,
    image_points: np.ndarray,
    intrinsics: CameraIntrinsics,
) -> Tuple[np.ndarray, np.ndarray]:
    """Stacked residuals (2N,) and Jacobian (2N, 6) w.r.t. a left rotation increment and t."""
    rotated = object_points @ rotation.T
    camera = rotated + translation
    x, y, z = camera[:, 0], camera[:, 1], camera[:, 2]
    residual = np.empty(2 * len(camera))
    residual[0::2] = intrinsics.fx * x / z + intrinsics.cx - image_points[:, 0]
    residual[1::2] = intrinsics.fy * y / z + intrinsics.cy - image_points[:, 1]
    d_proj = np.zeros((len(camera), 2, 3))
    d_proj[:, 0, 0] = intrinsics.fx / z
    d_proj[:, 0, 2] = -intrinsics.fx * x / z ** 2
    d_proj[:, 1, 1] = intrinsics.fy / z
    d_proj[:, 1, 2] = -intrinsics.fy * y / z ** 2
    # d(exp(w)·R·X)/dw at w = 0 is -[R·X]x.
    skew = np.zeros((len(camera), 3, 3))
    skew[:, 0, 1], skew[:, 0, 2] = -rotated[:, 2], rotated[:, 1]
    skew[:, 1, 0], skew[:, 1, 2] = rotated[:, 2], -rotated[:, 0]
    skew[:, 2, 0], skew[:, 2, 1] = -rotated[:, 1], rotated[:, 0]
    jac = np.concatenate([d_proj @ -skew, d_proj], axis=2)
    return residual, jac.reshape(-1, 6)


def nearest_rotation(matrix: np.ndarray) -> np.ndarray:
    """Orthogonal Procrustes projection onto SO(3)."""
    u_mat, _, vt_mat = np.linalg.svd(matrix)
    fix = np.diag([1.0, 1.0, np.sign(np.linalg.det(u_mat @ vt_mat))])
    return u_mat @ fix @ vt_mat


def refine_pose(
    rotation: np.ndarray,
    translation: np.ndarray,
    object_points: np.ndarray,
    image_points: np.ndarray,
    intrinsics: CameraIntrinsics,
    max_iterations: int = MAX_GN_ITERATIONS,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Gauss-Newton minimisation of the squared pixel reprojection error.

    Rotation updates are axis-angle increments applied on the left, so iterates stay on
    SO(3). A step that raises the cost is halved until it does not; the loop stops when
    the step norm falls below 1e-10 or after max_iterations.

    :return: Refined (rotation, translation).
    """
    cost = _cost(rotation, translation, object_points, image_points, intrinsics)
    if not np.isfinite(cost):
        return rotation, translation
    for _ in range(max_iterations):
        residual, jac = _jacobian(rotation, translation, object_points, image_points, intrinsics)
        step = np.linalg.lstsq(jac, -residual, rcond=None)[0]
        if np.linalg.norm(step) < GN_STEP_TOL:
            break
        accepted = False
        for _ in range(30):
            cand_rot = Rotation.from_rotvec(step[:3]).as_matrix() @ rotation
            cand_trans = translation + step[3:]
            cand_cost = _cost(cand_rot, cand_trans, object_points, image_points, intrinsics)
            if cand_cost <= cost:
                accepted = True
                break
            step = 0.5 * step
        if not accepted:
            break
        rotation, translation, cost = cand_rot, cand_trans, cand_cost
    return nearest_rotation(rotation), translation


def _hartley(points: np.ndarray) -> np.ndarray:
    """Similarity moving the centroid to 0 and the mean distance to sqrt(dim)."""
    dim = points.shape[1]
    centroid = points.mean(axis=0)
    spread = np.linalg.norm(points - centroid, axis=1).mean()
    scale = np.sqrt(dim) / spread if spread > 0 else 1.0
    transform = np.eye(dim + 1)
    transform[:dim, :dim] *= scale
    transform[:dim, dim] = -scale * centroid
    return transform


def pnp_solve(
    object_points: np.ndarray, image_points: np.ndarray, intrinsics: CameraIntrinsics
) -> RigidTransform:
    """
    Pose from at least six 2D-3D correspondences.

    Normalised DLT on the projection system, Procrustes projection of the left 3x3 block
    onto SO(3), then Gauss-Newton refinement in pixel space.

    :param object_points: (N, 3) cloud-frame points.
    :param image_points: (N, 2) pixels.
    :param intrinsics: Camera intrinsics.
    :return: Cloud-to-camera transform.
    """
    object_points = np.asarray(object_points, dtype=float).reshape(-1, 3)
    image_points = np.asarray(image_points, dtype=float).reshape(-1, 2)
    count = object_points.shape[0]
    if count < MIN_DLT_POINTS:
        raise InsufficientPoints(f"PnP needs at least {MIN_DLT_POINTS} points, got {count}")
    if image_points.shape[0] != count:
        raise ValueError(f"{count} object points but {image_points.shape[0]} image points")

    centred = object_points - object_points.mean(axis=0)
    spread = np.linalg.svd(centred, compute_uv=False)
    if spread[0] == 0 or spread[2] <= const.SINGULAR_GAP_TOL * spread[0]:
        raise DegenerateConfiguration("Object points are coplanar or collinear.")

    rays = np.column_stack([image_points, np.ones(count)]) @ np.linalg.inv(intrinsics.matrix).T
    norm_2d = _hartley(rays[:, :2])
    norm_3d = _hartley(object_points)
    xs = rays @ norm_2d.T
    xs_h = np.column_stack([object_points, np.ones(count)]) @ norm_3d.T
    system = np.zeros((2 * count, 12))
    system[0::2, 0:4] = xs_h
    system[0::2, 8:12] = -xs[:, [0]] * xs_h
    system[1::2, 4:8] = xs_h
    system[1::2, 8:12] = -xs[:, [1]] * xs_h
    _, singular, vt_mat = np.linalg.svd(system)
    if singular[-2] <= const.SINGULAR_GAP_TOL * singular[0]:
        raise DegenerateConfiguration("DLT system has more than one null direction.")
    projection = np.linalg.inv(norm_2d) @ vt_mat[-1].reshape(3, 4) @ norm_3d
    if np.linalg.det(projection[:, :3]) < 0:
        projection = -projection
    u_mat, scales, vt_rot = np.linalg.svd(projection[:, :3])
    rotation = u_mat @ vt_rot
    translation = projection[:, 3] / scales.mean()
    rotation, translation = refine_pose(rotation, translation, object_points, image_points, intrinsics)
    return RigidTransform(rotation, translation)


def _kabsch(source: np.ndarray, target: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Rotation and translation with target ~ R·source + t."""
    src_mean, tgt_mean = source.mean(axis=0), target.mean(axis=0)
    cov = (source - src_mean).T @ (target - tgt_mean)
    u_mat, _, vt_mat = np.linalg.svd(cov)
    fix = np.diag([1.0, 1.0, np.sign(np.linalg.det(vt_mat.T @ u_mat.T))])
    rotation = vt_mat.T @ fix @ u_mat.T
    return rotation, tgt_mean - rotation @ src_mean


def p3p_candidates(
    object_points: np.ndarray, image_points: np.ndarray, intrinsics: CameraIntrinsics
) -> List[Tuple[np.ndarray, np.ndarray]]:
    """
    Up to four poses consistent with three correspondences.

    With u = s2/s1 and v = s3/s1 the three law-of-cosines constraints give two quadratics
    in u; their resultant is a quartic in v, and each real positive root yields u, the
    distances along the bearings and, by absolute orientation, a pose.

    :param object_points: (3, 3) cloud-frame points.
    :param image_points: (3, 2) pixels.
    :param intrinsics: Camera intrinsics.
    :return: List of (rotation, translation) candidates.
    """
    object_points = np.asarray(object_points, dtype=float).reshape(3, 3)
    rays = np.column_stack([np.asarray(image_points, dtype=float).reshape(3, 2), np.ones(3)])
    bearings = rays @ np.linalg.inv(intrinsics.matrix).T
    bearings /= np.linalg.norm(bearings, axis=1, keepdims=True)
    dist_a = np.linalg.norm(object_points[1] - object_points[2])
    dist_b = np.linalg.norm(object_points[0] - object_points[2])
    dist_c = np.linalg.norm(object_points[0] - object_points[1])
    if min(dist_a, dist_b, dist_c) <= 0:
        return []
    cos_alpha = bearings[1] @ bearings[2]
    cos_beta = bearings[0] @ bearings[2]
    cos_gamma = bearings[0] @ bearings[1]
    a2, b2, c2 = dist_a ** 2, dist_b ** 2, dist_c ** 2

    p_2 = b2
    p_1 = -2.0 * b2 * cos_gamma
    p_0 = Polynomial([b2 - c2, 2.0 * c2 * cos_beta, -c2])
    q_2 = c2 - a2
    q_1 = Polynomial([2.0 * a2 * cos_gamma, -2.0 * c2 * cos_alpha])
    q_0 = Polynomial([-a2, 0.0, c2])
    resultant = (p_2 * q_0 - p_0 * q_2) ** 2 - (p_2 * q_1 - p_1 * q_2) * (p_1 * q_0 - p_0 * q_1)

    candidates = []
    for root in resultant.roots():
        if abs(root.imag) > 1e-6 * (1.0 + abs(root.real)) or root.real <= 0:
            continue
        v = float(root.real)
        denom = q_2 * p_1 - p_2 * q_1(v)
        if abs(denom) < 1e-12:
            continue
        u = (p_2 * q_0(v) - q_2 * p_0(v)) / denom
        base = 1.0 + u * u - 2.0 * u * cos_gamma
        if u <= 0 or base <= 0:
            continue
        s_1 = dist_c / np.sqrt(base)
        camera = bearings * np.array([s_1, u * s_1, v * s_1])[:, None]
        candidates.append(_kabsch(object_points, camera))
    return candidates


def _hypothesis(
    object_points: np.ndarray, image_points: np.ndarray, intrinsics: CameraIntrinsics
) -> Optional[Tuple[np.ndarray, np.ndarray]]:
    """Best P3P candidate on the first three points as judged by the rest, refined on all."""
    best, best_err = None, np.inf
    for rotation, translation in p3p_candidates(object_points[:3], image_points[:3], intrinsics):
        err = reprojection_errors(
            rotation, translation, object_points[3:], image_points[3:], intrinsics
        ).sum()
        if err < best_err:
            best, best_err = (rotation, translation), err
    if best is None:
        return None
    return refine_pose(best[0], best[1], object_points, image_points, intrinsics)


def pnp_ransac(
    object_points: np.ndarray,
    image_points: np.ndarray,
    intrinsics: CameraIntrinsics,
    cfg: RansacConfig = RansacConfig(),
) -> PoseEstimate:
    """
    Robust pose by hypothesize-and-verify.

    Minimal samples are drawn sequentially from a seeded generator; ties between
    hypotheses keep the earliest. The best inlier set is refitted with pnp_solve and the
    inlier set recomputed until it is stable.

    :param object_points: (N, 3) cloud-frame points.
    :param image_points: (N, 2) pixels.
    :param intrinsics: Camera intrinsics.
    :param cfg: RANSAC settings.
    :return: PoseEstimate.
    """
    object_points = np.asarray(object_points, dtype=float).reshape(-1, 3)
    image_points = np.asarray(image_points, dtype=float).reshape(-1, 2)
    count = object_points.shape[0]
    if count < max(cfg.min_sample, MIN_DLT_POINTS):
        raise NoConsensus(f"RANSAC needs at least {MIN_DLT_POINTS} correspondences, got {count}")
    rng = np.random.default_rng(cfg.seed)
    best_pose, best_mask, best_count = None, None, 0
    needed, iteration = cfg.max_iterations, 0
    while iteration < min(cfg.max_iterations, needed):
        sample = rng.choice(count, size=cfg.min_sample, replace=False)
        iteration += 1
        pose = _hypothesis(object_points[sample], image_points[sample], intrinsics)
        if pose is None:
            continue
        mask = reprojection_errors(*pose, object_points, image_points, intrinsics) < cfg.inlier_threshold_px
        inliers = int(mask.sum())
        if inliers > best_count:
            best_pose, best_mask, best_count = pose, mask, inliers
            ratio = inliers / count
            if ratio >= 1.0:
                needed = iteration
            else:
                miss = 1.0 - ratio ** cfg.min_sample
                needed = int(np.ceil(np.log(1.0 - cfg.confidence) / np.log(miss))) if miss < 1 else needed
    LOGGER.debug("RANSAC: %s iterations, best hypothesis has %s inliers", iteration, best_count)
    if best_count < MIN_DLT_POINTS:
        raise NoConsensus(f"Best hypothesis has {best_count} inliers out of {count}")

    rotation, translation = best_pose
    mask = best_mask
    for _ in range(MAX_REFITS):
        try:
            fitted = pnp_solve(object_points[mask], image_points[mask], intrinsics)
            rotation, translation = fitted.rotation, fitted.translation
        except DegenerateConfiguration:
            LOGGER.debug("Inliers are degenerate for DLT, refining the hypothesis instead")
            rotation, translation = refine_pose(
                rotation, translation, object_points[mask], image_points[mask], intrinsics
            )
        errors = reprojection_errors(rotation, translation, object_points, image_points, intrinsics)
        new_mask = errors < cfg.inlier_threshold_px
        if new_mask.sum() < MIN_DLT_POINTS:
            raise NoConsensus(f"Refit keeps only {int(new_mask.sum())} inliers")
        if np.array_equal(new_mask, mask):
            break
        mask = new_mask
    errors = reprojection_errors(rotation, translation, object_points, image_points, intrinsics)
    mask = errors < cfg.inlier_threshold_px
    if mask.sum() < MIN_DLT_POINTS:
        raise NoConsensus(f"Final pose keeps only {int(mask.sum())} inliers")
    estimate = PoseEstimate(
        RigidTransform(rotation, translation), mask, float(errors[mask].mean()), iteration
    )
    LOGGER.info(
        "Pose recovered with %s/%s inliers, mean reprojection %.4f px",
        estimate.inlier_count,
        count,
        estimate.mean_reprojection_error,
    )
    return estimate
