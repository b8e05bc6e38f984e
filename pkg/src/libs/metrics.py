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

"""Registration metrics: IR, FMR, RMSE, RR, PIR, RRE and RTE."""

import logging
import warnings
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.spatial.transform import Rotation

from src.commons import constants as const
from src.commons.exception import (
    ConfigError,
    EmptyCloud,
    EmptyCorrespondences,
    EmptyInput,
    InvalidRotation,
)
from src.libs.geometry import (
    CameraIntrinsics,
    DepthMap,
    PointCloud,
    RigidTransform,
    backproject_pixels,
    is_rotation,
)
from src.libs.matching import CorrespondenceSet, PatchPair

LOGGER = logging.getLogger(const.ROOT)


@dataclass(frozen=True)
class MetricThresholds:
    """tau1 (m), tau2 (ratio), tau3 (m) and the patch overlap threshold."""

    tau1: float = 0.05
    tau2: float = 0.1
    tau3: float = 0.1
    pir_threshold: float = 0.3

    def __post_init__(self):
        if min(self.tau1, self.tau2, self.tau3, self.pir_threshold) < 0:
            raise ConfigError(f"Metric thresholds must be >= 0: {self}")


@dataclass
class SceneEvaluation:
    """Per-scene metric record."""

    scene: str
    inlier_ratio: float
    fmr_flag: bool
    rmse_m: float
    rr_flag: bool
    pir: Optional[float]
    rre_deg: Optional[float]
    rte_m: Optional[float]
    correspondences: int = 0

    def to_dict(self) -> dict:
        """JSON-safe record; infinite RMSE is reported as None."""
        record = asdict(self)
        if not np.isfinite(record["rmse_m"]):
            record["rmse_m"] = None
        return record


def _non_empty(values: Sequence[float], what: str) -> np.ndarray:
    values = np.asarray(values, dtype=float).reshape(-1)
    if values.size == 0:
        raise EmptyInput(f"{what} needs at least one value.")
    return values


def inlier_ratio(
    corrs: CorrespondenceSet,
    depth: DepthMap,
    intrinsics: CameraIntrinsics,
    cloud: PointCloud,
    gt_transform: RigidTransform,
    tau1: float = 0.05,
) -> float:
    """
    Fraction of correspondences whose point lands within tau1 of the back-projected pixel.

    Pixels without valid depth count as outliers.

    :return: Ratio in [0, 1].
    """
    if len(corrs) == 0:
        raise EmptyCorrespondences("Inlier ratio of an empty correspondence set.")
    depths = depth.lookup(corrs.pixels)
    known = np.isfinite(depths)
    hits = np.zeros(len(corrs), dtype=bool)
    if known.any():
        lifted = backproject_pixels(intrinsics, corrs.pixels[known], depths[known])
        moved = gt_transform.apply(cloud.points[corrs.point_indices[known]])
        hits[known] = np.linalg.norm(moved - lifted, axis=1) < tau1
    return float(hits.mean())


def feature_matching_recall(irs: Sequence[float], tau2: float = 0.1) -> float:
    """Fraction of pairs with inlier ratio strictly above tau2."""
    return float(np.mean(_non_empty(irs, "Feature matching recall") > tau2))


def registration_rmse(
    cloud: PointCloud, est_transform: RigidTransform, gt_transform: RigidTransform
) -> float:
    """Root mean squared distance between the cloud under the estimated and true transforms."""
    if cloud is None or len(cloud) == 0:
        raise EmptyCloud("RMSE over an empty cloud.")
    diff = est_transform.apply(cloud.points) - gt_transform.apply(cloud.points)
    return float(np.sqrt(np.mean(np.sum(diff * diff, axis=1))))


def registration_recall(rmses: Sequence[float], tau3: float = 0.1) -> float:
    """Fraction of pairs with RMSE strictly below tau3."""
    return float(np.mean(_non_empty(rmses, "Registration recall") < tau3))


def patch_inlier_ratio(pairs: Sequence[PatchPair], threshold: float = 0.3) -> float:
    """Fraction of patch pairs whose bilateral overlap exceeds threshold."""
    overlaps = _non_empty([pair.overlap for pair in pairs], "Patch inlier ratio")
    return float(np.mean(overlaps > threshold))


def relative_rotation_error(gt_rotation: np.ndarray, est_rotation: np.ndarray) -> float:
    """
    Sum of absolute intrinsic XYZ Euler angles of R_gt^-1·R_est, in degrees.

    At gimbal lock the decomposition sets the third angle to zero.
    """
    for matrix in (gt_rotation, est_rotation):
        if not is_rotation(matrix, tol=1e-6):
            raise InvalidRotation(f"Not a rotation matrix: {np.asarray(matrix).tolist()}")
    relative = np.asarray(gt_rotation, dtype=float).T @ np.asarray(est_rotation, dtype=float)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        angles = Rotation.from_matrix(relative).as_euler("XYZ", degrees=True)
    return float(np.sum(np.abs(angles)))


def relative_translation_error(gt_translation: np.ndarray, est_translation: np.ndarray) -> float:
    """Euclidean distance between translations."""
    diff = np.asarray(gt_translation, dtype=float) - np.asarray(est_translation, dtype=float)
    return float(np.linalg.norm(diff))


def evaluate_scene(
    name: str,
    corrs: CorrespondenceSet,
    depth: DepthMap,
    intrinsics: CameraIntrinsics,
    cloud: PointCloud,
    gt_transform: RigidTransform,
    est_transform: Optional[RigidTransform],
    patch_pairs: Sequence[PatchPair] = (),
    thresholds: MetricThresholds = MetricThresholds(),
) -> SceneEvaluation:
    """
    Every per-scene metric; a missing estimate counts as a failed registration.

    :return: SceneEvaluation.
    """
    ratio = inlier_ratio(corrs, depth, intrinsics, cloud, gt_transform, thresholds.tau1) if len(corrs) else 0.0
    if est_transform is None:
        rmse, rre, rte = float("inf"), None, None
    else:
        rmse = registration_rmse(cloud, est_transform, gt_transform)
        rre = relative_rotation_error(gt_transform.rotation, est_transform.rotation)
        rte = relative_translation_error(gt_transform.translation, est_transform.translation)
    pir = patch_inlier_ratio(patch_pairs, thresholds.pir_threshold) if len(patch_pairs) else None
    evaluation = SceneEvaluation(
        scene=name,
        inlier_ratio=ratio,
        fmr_flag=bool(ratio > thresholds.tau2),
        rmse_m=rmse,
        rr_flag=bool(rmse < thresholds.tau3),
        pir=pir,
        rre_deg=rre,
        rte_m=rte,
        correspondences=len(corrs),
    )
    LOGGER.debug("Scene %s evaluated: %s", name, evaluation)
    return evaluation
