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

"""Training-signal computations with analytic gradients."""

import logging
import re
from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np
from scipy.spatial.distance import cdist, pdist
from scipy.special import logsumexp

from src.commons import constants as const
from src.commons.exception import (
    ChannelMismatch,
    ConfigError,
    EmptyOverlap,
    EmptySample,
    ShapeMismatch,
)
from src.libs.features import FeatureField, check_normalized
from src.libs.geometry import NormalField

LOGGER = logging.getLogger(const.ROOT)

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class CircleLossConfig:
    """Scale and margins of the circle loss."""

    gamma: float = 24.0
    delta_p: float = 0.1
    delta_n: float = 1.4
    lambda_p: float = 1.0
    lambda_n: float = 1.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise ConfigError(f"Circle loss gamma must be > 0, got {self.gamma}")
        if not self.delta_p < self.delta_n:
            raise ConfigError(f"delta_p {self.delta_p} must be below delta_n {self.delta_n}")


@dataclass(frozen=True)
class LossWeights:
    """Weights of the matching, normal and GDC terms."""

    lambda1: float = 1.0
    lambda2: float = 1.0
    lambda3: float = 0.5

    def __post_init__(self):
        if min(self.lambda1, self.lambda2, self.lambda3) < 0:
            raise ConfigError(f"Loss weights must be >= 0: {self}")


@dataclass(frozen=True)
class WarmupSchedule:
    """Delayed linear activation of the GDC term."""

    start_epoch: int = 10
    end_epoch: int = 20

    def __post_init__(self):
        if not 0 <= self.start_epoch <= self.end_epoch:
            raise ConfigError(f"Need 0 <= start <= end, got {self.start_epoch}, {self.end_epoch}")

    @classmethod
    def parse(cls, text: str) -> "WarmupSchedule":
        """Parse the '<start> W <end> C' notation, e.g. '10 W 20 C'."""
        found = re.fullmatch(r"\s*(\d+)\s*W\s*(\d+)\s*C\s*", str(text), flags=re.IGNORECASE)
        if not found:
            raise ConfigError(f"Warm-up schedule '{text}' is not of the form '<start> W <end> C'")
        return cls(int(found.group(1)), int(found.group(2)))

    def __str__(self):
        return f"{self.start_epoch} W {self.end_epoch} C"


def normal_consistency_loss(
    predicted: NormalField, target: NormalField
) -> Tuple[float, np.ndarray]:
    """
    One minus the mean dot product over jointly valid normals.

    :param predicted: Predicted normals.
    :param target: Reference normals on the same carrier.
    :return: (loss, gradient w.r.t. predicted normals, zero outside the joint mask).
    """
    if predicted.normals.shape != target.normals.shape:
        raise ShapeMismatch(
            f"Normal fields {predicted.normals.shape} and {target.normals.shape} differ"
        )
    joint = predicted.valid_mask & target.valid_mask
    count = int(joint.sum())
    if count == 0:
        raise EmptyOverlap("Normal fields share no jointly valid entry.")
    dots = np.einsum("...i,...i->...", predicted.normals, target.normals)[joint]
    gradient = np.zeros_like(predicted.normals)
    gradient[joint] = -target.normals[joint] / count
    return float(1.0 - dots.sum() / count), gradient


def self_similarity(features: FeatureField) -> np.ndarray:
    """
    Self-similarity S = F·F^T of row-normalised features.

    :param features: M x C field with unit rows.
    :return: Symmetric M x M matrix with unit diagonal.
    """
    check_normalized(features)
    return features.vectors @ features.vectors.T


def gdc_loss(f_img: FeatureField, f_cloud: FeatureField) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    Graph distribution consistency: squared Frobenius distance of the self-similarities.

    :param f_img: M x C matched image features, unit rows.
    :param f_cloud: M x C matched cloud features, unit rows.
    :return: (loss, grad w.r.t. f_img, grad w.r.t. f_cloud).
    """
    if f_img.vectors.shape != f_cloud.vectors.shape:
        raise ShapeMismatch(f"GDC inputs {f_img.vectors.shape} and {f_cloud.vectors.shape} differ")
    diff = self_similarity(f_img) - self_similarity(f_cloud)
    loss = float(np.sum(diff * diff))
    return loss, 4.0 * diff @ f_img.vectors, -4.0 * diff @ f_cloud.vectors


def circle_loss(
    distances_pos: np.ndarray,
    distances_neg: np.ndarray,
    cfg: CircleLossConfig,
    lambda_p: Optional[ArrayLike] = None,
    lambda_n: Optional[ArrayLike] = None,
) -> float:
    """
    Circle loss of one anchor, evaluated in log-sum-exp form.

    beta_p = gamma·lambda_p·max(d - delta_p, 0) and beta_n = gamma·lambda_n·max(delta_n - d, 0);
    the loss is log(1 + sum exp(beta_p·(d - delta_p)) · sum exp(beta_n·(delta_n - d))) / gamma.

    :param distances_pos: Feature distances of positive pairs (may be empty).
    :param distances_neg: Feature distances of negative pairs (may be empty).
    :param cfg: Scale and margins.
    :param lambda_p: Per-pair positive scaling, defaults to cfg.lambda_p.
    :param lambda_n: Per-pair negative scaling, defaults to cfg.lambda_n.
    :return: Non-negative loss; 0 when either set is empty.
    """
    pos = np.asarray(distances_pos, dtype=float).reshape(-1)
    neg = np.asarray(distances_neg, dtype=float).reshape(-1)
    if pos.size == 0 or neg.size == 0:
        return 0.0
    lam_p = cfg.lambda_p if lambda_p is None else np.asarray(lambda_p, dtype=float)
    lam_n = cfg.lambda_n if lambda_n is None else np.asarray(lambda_n, dtype=float)
    gap_p = pos - cfg.delta_p
    gap_n = cfg.delta_n - neg
    logits_p = cfg.gamma * lam_p * np.maximum(gap_p, 0.0) * gap_p
    logits_n = cfg.gamma * lam_n * np.maximum(gap_n, 0.0) * gap_n
    return float(np.logaddexp(0.0, logsumexp(logits_p) + logsumexp(logits_n)) / cfg.gamma)


def matching_loss(
    distances: np.ndarray,
    positive: np.ndarray,
    negative: np.ndarray,
    cfg: CircleLossConfig,
    lambda_p: Optional[np.ndarray] = None,
) -> float:
    """
    Circle loss averaged over anchors, in both matching directions.

    Rows and columns with at least one positive and one negative act as anchors; the
    result is the mean of the row-wise and column-wise averages.

    :param distances: M x N feature distances.
    :param positive: M x N boolean positive mask.
    :param negative: M x N boolean negative mask.
    :param cfg: Circle loss configuration.
    :param lambda_p: Optional M x N positive scaling (e.g. patch overlap ratios).
    :return: Loss value, 0 when no anchor qualifies.
    """
    distances = np.asarray(distances, dtype=float)
    positive = np.asarray(positive, dtype=bool)
    negative = np.asarray(negative, dtype=bool)
    if not distances.shape == positive.shape == negative.shape:
        raise ShapeMismatch("Distance and label matrices must share a shape.")
    scale = np.ones_like(distances) if lambda_p is None else np.asarray(lambda_p, dtype=float)

    def one_direction(dist, pos, neg, lam):
        values = [
            circle_loss(dist[i, pos[i]], dist[i, neg[i]], cfg, lambda_p=lam[i, pos[i]])
            for i in range(dist.shape[0])
            if pos[i].any() and neg[i].any()
        ]
        return float(np.mean(values)) if values else 0.0

    rows = one_direction(distances, positive, negative, scale)
    cols = one_direction(distances.T, positive.T, negative.T, scale.T)
    return 0.5 * (rows + cols)


def total_loss(l_match: float, l_normal: float, l_gdc: float, weights: LossWeights) -> float:
    """lambda1·l_match + lambda2·l_normal + lambda3·l_gdc."""
    return weights.lambda1 * l_match + weights.lambda2 * l_normal + weights.lambda3 * l_gdc


def warmup_weight(epoch: int, schedule: WarmupSchedule) -> float:
    """
    GDC weight at an epoch: 0 before start, linear ramp on [start, end), 1 from end on.

    :param epoch: Epoch >= 0.
    :param schedule: Warm-up schedule; start == end gives a step.
    :return: Weight in [0, 1].
    """
    if epoch < 0:
        raise ValueError(f"Epoch must be >= 0, got {epoch}")
    if epoch >= schedule.end_epoch:
        return 1.0
    if epoch < schedule.start_epoch:
        return 0.0
    return (epoch - schedule.start_epoch) / (schedule.end_epoch - schedule.start_epoch)


def median_bandwidth(sample_a: np.ndarray, sample_b: np.ndarray) -> float:
    """Median heuristic: median pairwise distance of the pooled sample (1.0 if all coincide)."""
    pooled = np.concatenate([sample_a, sample_b], axis=0)
    distances = pdist(pooled)
    distances = distances[distances > 0]
    return float(np.median(distances)) if distances.size else 1.0


def mmd(sample_a: FeatureField, sample_b: FeatureField, bandwidth: Optional[float] = None) -> float:
    """
    Plug-in squared maximum mean discrepancy with a Gaussian kernel.

    :param sample_a: First sample.
    :param sample_b: Second sample, same channel count.
    :param bandwidth: Kernel width; median heuristic when None.
    :return: mean(K_aa) - 2·mean(K_ab) + mean(K_bb), clamped at 0.
    """
    if sample_a.count == 0 or sample_b.count == 0:
        raise EmptySample("MMD needs two non-empty samples.")
    if sample_a.channels != sample_b.channels:
        raise ChannelMismatch(f"MMD samples have {sample_a.channels} and {sample_b.channels} channels")
    x, y = sample_a.vectors, sample_b.vectors
    if bandwidth is None:
        bandwidth = median_bandwidth(x, y)
    if not bandwidth > 0:
        raise ValueError(f"Bandwidth must be > 0, got {bandwidth}")
    scale = 2.0 * bandwidth ** 2
    k_aa = np.exp(-cdist(x, x, "sqeuclidean") / scale).mean()
    k_bb = np.exp(-cdist(y, y, "sqeuclidean") / scale).mean()
    k_ab = np.exp(-cdist(x, y, "sqeuclidean") / scale).mean()
    return float(max(k_aa - 2.0 * k_ab + k_bb, 0.0))


def tangent_directions(points: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Random unit-Frobenius direction with every row orthogonal to the matching row of points."""
    direction = rng.normal(size=points.shape)
    direction -= np.sum(direction * points, axis=1, keepdims=True) * points
    return direction / np.linalg.norm(direction)


def gradient_check(
    func: Callable[[np.ndarray], float],
    point: np.ndarray,
    gradient: np.ndarray,
    rng: np.random.Generator,
    step: float = 1e-5,
    directions: int = 8,
    tangent: bool = False,
) -> float:
    """
    Worst relative error between central differences and the analytic directional derivative.

    :param func: Scalar function of an array.
    :param point: Evaluation point.
    :param gradient: Analytic gradient at point.
    :param rng: Generator for the probe directions.
    :param step: Finite-difference step.
    :param directions: Number of random probe directions.
    :param tangent: Keep probes in the per-row tangent space of the unit sphere.
    :return: max |numeric - analytic| / max(|numeric|, |analytic|, 1e-6).
    """
    worst = 0.0
    for _ in range(directions):
        if tangent:
            probe = tangent_directions(point, rng)
        else:
            probe = rng.normal(size=point.shape)
            probe /= np.linalg.norm(probe)
        numeric = (func(point + step * probe) - func(point - step * probe)) / (2.0 * step)
        analytic = float(np.sum(gradient * probe))
        worst = max(worst, abs(numeric - analytic) / max(abs(numeric), abs(analytic), 1e-6))
    return worst
