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
Registration of one scene end to end, and the batch runner used by eval and ablate.

Flow: normals -> constructed features -> local geometry enhancement -> coarse patch
matching -> fine matching -> graph refinement -> PnP + RANSAC. Training losses are
evaluated alongside so their behaviour can be inspected per scene.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import munch
import numpy as np

from src.commons import constants as const
from src.commons.exception import ConfigError, EmptyOverlap, NoConsensus
from src.commons.logger import scene_context
from src.libs.features import FeatureField, enhance_with_normals
from src.libs.geometry import (
    DepthMap,
    NormalField,
    adaptive_neighborhood_sizes,
    depth_to_normals,
    estimate_point_normals,
)
from src.libs.graph import GraphAttentionParams, build_knn_graph, gated_fusion, light_gat_forward
from src.libs.losses import (
    CircleLossConfig,
    LossWeights,
    WarmupSchedule,
    gdc_loss,
    matching_loss,
    mmd,
    normal_consistency_loss,
    total_loss,
    warmup_weight,
)
from src.libs.matching import (
    CoarseMatch,
    CorrespondenceSet,
    MatchingConfig,
    PatchPair,
    ScoreMap,
    coarse_match,
    cosine_score_map,
    deduplicate,
    fine_match,
    image_tiles,
    label_matrices,
    overlap_matrices,
    patch_features,
    voxel_cells,
)
from src.libs.metrics import MetricThresholds, SceneEvaluation, evaluate_scene
from src.libs.pose import PoseEstimate, RansacConfig, pnp_ransac
from src.libs.synth import (
    CorruptionConfig,
    SceneSpec,
    SyntheticScene,
    camera_frame_normals,
    corrupt_depth,
    pixel_grid,
    synthesize_features,
)

LOGGER = logging.getLogger(const.ROOT)


@dataclass(frozen=True)
class FeatureSettings:
    """Constructed feature size and the weight of the normal embedding."""

    channels: int = 128
    normal_weight: float = 0.3
    embed_length: int = 4

    def __post_init__(self):
        if self.channels < 4:
            raise ConfigError(f"features.channels must be >= 4, got {self.channels}")
        if self.normal_weight < 0:
            raise ConfigError(f"features.normal_weight must be >= 0, got {self.normal_weight}")
        if self.embed_length < 1:
            raise ConfigError(f"features.embed_length must be >= 1, got {self.embed_length}")


@dataclass(frozen=True)
class NormalSettings:
    """Neighbourhood sizes of point normal estimation."""

    k_neighbors: int = 8
    adaptive_k: bool = False
    k_sparse: int = 12

    def __post_init__(self):
        if self.k_neighbors < 3:
            raise ConfigError(f"normals.k_neighbors must be >= 3, got {self.k_neighbors}")
        if self.k_sparse < self.k_neighbors:
            raise ConfigError("normals.k_sparse must not be below normals.k_neighbors.")


@dataclass(frozen=True)
class GraphSettings:
    """k-NN graph size and gate bias of the graph refinement."""

    k_neighbors: int = 8
    gate_bias: float = 0.0

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ConfigError(f"graph.k_neighbors must be >= 1, got {self.k_neighbors}")


@dataclass(frozen=True)
class PipelineSettings:
    """Typed view of the pipeline config."""

    seed: int
    scene: SceneSpec
    features: FeatureSettings
    normals: NormalSettings
    matching: MatchingConfig
    graph: GraphSettings
    circle: CircleLossConfig
    weights: LossWeights
    warmup: WarmupSchedule
    epoch: int
    ransac: RansacConfig
    corruption: CorruptionConfig
    thresholds: MetricThresholds

    def __post_init__(self):
        if self.epoch < 0:
            raise ConfigError(f"losses.epoch must be >= 0, got {self.epoch}")

    @classmethod
    def from_config(cls, cfg: munch.Munch) -> "PipelineSettings":
        """
        Build every typed config from a complete pipeline config.

        :param cfg: Munch returned by yaml_parser.load_pipeline_config.
        :return: PipelineSettings.
        """
        seed = int(cfg.seed)
        losses = cfg.losses
        try:
            return cls(
                seed=seed,
                scene=SceneSpec(**cfg.scene),
                features=FeatureSettings(**cfg.features),
                normals=NormalSettings(**cfg.normals),
                matching=MatchingConfig(**cfg.matching),
                graph=GraphSettings(**cfg.graph),
                circle=CircleLossConfig(losses.gamma, losses.delta_p, losses.delta_n),
                weights=LossWeights(losses.lambda1, losses.lambda2, losses.lambda3),
                warmup=WarmupSchedule(int(losses.warmup_start), int(losses.warmup_end)),
                epoch=int(losses.epoch),
                ransac=RansacConfig(seed=seed, **cfg.ransac),
                corruption=CorruptionConfig(seed=seed, **cfg.corruption),
                thresholds=MetricThresholds(**cfg.metrics),
            )
        except TypeError as error:
            raise ConfigError(f"Invalid pipeline config: {error}") from error


@dataclass(frozen=True, eq=False)
class SceneNormals:
    """Point normals of the cloud and pixel normals of the observed and clean depth."""

    cloud: NormalField
    observed: NormalField
    reference: NormalField


@dataclass(eq=False)
class RegistrationResult:
    """Everything cmd_register persists for one scene."""

    scene: str
    correspondences: CorrespondenceSet
    patch_pairs: List[PatchPair]
    losses: List[dict]
    params: Optional[GraphAttentionParams] = None
    pose: Optional[PoseEstimate] = None
    failure: Optional[str] = None

    @property
    def registered(self) -> bool:
        """True when PnP + RANSAC found a pose."""
        return self.pose is not None


def observed_depth(scene: SyntheticScene, settings: PipelineSettings) -> DepthMap:
    """Depth as the image branch sees it: the clean render with the configured corruption."""
    cfg = settings.corruption
    if cfg.gaussian_sigma_m == 0 and cfg.mask_ratio == 0:
        return scene.depth
    seed = int(np.random.SeedSequence([settings.seed, scene.seed]).generate_state(1)[0])
    return corrupt_depth(scene.depth, replace(cfg, seed=seed))


def scene_normals(scene: SyntheticScene, settings: PipelineSettings, depth: DepthMap = None) -> SceneNormals:
    """
    Normals of both modalities.

    :param scene: Scene.
    :param settings: Pipeline settings.
    :param depth: Observed depth, defaults to observed_depth(scene, settings).
    :return: SceneNormals.
    """
    depth = observed_depth(scene, settings) if depth is None else depth
    sizes = settings.normals.k_neighbors
    if settings.normals.adaptive_k:
        sizes = adaptive_neighborhood_sizes(
            scene.cloud, settings.normals.k_neighbors, settings.normals.k_sparse
        )
    return SceneNormals(
        cloud=estimate_point_normals(scene.cloud, sizes),
        observed=depth_to_normals(depth),
        reference=depth_to_normals(scene.depth),
    )


def enhanced_features(
    scene: SyntheticScene, settings: PipelineSettings, normals: SceneNormals, depth: DepthMap = None
) -> Tuple[FeatureField, FeatureField, FeatureField, FeatureField]:
    """
    Constructed features before and after local geometry enhancement.

    :param depth: Observed depth the image features are anchored with, defaults to the clean render.
    :return: (image, cloud, enhanced image, enhanced cloud).
    """
    noise = replace(settings.corruption, seed=settings.seed)
    f_img, f_cloud = synthesize_features(scene, settings.features.channels, noise, depth)
    weight, length = settings.features.normal_weight, settings.features.embed_length
    e_img = enhance_with_normals(f_img, normals.observed, weight, length)
    cloud_normals = camera_frame_normals(normals.cloud, scene.gt_transform)
    e_cloud = enhance_with_normals(f_cloud, cloud_normals, weight, length)
    return f_img, f_cloud, e_img, e_cloud


def _coarse_losses(
    coarse_scores: np.ndarray, overlap_2d: np.ndarray, overlap_3d: np.ndarray, settings: PipelineSettings
) -> float:
    distances = np.sqrt(np.maximum(2.0 - 2.0 * coarse_scores, 0.0))
    lower, upper = np.minimum(overlap_2d, overlap_3d), np.maximum(overlap_2d, overlap_3d)
    positive = lower >= settings.matching.patch_positive_overlap
    negative = upper < settings.matching.patch_negative_overlap
    return matching_loss(distances, positive, negative, settings.circle, lambda_p=lower)


def _matched_features(
    e_img: FeatureField, e_cloud: FeatureField, corrs: CorrespondenceSet, width: int
) -> Tuple[FeatureField, FeatureField]:
    flat = (corrs.pixels[:, 1] * width + corrs.pixels[:, 0]).astype(np.int64)
    return e_img.rows(flat), e_cloud.rows(corrs.point_indices)


def _fine_losses(
    scene: SyntheticScene, corrs: CorrespondenceSet, m_img: FeatureField, m_cloud: FeatureField,
    settings: PipelineSettings,
) -> float:
    if len(corrs) == 0:
        return 0.0
    scores = cosine_score_map(m_img, m_cloud).scores
    distances = np.sqrt(np.maximum(2.0 - 2.0 * scores, 0.0))
    positive, negative = label_matrices(
        corrs.pixels, corrs.point_indices, scene.depth, scene.intrinsics, scene.cloud,
        scene.gt_transform, settings.matching,
    )
    return matching_loss(distances, positive, negative, settings.circle)


def _refine(
    scene: SyntheticScene, corrs: CorrespondenceSet, m_img: FeatureField, m_cloud: FeatureField,
    settings: PipelineSettings,
) -> Tuple[np.ndarray, GraphAttentionParams, dict]:
    """Graph attention and gated fusion on both sides; returns refined pair scores."""
    params = GraphAttentionParams.initialize(m_img.channels, settings.seed, settings.graph.gate_bias)
    g_img = build_knn_graph(corrs.pixels, settings.graph.k_neighbors)
    g_cloud = build_knn_graph(scene.cloud.points[corrs.point_indices], settings.graph.k_neighbors)
    r_img = gated_fusion(m_img, light_gat_forward(g_img, m_img, params), params).normalized()
    r_cloud = gated_fusion(m_cloud, light_gat_forward(g_cloud, m_cloud, params), params).normalized()
    scores = np.clip(np.sum(r_img.vectors * r_cloud.vectors, axis=1), -1.0, 1.0)
    stats = {
        "gdc": gdc_loss(r_img, r_cloud)[0],
        "mmd_before_gdc": mmd(m_img, m_cloud),
        "mmd_after_gdc": mmd(r_img, r_cloud),
    }
    return scores, params, stats


def _record(name: str, value: Optional[float], epoch: int, weight: float) -> dict:
    return {
        "name": name,
        "value": None if value is None else float(value),
        "epoch": int(epoch),
        "weight": float(weight),
    }


def register_scene(scene: SyntheticScene, settings: PipelineSettings, name: str = "scene") -> RegistrationResult:
    """
    Register one scene: match image pixels to cloud points and recover the pose.

    NoConsensus is not raised; the result carries no pose and the failure message.

    :param scene: Scene to register.
    :param settings: Pipeline settings.
    :param name: Scene name used in logs and reports.
    :return: RegistrationResult.
    """
    width, height = scene.intrinsics.width, scene.intrinsics.height
    depth = observed_depth(scene, settings)
    normals = scene_normals(scene, settings, depth)
    f_img, f_cloud, e_img, e_cloud = enhanced_features(scene, settings, normals, depth)

    tiles = image_tiles(width, height, settings.matching.patch_grid)
    voxels = voxel_cells(scene.cloud.points, settings.matching.voxel_size)
    coarse_scores = cosine_score_map(patch_features(f_img, tiles), patch_features(f_cloud, voxels)).scores
    pairs: List[CoarseMatch] = coarse_match(ScoreMap(coarse_scores), settings.matching.top_k_coarse)
    overlap_2d, overlap_3d = overlap_matrices(
        tiles, voxels, scene.depth, scene.intrinsics, scene.cloud, scene.gt_transform,
        settings.matching.positive_radius_3d, settings.matching.positive_radius_2d,
    )
    patch_pairs = [
        PatchPair(p.img_patch, p.cloud_patch, overlap_2d[p.img_patch, p.cloud_patch],
                  overlap_3d[p.img_patch, p.cloud_patch])
        for p in pairs
    ]

    pixels = pixel_grid(width, height)
    candidates = CorrespondenceSet.concatenate(
        [
            fine_match(
                e_img.rows(tiles[p.img_patch]),
                e_cloud.rows(voxels[p.cloud_patch]),
                pixels[tiles[p.img_patch]],
                voxels[p.cloud_patch],
                settings.matching.min_fine_score,
            )
            for p in pairs
        ]
    )
    LOGGER.info("Scene %s: %s coarse pairs, %s fine candidates", name, len(pairs), len(candidates))

    # Refined scores rank conflicting candidates before one-to-one selection.
    params, stats = None, {"gdc": None, "mmd_before_gdc": None, "mmd_after_gdc": None}
    if len(candidates) >= 2:
        m_img, m_cloud = _matched_features(e_img, e_cloud, candidates, width)
        scores, params, stats = _refine(scene, candidates, m_img, m_cloud, settings)
        candidates = candidates.with_scores(scores)
    corrs = deduplicate(candidates)

    l_coarse = _coarse_losses(coarse_scores, overlap_2d, overlap_3d, settings)
    l_fine = _fine_losses(scene, corrs, *_matched_features(e_img, e_cloud, corrs, width), settings)
    try:
        l_normal = normal_consistency_loss(normals.observed, normals.reference)[0]
    except EmptyOverlap:
        LOGGER.warning("Scene %s: no jointly valid depth normals, normal loss skipped", name)
        l_normal = None

    if params is not None:
        corrs = corrs.subset(corrs.scores >= settings.matching.gdc_min_score)
        LOGGER.debug("Scene %s: graph refinement kept %s correspondences", name, len(corrs))

    warm = warmup_weight(settings.epoch, settings.warmup)
    l_match = l_coarse + l_fine
    weights = settings.weights
    total = total_loss(l_match, l_normal or 0.0, warm * (stats["gdc"] or 0.0), weights)
    losses = [
        _record("coarse_matching", l_coarse, settings.epoch, weights.lambda1),
        _record("fine_matching", l_fine, settings.epoch, weights.lambda1),
        _record("matching", l_match, settings.epoch, weights.lambda1),
        _record("normal", l_normal, settings.epoch, weights.lambda2),
        _record("gdc", stats["gdc"], settings.epoch, weights.lambda3 * warm),
        _record("total", total, settings.epoch, 1.0),
        _record("mmd_before_gdc", stats["mmd_before_gdc"], settings.epoch, 0.0),
        _record("mmd_after_gdc", stats["mmd_after_gdc"], settings.epoch, 0.0),
    ]

    result = RegistrationResult(name, corrs, patch_pairs, losses, params)
    try:
        result.pose = pnp_ransac(
            scene.cloud.points[corrs.point_indices], corrs.pixels, scene.intrinsics, settings.ransac
        )
    except NoConsensus as error:
        LOGGER.warning("Scene %s: registration failed: %s", name, error)
        result.failure = str(error)
    return result


def evaluate_registration(
    scene: SyntheticScene, result: RegistrationResult, thresholds: MetricThresholds
) -> SceneEvaluation:
    """Metrics of a registration result against the scene's ground truth."""
    return evaluate_scene(
        result.scene,
        result.correspondences,
        scene.depth,
        scene.intrinsics,
        scene.cloud,
        scene.gt_transform,
        result.pose.transform if result.registered else None,
        result.patch_pairs,
        thresholds,
    )


def register_and_evaluate(job: Tuple[str, SyntheticScene, PipelineSettings]) -> SceneEvaluation:
    """Worker entry of batch runs: register a named scene and evaluate it."""
    name, scene, settings = job
    with scene_context(name):
        return evaluate_registration(scene, register_scene(scene, settings, name), settings.thresholds)


def batch_jobs(
    names: Sequence[str], scenes: Sequence[SyntheticScene], settings: PipelineSettings
) -> List[Tuple[str, SyntheticScene, PipelineSettings]]:
    """Work items of register_and_evaluate."""
    return [(name, scene, settings) for name, scene in zip(names, scenes)]


@dataclass
class BatchSummary:
    """Mean IR, FMR and RR of a batch."""

    ir: float
    fmr: float
    rr: float
    evaluations: List[SceneEvaluation] = field(default_factory=list)

    @classmethod
    def from_evaluations(cls, evaluations: Sequence[SceneEvaluation]) -> "BatchSummary":
        """Aggregate per-scene records."""
        evaluations = list(evaluations)
        return cls(
            ir=float(np.mean([e.inlier_ratio for e in evaluations])),
            fmr=float(np.mean([e.fmr_flag for e in evaluations])),
            rr=float(np.mean([e.rr_flag for e in evaluations])),
            evaluations=evaluations,
        )
