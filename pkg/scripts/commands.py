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

"""Subcommands of the i2preg driver: synth, register, eval, ablate, normals and losses."""

import logging
import os
from dataclasses import replace
from typing import List, Optional, Sequence

import numpy as np

from src.commons import constants as const
from src.commons import report
from src.commons.exception import ConfigError, LengthMismatch, NoConsensus
from src.commons.logger import scene_context
from src.commons.utils import utility
from src.commons.yaml_parser import load_pipeline_config, read_sweep
from src.libs import formats
from src.libs.features import FeatureField, normalize_rows
from src.libs.geometry import NormalField
from src.libs.losses import WarmupSchedule, gdc_loss, gradient_check, normal_consistency_loss
from src.libs.metrics import MetricThresholds, SceneEvaluation, evaluate_scene
from src.libs.pipeline import (
    BatchSummary,
    PipelineSettings,
    RegistrationResult,
    SceneNormals,
    batch_jobs,
    register_and_evaluate,
    register_scene,
    scene_normals,
)
from src.libs.synth import generate_scene

LOGGER = logging.getLogger(const.ROOT)

# Config key each sweep varies; warmup sets both ends of the schedule.
SWEEP_KEYS = {
    "gaussian_sigma": ("corruption.gaussian_sigma_m", float),
    "mask_ratio": ("corruption.mask_ratio", float),
    "k": ("graph.k_neighbors", int),
}


def load_settings(config_path: Optional[str] = None, overrides: Optional[dict] = None) -> PipelineSettings:
    """Defaults <- config file <- overrides, as typed settings."""
    return PipelineSettings.from_config(load_pipeline_config(config_path, overrides))


def cmd_synth(settings: PipelineSettings, out_dir: str, count: int = 1) -> List[str]:
    """
    Generate scene bundles.

    :param settings: Pipeline settings; scene i uses seed settings.seed + i.
    :param out_dir: Bundle directory, or parent of scene_000... when count > 1.
    :param count: Number of scenes.
    :return: Bundle directories.
    """
    if count < 1:
        raise ConfigError(f"Scene count must be >= 1, got {count}")
    utility.ensure_dir(out_dir)
    dirs = [out_dir] if count == 1 else [os.path.join(out_dir, f"scene_{i:03d}") for i in range(count)]
    for index, dpath in enumerate(dirs):
        scene = generate_scene(settings.scene, settings.seed + index)
        formats.save_scene(scene, utility.ensure_dir(dpath))
    return dirs


def write_registration(result: RegistrationResult, out_dir: str) -> None:
    """Persist correspondences, patch pairs, losses, attention parameters and the pose."""
    utility.ensure_dir(out_dir)
    formats.write_correspondences(os.path.join(out_dir, const.CORRS_FILE), result.correspondences)
    formats.write_patches(os.path.join(out_dir, const.PATCHES_FILE), result.patch_pairs)
    formats.write_json(
        os.path.join(out_dir, const.LOSSES_FILE), {"scene": result.scene, "records": result.losses}
    )
    if result.params is not None:
        formats.write_attention_params(out_dir, result.params)
    pose_path = os.path.join(out_dir, const.POSE_FILE)
    if result.registered:
        formats.write_json(pose_path, result.pose.to_dict())
    elif os.path.isfile(pose_path):
        os.remove(pose_path)


def cmd_register(settings: PipelineSettings, scene_dir: str, out_dir: str) -> RegistrationResult:
    """
    Register a scene bundle and write its result directory.

    Outputs are written even when registration fails; NoConsensus is raised afterwards.

    :param settings: Pipeline settings.
    :param scene_dir: Scene bundle directory.
    :param out_dir: Result directory.
    :return: RegistrationResult.
    """
    scene = formats.load_scene(scene_dir)
    name = os.path.basename(os.path.normpath(scene_dir))
    with scene_context(name):
        result = register_scene(scene, settings, name)
        write_registration(result, out_dir)
    if not result.registered:
        raise NoConsensus(result.failure)
    LOGGER.info("Scene %s registered, results in %s", name, out_dir)
    return result


def evaluate_result_dir(scene_dir: str, result_dir: str, thresholds: MetricThresholds) -> SceneEvaluation:
    """Evaluate one result directory against its scene bundle; a missing pose is a failure."""
    scene = formats.load_scene(scene_dir)
    corrs = formats.read_correspondences(os.path.join(result_dir, const.CORRS_FILE))
    patches_path = os.path.join(result_dir, const.PATCHES_FILE)
    patches = formats.read_patches(patches_path) if os.path.isfile(patches_path) else []
    pose_path = os.path.join(result_dir, const.POSE_FILE)
    estimate = formats.read_transform(pose_path) if os.path.isfile(pose_path) else None
    return evaluate_scene(
        os.path.basename(os.path.normpath(scene_dir)),
        corrs,
        scene.depth,
        scene.intrinsics,
        scene.cloud,
        scene.gt_transform,
        estimate,
        patches,
        thresholds,
    )


def cmd_eval(
    scene_dirs: Sequence[str], result_dirs: Sequence[str], thresholds: MetricThresholds, out_path: str
) -> dict:
    """
    Metrics of registration results, per scene and aggregated.

    :param scene_dirs: Scene bundles.
    :param result_dirs: Result directories aligned with scene_dirs.
    :param thresholds: Metric thresholds.
    :param out_path: Report JSON path.
    :return: Report dict.
    """
    if not scene_dirs or len(scene_dirs) != len(result_dirs):
        raise LengthMismatch(
            f"Need aligned non-empty lists, got {len(scene_dirs)} scenes and {len(result_dirs)} results"
        )
    evaluations = [
        evaluate_result_dir(scene_dir, result_dir, thresholds)
        for scene_dir, result_dir in zip(scene_dirs, result_dirs)
    ]
    summary = report.evaluation_report(evaluations, thresholds.tau2, thresholds.tau3)
    report.write_evaluation_report(out_path, summary)
    return summary


def sweep_overrides(sweep: str, value) -> dict:
    """Config overrides of one sweep setting."""
    if sweep == "warmup":
        schedule = WarmupSchedule.parse(value)
        return {"losses.warmup_start": schedule.start_epoch, "losses.warmup_end": schedule.end_epoch}
    if sweep not in SWEEP_KEYS:
        raise ConfigError(f"Unknown sweep {sweep}, expected one of {const.SWEEPS}")
    key, kind = SWEEP_KEYS[sweep]
    try:
        return {key: kind(value)}
    except (TypeError, ValueError) as error:
        raise ConfigError(f"Bad {sweep} value {value!r}: {error}") from error


def cmd_ablate(
    sweep: str,
    out_path: str,
    values: Optional[Sequence] = None,
    batch: int = 4,
    config_path: Optional[str] = None,
    overrides: Optional[dict] = None,
    jobs: int = 1,
) -> List[dict]:
    """
    Run the pipeline over a fixed scene batch for every setting of a sweep.

    :param sweep: One of gaussian_sigma, mask_ratio, k, warmup.
    :param out_path: CSV path with columns setting, ir, fmr, rr.
    :param values: Sweep values, defaults to workload/ablation/<sweep>.yaml.
    :param batch: Scenes in the batch, seeds seed .. seed + batch - 1.
    :param config_path: Optional pipeline config.
    :param overrides: Optional dotted-key overrides applied before the sweep.
    :param jobs: Worker processes.
    :return: CSV rows.
    """
    if sweep not in const.SWEEPS:
        raise ConfigError(f"Unknown sweep {sweep}, expected one of {const.SWEEPS}")
    values = list(read_sweep(sweep) if values is None else values)
    if not values:
        raise ConfigError(f"Sweep {sweep} has no values.")
    if batch < 1:
        raise ConfigError(f"Batch size must be >= 1, got {batch}")
    overrides = dict(overrides or {})
    base = load_settings(config_path, overrides)
    names = [f"scene_{i:03d}" for i in range(batch)]
    scenes = [generate_scene(base.scene, base.seed + i) for i in range(batch)]
    rows = []
    for value in values:
        settings = load_settings(config_path, {**overrides, **sweep_overrides(sweep, value)})
        LOGGER.info("Sweep %s = %s over %s scenes", sweep, value, batch)
        summary = BatchSummary.from_evaluations(
            utility.run_parallel(register_and_evaluate, batch_jobs(names, scenes, settings), jobs)
        )
        rows.append({"setting": str(value), "ir": summary.ir, "fmr": summary.fmr, "rr": summary.rr})
    report.write_ablation_csv(out_path, rows)
    return rows


def cmd_normals(settings: PipelineSettings, scene_dir: str, out_dir: str) -> SceneNormals:
    """Write cloud point normals and observed-depth pixel normals of a scene bundle."""
    scene = formats.load_scene(scene_dir)
    normals = scene_normals(scene, settings)
    utility.ensure_dir(out_dir)
    formats.write_normals(os.path.join(out_dir, const.CLOUD_NORMALS_FILE), normals.cloud)
    formats.write_normals(os.path.join(out_dir, const.DEPTH_NORMALS_FILE), normals.observed)
    LOGGER.info(
        "Normals: %s/%s points, %s/%s pixels valid",
        int(normals.cloud.valid_mask.sum()),
        normals.cloud.valid_mask.size,
        int(normals.observed.valid_mask.sum()),
        normals.observed.valid_mask.size,
    )
    return normals


def _random_unit_rows(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    return normalize_rows(rng.normal(size=(rows, cols)))


def gradient_checks(seed: int, trials: int) -> List[dict]:
    """
    Finite-difference checks of the normal and graph consistency gradients.

    Instance sizes are drawn up to 32 x 32; probes stay tangent to the unit sphere per row.

    :param seed: Generator seed.
    :param trials: Random instances per loss.
    :return: One record per (loss, trial) with the worst relative error.
    """
    rng = np.random.default_rng(seed)
    checks = []
    for trial in range(trials):
        count = int(rng.integers(2, 33))
        mask = rng.random(count) < 0.8
        mask[0] = True
        target = NormalField(_random_unit_rows(rng, count, 3), mask)
        predicted = _random_unit_rows(rng, count, 3)
        _, grad = normal_consistency_loss(NormalField(predicted, mask), target)
        error = gradient_check(
            lambda x, m=mask, t=target: normal_consistency_loss(NormalField(x, m), t)[0],
            predicted,
            grad,
            rng,
            tangent=True,
        )
        checks.append({"loss": "normal", "trial": trial, "size": [count, 3], "rel_error": error})

        channels = int(rng.integers(2, 33))
        f_img = _random_unit_rows(rng, count, channels)
        f_cloud = FeatureField(_random_unit_rows(rng, count, channels))
        _, grad_img, _ = gdc_loss(FeatureField(f_img), f_cloud)
        error = gradient_check(
            lambda x, f=f_cloud: gdc_loss(FeatureField(x), f)[0], f_img, grad_img, rng, tangent=True
        )
        checks.append({"loss": "gdc", "trial": trial, "size": [count, channels], "rel_error": error})
    worst = max((check["rel_error"] for check in checks), default=0.0)
    LOGGER.info("Gradient checks: %s instances, worst relative error %.3e", len(checks), worst)
    return checks


def cmd_losses(
    settings: PipelineSettings,
    out_path: str,
    scene_dir: Optional[str] = None,
    epoch: Optional[int] = None,
    trials: int = 20,
) -> dict:
    """
    Loss records of one scene plus gradient checks.

    :param settings: Pipeline settings.
    :param out_path: JSON output path.
    :param scene_dir: Scene bundle, a generated scene with the configured seed if None.
    :param epoch: Epoch for the warm-up weight, the configured epoch if None.
    :param trials: Gradient check instances per loss.
    :return: Written payload.
    """
    if epoch is not None:
        settings = replace(settings, epoch=int(epoch))
    if scene_dir:
        scene, name = formats.load_scene(scene_dir), os.path.basename(os.path.normpath(scene_dir))
    else:
        scene, name = generate_scene(settings.scene, settings.seed), "generated"
    result = register_scene(scene, settings, name)
    payload = {
        "scene": name,
        "epoch": settings.epoch,
        "warmup": str(settings.warmup),
        "records": result.losses,
        "gradient_checks": gradient_checks(settings.seed, trials),
    }
    formats.write_json(out_path, payload)
    return payload
