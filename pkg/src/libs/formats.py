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
Readers and writers of every file the tool exchanges.

Clouds are ASCII PLY (x y z vertices) or whitespace separated xyz text. Depth and normal
fields are a one-line ASCII header followed by raw little-endian float32, NaN marking
invalid entries. Tables are CSV, poses and metadata JSON.
"""

import functools
import json
import logging
import os
from typing import List, Tuple

import numpy as np
import pandas as pd

from src.commons import constants as const
from src.commons.exception import IoError
from src.libs.geometry import CameraIntrinsics, DepthMap, NormalField, PointCloud, RigidTransform
from src.libs.graph import GraphAttentionParams
from src.libs.matching import CorrespondenceSet, PatchPair
from src.libs.synth import SyntheticScene

LOGGER = logging.getLogger(const.ROOT)

CORRS_COLUMNS = ["u", "v", "point_index", "score"]
GT_CORRS_COLUMNS = ["u", "v", "point_index"]
PATCH_COLUMNS = ["img_patch_id", "cloud_patch_id", "overlap_2d", "overlap_3d"]


def io_errors(func):
    """Re-raise OS and parse errors as IoError."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except IoError:
            raise
        except (OSError, ValueError, KeyError, UnicodeDecodeError, pd.errors.ParserError) as error:
            raise IoError(f"{func.__name__}({args[0] if args else ''}): {error}") from error

    return wrapper


@io_errors
def write_json(fpath: str, data) -> None:
    """Pretty JSON with sorted keys so reruns are byte-identical."""
    with open(fpath, "w", encoding="utf-8") as obj:
        json.dump(data, obj, indent=2, sort_keys=True)
        obj.write("\n")


@io_errors
def read_json(fpath: str):
    """Parse a JSON file."""
    with open(fpath, "r", encoding="utf-8") as obj:
        return json.load(obj)


@io_errors
def write_ply(fpath: str, cloud: PointCloud) -> None:
    """ASCII PLY with x, y, z float vertices."""
    header = (
        "ply\nformat ascii 1.0\n"
        f"element vertex {len(cloud)}\n"
        "property float x\nproperty float y\nproperty float z\nend_header\n"
    )
    with open(fpath, "w", encoding="ascii") as obj:
        obj.write(header)
        np.savetxt(obj, cloud.points, fmt="%.17g")


@io_errors
def read_ply(fpath: str) -> PointCloud:
    """ASCII PLY reader; extra vertex properties are ignored."""
    with open(fpath, "r", encoding="ascii") as obj:
        if obj.readline().strip() != "ply":
            raise IoError(f"{fpath} is not a PLY file.")
        count, props, header_lines = None, [], 1
        for line in obj:
            header_lines += 1
            tokens = line.split()
            if not tokens:
                continue
            if tokens[0] == "format" and tokens[1] != "ascii":
                raise IoError(f"{fpath}: only ASCII PLY is supported, got {tokens[1]}")
            if tokens[:2] == ["element", "vertex"]:
                count = int(tokens[2])
            elif tokens[0] == "property" and count is not None:
                props.append(tokens[-1])
            elif tokens[0] == "end_header":
                break
        if count is None or not {"x", "y", "z"} <= set(props):
            raise IoError(f"{fpath}: PLY header has no x, y, z vertex element.")
        data = np.loadtxt(obj, ndmin=2, max_rows=count)
    if data.shape[0] != count:
        raise IoError(f"{fpath}: expected {count} vertices, found {data.shape[0]}")
    return PointCloud(data[:, [props.index("x"), props.index("y"), props.index("z")]])


@io_errors
def write_xyz(fpath: str, cloud: PointCloud) -> None:
    """Whitespace separated x y z lines."""
    np.savetxt(fpath, cloud.points, fmt="%.17g")


@io_errors
def read_xyz(fpath: str) -> PointCloud:
    """Read whitespace separated x y z lines."""
    return PointCloud(np.loadtxt(fpath, ndmin=2)[:, :3])


def read_cloud(fpath: str) -> PointCloud:
    """Dispatch on the extension: .ply or xyz text."""
    return read_ply(fpath) if fpath.lower().endswith(".ply") else read_xyz(fpath)


def _write_raw(fpath: str, tag: str, width: int, height: int, values: np.ndarray) -> None:
    with open(fpath, "wb") as obj:
        obj.write(f"{tag} {width} {height}\n".encode("ascii"))
        obj.write(np.ascontiguousarray(values, dtype="<f4").tobytes())


def _read_raw(fpath: str, tag: str, per_element: int) -> Tuple[int, int, np.ndarray]:
    with open(fpath, "rb") as obj:
        header = obj.readline().decode("ascii").split()
        if len(header) != 3 or header[0] != tag:
            raise IoError(f"{fpath}: expected header '{tag} <width> <height>', got {header}")
        width, height = int(header[1]), int(header[2])
        values = np.frombuffer(obj.read(), dtype="<f4").astype(float)
    if values.size != width * height * per_element:
        raise IoError(f"{fpath}: {values.size} floats for a {width}x{height}x{per_element} field")
    return width, height, values


@io_errors
def write_depth(fpath: str, depth: DepthMap) -> None:
    """DEPTH header plus float32 values, NaN where invalid."""
    values = np.where(depth.valid_mask, depth.values, np.nan)
    _write_raw(fpath, "DEPTH", depth.width, depth.height, values)


@io_errors
def read_depth(fpath: str) -> DepthMap:
    """Inverse of write_depth."""
    width, height, values = _read_raw(fpath, "DEPTH", 1)
    return DepthMap.from_array(values.reshape(height, width))


@io_errors
def write_normals(fpath: str, normals: NormalField) -> None:
    """NORMAL header (width height, or count 1 for per-point fields) plus float32 triples."""
    if normals.valid_mask.ndim == 2:
        height, width = normals.valid_mask.shape
    else:
        width, height = normals.valid_mask.shape[0], 1
    values = np.where(normals.valid_mask[..., None], normals.normals, np.nan)
    _write_raw(fpath, "NORMAL", width, height, values)


@io_errors
def read_normals(fpath: str) -> NormalField:
    """Inverse of write_normals; per-point fields come back as (N, 3)."""
    width, height, values = _read_raw(fpath, "NORMAL", 3)
    shape = (width, 3) if height == 1 else (height, width, 3)
    values = values.reshape(shape)
    mask = np.all(np.isfinite(values), axis=-1)
    values = np.where(mask[..., None], values, 0.0)
    # float32 storage: restore unit length exactly.
    norms = np.linalg.norm(values, axis=-1, keepdims=True)
    values = np.divide(values, norms, out=np.zeros_like(values), where=norms > 0)
    return NormalField(values, mask)


@io_errors
def write_correspondences(fpath: str, corrs: CorrespondenceSet) -> None:
    """CSV u,v,point_index,score."""
    frame = pd.DataFrame(
        {
            "u": corrs.pixels[:, 0],
            "v": corrs.pixels[:, 1],
            "point_index": corrs.point_indices,
            "score": corrs.scores,
        },
        columns=CORRS_COLUMNS,
    )
    frame.to_csv(fpath, index=False, float_format="%.10g")


@io_errors
def read_correspondences(fpath: str) -> CorrespondenceSet:
    """Inverse of write_correspondences."""
    frame = pd.read_csv(fpath)
    missing = set(CORRS_COLUMNS) - set(frame.columns)
    if missing:
        raise IoError(f"{fpath}: missing columns {sorted(missing)}")
    return CorrespondenceSet(
        frame[["u", "v"]].to_numpy(dtype=float),
        frame["point_index"].to_numpy(dtype=np.int64),
        frame["score"].to_numpy(dtype=float),
    )


@io_errors
def write_gt_correspondences(fpath: str, pixels: np.ndarray, indices: np.ndarray) -> None:
    """CSV u,v,point_index of ground-truth pairs."""
    frame = pd.DataFrame(
        {"u": pixels[:, 0], "v": pixels[:, 1], "point_index": indices}, columns=GT_CORRS_COLUMNS
    )
    frame.to_csv(fpath, index=False)


@io_errors
def read_gt_correspondences(fpath: str) -> Tuple[np.ndarray, np.ndarray]:
    """Inverse of write_gt_correspondences."""
    frame = pd.read_csv(fpath)
    missing = set(GT_CORRS_COLUMNS) - set(frame.columns)
    if missing:
        raise IoError(f"{fpath}: missing columns {sorted(missing)}")
    return frame[["u", "v"]].to_numpy(dtype=np.int64), frame["point_index"].to_numpy(dtype=np.int64)


@io_errors
def write_patches(fpath: str, pairs: List[PatchPair]) -> None:
    """CSV of coarse patch pairs with their overlaps."""
    frame = pd.DataFrame(
        [[p.img_patch_id, p.cloud_patch_id, p.overlap_2d, p.overlap_3d] for p in pairs],
        columns=PATCH_COLUMNS,
    )
    frame.to_csv(fpath, index=False, float_format="%.10g")


@io_errors
def read_patches(fpath: str) -> List[PatchPair]:
    """Inverse of write_patches."""
    frame = pd.read_csv(fpath)
    return [
        PatchPair(int(row.img_patch_id), int(row.cloud_patch_id), float(row.overlap_2d), float(row.overlap_3d))
        for row in frame.itertuples(index=False)
    ]


def read_transform(fpath: str) -> RigidTransform:
    """Rigid transform from a pose JSON (rotation row-major, translation)."""
    try:
        return RigidTransform.from_dict(read_json(fpath))
    except (KeyError, ValueError) as error:
        raise IoError(f"{fpath}: not a valid pose: {error}") from error


@io_errors
def write_attention_params(dpath: str, params: GraphAttentionParams) -> None:
    """Blob plus JSON sidecar of the attention parameters."""
    with open(os.path.join(dpath, const.GDC_PARAMS_FILE), "wb") as obj:
        obj.write(params.to_blob())
    with open(os.path.join(dpath, const.GDC_PARAMS_SIDECAR), "w", encoding="utf-8") as obj:
        obj.write(params.sidecar())


@io_errors
def read_attention_params(dpath: str) -> GraphAttentionParams:
    """Inverse of write_attention_params."""
    with open(os.path.join(dpath, const.GDC_PARAMS_FILE), "rb") as obj:
        blob = obj.read()
    with open(os.path.join(dpath, const.GDC_PARAMS_SIDECAR), "r", encoding="utf-8") as obj:
        sidecar = obj.read()
    return GraphAttentionParams.from_blob(blob, sidecar)


def save_scene(scene: SyntheticScene, dpath: str) -> None:
    """
    Persist a scene bundle directory.

    :param scene: Scene to save.
    :param dpath: Existing writable directory.
    """
    write_ply(os.path.join(dpath, const.CLOUD_FILE), scene.cloud)
    write_depth(os.path.join(dpath, const.DEPTH_FILE), scene.depth)
    write_json(os.path.join(dpath, const.INTRINSICS_FILE), scene.intrinsics.to_dict())
    write_json(os.path.join(dpath, const.GT_POSE_FILE), scene.gt_transform.to_dict())
    write_gt_correspondences(
        os.path.join(dpath, const.GT_CORRS_FILE), scene.gt_pixels, scene.gt_point_indices
    )
    write_json(os.path.join(dpath, const.SCENE_META_FILE), {"seed": int(scene.seed)})
    LOGGER.info("Scene bundle written to %s", dpath)


def load_scene(dpath: str) -> SyntheticScene:
    """
    Load a scene bundle directory.

    :param dpath: Bundle directory.
    :return: SyntheticScene.
    """
    if not os.path.isdir(dpath):
        raise IoError(f"Scene bundle {dpath} does not exist.")
    meta_path = os.path.join(dpath, const.SCENE_META_FILE)
    seed = int(read_json(meta_path).get("seed", 0)) if os.path.isfile(meta_path) else 0
    try:
        intrinsics = CameraIntrinsics.from_dict(read_json(os.path.join(dpath, const.INTRINSICS_FILE)))
    except (KeyError, ValueError) as error:
        raise IoError(f"{dpath}: invalid intrinsics: {error}") from error
    pixels, indices = read_gt_correspondences(os.path.join(dpath, const.GT_CORRS_FILE))
    return SyntheticScene(
        cloud=read_cloud(os.path.join(dpath, const.CLOUD_FILE)),
        depth=read_depth(os.path.join(dpath, const.DEPTH_FILE)),
        intrinsics=intrinsics,
        gt_transform=read_transform(os.path.join(dpath, const.GT_POSE_FILE)),
        gt_pixels=pixels.reshape(-1, 2),
        gt_point_indices=indices,
        seed=seed,
    )
