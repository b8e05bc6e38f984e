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

"""Feature fields and the local geometry enhancement helpers."""

import logging
from dataclasses import dataclass

import numpy as np

from src.commons import constants as const
from src.commons.exception import ChannelMismatch, DimensionMismatch, NotNormalized
from src.libs.geometry import NormalField, fourier_embed

LOGGER = logging.getLogger(const.ROOT)

IMAGE = "image"
CLOUD = "cloud"


@dataclass(frozen=True, eq=False)
class FeatureField:
    """M x C finite feature matrix tagged with its carrier (image or cloud)."""

    vectors: np.ndarray
    carrier: str = IMAGE

    def __post_init__(self):
        vectors = np.array(self.vectors, dtype=float)
        if vectors.ndim != 2 or vectors.shape[1] < 1:
            raise ValueError(f"Feature matrix must be M x C with C >= 1, got {vectors.shape}")
        if not np.all(np.isfinite(vectors)):
            raise ValueError("Feature matrix has non-finite entries.")
        if self.carrier not in (IMAGE, CLOUD):
            raise ValueError(f"Unknown carrier {self.carrier}")
        vectors.setflags(write=False)
        object.__setattr__(self, "vectors", vectors)

    @property
    def count(self) -> int:
        """Number of rows M."""
        return self.vectors.shape[0]

    @property
    def channels(self) -> int:
        """Number of channels C."""
        return self.vectors.shape[1]

    def rows(self, index: np.ndarray) -> "FeatureField":
        """Sub-field of the selected rows."""
        return FeatureField(self.vectors[np.asarray(index, dtype=np.int64)], self.carrier)

    def normalized(self) -> "FeatureField":
        """Rows scaled to unit length; zero rows stay zero."""
        return FeatureField(normalize_rows(self.vectors), self.carrier)


def normalize_rows(matrix: np.ndarray) -> np.ndarray:
    """L2-normalise rows, leaving zero rows untouched."""
    matrix = np.asarray(matrix, dtype=float)
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    return np.divide(matrix, norms, out=np.zeros_like(matrix), where=norms > 0)


def check_normalized(features: FeatureField, tol: float = const.UNIT_NORM_TOL) -> None:
    """Raise NotNormalized unless every row has unit norm within tol."""
    norms = np.linalg.norm(features.vectors, axis=1)
    if norms.size and np.max(np.abs(norms - 1.0)) > tol:
        raise NotNormalized(
            f"{features.carrier} feature rows deviate from unit norm by "
            f"{np.max(np.abs(norms - 1.0)):.3e}"
        )


def add_positional_embedding(
    features: FeatureField, positions: np.ndarray, length: int
) -> FeatureField:
    """
    f_pos = f + embed(x) for rows whose Fourier position embedding matches the channel count.

    :param features: M x C field.
    :param positions: (M, D) positions with D·(2L+1) == C.
    :param length: Embedding length L.
    :return: Field with the embedding added.
    """
    positions = np.asarray(positions, dtype=float)
    if positions.ndim != 2 or positions.shape[0] != features.count:
        raise DimensionMismatch(
            f"Positions {positions.shape} do not align with {features.count} feature rows"
        )
    embedding = fourier_embed(positions, length)
    if embedding.shape[1] != features.channels:
        raise ChannelMismatch(
            f"Embedding has {embedding.shape[1]} channels, features have {features.channels}"
        )
    return FeatureField(features.vectors + embedding, features.carrier)


def enhance_with_normals(
    features: FeatureField, normals: NormalField, weight: float, length: int
) -> FeatureField:
    """
    Local geometry enhancement: append the weighted Fourier embedding of each row's normal.

    Each row becomes [f, w·e(n)/|e(n)|] re-normalised, so with both normals valid the
    cosine between two rows is (cos_f + w²·cos_e) / (1 + w²). Invalid normals contribute
    a zero block.

    :param features: M x C field.
    :param normals: Normal field with M entries (per-point or flattened per-pixel).
    :param weight: Weight of the geometry block, >= 0.
    :param length: Fourier embedding length.
    :return: M x (C + 3·(2L+1)) row-normalised field.
    """
    if weight < 0:
        raise ValueError(f"Normal weight must be >= 0, got {weight}")
    vecs, mask = normals.flat()
    if vecs.shape[0] != features.count:
        raise DimensionMismatch(
            f"{vecs.shape[0]} normals do not align with {features.count} feature rows"
        )
    block = normalize_rows(fourier_embed(vecs, length))
    block[~mask] = 0.0
    enhanced = np.concatenate([normalize_rows(features.vectors), weight * block], axis=1)
    LOGGER.debug(
        "Enhanced %s %s rows with normals (%s valid)", features.count, features.carrier, mask.sum()
    )
    return FeatureField(normalize_rows(enhanced), features.carrier)
