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

"""k-NN graphs over matched keypoints, single-head graph attention and gated fusion."""

import json
import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, softmax

from src.commons import constants as const
from src.commons.exception import DimensionMismatch
from src.libs.features import FeatureField
from src.libs.geometry import knn_indices

LOGGER = logging.getLogger(const.ROOT)

_PARAM_ORDER = ("query_proj", "key_proj", "value_proj", "gate_w1", "gate_b1", "gate_w2", "gate_b2")


@dataclass(frozen=True, eq=False)
class KnnGraph:
    """Directed k-NN graph: row i of neighbor_lists holds the neighbours of node i."""

    node_positions: np.ndarray
    neighbor_lists: np.ndarray

    def __post_init__(self):
        positions = np.asarray(self.node_positions, dtype=float)
        neighbours = np.asarray(self.neighbor_lists, dtype=np.int64)
        count = positions.shape[0]
        if neighbours.shape[0] != count:
            raise DimensionMismatch(f"{neighbours.shape[0]} neighbour lists for {count} nodes")
        if neighbours.size and (neighbours.min() < 0 or neighbours.max() >= count):
            raise ValueError("Neighbour index out of range.")
        if np.any(neighbours == np.arange(count)[:, None]):
            raise ValueError("k-NN graph must not contain self-loops.")
        object.__setattr__(self, "node_positions", positions)
        object.__setattr__(self, "neighbor_lists", neighbours)

    @property
    def node_count(self) -> int:
        """Number of nodes."""
        return self.node_positions.shape[0]

    @property
    def k(self) -> int:
        """Neighbours per node."""
        return self.neighbor_lists.shape[1]


def build_knn_graph(positions: np.ndarray, k: int) -> KnnGraph:
    """
    Euclidean k-NN graph, self excluded, ties broken by smaller index.

    :param positions: (N, 2) pixels or (N, 3) points, N >= 2.
    :param k: Neighbour count >= 1, saturating at N-1.
    :return: KnnGraph.
    """
    positions = np.asarray(positions, dtype=float)
    if positions.shape[0] < 2 or k < 1:
        raise ValueError(f"Need >= 2 nodes and k >= 1, got {positions.shape[0]} nodes, k={k}")
    return KnnGraph(positions, knn_indices(positions, k))


@dataclass(frozen=True, eq=False)
class GraphAttentionParams:
    """Projections of the attention layer and the two-layer 2C -> C fusion gate."""

    query_proj: np.ndarray
    key_proj: np.ndarray
    value_proj: np.ndarray
    gate_w1: np.ndarray
    gate_b1: np.ndarray
    gate_w2: np.ndarray
    gate_b2: np.ndarray
    seed: int = 0

    def __post_init__(self):
        channels = np.asarray(self.query_proj).shape[0]
        expected = {
            "query_proj": (channels, channels),
            "key_proj": (channels, channels),
            "value_proj": (channels, channels),
            "gate_w1": (channels, 2 * channels),
            "gate_b1": (channels,),
            "gate_w2": (channels, channels),
            "gate_b2": (channels,),
        }
        for name, shape in expected.items():
            value = np.array(getattr(self, name), dtype=float)
            if value.shape != shape:
                raise DimensionMismatch(f"{name} has shape {value.shape}, expected {shape}")
            if not np.all(np.isfinite(value)):
                raise ValueError(f"{name} has non-finite entries.")
            object.__setattr__(self, name, value)

    @property
    def channels(self) -> int:
        """Channel count C."""
        return self.query_proj.shape[0]

    @classmethod
    def initialize(cls, channels: int, seed: int = 0, gate_bias: float = 0.0) -> "GraphAttentionParams":
        """Seeded uniform [-1/sqrt(C), 1/sqrt(C)] weights, gate output bias set to gate_bias."""
        rng = np.random.default_rng(seed)
        bound = 1.0 / np.sqrt(channels)

        def draw(*shape):
            return rng.uniform(-bound, bound, size=shape)

        return cls(
            query_proj=draw(channels, channels),
            key_proj=draw(channels, channels),
            value_proj=draw(channels, channels),
            gate_w1=draw(channels, 2 * channels),
            gate_b1=draw(channels),
            gate_w2=draw(channels, channels),
            gate_b2=np.full(channels, float(gate_bias)),
            seed=seed,
        )

    def to_blob(self) -> bytes:
        """Flat little-endian float32 blob in a fixed parameter order."""
        return b"".join(
            np.ascontiguousarray(getattr(self, name), dtype="<f4").tobytes() for name in _PARAM_ORDER
        )

    def sidecar(self) -> str:
        """JSON description of the blob: parameter shapes, order and seed."""
        return json.dumps(
            {
                "seed": int(self.seed),
                "dtype": "float32-le",
                "params": [
                    {"name": name, "shape": list(getattr(self, name).shape)} for name in _PARAM_ORDER
                ],
            },
            indent=2,
        )

    @classmethod
    def from_blob(cls, blob: bytes, sidecar: str) -> "GraphAttentionParams":
        """Inverse of to_blob / sidecar."""
        meta = json.loads(sidecar)
        flat = np.frombuffer(blob, dtype="<f4").astype(float)
        values, offset = {}, 0
        for entry in meta["params"]:
            size = int(np.prod(entry["shape"]))
            if offset + size > flat.size:
                raise DimensionMismatch("Parameter blob is shorter than its sidecar describes.")
            values[entry["name"]] = flat[offset: offset + size].reshape(entry["shape"])
            offset += size
        if offset != flat.size:
            raise DimensionMismatch("Parameter blob is longer than its sidecar describes.")
        return cls(seed=int(meta["seed"]), **values)


def _check_dims(graph: KnnGraph, features: FeatureField, params: GraphAttentionParams) -> None:
    if features.count != graph.node_count:
        raise DimensionMismatch(
            f"{features.count} feature rows for a graph of {graph.node_count} nodes"
        )
    if features.channels != params.channels:
        raise DimensionMismatch(
            f"Features have {features.channels} channels, parameters {params.channels}"
        )


def attention_weights(
    graph: KnnGraph, features: FeatureField, params: GraphAttentionParams
) -> np.ndarray:
    """(N, k) softmax weights over each node's neighbours."""
    _check_dims(graph, features, params)
    queries = features.vectors @ params.query_proj.T
    keys = features.vectors @ params.key_proj.T
    scores = np.einsum("nc,nkc->nk", queries, keys[graph.neighbor_lists])
    return softmax(scores / np.sqrt(params.channels), axis=1)


def light_gat_forward(
    graph: KnnGraph, features: FeatureField, params: GraphAttentionParams
) -> FeatureField:
    """
    Single-head scaled dot-product attention restricted to graph neighbours.

    :param graph: k-NN graph over the nodes.
    :param features: N x C node features.
    :param params: Attention parameters with matching C.
    :return: Aggregated N x C features, sum_j alpha_ij · V f_j.
    """
    alpha = attention_weights(graph, features, params)
    values = features.vectors @ params.value_proj.T
    aggregated = np.einsum("nk,nkc->nc", alpha, values[graph.neighbor_lists])
    return FeatureField(aggregated, features.carrier)


def fusion_gate(original: FeatureField, refined: FeatureField, params: GraphAttentionParams) -> np.ndarray:
    """Channel-wise gate g = sigmoid(W2·relu(W1·[o || r] + b1) + b2)."""
    if original.vectors.shape != refined.vectors.shape:
        raise DimensionMismatch(
            f"Original {original.vectors.shape} and refined {refined.vectors.shape} differ"
        )
    if original.channels != params.channels:
        raise DimensionMismatch(
            f"Features have {original.channels} channels, parameters {params.channels}"
        )
    joined = np.concatenate([original.vectors, refined.vectors], axis=1)
    hidden = np.maximum(joined @ params.gate_w1.T + params.gate_b1, 0.0)
    return expit(hidden @ params.gate_w2.T + params.gate_b2)


def gated_fusion(
    original: FeatureField, refined: FeatureField, params: GraphAttentionParams
) -> FeatureField:
    """
    Blend refined and original features: g·refined + (1 - g)·original.

    :param original: N x C features before attention.
    :param refined: N x C attention output.
    :param params: Gate parameters.
    :return: Fused features.
    """
    gate = fusion_gate(original, refined, params)
    fused = gate * refined.vectors + (1.0 - gate) * original.vectors
    return FeatureField(fused, original.carrier)
